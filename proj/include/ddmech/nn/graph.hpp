#pragma once

#include <filesystem>

#include "ddmech/nn/index.hpp"

namespace ddm {

// Directed k-NN graph with greedy hill-climbing search. Each node stores its
// own k nearest neighbors (by mapped distance, no symmetrization); a query
// starts from the warm-start id when given, otherwise from a deterministic
// query-derived start, and repeatedly moves to the best improving neighbor.
// The step bound f_s caps the number of node changes.
class KnnGraphIndex final : public NnIndex {
public:
    // Adjacency from per-point k-NN queries against the builder index
    // (self excluded). builder_fd < 1 yields an approximate graph.
    KnnGraphIndex(const MaterialDataset& data, std::size_t k, const NnIndex& builder,
                  double builder_fd, std::uint64_t seed = 0, unsigned threads = 1);

    QueryResult query(const Mapped12& q, const QueryParams& params) const override;

    // Greedy search has no natural k-NN extension here; build graphs from a
    // tree or linear builder instead.
    std::vector<Neighbor> knn(const Mapped12& q, std::size_t k, double f_d) const override;

    std::size_t neighbor_count() const { return k_; }
    std::span<const std::size_t> neighbors(std::size_t id) const {
        return {adjacency_.data() + k_ * id, k_};
    }

    void save(const std::filesystem::path& path) const;
    static KnnGraphIndex load(const std::filesystem::path& path, const MaterialDataset& data);

private:
    KnnGraphIndex(const MaterialDataset& data, std::size_t k, double builder_fd, std::uint64_t seed,
                  std::vector<std::size_t> adjacency)
        : NnIndex(data), k_(k), builder_fd_(builder_fd), seed_(seed), adjacency_(std::move(adjacency)) {}

    std::size_t cold_start(const Mapped12& q) const;

    std::size_t k_;
    double builder_fd_ = 1.0;
    std::uint64_t seed_ = 0;
    std::vector<std::size_t> adjacency_; // N * k, each row sorted by distance
};

} // namespace ddm
