#pragma once

#include <filesystem>

#include "ddmech/nn/index.hpp"

namespace ddm {

// Hierarchical k-means tree: recursive Lloyd clustering (k-means++ seeding)
// until buckets hold at most k^2 points. Each node stores the cluster mean
// and the largest distance d_r from the mean to any contained point; during
// backtracking a non-chosen cluster is evaluated iff
//   d(center, q) - f_d * d_r < d_c,
// so f_d = 1 is exact (triangle inequality) and f_d = 0 does no backtracking.
class KmeansTreeIndex final : public NnIndex {
public:
    KmeansTreeIndex(const MaterialDataset& data, int k = 4, std::uint64_t seed = 0);

    QueryResult query(const Mapped12& q, const QueryParams& params) const override;
    std::vector<Neighbor> knn(const Mapped12& q, std::size_t k, double f_d) const override;

    int branching() const { return k_; }
    std::size_t bucket_capacity() const { return static_cast<std::size_t>(k_) * k_; }

    struct Node {
        Mapped12 center = Mapped12::Zero();
        double radius = 0.0;
        std::int32_t first_child = -1;
        std::int32_t n_children = 0;
        std::int32_t child_list = -1;     // index into the child-id lists
        std::uint32_t begin = 0, end = 0; // subtree id range in ids_
        bool is_leaf() const { return first_child < 0; }
    };

    const std::vector<Node>& nodes() const { return nodes_; }
    std::span<const std::size_t> leaf_ids(const Node& n) const {
        return {ids_.data() + n.begin, n.end - n.begin};
    }
    // Ids contained in an arbitrary node's subtree occupy [subtree_begin, subtree_end).
    std::span<const std::size_t> subtree_ids(std::int32_t node) const;
    std::span<const std::int32_t> children(const Node& n) const {
        if (n.is_leaf()) return {};
        return {child_lists_[n.child_list].data(), child_lists_[n.child_list].size()};
    }

    void save(const std::filesystem::path& path) const;
    static KmeansTreeIndex load(const std::filesystem::path& path, const MaterialDataset& data);

private:
    KmeansTreeIndex(const MaterialDataset& data, int k, std::uint64_t seed, std::vector<Node> nodes,
                    std::vector<std::size_t> ids)
        : NnIndex(data), k_(k), seed_(seed), nodes_(std::move(nodes)), ids_(std::move(ids)) {}

    std::int32_t build(std::size_t begin, std::size_t end, std::uint64_t& node_counter);
    void set_center_radius(Node& n, std::size_t begin, std::size_t end) const;

    struct SearchState;
    void scan_leaf(const Node& n, const Mapped12& q, SearchState& st) const;
    void descend(const Mapped12& q, SearchState& st) const;
    void best_first(const Mapped12& q, double f_d, SearchState& st) const;
    void knn_descend(const Mapped12& q, std::size_t k, std::vector<Neighbor>& heap,
                     std::uint64_t& comparisons) const;
    void knn_best_first(const Mapped12& q, double f_d, std::size_t k, std::vector<Neighbor>& heap,
                        std::uint64_t& comparisons) const;

    int k_;
    std::uint64_t seed_;
    std::vector<Node> nodes_;
    std::vector<std::size_t> ids_;
    std::vector<std::vector<std::int32_t>> child_lists_;
};

} // namespace ddm
