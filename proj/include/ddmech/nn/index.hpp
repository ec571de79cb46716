#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ddmech/dataset.hpp"
#include "ddmech/phase.hpp"

namespace ddm {

struct EmptyDatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct QueryParams {
    double f_d = 1.0;                          // pruning relaxation in [0,1]
    std::optional<std::uint64_t> f_s;          // graph step bound (>= 1)
    std::optional<std::size_t> warm_start;     // data-point id
    std::optional<double> skip_delta;          // moving-query threshold
};

struct QueryResult {
    std::size_t best_id = 0;
    double best_dist_sq = std::numeric_limits<double>::infinity();
    std::optional<double> second_dist_sq;
    bool second_is_exact = false;
    std::uint64_t comparisons = 0;
    std::uint64_t hops = 0;
    bool skipped = false;
};

struct Neighbor {
    std::size_t id;
    double dist_sq;
};

// Canonical distance-evaluation choke point; every comparison statistic in
// every backend goes through here.
inline double counted_dist_sq(const double* a, const double* b, std::uint64_t& comparisons) {
    ++comparisons;
    return (Eigen::Map<const Mapped12>(a) - Eigen::Map<const Mapped12>(b)).squaredNorm();
}

// Immutable 1-NN search structure over a metric-bound dataset. Queries are
// concurrency-safe; statistics are returned per query, never accumulated.
class NnIndex {
public:
    explicit NnIndex(const MaterialDataset& data) : data_(data) {
        if (data.size() == 0) throw EmptyDatasetError("index over empty dataset");
        if (!data.metric_bound())
            throw std::invalid_argument("dataset must have a bound metric before indexing");
    }
    virtual ~NnIndex() = default;

    const MaterialDataset& dataset() const { return data_; }

    virtual QueryResult query(const Mapped12& q, const QueryParams& params) const = 0;

    // k nearest neighbors (used for graph construction); candidates sorted by
    // distance, ties by smallest id. Approximate when f_d < 1.
    virtual std::vector<Neighbor> knn(const Mapped12& q, std::size_t k, double f_d) const = 0;

    double build_seconds = 0.0;
    std::size_t memory_bytes = 0;

protected:
    const MaterialDataset& data_;
};

// Exact linear-scan oracle: 1-NN and 2-NN, comparisons = N, smallest index
// wins ties.
class LinearIndex final : public NnIndex {
public:
    explicit LinearIndex(const MaterialDataset& data) : NnIndex(data) {}
    QueryResult query(const Mapped12& q, const QueryParams& params) const override;
    std::vector<Neighbor> knn(const Mapped12& q, std::size_t k, double f_d) const override;
};

// Moving-query skip rule: with d1 <= d2 the previous closest/second-closest
// distances, the previous best stays an exact nearest neighbor whenever the
// query moved less than delta = (d2 - d1)/2. as_printed selects the
// reversed-sign variant (d1 - d2)/2, which never fires and exists only for
// comparison runs.
bool should_skip(const QueryResult& prev, const Mapped12& q_prev, const Mapped12& q_now,
                 bool as_printed = false);

} // namespace ddm
