#include <algorithm>

#include "ddmech/nn/index.hpp"

namespace ddm {

QueryResult LinearIndex::query(const Mapped12& q, const QueryParams&) const {
    QueryResult res;
    double second = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < data_.size(); ++i) {
        double d = counted_dist_sq(q.data(), data_.mapped_coords(i), res.comparisons);
        if (d < res.best_dist_sq) {
            second = res.best_dist_sq;
            res.best_dist_sq = d;
            res.best_id = i;
        } else if (d < second) {
            second = d;
        }
    }
    if (data_.size() > 1) {
        res.second_dist_sq = second;
        res.second_is_exact = true;
    }
    return res;
}

std::vector<Neighbor> LinearIndex::knn(const Mapped12& q, std::size_t k, double) const {
    std::vector<Neighbor> all(data_.size());
    std::uint64_t comparisons = 0;
    for (std::size_t i = 0; i < data_.size(); ++i)
        all[i] = {i, counted_dist_sq(q.data(), data_.mapped_coords(i), comparisons)};
    k = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                      [](const Neighbor& a, const Neighbor& b) {
                          return a.dist_sq != b.dist_sq ? a.dist_sq < b.dist_sq : a.id < b.id;
                      });
    all.resize(k);
    return all;
}

bool should_skip(const QueryResult& prev, const Mapped12& q_prev, const Mapped12& q_now,
                 bool as_printed) {
    if (!prev.second_dist_sq) return false;
    double d1 = std::sqrt(prev.best_dist_sq);
    double d2 = std::sqrt(*prev.second_dist_sq);
    double delta = as_printed ? 0.5 * (d1 - d2) : 0.5 * (d2 - d1);
    return (q_prev - q_now).norm() < delta;
}

} // namespace ddm
