#pragma once

#include <filesystem>

#include "ddmech/nn/index.hpp"

namespace ddm {

// 12-d tree with median splitting on the maximum-spread dimension and
// bucketed leaves. Backtracking visits a sibling subtree when the split-plane
// distance d_b satisfies d_b <= f_d * d_c (compared as squares); f_d = 1 is
// the exact branch-and-bound search, f_d = 0 a single root-to-leaf descent.
class KdTreeIndex final : public NnIndex {
public:
    KdTreeIndex(const MaterialDataset& data, std::size_t leaf_size = 16);

    QueryResult query(const Mapped12& q, const QueryParams& params) const override;
    std::vector<Neighbor> knn(const Mapped12& q, std::size_t k, double f_d) const override;

    std::size_t leaf_size() const { return leaf_size_; }
    std::size_t node_count() const { return nodes_.size(); }
    int depth() const;

    // Visits every leaf once; used by structural tests.
    template <class F>
    void for_each_leaf(F&& f) const {
        for (const Node& n : nodes_)
            if (n.is_leaf()) f(std::span<const std::size_t>(ids_.data() + n.begin, n.end - n.begin));
    }

    void save(const std::filesystem::path& path) const;
    static KdTreeIndex load(const std::filesystem::path& path, const MaterialDataset& data);

private:
    struct Node {
        int split_dim = -1;
        double split_coord = 0.0;
        std::int32_t low = -1, high = -1;     // children, or -1 for leaf
        std::uint32_t begin = 0, end = 0;     // leaf bucket range in ids_
        bool is_leaf() const { return low < 0; }
    };

    KdTreeIndex(const MaterialDataset& data, std::size_t leaf_size, std::vector<Node> nodes,
                std::vector<std::size_t> ids)
        : NnIndex(data), leaf_size_(leaf_size), nodes_(std::move(nodes)), ids_(std::move(ids)) {}

    std::int32_t build(std::size_t begin, std::size_t end);

    struct SearchState;
    void search(std::int32_t node, const Mapped12& q, double fd2, SearchState& st) const;
    void search_knn(std::int32_t node, const Mapped12& q, double fd2, std::size_t k,
                    std::vector<Neighbor>& heap, std::uint64_t& comparisons) const;

    std::size_t leaf_size_;
    std::vector<Node> nodes_;
    std::vector<std::size_t> ids_;
};

} // namespace ddm
