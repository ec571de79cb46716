#include "ddmech/nn/kdtree.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

namespace ddm {

KdTreeIndex::KdTreeIndex(const MaterialDataset& data, std::size_t leaf_size)
    : NnIndex(data), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    ids_.resize(data.size());
    std::iota(ids_.begin(), ids_.end(), std::size_t{0});
    build(0, ids_.size());
    memory_bytes = nodes_.size() * sizeof(Node) + ids_.size() * sizeof(std::size_t);
}

std::int32_t KdTreeIndex::build(std::size_t begin, std::size_t end) {
    std::int32_t me = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();

    if (end - begin <= leaf_size_) {
        nodes_[me].begin = static_cast<std::uint32_t>(begin);
        nodes_[me].end = static_cast<std::uint32_t>(end);
        std::sort(ids_.begin() + begin, ids_.begin() + end); // deterministic layout
        return me;
    }

    // Dimensions ordered by decreasing spread over the subset.
    std::array<std::pair<double, int>, 12> spread;
    for (int d = 0; d < 12; ++d) {
        double lo = data_.mapped_coords(ids_[begin])[d], hi = lo;
        for (std::size_t i = begin + 1; i < end; ++i) {
            double v = data_.mapped_coords(ids_[i])[d];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        spread[d] = {hi - lo, d};
    }
    std::sort(spread.begin(), spread.end(), [](auto& a, auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });

    std::vector<double> coords(end - begin);
    for (auto [sp, dim] : spread) {
        for (std::size_t i = begin; i < end; ++i) coords[i - begin] = data_.mapped_coords(ids_[i])[dim];
        // Lower median of the coordinates in this dimension.
        std::size_t mid = (coords.size() - 1) / 2;
        std::nth_element(coords.begin(), coords.begin() + static_cast<std::ptrdiff_t>(mid), coords.end());
        double median = coords[mid];

        // Ties go to the low child; fall back to ties-high if that leaves a
        // side empty, then to the next dimension.
        for (int pass = 0; pass < 2; ++pass) {
            auto split_it = std::stable_partition(
                ids_.begin() + begin, ids_.begin() + end, [&, pass](std::size_t id) {
                    double v = data_.mapped_coords(id)[dim];
                    return pass == 0 ? v <= median : v < median;
                });
            std::size_t nl = static_cast<std::size_t>(split_it - (ids_.begin() + begin));
            if (nl == 0 || nl == end - begin) continue;
            nodes_[me].split_dim = dim;
            nodes_[me].split_coord = median;
            std::int32_t low = build(begin, begin + nl);
            std::int32_t high = build(begin + nl, end);
            nodes_[me].low = low;
            nodes_[me].high = high;
            return me;
        }
    }

    // Every coordinate equal in every dimension: forced balanced index split.
    std::size_t mid = begin + (end - begin) / 2;
    nodes_[me].split_dim = 0;
    nodes_[me].split_coord = data_.mapped_coords(ids_[begin])[0];
    std::int32_t low = build(begin, mid);
    std::int32_t high = build(mid, end);
    nodes_[me].low = low;
    nodes_[me].high = high;
    return me;
}

int KdTreeIndex::depth() const {
    std::vector<std::pair<std::int32_t, int>> stack{{0, 1}};
    int best = 0;
    while (!stack.empty()) {
        auto [n, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        if (!nodes_[n].is_leaf()) {
            stack.push_back({nodes_[n].low, d + 1});
            stack.push_back({nodes_[n].high, d + 1});
        }
    }
    return best;
}

struct KdTreeIndex::SearchState {
    std::size_t best_id = 0;
    double best = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    std::uint64_t comparisons = 0;
};

void KdTreeIndex::search(std::int32_t node, const Mapped12& q, double fd2, SearchState& st) const {
    const Node& n = nodes_[node];
    if (n.is_leaf()) {
        for (std::uint32_t i = n.begin; i < n.end; ++i) {
            std::size_t id = ids_[i];
            double d = counted_dist_sq(q.data(), data_.mapped_coords(id), st.comparisons);
            if (d < st.best || (d == st.best && id < st.best_id)) {
                st.second = std::min(st.second, st.best);
                st.best = d;
                st.best_id = id;
            } else if (d < st.second) {
                st.second = d;
            }
        }
        return;
    }
    double diff = q[n.split_dim] - n.split_coord;
    std::int32_t near = diff <= 0.0 ? n.low : n.high;
    std::int32_t far = diff <= 0.0 ? n.high : n.low;
    search(near, q, fd2, st);
    if (diff * diff <= fd2 * st.best) search(far, q, fd2, st);
}

QueryResult KdTreeIndex::query(const Mapped12& q, const QueryParams& params) const {
    SearchState st;
    search(0, q, params.f_d * params.f_d, st);
    QueryResult res;
    res.best_id = st.best_id;
    res.best_dist_sq = st.best;
    res.comparisons = st.comparisons;
    if (st.second < std::numeric_limits<double>::infinity()) {
        res.second_dist_sq = st.second;
        res.second_is_exact = false; // runner-up only over scanned leaves
    }
    return res;
}

namespace {
bool heap_cmp(const Neighbor& a, const Neighbor& b) {
    return a.dist_sq != b.dist_sq ? a.dist_sq < b.dist_sq : a.id < b.id;
}
} // namespace

void KdTreeIndex::search_knn(std::int32_t node, const Mapped12& q, double fd2, std::size_t k,
                             std::vector<Neighbor>& heap, std::uint64_t& comparisons) const {
    const Node& n = nodes_[node];
    if (n.is_leaf()) {
        for (std::uint32_t i = n.begin; i < n.end; ++i) {
            std::size_t id = ids_[i];
            double d = counted_dist_sq(q.data(), data_.mapped_coords(id), comparisons);
            Neighbor cand{id, d};
            if (heap.size() < k) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end(), heap_cmp);
            } else if (heap_cmp(cand, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), heap_cmp);
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end(), heap_cmp);
            }
        }
        return;
    }
    double diff = q[n.split_dim] - n.split_coord;
    std::int32_t near = diff <= 0.0 ? n.low : n.high;
    std::int32_t far = diff <= 0.0 ? n.high : n.low;
    search_knn(near, q, fd2, k, heap, comparisons);
    double bound = heap.size() < k ? std::numeric_limits<double>::infinity() : heap.front().dist_sq;
    if (bound == std::numeric_limits<double>::infinity() ? fd2 > 0.0 : diff * diff <= fd2 * bound)
        search_knn(far, q, fd2, k, heap, comparisons);
}

std::vector<Neighbor> KdTreeIndex::knn(const Mapped12& q, std::size_t k, double f_d) const {
    std::vector<Neighbor> heap;
    std::uint64_t comparisons = 0;
    search_knn(0, q, f_d * f_d, std::min(k, data_.size()), heap, comparisons);
    std::sort(heap.begin(), heap.end(), heap_cmp);
    return heap;
}

namespace {
constexpr char kKdMagic[8] = {'D', 'D', 'K', 'D', 'T', 'R', 'E', 'E'};
constexpr std::uint32_t kKdVersion = 1;
} // namespace

void KdTreeIndex::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os.write(kKdMagic, 8);
    std::uint32_t ver = kKdVersion;
    std::uint64_t nn = nodes_.size(), ni = ids_.size(), ls = leaf_size_;
    os.write(reinterpret_cast<const char*>(&ver), 4);
    os.write(reinterpret_cast<const char*>(&nn), 8);
    os.write(reinterpret_cast<const char*>(&ni), 8);
    os.write(reinterpret_cast<const char*>(&ls), 8);
    // Member-wise copy into zeroed storage so struct padding never leaks
    // nondeterministic bytes into the file.
    std::vector<Node> clean(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        std::memset(&clean[i], 0, sizeof(Node));
        clean[i].split_dim = nodes_[i].split_dim;
        clean[i].split_coord = nodes_[i].split_coord;
        clean[i].low = nodes_[i].low;
        clean[i].high = nodes_[i].high;
        clean[i].begin = nodes_[i].begin;
        clean[i].end = nodes_[i].end;
    }
    os.write(reinterpret_cast<const char*>(clean.data()),
             static_cast<std::streamsize>(clean.size() * sizeof(Node)));
    os.write(reinterpret_cast<const char*>(ids_.data()),
             static_cast<std::streamsize>(ids_.size() * sizeof(std::size_t)));
}

KdTreeIndex KdTreeIndex::load(const std::filesystem::path& path, const MaterialDataset& data) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kKdMagic, 8) != 0)
        throw std::runtime_error("bad kd-tree index file: " + path.string());
    std::uint32_t ver = 0;
    std::uint64_t nn = 0, ni = 0, ls = 0;
    is.read(reinterpret_cast<char*>(&ver), 4);
    is.read(reinterpret_cast<char*>(&nn), 8);
    is.read(reinterpret_cast<char*>(&ni), 8);
    is.read(reinterpret_cast<char*>(&ls), 8);
    if (!is || ver != kKdVersion || ni != data.size())
        throw std::runtime_error("kd-tree index header mismatch: " + path.string());
    std::vector<Node> nodes(nn);
    std::vector<std::size_t> ids(ni);
    is.read(reinterpret_cast<char*>(nodes.data()), static_cast<std::streamsize>(nn * sizeof(Node)));
    is.read(reinterpret_cast<char*>(ids.data()), static_cast<std::streamsize>(ni * sizeof(std::size_t)));
    if (!is) throw std::runtime_error("truncated kd-tree index: " + path.string());
    return KdTreeIndex(data, ls, std::move(nodes), std::move(ids));
}

} // namespace ddm
