#include "ddmech/nn/kmeans.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <queue>

#include "ddmech/rng.hpp"

namespace ddm {

KmeansTreeIndex::KmeansTreeIndex(const MaterialDataset& data, int k, std::uint64_t seed)
    : NnIndex(data), k_(k), seed_(seed) {
    if (k_ < 2) throw std::invalid_argument("k-means tree: k must be >= 2");
    ids_.resize(data.size());
    std::iota(ids_.begin(), ids_.end(), std::size_t{0});
    std::uint64_t node_counter = 0;
    build(0, ids_.size(), node_counter);
    memory_bytes = nodes_.size() * sizeof(Node) + ids_.size() * sizeof(std::size_t);
}

void KmeansTreeIndex::set_center_radius(Node& n, std::size_t begin, std::size_t end) const {
    Mapped12 c = Mapped12::Zero();
    for (std::size_t i = begin; i < end; ++i) c += data_.mapped_at(ids_[i]);
    c /= static_cast<double>(end - begin);
    double r2 = 0.0;
    for (std::size_t i = begin; i < end; ++i)
        r2 = std::max(r2, (data_.mapped_at(ids_[i]) - c).squaredNorm());
    n.center = c;
    n.radius = std::sqrt(r2);
}

std::int32_t KmeansTreeIndex::build(std::size_t begin, std::size_t end, std::uint64_t& node_counter) {
    std::int32_t me = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    nodes_[me].begin = static_cast<std::uint32_t>(begin);
    nodes_[me].end = static_cast<std::uint32_t>(end);
    set_center_radius(nodes_[me], begin, end);

    const std::size_t n = end - begin;
    if (n <= bucket_capacity()) {
        std::sort(ids_.begin() + begin, ids_.begin() + end);
        return me;
    }

    const int k = k_;
    Rng rng = Rng::substream(seed_, node_counter++);

    // k-means++ seeding on the subset.
    std::vector<Mapped12> centers;
    centers.reserve(k);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    centers.push_back(data_.mapped_at(ids_[begin + rng.next_below(n)]));
    while (centers.size() < static_cast<std::size_t>(k)) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = (data_.mapped_at(ids_[begin + i]) - centers.back()).squaredNorm();
            d2[i] = std::min(d2[i], d);
            sum += d2[i];
        }
        std::size_t pick = 0;
        if (sum > 0.0) {
            double target = rng.next_double() * sum, acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.next_below(n); // duplicate-heavy subset
        }
        centers.push_back(data_.mapped_at(ids_[begin + pick]));
    }

    // Lloyd iterations, capped; ties in assignment go to the lowest center.
    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < 25; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            Mapped12 p = data_.mapped_at(ids_[begin + i]);
            int best = 0;
            double bd = (p - centers[0]).squaredNorm();
            for (int c = 1; c < k; ++c) {
                double d = (p - centers[c]).squaredNorm();
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            assign[i] = best;
        }

        std::vector<Mapped12> sums(k, Mapped12::Zero());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums[assign[i]] += data_.mapped_at(ids_[begin + i]);
            ++counts[assign[i]];
        }

        // Empty-cluster repair: re-seed at the point farthest from its center.
        for (int c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far_i = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                double d = (data_.mapped_at(ids_[begin + i]) - centers[assign[i]]).squaredNorm();
                if (d > far_d && counts[assign[i]] > 1) {
                    far_d = d;
                    far_i = i;
                }
            }
            --counts[assign[far_i]];
            sums[assign[far_i]] -= data_.mapped_at(ids_[begin + far_i]);
            assign[far_i] = c;
            counts[c] = 1;
            sums[c] = data_.mapped_at(ids_[begin + far_i]);
        }

        double move = 0.0;
        for (int c = 0; c < k; ++c) {
            Mapped12 nc = sums[c] / static_cast<double>(counts[c]);
            move = std::max(move, (nc - centers[c]).norm() / (1.0 + nc.norm()));
            centers[c] = nc;
        }
        if (move < 1e-6) break;
    }

    // Stable partition of the id range into the k clusters.
    std::vector<std::size_t> scratch(n);
    std::vector<std::size_t> offsets(k + 1, 0);
    for (std::size_t i = 0; i < n; ++i) ++offsets[assign[i] + 1];
    for (int c = 0; c < k; ++c) offsets[c + 1] += offsets[c];
    {
        std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
        for (std::size_t i = 0; i < n; ++i) scratch[cursor[assign[i]]++] = ids_[begin + i];
    }
    std::copy(scratch.begin(), scratch.end(), ids_.begin() + begin);

    // A cluster holding everything cannot happen after repair (k >= 2), but a
    // guard keeps degenerate data from recursing forever.
    bool shrinks = true;
    for (int c = 0; c < k; ++c)
        if (offsets[c + 1] - offsets[c] == n) shrinks = false;
    if (!shrinks) {
        std::sort(ids_.begin() + begin, ids_.begin() + end);
        return me;
    }

    std::vector<std::int32_t> children;
    children.reserve(k);
    for (int c = 0; c < k; ++c) {
        if (offsets[c + 1] == offsets[c]) continue;
        children.push_back(build(begin + offsets[c], begin + offsets[c + 1], node_counter));
    }
    // Children are not contiguous in nodes_ (depth-first recursion), so store
    // them through an explicit remap: rebuild contiguity by index list.
    nodes_[me].first_child = children.front();
    nodes_[me].n_children = static_cast<std::int32_t>(children.size());
    child_lists_.push_back(std::move(children));
    nodes_[me].child_list = static_cast<std::int32_t>(child_lists_.size() - 1);
    return me;
}

std::span<const std::size_t> KmeansTreeIndex::subtree_ids(std::int32_t node) const {
    const Node& n = nodes_[node];
    return {ids_.data() + n.begin, static_cast<std::size_t>(n.end - n.begin)};
}

struct KmeansTreeIndex::SearchState {
    std::size_t best_id = 0;
    double best = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    std::uint64_t comparisons = 0;
};

void KmeansTreeIndex::scan_leaf(const Node& n, const Mapped12& q, SearchState& st) const {
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
}

// f_d = 0: single greedy descent, no backtracking.
void KmeansTreeIndex::descend(const Mapped12& q, SearchState& st) const {
    std::int32_t node = 0;
    while (!nodes_[node].is_leaf()) {
        const auto& children = child_lists_[nodes_[node].child_list];
        std::int32_t best_c = children[0];
        double best_d = counted_dist_sq(q.data(), nodes_[children[0]].center.data(), st.comparisons);
        for (std::size_t c = 1; c < children.size(); ++c) {
            double d = counted_dist_sq(q.data(), nodes_[children[c]].center.data(), st.comparisons);
            if (d < best_d) {
                best_d = d;
                best_c = children[c];
            }
        }
        node = best_c;
    }
    scan_leaf(nodes_[node], q, st);
}

// Repeated greedy descents with best-first backtracking: each descent walks
// to the closest leaf, deferring the non-chosen clusters with the lower bound
// max(0, d(center, q) - f_d * d_r); a deferred cluster is evaluated iff that
// bound is below the current closest distance d_c, so f_d = 1 stays exact and
// the first descent matches the f_d = 0 path.
void KmeansTreeIndex::best_first(const Mapped12& q, double f_d, SearchState& st) const {
    using Entry = std::pair<double, std::int32_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
    pq.push({0.0, 0});
    while (!pq.empty()) {
        auto [lb, node] = pq.top();
        pq.pop();
        if (lb >= std::sqrt(st.best)) break;
        while (!nodes_[node].is_leaf()) {
            const auto& children = child_lists_[nodes_[node].child_list];
            std::int32_t best_c = -1;
            double best_d = std::numeric_limits<double>::infinity();
            std::vector<std::pair<double, std::int32_t>> others;
            others.reserve(children.size());
            for (std::int32_t c : children) {
                double d = std::sqrt(
                    counted_dist_sq(q.data(), nodes_[c].center.data(), st.comparisons));
                if (d < best_d) {
                    if (best_c >= 0)
                        others.emplace_back(std::max(0.0, best_d - f_d * nodes_[best_c].radius),
                                            best_c);
                    best_d = d;
                    best_c = c;
                } else {
                    others.emplace_back(std::max(0.0, d - f_d * nodes_[c].radius), c);
                }
            }
            for (const auto& o : others) pq.push(o);
            // The chosen cluster itself obeys the same bound: once it cannot
            // qualify, abandon this descent and fall back to the queue.
            if (std::max(0.0, best_d - f_d * nodes_[best_c].radius) >= std::sqrt(st.best)) {
                node = -1;
                break;
            }
            node = best_c;
        }
        if (node >= 0) scan_leaf(nodes_[node], q, st);
    }
}

QueryResult KmeansTreeIndex::query(const Mapped12& q, const QueryParams& params) const {
    SearchState st;
    if (params.f_d == 0.0)
        descend(q, st);
    else
        best_first(q, params.f_d, st);
    QueryResult res;
    res.best_id = st.best_id;
    res.best_dist_sq = st.best;
    res.comparisons = st.comparisons;
    if (st.second < std::numeric_limits<double>::infinity()) {
        res.second_dist_sq = st.second;
        res.second_is_exact = false;
    }
    return res;
}

namespace {
bool heap_cmp(const Neighbor& a, const Neighbor& b) {
    return a.dist_sq != b.dist_sq ? a.dist_sq < b.dist_sq : a.id < b.id;
}
} // namespace

namespace {
void heap_offer(std::vector<Neighbor>& heap, std::size_t k, Neighbor cand) {
    if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), heap_cmp);
    } else if (heap_cmp(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), heap_cmp);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), heap_cmp);
    }
}
} // namespace

void KmeansTreeIndex::knn_descend(const Mapped12& q, std::size_t k, std::vector<Neighbor>& heap,
                                  std::uint64_t& comparisons) const {
    std::int32_t node = 0;
    while (!nodes_[node].is_leaf()) {
        const auto& children = child_lists_[nodes_[node].child_list];
        std::int32_t best_c = children[0];
        double best_d = counted_dist_sq(q.data(), nodes_[children[0]].center.data(), comparisons);
        for (std::size_t c = 1; c < children.size(); ++c) {
            double d = counted_dist_sq(q.data(), nodes_[children[c]].center.data(), comparisons);
            if (d < best_d) {
                best_d = d;
                best_c = children[c];
            }
        }
        node = best_c;
    }
    const Node& n = nodes_[node];
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
        std::size_t id = ids_[i];
        heap_offer(heap, k, {id, counted_dist_sq(q.data(), data_.mapped_coords(id), comparisons)});
    }
}

void KmeansTreeIndex::knn_best_first(const Mapped12& q, double f_d, std::size_t k,
                                     std::vector<Neighbor>& heap, std::uint64_t& comparisons) const {
    using Entry = std::pair<double, std::int32_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
    pq.push({0.0, 0});
    while (!pq.empty()) {
        auto [lb, node] = pq.top();
        pq.pop();
        double bound = heap.size() < k ? std::numeric_limits<double>::infinity()
                                       : std::sqrt(heap.front().dist_sq);
        if (lb >= bound) break;
        while (!nodes_[node].is_leaf()) {
            const auto& children = child_lists_[nodes_[node].child_list];
            std::int32_t best_c = -1;
            double best_d = std::numeric_limits<double>::infinity();
            std::vector<std::pair<double, std::int32_t>> others;
            others.reserve(children.size());
            for (std::int32_t c : children) {
                double d = std::sqrt(counted_dist_sq(q.data(), nodes_[c].center.data(), comparisons));
                if (d < best_d) {
                    if (best_c >= 0)
                        others.emplace_back(std::max(0.0, best_d - f_d * nodes_[best_c].radius),
                                            best_c);
                    best_d = d;
                    best_c = c;
                } else {
                    others.emplace_back(std::max(0.0, d - f_d * nodes_[c].radius), c);
                }
            }
            for (const auto& o : others) pq.push(o);
            double cur = heap.size() < k ? std::numeric_limits<double>::infinity()
                                         : std::sqrt(heap.front().dist_sq);
            if (std::max(0.0, best_d - f_d * nodes_[best_c].radius) >= cur) {
                node = -1;
                break;
            }
            node = best_c;
        }
        if (node < 0) continue;
        const Node& n = nodes_[node];
        for (std::uint32_t i = n.begin; i < n.end; ++i) {
            std::size_t id = ids_[i];
            heap_offer(heap, k, {id, counted_dist_sq(q.data(), data_.mapped_coords(id), comparisons)});
        }
    }
}

std::vector<Neighbor> KmeansTreeIndex::knn(const Mapped12& q, std::size_t k, double f_d) const {
    std::vector<Neighbor> heap;
    std::uint64_t comparisons = 0;
    std::size_t kk = std::min(k, data_.size());
    if (f_d == 0.0)
        knn_descend(q, kk, heap, comparisons);
    else
        knn_best_first(q, f_d, kk, heap, comparisons);
    std::sort(heap.begin(), heap.end(), heap_cmp);
    return heap;
}

namespace {
constexpr char kKmMagic[8] = {'D', 'D', 'K', 'M', 'T', 'R', 'E', 'E'};
constexpr std::uint32_t kKmVersion = 1;
} // namespace

void KmeansTreeIndex::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os.write(kKmMagic, 8);
    std::uint32_t ver = kKmVersion;
    std::uint64_t nn = nodes_.size(), ni = ids_.size();
    std::int32_t k = k_;
    os.write(reinterpret_cast<const char*>(&ver), 4);
    os.write(reinterpret_cast<const char*>(&k), 4);
    os.write(reinterpret_cast<const char*>(&seed_), 8);
    os.write(reinterpret_cast<const char*>(&nn), 8);
    os.write(reinterpret_cast<const char*>(&ni), 8);
    // Member-wise copy into zeroed storage keeps struct padding out of the file.
    std::vector<Node> clean(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        std::memset(&clean[i], 0, sizeof(Node));
        clean[i].center = nodes_[i].center;
        clean[i].radius = nodes_[i].radius;
        clean[i].first_child = nodes_[i].first_child;
        clean[i].n_children = nodes_[i].n_children;
        clean[i].child_list = nodes_[i].child_list;
        clean[i].begin = nodes_[i].begin;
        clean[i].end = nodes_[i].end;
    }
    os.write(reinterpret_cast<const char*>(clean.data()),
             static_cast<std::streamsize>(clean.size() * sizeof(Node)));
    os.write(reinterpret_cast<const char*>(ids_.data()),
             static_cast<std::streamsize>(ids_.size() * sizeof(std::size_t)));
    std::uint64_t nl = child_lists_.size();
    os.write(reinterpret_cast<const char*>(&nl), 8);
    for (const auto& lst : child_lists_) {
        std::uint64_t sz = lst.size();
        os.write(reinterpret_cast<const char*>(&sz), 8);
        os.write(reinterpret_cast<const char*>(lst.data()),
                 static_cast<std::streamsize>(sz * sizeof(std::int32_t)));
    }
}

KmeansTreeIndex KmeansTreeIndex::load(const std::filesystem::path& path, const MaterialDataset& data) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kKmMagic, 8) != 0)
        throw std::runtime_error("bad k-means index file: " + path.string());
    std::uint32_t ver = 0;
    std::int32_t k = 0;
    std::uint64_t seed = 0, nn = 0, ni = 0;
    is.read(reinterpret_cast<char*>(&ver), 4);
    is.read(reinterpret_cast<char*>(&k), 4);
    is.read(reinterpret_cast<char*>(&seed), 8);
    is.read(reinterpret_cast<char*>(&nn), 8);
    is.read(reinterpret_cast<char*>(&ni), 8);
    if (!is || ver != kKmVersion || ni != data.size())
        throw std::runtime_error("k-means index header mismatch: " + path.string());
    std::vector<Node> nodes(nn);
    std::vector<std::size_t> ids(ni);
    is.read(reinterpret_cast<char*>(nodes.data()), static_cast<std::streamsize>(nn * sizeof(Node)));
    is.read(reinterpret_cast<char*>(ids.data()), static_cast<std::streamsize>(ni * sizeof(std::size_t)));
    std::uint64_t nl = 0;
    is.read(reinterpret_cast<char*>(&nl), 8);
    std::vector<std::vector<std::int32_t>> lists(nl);
    for (auto& lst : lists) {
        std::uint64_t sz = 0;
        is.read(reinterpret_cast<char*>(&sz), 8);
        lst.resize(sz);
        is.read(reinterpret_cast<char*>(lst.data()), static_cast<std::streamsize>(sz * sizeof(std::int32_t)));
    }
    if (!is) throw std::runtime_error("truncated k-means index: " + path.string());
    KmeansTreeIndex idx(data, k, seed, std::move(nodes), std::move(ids));
    idx.child_lists_ = std::move(lists);
    return idx;
}

} // namespace ddm
