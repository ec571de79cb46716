#include "ddmech/nn/graph.hpp"

#include <chrono>
#include <cstring>
#include <fstream>

#include "ddmech/parallel.hpp"
#include "ddmech/rng.hpp"

namespace ddm {

KnnGraphIndex::KnnGraphIndex(const MaterialDataset& data, std::size_t k, const NnIndex& builder,
                             double builder_fd, std::uint64_t seed, unsigned threads)
    : NnIndex(data), k_(k), builder_fd_(builder_fd), seed_(seed) {
    if (k_ < 1 || k_ >= data.size())
        throw std::invalid_argument("k-NN graph: need 1 <= k < N");
    if (&builder.dataset() != &data)
        throw std::invalid_argument("k-NN graph: builder must be bound to the same dataset");

    auto t0 = std::chrono::steady_clock::now();
    adjacency_.resize(data.size() * k_);
    parallel_for(data.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto nbs = builder.knn(data.mapped_at(i), k_ + 1, builder_fd_);
            std::size_t out = 0;
            for (const Neighbor& nb : nbs) {
                if (nb.id == i) continue;
                adjacency_[k_ * i + out++] = nb.id;
                if (out == k_) break;
            }
            // With an approximate builder the self point may be missing from
            // the candidate list; the list is then already k deep.
            if (out < k_)
                throw std::runtime_error("k-NN graph: builder returned too few neighbors");
        }
    });
    build_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    memory_bytes = adjacency_.size() * sizeof(std::size_t);
}

std::size_t KnnGraphIndex::cold_start(const Mapped12& q) const {
    // Deterministic start derived from the query bits and the index seed.
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed_;
    const unsigned char* bytes = reinterpret_cast<const unsigned char*>(q.data());
    for (std::size_t i = 0; i < 12 * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return Rng(h).next_below(data_.size());
}

QueryResult KnnGraphIndex::query(const Mapped12& q, const QueryParams& params) const {
    std::size_t cur = params.warm_start ? *params.warm_start : cold_start(q);
    if (cur >= data_.size()) throw std::out_of_range("warm start id out of range");

    QueryResult res;
    // The start node's own distance does not go through the comparison
    // counter; comparisons counts adjacency evaluations only, so it equals
    // hops*k + k exactly (the adjacency of every visited node is evaluated,
    // including the last one when the step budget runs out).
    double d_cur = (q - data_.mapped_at(cur)).squaredNorm();

    // Best two distinct points seen along the path (approximate 2-NN).
    std::size_t b1_id = cur, b2_id = cur;
    double b1 = d_cur, b2 = std::numeric_limits<double>::infinity();
    auto offer = [&](std::size_t id, double d) {
        if (id == b1_id) return;
        if (d < b1 || (d == b1 && id < b1_id)) {
            b2 = b1;
            b2_id = b1_id;
            b1 = d;
            b1_id = id;
        } else if (d < b2 || (d == b2 && id < b2_id)) {
            b2 = d;
            b2_id = id;
        }
    };

    const std::uint64_t max_hops = params.f_s ? *params.f_s : std::numeric_limits<std::uint64_t>::max();
    for (;;) {
        std::size_t best_n = cur;
        double best_d = d_cur;
        for (std::size_t nb : neighbors(cur)) {
            double d = counted_dist_sq(q.data(), data_.mapped_coords(nb), res.comparisons);
            offer(nb, d);
            if (d < best_d || (d == best_d && nb < best_n)) {
                best_d = d;
                best_n = nb;
            }
        }
        if (best_n == cur) break;       // local minimum
        if (res.hops >= max_hops) break; // step budget exhausted, stay put
        cur = best_n;
        d_cur = best_d;
        ++res.hops;
    }

    res.best_id = cur;
    res.best_dist_sq = d_cur;
    // A runner-up is only meaningful when the returned point is also the best
    // point seen (it may not be if the step bound cut the walk short).
    if (b1_id == cur && b2 < std::numeric_limits<double>::infinity()) {
        res.second_dist_sq = b2;
        res.second_is_exact = false;
    }
    return res;
}

std::vector<Neighbor> KnnGraphIndex::knn(const Mapped12&, std::size_t, double) const {
    throw std::logic_error("k-NN graph does not support k-NN candidate queries");
}

namespace {
constexpr char kGrMagic[8] = {'D', 'D', 'K', 'N', 'N', 'G', 'R', 'F'};
constexpr std::uint32_t kGrVersion = 1;
} // namespace

void KnnGraphIndex::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os.write(kGrMagic, 8);
    std::uint32_t ver = kGrVersion;
    std::uint64_t n = data_.size(), k = k_;
    os.write(reinterpret_cast<const char*>(&ver), 4);
    os.write(reinterpret_cast<const char*>(&n), 8);
    os.write(reinterpret_cast<const char*>(&k), 8);
    os.write(reinterpret_cast<const char*>(&builder_fd_), 8);
    os.write(reinterpret_cast<const char*>(&seed_), 8);
    os.write(reinterpret_cast<const char*>(adjacency_.data()),
             static_cast<std::streamsize>(adjacency_.size() * sizeof(std::size_t)));
}

KnnGraphIndex KnnGraphIndex::load(const std::filesystem::path& path, const MaterialDataset& data) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kGrMagic, 8) != 0)
        throw std::runtime_error("bad graph index file: " + path.string());
    std::uint32_t ver = 0;
    std::uint64_t n = 0, k = 0, seed = 0;
    double builder_fd = 1.0;
    is.read(reinterpret_cast<char*>(&ver), 4);
    is.read(reinterpret_cast<char*>(&n), 8);
    is.read(reinterpret_cast<char*>(&k), 8);
    is.read(reinterpret_cast<char*>(&builder_fd), 8);
    is.read(reinterpret_cast<char*>(&seed), 8);
    if (!is || ver != kGrVersion || n != data.size())
        throw std::runtime_error("graph index header mismatch: " + path.string());
    std::vector<std::size_t> adj(n * k);
    is.read(reinterpret_cast<char*>(adj.data()), static_cast<std::streamsize>(adj.size() * sizeof(std::size_t)));
    if (!is) throw std::runtime_error("truncated graph index: " + path.string());
    return KnnGraphIndex(data, k, builder_fd, seed, std::move(adj));
}

} // namespace ddm
