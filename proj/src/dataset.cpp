#include "ddmech/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ddmech/rng.hpp"

namespace ddm {

namespace {

constexpr char kMagic[8] = {'D', 'D', 'M', 'A', 'T', 'S', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "dataset format assumes a little-endian host");

std::uint64_t fnv1a64(const unsigned char* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
bool read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return static_cast<bool>(is);
}

} // namespace

void MaterialDataset::bind_metric(const MetricC& c) {
    mapped_.resize(12 * points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        Eigen::Map<Mapped12>(mapped_.data() + 12 * i) = c.map_point(points[i]);
}

MaterialDataset sample_dataset(std::size_t n, double lo, double hi,
                               const MaterialParams& p, std::uint64_t seed) {
    MaterialDataset d;
    d.seed = seed;
    d.bounds_lo = lo;
    d.bounds_hi = hi;
    d.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = Rng::substream(seed, i);
        Voigt6 eps;
        for (int j = 0; j < 6; ++j) eps[j] = rng.uniform(lo, hi);
        d.points[i].strain = eps;
        d.points[i].stress = eval_material(eps, p);
    }
    return d;
}

void save_dataset(const MaterialDataset& d, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DatasetFormatError("cannot open for writing: " + path.string());

    std::vector<double> payload(12 * d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        Eigen::Map<Voigt6>(payload.data() + 12 * i) = d.points[i].strain;
        Eigen::Map<Voigt6>(payload.data() + 12 * i + 6) = d.points[i].stress;
    }

    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kVersion);
    write_pod(os, static_cast<std::uint64_t>(d.size()));
    write_pod(os, static_cast<std::uint32_t>(6)); // M
    write_pod(os, d.seed);
    write_pod(os, d.bounds_lo);
    write_pod(os, d.bounds_hi);
    os.write(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::streamsize>(payload.size() * sizeof(double)));
    std::uint64_t checksum =
        fnv1a64(reinterpret_cast<const unsigned char*>(payload.data()), payload.size() * sizeof(double));
    write_pod(os, checksum);
    if (!os) throw DatasetFormatError("write failed: " + path.string());
}

MaterialDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DatasetFormatError("cannot open for reading: " + path.string());

    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DatasetHeaderError("bad magic bytes: " + path.string());

    std::uint32_t version = 0, m = 0;
    std::uint64_t n = 0;
    MaterialDataset d;
    if (!read_pod(is, version) || version != kVersion)
        throw DatasetHeaderError("unsupported version: " + path.string());
    if (!read_pod(is, n) || !read_pod(is, m) || m != 6)
        throw DatasetHeaderError("bad header fields: " + path.string());
    if (!read_pod(is, d.seed) || !read_pod(is, d.bounds_lo) || !read_pod(is, d.bounds_hi))
        throw DatasetHeaderError("bad header fields: " + path.string());

    std::vector<double> payload(12 * n);
    is.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!is) throw DatasetTruncatedError("truncated payload: " + path.string());

    std::uint64_t stored = 0;
    if (!read_pod(is, stored)) throw DatasetTruncatedError("missing checksum: " + path.string());
    std::uint64_t actual =
        fnv1a64(reinterpret_cast<const unsigned char*>(payload.data()), payload.size() * sizeof(double));
    if (stored != actual) throw DatasetChecksumError("checksum mismatch: " + path.string());

    d.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.points[i].strain = Eigen::Map<const Voigt6>(payload.data() + 12 * i);
        d.points[i].stress = Eigen::Map<const Voigt6>(payload.data() + 12 * i + 6);
    }
    return d;
}

void save_dataset_csv(const MaterialDataset& d, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw DatasetFormatError("cannot open for writing: " + path.string());
    os << "e11,e22,e33,g12,g13,g23,s11,s22,s33,s12,s13,s23\n";
    os.precision(17);
    for (const PhaseState& p : d.points) {
        for (int j = 0; j < 6; ++j) os << p.strain[j] << ',';
        for (int j = 0; j < 6; ++j) os << p.stress[j] << (j == 5 ? '\n' : ',');
    }
}

MaterialDataset load_dataset_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DatasetFormatError("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(is, line) || line.rfind("e11,", 0) != 0)
        throw DatasetHeaderError("bad or missing CSV header: " + path.string());

    MaterialDataset d;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        PhaseState p;
        std::string cell;
        for (int j = 0; j < 12; ++j) {
            if (!std::getline(row, cell, ','))
                throw DatasetTruncatedError("short CSV row: " + path.string());
            double v = 0;
            try {
                v = std::stod(cell);
            } catch (const std::exception&) {
                throw DatasetFormatError("non-numeric CSV cell: " + path.string());
            }
            (j < 6 ? p.strain[j] : p.stress[j - 6]) = v;
        }
        d.points.push_back(p);
    }
    return d;
}

} // namespace ddm
