#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ddmech/material.hpp"
#include "ddmech/metric.hpp"
#include "ddmech/phase.hpp"

namespace ddm {

struct DatasetFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DatasetHeaderError : DatasetFormatError {
    using DatasetFormatError::DatasetFormatError;
};
struct DatasetTruncatedError : DatasetFormatError {
    using DatasetFormatError::DatasetFormatError;
};
struct DatasetChecksumError : DatasetFormatError {
    using DatasetFormatError::DatasetFormatError;
};

// Material data set D: N phase states plus, once a metric is bound, their
// pre-mapped 12-dim coordinates stored contiguously (stride 12).
class MaterialDataset {
public:
    std::vector<PhaseState> points;
    std::uint64_t seed = 0;
    double bounds_lo = 0.0;
    double bounds_hi = 0.0;

    std::size_t size() const { return points.size(); }

    void bind_metric(const MetricC& c);
    bool metric_bound() const { return !mapped_.empty(); }

    const double* mapped_coords(std::size_t i) const { return mapped_.data() + 12 * i; }
    Eigen::Map<const Mapped12> mapped_at(std::size_t i) const {
        return Eigen::Map<const Mapped12>(mapped_coords(i));
    }

private:
    std::vector<double> mapped_; // 12 * N once bound
};

// N strain vectors i.i.d. uniform per Voigt component on [lo, hi]; stresses
// from the reference model. Bitwise reproducible from the seed (per-point
// RNG substreams).
MaterialDataset sample_dataset(std::size_t n, double lo, double hi,
                               const MaterialParams& p, std::uint64_t seed);

// Binary format (.mdd): magic, version, N, M, seed, bounds, row-major
// little-endian doubles (strain then stress per point), FNV-1a64 checksum.
void save_dataset(const MaterialDataset& d, const std::filesystem::path& path);
MaterialDataset load_dataset(const std::filesystem::path& path);

// CSV: header e11,e22,e33,g12,g13,g23,s11,s22,s33,s12,s13,s23.
void save_dataset_csv(const MaterialDataset& d, const std::filesystem::path& path);
MaterialDataset load_dataset_csv(const std::filesystem::path& path);

} // namespace ddm
