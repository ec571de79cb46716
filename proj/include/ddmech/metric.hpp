#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "ddmech/phase.hpp"

namespace ddm {

struct MetricConstructionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Symmetric positive definite phase-space metric C (units MPa). The distance
//   d_e^2 = C de . de + C^-1 ds . ds
// is evaluated through the Cholesky factor C = L L^T, which also provides the
// isometric mapping q = (L^T e, L^-1 s) into a plain Euclidean 12-space.
class MetricC {
public:
    explicit MetricC(const Mat6& c);

    static MetricC identity_scaled(double scale) {
        return MetricC(scale * Mat6::Identity());
    }

    const Mat6& matrix() const { return c_; }
    const Mat6& factor() const { return l_; }          // lower-triangular L
    const Mat6& inverse_factor() const { return linv_; } // L^-1

    Mapped12 map_point(const PhaseState& s) const {
        Mapped12 q;
        q.head<6>() = l_.transpose() * s.strain;
        q.tail<6>() = linv_ * s.stress;
        return q;
    }

    double local_distance_sq(const PhaseState& a, const PhaseState& b) const {
        Voigt6 de = l_.transpose() * (a.strain - b.strain);
        Voigt6 ds = linv_ * (a.stress - b.stress);
        return de.squaredNorm() + ds.squaredNorm();
    }

private:
    Mat6 c_;
    Mat6 l_;
    Mat6 linv_;
};

inline double local_distance_sq(const PhaseState& a, const PhaseState& b, const MetricC& c) {
    return c.local_distance_sq(a, b);
}

inline Mapped12 map_point(const PhaseState& s, const MetricC& c) { return c.map_point(s); }

// Global squared distance: sum_e 1/2 w_e d_e^2 over assignment pairs.
double global_distance_sq(std::span<const PhaseState> y,
                          std::span<const PhaseState> z,
                          std::span<const double> weights,
                          std::span<const MetricC* const> metrics);

// Single-metric convenience overload.
double global_distance_sq(std::span<const PhaseState> y,
                          std::span<const PhaseState> z,
                          std::span<const double> weights,
                          const MetricC& metric);

// Metric from the first 6 principal components of the centered 12-dim data:
// C = sym(Ae^-1 As) with Ae/As the upper/lower 6x6 blocks of the 12x6
// component matrix. Throws MetricConstructionError if Ae is numerically
// singular or the symmetrized result is not positive definite.
MetricC pca_metric(std::span<const PhaseState> points);

} // namespace ddm
