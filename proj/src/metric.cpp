#include "ddmech/metric.hpp"

#include <Eigen/Eigenvalues>

namespace ddm {

MetricC::MetricC(const Mat6& c) : c_(c) {
    double rel = (c - c.transpose()).norm() / std::max(c.norm(), 1e-300);
    if (rel > 1e-12)
        throw MetricConstructionError("metric matrix is not symmetric");
    Eigen::LLT<Mat6> llt(c_);
    if (llt.info() != Eigen::Success)
        throw MetricConstructionError("metric matrix is not positive definite");
    l_ = llt.matrixL();
    linv_ = l_.triangularView<Eigen::Lower>().solve(Mat6::Identity());
}

double global_distance_sq(std::span<const PhaseState> y,
                          std::span<const PhaseState> z,
                          std::span<const double> weights,
                          std::span<const MetricC* const> metrics) {
    if (y.size() != z.size() || y.size() != weights.size() || y.size() != metrics.size())
        throw std::invalid_argument("global_distance_sq: length mismatch");
    double total = 0.0;
    for (std::size_t e = 0; e < y.size(); ++e)
        total += 0.5 * weights[e] * metrics[e]->local_distance_sq(y[e], z[e]);
    return total;
}

double global_distance_sq(std::span<const PhaseState> y,
                          std::span<const PhaseState> z,
                          std::span<const double> weights,
                          const MetricC& metric) {
    if (y.size() != z.size() || y.size() != weights.size())
        throw std::invalid_argument("global_distance_sq: length mismatch");
    double total = 0.0;
    for (std::size_t e = 0; e < y.size(); ++e)
        total += 0.5 * weights[e] * metric.local_distance_sq(y[e], z[e]);
    return total;
}

MetricC pca_metric(std::span<const PhaseState> points) {
    const std::size_t n = points.size();
    if (n < 12)
        throw MetricConstructionError("pca_metric: need at least 12 data points");

    Mapped12 mean = Mapped12::Zero();
    for (const PhaseState& p : points) {
        mean.head<6>() += p.strain;
        mean.tail<6>() += p.stress;
    }
    mean /= static_cast<double>(n);

    Eigen::Matrix<double, 12, 12> cov = Eigen::Matrix<double, 12, 12>::Zero();
    for (const PhaseState& p : points) {
        Mapped12 x;
        x.head<6>() = p.strain;
        x.tail<6>() = p.stress;
        x -= mean;
        cov.noalias() += x * x.transpose();
    }
    cov /= static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 12, 12>> eig(cov);
    if (eig.info() != Eigen::Success)
        throw MetricConstructionError("pca_metric: eigendecomposition failed");

    // Columns sorted by descending eigenvalue; sign fixed so the
    // largest-magnitude entry of each component is positive.
    Eigen::Matrix<double, 12, 6> a;
    for (int j = 0; j < 6; ++j) {
        Eigen::Matrix<double, 12, 1> v = eig.eigenvectors().col(11 - j);
        int imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v[imax] < 0.0) v = -v;
        a.col(j) = v;
    }

    Mat6 a_eps = a.topRows<6>();
    Mat6 a_sig = a.bottomRows<6>();

    Eigen::JacobiSVD<Mat6> svd(a_eps);
    double smin = svd.singularValues()(5);
    double smax = svd.singularValues()(0);
    if (smin <= 0.0 || smax / smin > 1e12)
        throw MetricConstructionError("pca_metric: strain block of the component matrix is singular");

    Mat6 m = a_eps.inverse() * a_sig;
    Mat6 sym = 0.5 * (m + m.transpose());
    return MetricC(sym); // MetricC ctor validates SPD
}

} // namespace ddm
