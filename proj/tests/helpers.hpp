#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "ddmech/phase.hpp"
#include "ddmech/rng.hpp"

namespace testhelp {

inline ddm::Mat6 random_spd(ddm::Rng& rng, double scale = 1.0) {
    ddm::Mat6 a;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
    ddm::Mat6 c = scale * (a.transpose() * a + 0.1 * ddm::Mat6::Identity());
    return 0.5 * (c + c.transpose());
}

inline ddm::PhaseState random_state(ddm::Rng& rng, double es = 0.025, double ss = 25.0) {
    ddm::PhaseState s;
    for (int i = 0; i < 6; ++i) {
        s.strain[i] = rng.uniform(-es, es);
        s.stress[i] = rng.uniform(-ss, ss);
    }
    return s;
}

// Dense single-hexahedron stiffness oracle, written independently of the
// library's B-operator code: trilinear shape functions differentiated by
// hand, 2x2x2 Gauss rule.
inline Eigen::MatrixXd dense_hex_stiffness(double h, const ddm::Mat6& c) {
    const double g = 1.0 / std::sqrt(3.0);
    const double signs[2] = {-1.0, 1.0};
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(24, 24);
    // Natural-coordinate corner signs matching the standard hex ordering.
    const double xs[8] = {-1, 1, 1, -1, -1, 1, 1, -1};
    const double ys[8] = {-1, -1, 1, 1, -1, -1, 1, 1};
    const double zs[8] = {-1, -1, -1, -1, 1, 1, 1, 1};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int cgp = 0; cgp < 2; ++cgp) {
                double xi = signs[a] * g, eta = signs[b] * g, zeta = signs[cgp] * g;
                // dN/dx = dN/dxi * 2/h for the axis-aligned cube of edge h.
                Eigen::Matrix<double, 6, 24> bm = Eigen::Matrix<double, 6, 24>::Zero();
                for (int n = 0; n < 8; ++n) {
                    double dnx = 0.125 * xs[n] * (1 + ys[n] * eta) * (1 + zs[n] * zeta) * 2.0 / h;
                    double dny = 0.125 * ys[n] * (1 + xs[n] * xi) * (1 + zs[n] * zeta) * 2.0 / h;
                    double dnz = 0.125 * zs[n] * (1 + xs[n] * xi) * (1 + ys[n] * eta) * 2.0 / h;
                    bm(0, 3 * n + 0) = dnx;
                    bm(1, 3 * n + 1) = dny;
                    bm(2, 3 * n + 2) = dnz;
                    bm(3, 3 * n + 0) = dny;
                    bm(3, 3 * n + 1) = dnx;
                    bm(4, 3 * n + 0) = dnz;
                    bm(4, 3 * n + 2) = dnx;
                    bm(5, 3 * n + 1) = dnz;
                    bm(5, 3 * n + 2) = dny;
                }
                double w = (h / 2.0) * (h / 2.0) * (h / 2.0);
                k += w * bm.transpose() * c * bm;
            }
    return k;
}

inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        double r = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto rx = average_ranks(x);
    auto ry = average_ranks(y);
    std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace testhelp
