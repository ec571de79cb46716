#include "ddmech/material.hpp"

namespace ddm {

Voigt6 eval_material(const Voigt6& strain, const MaterialParams& p) {
    Eigen::Matrix3d e = strain_to_tensor(strain);
    Eigen::Matrix3d e3 = e * e * e;
    double tr = e.trace();
    Eigen::Matrix3d s =
        p.modulus * (e + p.alpha * e3 + 0.5 * (tr + p.alpha * tr * tr * tr) * Eigen::Matrix3d::Identity());
    return stress_from_tensor(s);
}

Mat6 material_tangent(const Voigt6& strain, const MaterialParams& p) {
    Mat6 d;
    for (int j = 0; j < 6; ++j) {
        double h = 1e-7 * std::max(1.0, std::abs(strain[j]));
        Voigt6 ep = strain, em = strain;
        ep[j] += h;
        em[j] -= h;
        d.col(j) = (eval_material(ep, p) - eval_material(em, p)) / (2.0 * h);
    }
    return 0.5 * (d + d.transpose());
}

} // namespace ddm
