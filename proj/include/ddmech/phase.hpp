#pragma once

#include <Eigen/Dense>

namespace ddm {

// Voigt component order is (11, 22, 33, 12, 13, 23); strains carry
// engineering shear (gamma = 2*eps_ij), stresses plain components in MPa.
using Voigt6 = Eigen::Matrix<double, 6, 1>;
using Mapped12 = Eigen::Matrix<double, 12, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

// A (strain, stress) pair in the local phase space Z^(e); concatenated
// dimension is 2M = 12 in 3D.
struct PhaseState {
    Voigt6 strain = Voigt6::Zero();
    Voigt6 stress = Voigt6::Zero();

    bool operator==(const PhaseState& o) const {
        return strain == o.strain && stress == o.stress;
    }
};

// 3x3 symmetric tensor <-> Voigt conversions.
inline Eigen::Matrix3d strain_to_tensor(const Voigt6& v) {
    Eigen::Matrix3d t;
    t << v[0], 0.5 * v[3], 0.5 * v[4],
         0.5 * v[3], v[1], 0.5 * v[5],
         0.5 * v[4], 0.5 * v[5], v[2];
    return t;
}

inline Voigt6 strain_from_tensor(const Eigen::Matrix3d& t) {
    Voigt6 v;
    v << t(0, 0), t(1, 1), t(2, 2), 2.0 * t(0, 1), 2.0 * t(0, 2), 2.0 * t(1, 2);
    return v;
}

inline Eigen::Matrix3d stress_to_tensor(const Voigt6& v) {
    Eigen::Matrix3d t;
    t << v[0], v[3], v[4],
         v[3], v[1], v[5],
         v[4], v[5], v[2];
    return t;
}

inline Voigt6 stress_from_tensor(const Eigen::Matrix3d& t) {
    Voigt6 v;
    v << t(0, 0), t(1, 1), t(2, 2), t(0, 1), t(0, 2), t(1, 2);
    return v;
}

} // namespace ddm
