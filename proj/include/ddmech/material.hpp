#pragma once

#include "ddmech/phase.hpp"

namespace ddm {

struct MaterialParams {
    double modulus = 1000.0; // E, MPa
    double alpha = 500.0;    // dimensionless
};

// Nonlinear isotropic reference model
//   sigma = E (eps + alpha eps^3 + 0.5 (tr eps + alpha (tr eps)^3) I),
// where eps^3 is the matrix power of the symmetric strain tensor and
// (tr eps)^3 the scalar cube. Input/output in Voigt form.
Voigt6 eval_material(const Voigt6& strain, const MaterialParams& p);

// Consistent tangent d sigma / d eps (Voigt, engineering shear), computed by
// central differences of eval_material and symmetrized. Exact for alpha = 0.
Mat6 material_tangent(const Voigt6& strain, const MaterialParams& p);

} // namespace ddm
