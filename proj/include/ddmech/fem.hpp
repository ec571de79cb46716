#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <vector>

#include <Eigen/Sparse>

#include "ddmech/material.hpp"
#include "ddmech/metric.hpp"
#include "ddmech/phase.hpp"

namespace ddm {

struct SingularSystemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using BMatrix = Eigen::Matrix<double, 6, 24>;

// Regular grid of 8-node trilinear hexahedra on a cube, 2x2x2 Gauss rule
// (8 integration points per element).
struct Mesh {
    double side = 0.0; // mm
    int n_edge = 0;
    std::vector<Eigen::Vector3d> nodes;
    std::vector<std::array<int, 8>> elements;

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_dofs() const { return 3 * num_nodes(); }
    std::size_t num_integration_points() const { return 8 * elements.size(); }

    // All elements share the same geometry, so the 8 strain-displacement
    // matrices and the integration weight are element-independent.
    std::array<BMatrix, 8> b_ops;
    double ip_weight = 0.0; // w^(e) = detJ * gauss weight, mm^3

    // Element dof ids (24) for scatter/gather.
    std::array<int, 24> element_dofs(std::size_t e) const {
        std::array<int, 24> dofs{};
        for (int a = 0; a < 8; ++a)
            for (int d = 0; d < 3; ++d) dofs[3 * a + d] = 3 * elements[e][a] + d;
        return dofs;
    }
};

Mesh build_mesh(double side, int n_edge);

// Fixed dofs (value 0), prescribed dofs (given value) and free dofs
// partition all dofs.
struct BoundaryConditions {
    std::vector<int> fixed_dofs;
    std::vector<std::pair<int, double>> prescribed_dofs;

    // Derived, filled by finalize().
    std::vector<int> free_dofs;
    std::vector<char> is_constrained;
    std::vector<double> constrained_value;

    void finalize(int num_dofs);
};

// Bottom face clamped, top face rotated by theta degrees about the centered
// z-axis (exact rotation map) and held in z.
BoundaryConditions twist_bcs(const Mesh& mesh, double theta_deg);

// Assembled K = A_e { w B^T C B }, reduced to free dofs and factorized once;
// the same factorization serves every subsequent right-hand side.
class SystemMatrices {
public:
    SystemMatrices(const Mesh& mesh, const BoundaryConditions& bcs, const MetricC& metric);

    const Eigen::SparseMatrix<double>& full_matrix() const { return k_full_; }

    // Solves K u = rhs with the stored essential BCs; homogeneous = true
    // zeroes the constrained values (used for the eta system).
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs_full, bool homogeneous) const;

    const void* factorization_handle() const { return &llt_; }

private:
    const BoundaryConditions& bcs_;
    Eigen::SparseMatrix<double> k_full_;
    Eigen::SparseMatrix<double> k_ff_;
    Eigen::SparseMatrix<double> k_fc_;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
    std::vector<int> dof_to_free_; // -1 for constrained
};

SystemMatrices assemble_system(const Mesh& mesh, const BoundaryConditions& bcs, const MetricC& metric);

struct ProjectionResult {
    Eigen::VectorXd u;
    Eigen::VectorXd eta;
    std::vector<PhaseState> states; // one per integration point
    double t_rhs_s = 0.0;
    double t_solve_s = 0.0;
};

// Constraint-set projection P_C: solves K u = E and K eta = S assembled from
// the assigned data states, then eps = B u and sigma = sigma* + C B eta.
ProjectionResult project_constraint(const SystemMatrices& sys, const Mesh& mesh,
                                    const BoundaryConditions& bcs, const MetricC& metric,
                                    std::span<const PhaseState> assigned,
                                    const Eigen::VectorXd& nodal_forces);

struct ReferenceSolution {
    Eigen::VectorXd u;
    int newton_steps = 0;
};

// Newton-Raphson solution of the true material model, relative residual 1e-8.
ReferenceSolution reference_solution(const Mesh& mesh, const BoundaryConditions& bcs,
                                     const MaterialParams& p, int max_steps = 50);

// Strains at all integration points for a given displacement field.
std::vector<Voigt6> integration_point_strains(const Mesh& mesh, const Eigen::VectorXd& u);

// Export helpers.
void write_displacements_csv(const Mesh& mesh, const Eigen::VectorXd& u,
                             const std::filesystem::path& path);
void write_states_csv(std::span<const PhaseState> states, const std::filesystem::path& path);

} // namespace ddm
