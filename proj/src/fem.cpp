#include "ddmech/fem.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>

namespace ddm {

namespace {

// Local corner signs of the reference hexahedron [-1,1]^3.
constexpr double kXi[8] = {-1, 1, 1, -1, -1, 1, 1, -1};
constexpr double kEta[8] = {-1, -1, 1, 1, -1, -1, 1, 1};
constexpr double kZeta[8] = {-1, -1, -1, -1, 1, 1, 1, 1};

// Shape-function gradients w.r.t. reference coordinates at (xi, eta, zeta).
Eigen::Matrix<double, 8, 3> shape_gradients(double xi, double eta, double zeta) {
    Eigen::Matrix<double, 8, 3> g;
    for (int a = 0; a < 8; ++a) {
        g(a, 0) = 0.125 * kXi[a] * (1 + kEta[a] * eta) * (1 + kZeta[a] * zeta);
        g(a, 1) = 0.125 * (1 + kXi[a] * xi) * kEta[a] * (1 + kZeta[a] * zeta);
        g(a, 2) = 0.125 * (1 + kXi[a] * xi) * (1 + kEta[a] * eta) * kZeta[a];
    }
    return g;
}

BMatrix b_matrix(const Eigen::Matrix<double, 8, 3>& dndx) {
    BMatrix b = BMatrix::Zero();
    for (int a = 0; a < 8; ++a) {
        double dx = dndx(a, 0), dy = dndx(a, 1), dz = dndx(a, 2);
        b(0, 3 * a + 0) = dx;
        b(1, 3 * a + 1) = dy;
        b(2, 3 * a + 2) = dz;
        b(3, 3 * a + 0) = dy; // gamma_12
        b(3, 3 * a + 1) = dx;
        b(4, 3 * a + 0) = dz; // gamma_13
        b(4, 3 * a + 2) = dx;
        b(5, 3 * a + 1) = dz; // gamma_23
        b(5, 3 * a + 2) = dy;
    }
    return b;
}

} // namespace

Mesh build_mesh(double side, int n_edge) {
    if (n_edge < 1) throw std::invalid_argument("build_mesh: n_edge must be >= 1");
    Mesh m;
    m.side = side;
    m.n_edge = n_edge;
    const int np = n_edge + 1;
    const double h = side / n_edge;

    m.nodes.reserve(static_cast<std::size_t>(np) * np * np);
    for (int iz = 0; iz < np; ++iz)
        for (int iy = 0; iy < np; ++iy)
            for (int ix = 0; ix < np; ++ix)
                m.nodes.emplace_back(ix * h, iy * h, iz * h);

    auto nid = [np](int ix, int iy, int iz) { return ix + np * (iy + np * iz); };
    m.elements.reserve(static_cast<std::size_t>(n_edge) * n_edge * n_edge);
    for (int iz = 0; iz < n_edge; ++iz)
        for (int iy = 0; iy < n_edge; ++iy)
            for (int ix = 0; ix < n_edge; ++ix)
                m.elements.push_back({nid(ix, iy, iz), nid(ix + 1, iy, iz),
                                      nid(ix + 1, iy + 1, iz), nid(ix, iy + 1, iz),
                                      nid(ix, iy, iz + 1), nid(ix + 1, iy, iz + 1),
                                      nid(ix + 1, iy + 1, iz + 1), nid(ix, iy + 1, iz + 1)});

    // Regular grid: J = (h/2) I at every Gauss point.
    const double g = 1.0 / std::sqrt(3.0);
    const double jinv = 2.0 / h;
    m.ip_weight = std::pow(0.5 * h, 3);
    int gp = 0;
    for (int kz = 0; kz < 2; ++kz)
        for (int ky = 0; ky < 2; ++ky)
            for (int kx = 0; kx < 2; ++kx) {
                Eigen::Matrix<double, 8, 3> dndx =
                    jinv * shape_gradients(g * (2 * kx - 1), g * (2 * ky - 1), g * (2 * kz - 1));
                m.b_ops[gp++] = b_matrix(dndx);
            }
    return m;
}

void BoundaryConditions::finalize(int num_dofs) {
    is_constrained.assign(num_dofs, 0);
    constrained_value.assign(num_dofs, 0.0);
    for (int d : fixed_dofs) is_constrained[d] = 1;
    for (auto [d, v] : prescribed_dofs) {
        is_constrained[d] = 1;
        constrained_value[d] = v;
    }
    free_dofs.clear();
    for (int d = 0; d < num_dofs; ++d)
        if (!is_constrained[d]) free_dofs.push_back(d);
}

BoundaryConditions twist_bcs(const Mesh& mesh, double theta_deg) {
    BoundaryConditions bcs;
    const double tol = 1e-9 * mesh.side;
    const double theta = theta_deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    const double cx = 0.5 * mesh.side, cy = 0.5 * mesh.side;

    for (int i = 0; i < mesh.num_nodes(); ++i) {
        const Eigen::Vector3d& x = mesh.nodes[i];
        if (x.z() < tol) {
            for (int d = 0; d < 3; ++d) bcs.fixed_dofs.push_back(3 * i + d);
        } else if (x.z() > mesh.side - tol) {
            double rx = x.x() - cx, ry = x.y() - cy;
            bcs.prescribed_dofs.emplace_back(3 * i + 0, c * rx - s * ry - rx);
            bcs.prescribed_dofs.emplace_back(3 * i + 1, s * rx + c * ry - ry);
            bcs.prescribed_dofs.emplace_back(3 * i + 2, 0.0);
        }
    }
    bcs.finalize(mesh.num_dofs());
    return bcs;
}

SystemMatrices::SystemMatrices(const Mesh& mesh, const BoundaryConditions& bcs, const MetricC& metric)
    : bcs_(bcs) {
    const int n = mesh.num_dofs();
    const Mat6& c = metric.matrix();

    // Element matrix is identical for every element of the regular grid.
    Eigen::Matrix<double, 24, 24> ke = Eigen::Matrix<double, 24, 24>::Zero();
    for (const BMatrix& b : mesh.b_ops) ke.noalias() += mesh.ip_weight * b.transpose() * c * b;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh.elements.size() * 24 * 24);
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        auto dofs = mesh.element_dofs(e);
        for (int i = 0; i < 24; ++i)
            for (int j = 0; j < 24; ++j) trips.emplace_back(dofs[i], dofs[j], ke(i, j));
    }
    k_full_.resize(n, n);
    k_full_.setFromTriplets(trips.begin(), trips.end());

    // Reduction to free dofs plus the free-constrained coupling block.
    const auto& free = bcs.free_dofs;
    dof_to_free_.assign(n, -1);
    for (std::size_t i = 0; i < free.size(); ++i) dof_to_free_[free[i]] = static_cast<int>(i);

    std::vector<Eigen::Triplet<double>> tff, tfc;
    std::vector<int> cons_index(n, -1);
    int nc = 0;
    for (int d = 0; d < n; ++d)
        if (bcs.is_constrained[d]) cons_index[d] = nc++;

    for (int col = 0; col < k_full_.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(k_full_, col); it; ++it) {
            int fi = dof_to_free_[it.row()];
            if (fi < 0) continue;
            int fj = dof_to_free_[it.col()];
            if (fj >= 0)
                tff.emplace_back(fi, fj, it.value());
            else
                tfc.emplace_back(fi, cons_index[it.col()], it.value());
        }
    k_ff_.resize(static_cast<int>(free.size()), static_cast<int>(free.size()));
    k_ff_.setFromTriplets(tff.begin(), tff.end());
    k_fc_.resize(static_cast<int>(free.size()), nc);
    k_fc_.setFromTriplets(tfc.begin(), tfc.end());

    llt_.compute(k_ff_);
    if (llt_.info() != Eigen::Success)
        throw SingularSystemError("stiffness factorization failed");
}

Eigen::VectorXd SystemMatrices::solve(const Eigen::VectorXd& rhs_full, bool homogeneous) const {
    const int n = static_cast<int>(rhs_full.size());
    Eigen::VectorXd uc = Eigen::VectorXd::Zero(k_fc_.cols());
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    if (!homogeneous) {
        int ci = 0;
        for (int d = 0; d < n; ++d)
            if (bcs_.is_constrained[d]) {
                uc[ci++] = bcs_.constrained_value[d];
                u[d] = bcs_.constrained_value[d];
            }
    }

    Eigen::VectorXd rhs_f(k_ff_.rows());
    for (std::size_t i = 0; i < bcs_.free_dofs.size(); ++i) rhs_f[static_cast<int>(i)] = rhs_full[bcs_.free_dofs[i]];
    rhs_f -= k_fc_ * uc;

    Eigen::VectorXd uf = llt_.solve(rhs_f);
    double rel = (k_ff_ * uf - rhs_f).norm() / std::max(rhs_f.norm(), 1e-300);
    if (rhs_f.norm() > 0 && rel > 1e-10)
        throw ConvergenceError("linear solve residual above tolerance");

    for (std::size_t i = 0; i < bcs_.free_dofs.size(); ++i) u[bcs_.free_dofs[i]] = uf[static_cast<int>(i)];
    return u;
}

SystemMatrices assemble_system(const Mesh& mesh, const BoundaryConditions& bcs, const MetricC& metric) {
    return SystemMatrices(mesh, bcs, metric);
}

ProjectionResult project_constraint(const SystemMatrices& sys, const Mesh& mesh,
                                    const BoundaryConditions& bcs, const MetricC& metric,
                                    std::span<const PhaseState> assigned,
                                    const Eigen::VectorXd& nodal_forces) {
    const std::size_t m = mesh.num_integration_points();
    if (assigned.size() != m)
        throw std::invalid_argument("project_constraint: one assigned state per integration point required");

    const Mat6& c = metric.matrix();
    const int n = mesh.num_dofs();
    auto t0 = std::chrono::steady_clock::now();
    Eigen::VectorXd rhs_e = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd rhs_s = nodal_forces.size() ? nodal_forces : Eigen::VectorXd::Zero(n);
    if (rhs_s.size() != n) throw std::invalid_argument("project_constraint: nodal force size mismatch");

    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        auto dofs = mesh.element_dofs(e);
        Eigen::Matrix<double, 24, 1> fe = Eigen::Matrix<double, 24, 1>::Zero();
        Eigen::Matrix<double, 24, 1> fs = Eigen::Matrix<double, 24, 1>::Zero();
        for (int gp = 0; gp < 8; ++gp) {
            const PhaseState& a = assigned[8 * e + gp];
            fe.noalias() += mesh.ip_weight * mesh.b_ops[gp].transpose() * (c * a.strain);
            fs.noalias() -= mesh.ip_weight * mesh.b_ops[gp].transpose() * a.stress;
        }
        for (int i = 0; i < 24; ++i) {
            rhs_e[dofs[i]] += fe[i];
            rhs_s[dofs[i]] += fs[i];
        }
    }

    ProjectionResult res;
    auto t1 = std::chrono::steady_clock::now();
    res.t_rhs_s = std::chrono::duration<double>(t1 - t0).count();
    res.u = sys.solve(rhs_e, /*homogeneous=*/false);
    res.eta = sys.solve(rhs_s, /*homogeneous=*/true);
    res.t_solve_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();

    res.states.resize(m);
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        auto dofs = mesh.element_dofs(e);
        Eigen::Matrix<double, 24, 1> ue, ee;
        for (int i = 0; i < 24; ++i) {
            ue[i] = res.u[dofs[i]];
            ee[i] = res.eta[dofs[i]];
        }
        for (int gp = 0; gp < 8; ++gp) {
            PhaseState& s = res.states[8 * e + gp];
            s.strain = mesh.b_ops[gp] * ue;
            s.stress = assigned[8 * e + gp].stress + c * (mesh.b_ops[gp] * ee);
        }
    }
    return res;
}

std::vector<Voigt6> integration_point_strains(const Mesh& mesh, const Eigen::VectorXd& u) {
    std::vector<Voigt6> strains(mesh.num_integration_points());
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        auto dofs = mesh.element_dofs(e);
        Eigen::Matrix<double, 24, 1> ue;
        for (int i = 0; i < 24; ++i) ue[i] = u[dofs[i]];
        for (int gp = 0; gp < 8; ++gp) strains[8 * e + gp] = mesh.b_ops[gp] * ue;
    }
    return strains;
}

ReferenceSolution reference_solution(const Mesh& mesh, const BoundaryConditions& bcs,
                                     const MaterialParams& p, int max_steps) {
    const int n = mesh.num_dofs();
    const auto& free = bcs.free_dofs;
    std::vector<int> dof_to_free(n, -1);
    for (std::size_t i = 0; i < free.size(); ++i) dof_to_free[free[i]] = static_cast<int>(i);

    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    for (int d = 0; d < n; ++d)
        if (bcs.is_constrained[d]) u[d] = bcs.constrained_value[d];

    auto residual_free = [&](const Eigen::VectorXd& uu) {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<int>(free.size()));
        for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
            auto dofs = mesh.element_dofs(e);
            Eigen::Matrix<double, 24, 1> ue;
            for (int i = 0; i < 24; ++i) ue[i] = uu[dofs[i]];
            for (int gp = 0; gp < 8; ++gp) {
                Voigt6 sig = eval_material(mesh.b_ops[gp] * ue, p);
                Eigen::Matrix<double, 24, 1> fe = mesh.ip_weight * mesh.b_ops[gp].transpose() * sig;
                for (int i = 0; i < 24; ++i) {
                    int fi = dof_to_free[dofs[i]];
                    if (fi >= 0) r[fi] += fe[i];
                }
            }
        }
        return r;
    };

    Eigen::VectorXd r = residual_free(u);
    const double r0 = r.norm();
    ReferenceSolution out;
    if (r0 == 0.0) {
        out.u = u;
        return out;
    }

    for (int step = 0; step < max_steps; ++step) {
        // Tangent assembly on free dofs.
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(mesh.elements.size() * 24 * 24);
        for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
            auto dofs = mesh.element_dofs(e);
            Eigen::Matrix<double, 24, 1> ue;
            for (int i = 0; i < 24; ++i) ue[i] = u[dofs[i]];
            Eigen::Matrix<double, 24, 24> kt = Eigen::Matrix<double, 24, 24>::Zero();
            for (int gp = 0; gp < 8; ++gp) {
                Mat6 d = material_tangent(mesh.b_ops[gp] * ue, p);
                kt.noalias() += mesh.ip_weight * mesh.b_ops[gp].transpose() * d * mesh.b_ops[gp];
            }
            for (int i = 0; i < 24; ++i) {
                int fi = dof_to_free[dofs[i]];
                if (fi < 0) continue;
                for (int j = 0; j < 24; ++j) {
                    int fj = dof_to_free[dofs[j]];
                    if (fj >= 0) trips.emplace_back(fi, fj, kt(i, j));
                }
            }
        }
        Eigen::SparseMatrix<double> kt(static_cast<int>(free.size()), static_cast<int>(free.size()));
        kt.setFromTriplets(trips.begin(), trips.end());
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(kt);
        if (ldlt.info() != Eigen::Success)
            throw SingularSystemError("tangent factorization failed");

        Eigen::VectorXd du = ldlt.solve(-r);
        for (std::size_t i = 0; i < free.size(); ++i) u[free[i]] += du[static_cast<int>(i)];
        ++out.newton_steps;

        r = residual_free(u);
        if (r.norm() <= 1e-8 * r0) {
            out.u = u;
            return out;
        }
    }
    throw ConvergenceError("reference_solution: Newton did not converge");
}

void write_displacements_csv(const Mesh& mesh, const Eigen::VectorXd& u,
                             const std::filesystem::path& path) {
    std::ofstream os(path);
    os << "x,y,z,ux,uy,uz\n";
    os.precision(17);
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        const auto& x = mesh.nodes[i];
        os << x.x() << ',' << x.y() << ',' << x.z() << ',' << u[3 * i] << ',' << u[3 * i + 1]
           << ',' << u[3 * i + 2] << '\n';
    }
}

void write_states_csv(std::span<const PhaseState> states, const std::filesystem::path& path) {
    std::ofstream os(path);
    os << "e11,e22,e33,g12,g13,g23,s11,s22,s33,s12,s13,s23\n";
    os.precision(17);
    for (const PhaseState& p : states) {
        for (int j = 0; j < 6; ++j) os << p.strain[j] << ',';
        for (int j = 0; j < 6; ++j) os << p.stress[j] << (j == 5 ? '\n' : ',');
    }
}

} // namespace ddm
