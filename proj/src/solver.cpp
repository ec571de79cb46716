#include "ddmech/solver.hpp"

#include <chrono>
#include <cmath>

#include "ddmech/parallel.hpp"
#include "ddmech/rng.hpp"

namespace ddm {

namespace {
double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}
} // namespace

double schedule_fd(const ScheduleSpec& s, int iteration) {
    if (iteration < 1) throw std::invalid_argument("schedule_fd: iteration must be >= 1");
    if (s.ramp_length <= 1) return s.fd_final;
    double ramp = s.fd_final * static_cast<double>(iteration - 1) / (s.ramp_length - 1);
    return std::min(s.fd_final, ramp);
}

bool convergence_check(const std::vector<std::vector<std::size_t>>& assignment_history,
                       const std::vector<double>& d2_history, ConvergenceMode mode) {
    switch (mode) {
        case ConvergenceMode::AssignmentFixedPoint: {
            std::size_t n = assignment_history.size();
            return n >= 2 && assignment_history[n - 1] == assignment_history[n - 2];
        }
        case ConvergenceMode::Stagnation: {
            // No relative decrease better than 1e-10 over a window of 3.
            std::size_t n = d2_history.size();
            if (n < 4) return false;
            double ref = d2_history[n - 4];
            double now = d2_history[n - 1];
            return !(now < ref * (1.0 - 1e-10));
        }
        case ConvergenceMode::MaxIter:
            return false;
    }
    return false;
}

DdResult dd_solve(const Mesh& mesh, const BoundaryConditions& bcs, const MetricC& metric,
                  const MaterialDataset& data, const NnIndex& index, const DdConfig& cfg) {
    if (data.size() == 0) throw EmptyDatasetError("dd_solve: empty dataset");
    if (&index.dataset() != &data)
        throw std::invalid_argument("dd_solve: index not built over the given dataset");

    const std::size_t m = mesh.num_integration_points();
    DdResult out;
    DdState& st = out.state;

    // Random initial association of integration points with data points,
    // unless a starting association is supplied.
    st.assignments.resize(m);
    if (cfg.initial_assignments) {
        if (cfg.initial_assignments->size() != m)
            throw std::invalid_argument("dd_solve: initial assignment size mismatch");
        for (std::size_t id : *cfg.initial_assignments)
            if (id >= data.size()) throw std::invalid_argument("dd_solve: initial assignment out of range");
        st.assignments = *cfg.initial_assignments;
    } else {
        Rng rng(cfg.seed);
        for (std::size_t e = 0; e < m; ++e) st.assignments[e] = rng.next_below(data.size());
    }
    st.last_results.assign(m, QueryResult{});
    st.final_de2.assign(m, 0.0);
    st.final_comparisons.assign(m, 0);
    std::vector<Mapped12> prev_queries(m, Mapped12::Zero());
    std::vector<char> has_prev(m, 0);

    auto t_asm0 = std::chrono::steady_clock::now();
    SystemMatrices sys(mesh, bcs, metric);
    double t_assembly = seconds_since(t_asm0);

    const std::vector<double> weights(m, mesh.ip_weight);
    Eigen::VectorXd forces; // zero: displacement-driven problem

    std::vector<std::vector<std::size_t>> assignment_history;
    std::vector<double> d2_history;
    std::vector<PhaseState> assigned(m);

    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        IterationRecord rec;
        rec.iter = iter;
        rec.t_assembly_s = iter == 1 ? t_assembly : 0.0;
        rec.f_d = schedule_fd(cfg.schedule, iter);

        for (std::size_t e = 0; e < m; ++e) assigned[e] = data.points[st.assignments[e]];

        // P_C: right-hand sides and the two solves on the shared factorization.
        ProjectionResult proj = project_constraint(sys, mesh, bcs, metric, assigned, forces);
        rec.t_rhs_s = proj.t_rhs_s;
        rec.t_solve_s = proj.t_solve_s;

        st.constraint_states = std::move(proj.states);

        // P_D: one nearest-neighbor query per integration point.
        auto t0 = std::chrono::steady_clock::now();
        parallel_for(m, cfg.threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t e = begin; e < end; ++e) {
                Mapped12 q = metric.map_point(st.constraint_states[e]);

                bool skippable = cfg.delta_skip && has_prev[e] && st.last_results[e].second_dist_sq &&
                                 (st.last_results[e].second_is_exact || cfg.allow_heuristic_skip);
                if (skippable &&
                    should_skip(st.last_results[e], prev_queries[e], q, cfg.delta_as_printed)) {
                    QueryResult r = st.last_results[e];
                    r.comparisons = 0;
                    r.hops = 0;
                    r.skipped = true;
                    r.best_dist_sq = (q - data.mapped_at(r.best_id)).squaredNorm();
                    // Keep the runner-up bound valid across chained skips: any
                    // other point can have come closer by at most the movement.
                    double move = (q - prev_queries[e]).norm();
                    double d2 = std::max(0.0, std::sqrt(*r.second_dist_sq) - move);
                    r.second_dist_sq = d2 * d2;
                    st.last_results[e] = r;
                } else {
                    QueryParams qp;
                    qp.f_d = rec.f_d;
                    qp.f_s = cfg.f_s;
                    qp.warm_start = st.assignments[e];
                    st.last_results[e] = index.query(q, qp);
                }
                prev_queries[e] = q;
                has_prev[e] = 1;
                st.assignments[e] = st.last_results[e].best_id;
                st.final_de2[e] = st.last_results[e].best_dist_sq;
                st.final_comparisons[e] = st.last_results[e].comparisons;
            }
        });
        rec.t_query_s = seconds_since(t0);
        for (std::size_t e = 0; e < m; ++e) {
            rec.comparisons += st.last_results[e].comparisons;
            rec.hops += st.last_results[e].hops;
            rec.skips += st.last_results[e].skipped ? 1 : 0;
        }

        for (std::size_t e = 0; e < m; ++e) assigned[e] = data.points[st.assignments[e]];
        rec.global_d2 = global_distance_sq(st.constraint_states, assigned, weights, metric);

        if (cfg.scatter_iteration && *cfg.scatter_iteration == iter) {
            st.scatter_de2 = st.final_de2;
            st.scatter_comparisons = st.final_comparisons;
        }

        st.records.push_back(rec);
        assignment_history.push_back(st.assignments);
        d2_history.push_back(rec.global_d2);

        if (convergence_check(assignment_history, d2_history, cfg.convergence)) {
            out.converged = true;
            break;
        }
    }
    return out;
}

} // namespace ddm
