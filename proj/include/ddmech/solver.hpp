#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddmech/fem.hpp"
#include "ddmech/nn/index.hpp"

namespace ddm {

enum class ConvergenceMode { AssignmentFixedPoint, Stagnation, MaxIter };

struct ScheduleSpec {
    double fd_final = 1.0; // f_d^f
    int ramp_length = 1;   // iterations of the linear ramp; 1 = constant
};

struct DdConfig {
    int max_iterations = 30;
    ScheduleSpec schedule;
    std::uint64_t seed = 0;
    ConvergenceMode convergence = ConvergenceMode::Stagnation;
    std::optional<std::uint64_t> f_s;     // graph step bound
    bool delta_skip = false;              // Eq.-style moving-query skips
    bool allow_heuristic_skip = false;    // accept approximate runner-up distances
    bool delta_as_printed = false;        // reversed-sign variant, never fires
    unsigned threads = 1;
    std::optional<int> scatter_iteration; // capture per-point stats at this iteration
    // Replaces the seeded random initial association when set (warm restart).
    std::optional<std::vector<std::size_t>> initial_assignments;
};

struct IterationRecord {
    int iter = 0;
    double global_d2 = 0.0;
    double t_assembly_s = 0.0; // K assembly + factorization (iteration 1 only)
    double t_rhs_s = 0.0;
    double t_solve_s = 0.0;
    double t_query_s = 0.0;
    std::uint64_t comparisons = 0;
    std::uint64_t hops = 0;
    std::uint64_t skips = 0;
    double f_d = 0.0;
};

struct DdState {
    std::vector<std::size_t> assignments;        // per integration point
    std::vector<PhaseState> constraint_states;   // y from the last P_C
    std::vector<QueryResult> last_results;       // per-point previous query
    std::vector<IterationRecord> records;
    // Per-point statistics of the most recent iteration (scatter export).
    std::vector<double> final_de2;
    std::vector<std::uint64_t> final_comparisons;
    // Snapshot taken at DdConfig::scatter_iteration, if requested and reached.
    std::vector<double> scatter_de2;
    std::vector<std::uint64_t> scatter_comparisons;
};

// Linear accuracy ramp: f_d(i) = min(f_d^f, f_d^f * (i-1)/(ramp-1)).
double schedule_fd(const ScheduleSpec& s, int iteration);

bool convergence_check(const std::vector<std::vector<std::size_t>>& assignment_history,
                       const std::vector<double>& d2_history, ConvergenceMode mode);

struct DdResult {
    DdState state;
    bool converged = false;
};

// Fixed-point iteration z_{i+1} = P_D(P_C(z_i)): random initial assignments,
// then alternating constraint projection (linear solves on the once-factorized
// K) and per-integration-point nearest-neighbor queries with the scheduled
// accuracy, warm starts, and optional moving-query skips.
DdResult dd_solve(const Mesh& mesh, const BoundaryConditions& bcs, const MetricC& metric,
                  const MaterialDataset& data, const NnIndex& index, const DdConfig& cfg);

} // namespace ddm
