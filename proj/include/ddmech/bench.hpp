#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "ddmech/solver.hpp"

namespace ddm {

struct BackendSpec {
    std::string kind = "kd"; // linear | kd | kmeans | graph
    std::size_t leaf_size = 16;
    int branching = 4;          // k-means k
    std::size_t graph_k = 50;   // graph neighborhood size
    double builder_fd = 1.0;    // graph adjacency build accuracy
    std::uint64_t build_seed = 0;
    // Per-backend solver overrides used by backend-comparison grids.
    std::optional<double> fd_final;
    std::optional<std::uint64_t> f_s;
    std::string label;
};

std::unique_ptr<NnIndex> build_index(const MaterialDataset& data, const BackendSpec& spec,
                                     unsigned threads = 1);

struct ExperimentSpec {
    std::string experiment; // refinement-study | fd-sweep | kmeans-sweep | graph-sweep | backend-comparison
    std::filesystem::path out_dir;

    int mesh_elements = 5;
    double mesh_side = 10.0;
    double twist_deg = 2.0;
    MaterialParams material;
    double bounds_lo = -0.025;
    double bounds_hi = 0.025;

    std::vector<std::size_t> dataset_sizes{10000};
    std::vector<std::uint64_t> seeds{1};

    DdConfig solver;
    BackendSpec backend;
    std::vector<double> fd_grid;
    std::vector<std::size_t> graph_k_grid;
    std::vector<std::uint64_t> fs_grid;
    std::vector<BackendSpec> backends;
    std::optional<int> scatter_iteration;

    double fallback_metric_scale = 1000.0; // E0 * I when PCA fails
};

ExperimentSpec load_experiment_spec(const std::filesystem::path& json_path);

// Run CSV schema: iter,global_d2,t_assembly_s,t_rhs_s,t_solve_s,t_query_s,comparisons,hops,skips
void write_run_csv(const std::filesystem::path& path, std::span<const IterationRecord> records);
std::vector<IterationRecord> read_run_csv(const std::filesystem::path& path);

// Scatter CSV schema: point_id,final_de2,comparisons
void write_scatter_csv(const std::filesystem::path& path, std::span<const double> de2,
                       std::span<const std::uint64_t> comparisons);

// Executes the (variant x seed) grid; one CSV per run, failures recorded
// per-run without stopping the grid, then an aggregate of per-variant means.
void run_experiment(const ExperimentSpec& spec);

// Groups run CSVs of a directory by variant (filename prefix before "__run")
// and writes aggregate.csv with per-iteration means.
void write_aggregate(const std::filesystem::path& dir);
std::map<std::string, std::vector<IterationRecord>> aggregate_runs(const std::filesystem::path& dir);

} // namespace ddm
