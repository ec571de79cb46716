#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "ddmech/bench.hpp"
#include "ddmech/dataset.hpp"
#include "ddmech/nn/graph.hpp"
#include "ddmech/nn/kdtree.hpp"
#include "ddmech/nn/kmeans.hpp"
#include "ddmech/solver.hpp"

namespace {

int cmd_gen(std::size_t n, double lo, double hi, std::uint64_t seed,
            const std::string& out, bool csv) {
    ddm::MaterialParams mat;
    ddm::MaterialDataset d = ddm::sample_dataset(n, lo, hi, mat, seed);
    if (csv)
        ddm::save_dataset_csv(d, out);
    else
        ddm::save_dataset(d, out);
    std::cout << "wrote " << n << " points to " << out << '\n';
    return 0;
}

ddm::MaterialDataset load_any(const std::string& path) {
    if (std::filesystem::path(path).extension() == ".csv") return ddm::load_dataset_csv(path);
    return ddm::load_dataset(path);
}

int cmd_index(const std::string& data_path, const ddm::BackendSpec& spec,
              const std::string& out, unsigned threads) {
    ddm::MaterialDataset data = load_any(data_path);
    ddm::MetricC metric = ddm::pca_metric(data.points);
    data.bind_metric(metric);
    auto index = ddm::build_index(data, spec, threads);
    if (spec.kind == "kd")
        static_cast<ddm::KdTreeIndex*>(index.get())->save(out);
    else if (spec.kind == "kmeans")
        static_cast<ddm::KmeansTreeIndex*>(index.get())->save(out);
    else if (spec.kind == "graph")
        static_cast<ddm::KnnGraphIndex*>(index.get())->save(out);
    else
        throw std::runtime_error("backend '" + spec.kind + "' has no serialized form");
    std::cout << "built " << spec.kind << " index in " << index->build_seconds << " s, "
              << index->memory_bytes << " bytes, saved to " << out << '\n';
    return 0;
}

int cmd_solve(const std::string& config, const std::string& backend_kind,
              std::optional<double> fd_final, std::optional<std::uint64_t> seed,
              std::optional<unsigned> threads, const std::string& out) {
    ddm::ExperimentSpec spec = ddm::load_experiment_spec(config);
    if (!backend_kind.empty()) spec.backend.kind = backend_kind;
    if (fd_final) spec.solver.schedule.fd_final = *fd_final;
    if (seed) spec.seeds = {*seed};
    if (threads) spec.solver.threads = *threads;
    if (!out.empty()) spec.out_dir = out;
    spec.experiment = "refinement-study";
    spec.dataset_sizes.resize(1);
    ddm::run_experiment(spec);
    std::cout << "run CSVs written to " << spec.out_dir.string() << '\n';
    return 0;
}

int cmd_bench(const std::string& config, std::optional<unsigned> threads, const std::string& out) {
    ddm::ExperimentSpec spec = ddm::load_experiment_spec(config);
    if (threads) spec.solver.threads = *threads;
    if (!out.empty()) spec.out_dir = out;
    ddm::run_experiment(spec);
    std::cout << "experiment '" << spec.experiment << "' written to " << spec.out_dir.string() << '\n';
    return 0;
}

int cmd_report(const std::string& dir) {
    ddm::write_aggregate(dir);
    auto means = ddm::aggregate_runs(dir);
    for (const auto& [variant, recs] : means) {
        if (recs.empty()) continue;
        const ddm::IterationRecord& last = recs.back();
        std::cout << variant << ": " << recs.size() << " iterations, final d2 " << last.global_d2
                  << ", comparisons " << last.comparisons << '\n';
    }
    std::cout << "aggregate.csv written to " << dir << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"data-driven solver and nearest-neighbor benchmark tool"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "sample a material dataset");
    std::size_t gen_n = 10000;
    double gen_lo = -0.025, gen_hi = 0.025;
    std::uint64_t gen_seed = 0;
    std::string gen_out = "dataset.mdd";
    bool gen_csv = false;
    gen->add_option("--n", gen_n, "number of points");
    gen->add_option("--lo", gen_lo, "lower strain bound");
    gen->add_option("--hi", gen_hi, "upper strain bound");
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--out", gen_out, "output file (.mdd or .csv)");
    gen->add_flag("--csv", gen_csv, "write CSV instead of binary");

    // index
    auto* idx = app.add_subcommand("index", "build and serialize a search structure");
    std::string idx_data, idx_out = "index.bin";
    ddm::BackendSpec idx_spec;
    unsigned idx_threads = 1;
    idx->add_option("--data", idx_data, "dataset file")->required();
    idx->add_option("--backend", idx_spec.kind, "kd | kmeans | graph");
    idx->add_option("--leaf-size", idx_spec.leaf_size, "kd leaf bucket size");
    idx->add_option("--branching", idx_spec.branching, "k-means branching factor");
    idx->add_option("--graph-k", idx_spec.graph_k, "graph neighborhood size");
    idx->add_option("--builder-fd", idx_spec.builder_fd, "graph adjacency build accuracy");
    idx->add_option("--seed", idx_spec.build_seed, "build seed");
    idx->add_option("--threads", idx_threads, "build threads");
    idx->add_option("--out", idx_out, "output file");

    // solve
    auto* solve = app.add_subcommand("solve", "single data-driven run from a config");
    std::string solve_config, solve_backend, solve_out;
    std::optional<double> solve_fd;
    std::optional<std::uint64_t> solve_seed;
    std::optional<unsigned> solve_threads;
    solve->add_option("--config", solve_config, "experiment config (JSON)")->required();
    solve->add_option("--backend", solve_backend, "override backend kind");
    solve->add_option("--fd-final", solve_fd, "override final accuracy factor");
    solve->add_option("--seed", solve_seed, "override run seed");
    solve->add_option("--threads", solve_threads, "query threads");
    solve->add_option("--out", solve_out, "override output directory");

    // bench
    auto* bench = app.add_subcommand("bench", "run a full experiment grid");
    std::string bench_config, bench_out;
    std::optional<unsigned> bench_threads;
    bench->add_option("config", bench_config, "experiment config (JSON)")->required();
    bench->add_option("--threads", bench_threads, "query threads");
    bench->add_option("--out", bench_out, "override output directory");

    // report
    auto* report = app.add_subcommand("report", "aggregate run CSVs in a directory");
    std::string report_dir;
    report->add_option("dir", report_dir, "directory of run CSVs")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) return cmd_gen(gen_n, gen_lo, gen_hi, gen_seed, gen_out, gen_csv);
        if (*idx) return cmd_index(idx_data, idx_spec, idx_out, idx_threads);
        if (*solve)
            return cmd_solve(solve_config, solve_backend, solve_fd, solve_seed, solve_threads,
                             solve_out);
        if (*bench) return cmd_bench(bench_config, bench_threads, bench_out);
        if (*report) return cmd_report(report_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
