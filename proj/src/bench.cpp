#include "ddmech/bench.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "ddmech/dataset.hpp"
#include "ddmech/nn/graph.hpp"
#include "ddmech/nn/kdtree.hpp"
#include "ddmech/nn/kmeans.hpp"

namespace ddm {

namespace {
using nlohmann::json;

ConvergenceMode parse_convergence(const std::string& s) {
    if (s == "assignment-fixed-point") return ConvergenceMode::AssignmentFixedPoint;
    if (s == "stagnation") return ConvergenceMode::Stagnation;
    if (s == "max-iter") return ConvergenceMode::MaxIter;
    throw std::invalid_argument("unknown convergence mode: " + s);
}

BackendSpec parse_backend(const json& j) {
    BackendSpec b;
    b.kind = j.value("kind", b.kind);
    b.leaf_size = j.value("leaf_size", b.leaf_size);
    b.branching = j.value("k", b.branching);
    b.graph_k = j.value("graph_k", b.graph_k);
    b.builder_fd = j.value("builder_fd", b.builder_fd);
    b.build_seed = j.value("build_seed", b.build_seed);
    if (j.contains("fd_final")) b.fd_final = j["fd_final"].get<double>();
    if (j.contains("f_s")) b.f_s = j["f_s"].get<std::uint64_t>();
    b.label = j.value("label", std::string());
    return b;
}
} // namespace

std::unique_ptr<NnIndex> build_index(const MaterialDataset& data, const BackendSpec& spec,
                                     unsigned threads) {
    if (spec.kind == "linear") return std::make_unique<LinearIndex>(data);
    if (spec.kind == "kd") return std::make_unique<KdTreeIndex>(data, spec.leaf_size);
    if (spec.kind == "kmeans")
        return std::make_unique<KmeansTreeIndex>(data, spec.branching, spec.build_seed);
    if (spec.kind == "graph") {
        // Adjacency is copied out of the builder, so it can be transient.
        KmeansTreeIndex builder(data, spec.branching, spec.build_seed);
        return std::make_unique<KnnGraphIndex>(data, spec.graph_k, builder, spec.builder_fd,
                                               spec.build_seed, threads);
    }
    throw std::invalid_argument("unknown backend kind: " + spec.kind);
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& json_path) {
    std::ifstream is(json_path);
    if (!is) throw std::runtime_error("cannot open config: " + json_path.string());
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("malformed config " + json_path.string() + ": " + e.what());
    }

    ExperimentSpec s;
    s.experiment = j.value("experiment", std::string("refinement-study"));
    s.out_dir = j.value("output", std::string("out"));

    if (j.contains("mesh")) {
        s.mesh_elements = j["mesh"].value("elements", s.mesh_elements);
        s.mesh_side = j["mesh"].value("side_mm", s.mesh_side);
        s.twist_deg = j["mesh"].value("twist_deg", s.twist_deg);
    }
    if (j.contains("material")) {
        s.material.modulus = j["material"].value("modulus_mpa", s.material.modulus);
        s.material.alpha = j["material"].value("alpha", s.material.alpha);
    }
    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        if (d.contains("sizes")) s.dataset_sizes = d["sizes"].get<std::vector<std::size_t>>();
        if (d.contains("seeds")) s.seeds = d["seeds"].get<std::vector<std::uint64_t>>();
        if (d.contains("bounds")) {
            s.bounds_lo = d["bounds"][0].get<double>();
            s.bounds_hi = d["bounds"][1].get<double>();
        }
    }
    if (j.contains("solver")) {
        const auto& v = j["solver"];
        s.solver.max_iterations = v.value("max_iterations", s.solver.max_iterations);
        s.solver.schedule.fd_final = v.value("fd_final", s.solver.schedule.fd_final);
        s.solver.schedule.ramp_length = v.value("ramp_length", s.solver.schedule.ramp_length);
        s.solver.seed = v.value("seed", s.solver.seed);
        if (v.contains("convergence")) s.solver.convergence = parse_convergence(v["convergence"]);
        if (v.contains("f_s")) s.solver.f_s = v["f_s"].get<std::uint64_t>();
        s.solver.delta_skip = v.value("delta_skip", s.solver.delta_skip);
        s.solver.allow_heuristic_skip = v.value("allow_heuristic_skip", s.solver.allow_heuristic_skip);
        s.solver.delta_as_printed = v.value("delta_as_printed", s.solver.delta_as_printed);
        s.solver.threads = v.value("threads", s.solver.threads);
    }
    if (j.contains("backend")) s.backend = parse_backend(j["backend"]);
    if (j.contains("fd_grid")) s.fd_grid = j["fd_grid"].get<std::vector<double>>();
    if (j.contains("graph_k_grid")) s.graph_k_grid = j["graph_k_grid"].get<std::vector<std::size_t>>();
    if (j.contains("fs_grid")) s.fs_grid = j["fs_grid"].get<std::vector<std::uint64_t>>();
    if (j.contains("backends"))
        for (const auto& b : j["backends"]) s.backends.push_back(parse_backend(b));
    if (j.contains("scatter_iteration")) s.scatter_iteration = j["scatter_iteration"].get<int>();
    s.fallback_metric_scale = j.value("fallback_metric_scale", s.fallback_metric_scale);
    return s;
}

namespace {
constexpr const char* kRunHeader =
    "iter,global_d2,t_assembly_s,t_rhs_s,t_solve_s,t_query_s,comparisons,hops,skips";
}

void write_run_csv(const std::filesystem::path& path, std::span<const IterationRecord> records) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os << kRunHeader << '\n';
    os.precision(17);
    for (const IterationRecord& r : records)
        os << r.iter << ',' << r.global_d2 << ',' << r.t_assembly_s << ',' << r.t_rhs_s << ','
           << r.t_solve_s << ',' << r.t_query_s << ',' << r.comparisons << ',' << r.hops << ','
           << r.skips << '\n';
}

std::vector<IterationRecord> read_run_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != kRunHeader)
        throw std::runtime_error("bad run CSV header: " + path.string());
    std::vector<IterationRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        IterationRecord r;
        char comma;
        row >> r.iter >> comma >> r.global_d2 >> comma >> r.t_assembly_s >> comma >> r.t_rhs_s >>
            comma >> r.t_solve_s >> comma >> r.t_query_s >> comma >> r.comparisons >> comma >>
            r.hops >> comma >> r.skips;
        if (!row) throw std::runtime_error("bad run CSV row: " + path.string());
        out.push_back(r);
    }
    return out;
}

void write_scatter_csv(const std::filesystem::path& path, std::span<const double> de2,
                       std::span<const std::uint64_t> comparisons) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os << "point_id,final_de2,comparisons\n";
    os.precision(17);
    for (std::size_t i = 0; i < de2.size(); ++i)
        os << i << ',' << de2[i] << ',' << comparisons[i] << '\n';
}

namespace {

struct RunVariant {
    std::string label;
    std::size_t dataset_size;
    BackendSpec backend;
    ScheduleSpec schedule;
    std::optional<std::uint64_t> f_s;
};

std::string fmt_fd(double fd) {
    std::ostringstream os;
    os << fd;
    return os.str();
}

std::vector<RunVariant> expand_variants(const ExperimentSpec& s) {
    std::vector<RunVariant> vars;
    auto base_schedule = s.solver.schedule;

    if (s.experiment == "refinement-study") {
        for (std::size_t n : s.dataset_sizes)
            vars.push_back({"n" + std::to_string(n), n, s.backend, base_schedule, s.solver.f_s});
    } else if (s.experiment == "fd-sweep" || s.experiment == "kmeans-sweep") {
        BackendSpec b = s.backend;
        if (s.experiment == "kmeans-sweep") b.kind = "kmeans";
        std::vector<double> grid = s.fd_grid.empty()
                                       ? std::vector<double>{0.0, 0.2, 0.4, 0.6, 1.0}
                                       : s.fd_grid;
        for (double fd : grid) {
            ScheduleSpec sch = base_schedule;
            sch.fd_final = fd;
            vars.push_back({b.kind + "_fd" + fmt_fd(fd), s.dataset_sizes.front(), b, sch, s.solver.f_s});
        }
    } else if (s.experiment == "graph-sweep") {
        BackendSpec b = s.backend;
        b.kind = "graph";
        std::vector<std::size_t> kg = s.graph_k_grid.empty() ? std::vector<std::size_t>{b.graph_k}
                                                             : s.graph_k_grid;
        std::vector<std::optional<std::uint64_t>> fs;
        if (s.fs_grid.empty())
            fs.push_back(s.solver.f_s);
        else
            for (auto v : s.fs_grid) fs.emplace_back(v);
        for (std::size_t k : kg)
            for (const auto& f : fs) {
                BackendSpec bk = b;
                bk.graph_k = k;
                std::string lbl = "graph_k" + std::to_string(k);
                if (f) lbl += "_fs" + std::to_string(*f);
                vars.push_back({lbl, s.dataset_sizes.front(), bk, base_schedule, f});
            }
    } else if (s.experiment == "backend-comparison") {
        int idx = 0;
        for (const BackendSpec& b : s.backends) {
            ScheduleSpec sch = base_schedule;
            if (b.fd_final) sch.fd_final = *b.fd_final;
            std::string lbl = b.label.empty() ? b.kind + std::to_string(idx) : b.label;
            vars.push_back({lbl, s.dataset_sizes.front(), b, sch, b.f_s ? b.f_s : s.solver.f_s});
            ++idx;
        }
    } else {
        throw std::invalid_argument("unknown experiment: " + s.experiment);
    }
    return vars;
}

} // namespace

void run_experiment(const ExperimentSpec& spec) {
    std::filesystem::create_directories(spec.out_dir);
    Mesh mesh = build_mesh(spec.mesh_side, spec.mesh_elements);
    BoundaryConditions bcs = twist_bcs(mesh, spec.twist_deg);

    for (const RunVariant& var : expand_variants(spec)) {
        for (std::uint64_t seed : spec.seeds) {
            std::string run_name = var.label + "__run" + std::to_string(seed);
            try {
                MaterialDataset data =
                    sample_dataset(var.dataset_size, spec.bounds_lo, spec.bounds_hi, spec.material, seed);
                MetricC metric = [&] {
                    try {
                        return pca_metric(data.points);
                    } catch (const MetricConstructionError&) {
                        return MetricC::identity_scaled(spec.fallback_metric_scale);
                    }
                }();
                data.bind_metric(metric);
                auto index = build_index(data, var.backend, spec.solver.threads);

                DdConfig cfg = spec.solver;
                cfg.schedule = var.schedule;
                cfg.f_s = var.f_s;
                cfg.seed = seed;
                if (spec.scatter_iteration) cfg.scatter_iteration = spec.scatter_iteration;

                DdResult res = dd_solve(mesh, bcs, metric, data, *index, cfg);
                write_run_csv(spec.out_dir / (run_name + ".csv"), res.state.records);
                if (spec.scatter_iteration && !res.state.scatter_de2.empty())
                    write_scatter_csv(spec.out_dir / (run_name + "_scatter.csv"),
                                      res.state.scatter_de2, res.state.scatter_comparisons);
            } catch (const std::exception& e) {
                // A failed run must not stop the grid; record it and continue.
                std::ofstream err(spec.out_dir / (run_name + ".error.txt"));
                err << e.what() << '\n';
                std::cerr << "run " << run_name << " failed: " << e.what() << '\n';
            }
        }
    }
    write_aggregate(spec.out_dir);
}

std::map<std::string, std::vector<IterationRecord>> aggregate_runs(const std::filesystem::path& dir) {
    std::map<std::string, std::vector<std::vector<IterationRecord>>> groups;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        if (entry.path().extension() != ".csv") continue;
        auto pos = name.find("__run");
        if (pos == std::string::npos || name.find("_scatter") != std::string::npos) continue;
        groups[name.substr(0, pos)].push_back(read_run_csv(entry.path()));
    }

    std::map<std::string, std::vector<IterationRecord>> means;
    for (auto& [variant, runs] : groups) {
        std::size_t iters = 0;
        for (const auto& r : runs) iters = std::max(iters, r.size());
        std::vector<IterationRecord> agg(iters);
        for (std::size_t i = 0; i < iters; ++i) {
            double cnt = 0, d2 = 0, ta = 0, tr = 0, ts = 0, tq = 0, cmp = 0, hops = 0, skips = 0;
            for (const auto& r : runs) {
                if (i >= r.size()) continue;
                ++cnt;
                d2 += r[i].global_d2;
                ta += r[i].t_assembly_s;
                tr += r[i].t_rhs_s;
                ts += r[i].t_solve_s;
                tq += r[i].t_query_s;
                cmp += static_cast<double>(r[i].comparisons);
                hops += static_cast<double>(r[i].hops);
                skips += static_cast<double>(r[i].skips);
            }
            IterationRecord& a = agg[i];
            a.iter = static_cast<int>(i + 1);
            a.global_d2 = d2 / cnt;
            a.t_assembly_s = ta / cnt;
            a.t_rhs_s = tr / cnt;
            a.t_solve_s = ts / cnt;
            a.t_query_s = tq / cnt;
            a.comparisons = static_cast<std::uint64_t>(cmp / cnt + 0.5);
            a.hops = static_cast<std::uint64_t>(hops / cnt + 0.5);
            a.skips = static_cast<std::uint64_t>(skips / cnt + 0.5);
        }
        means[variant] = std::move(agg);
    }
    return means;
}

void write_aggregate(const std::filesystem::path& dir) {
    auto means = aggregate_runs(dir);
    std::ofstream os(dir / "aggregate.csv");
    os << "variant," << kRunHeader << '\n';
    os.precision(17);
    for (const auto& [variant, recs] : means)
        for (const IterationRecord& r : recs)
            os << variant << ',' << r.iter << ',' << r.global_d2 << ',' << r.t_assembly_s << ','
               << r.t_rhs_s << ',' << r.t_solve_s << ',' << r.t_query_s << ',' << r.comparisons
               << ',' << r.hops << ',' << r.skips << '\n';
}

} // namespace ddm
