#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ddmech/bench.hpp"

using namespace ddm;

namespace {
std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}
} // namespace

TEST_CASE("run CSV round trip") {
    std::vector<IterationRecord> recs(3);
    for (int i = 0; i < 3; ++i) {
        recs[i].iter = i + 1;
        recs[i].global_d2 = 10.0 / (i + 1) + 1e-13;
        recs[i].t_assembly_s = i == 0 ? 0.25 : 0.0;
        recs[i].t_rhs_s = 0.001 * (i + 1);
        recs[i].t_solve_s = 0.002;
        recs[i].t_query_s = 0.5;
        recs[i].comparisons = 1000 + 7ull * i;
        recs[i].hops = 3ull * i;
        recs[i].skips = static_cast<std::uint64_t>(i);
    }
    auto dir = temp_dir("bench_rt");
    write_run_csv(dir / "a__run1.csv", recs);
    auto back = read_run_csv(dir / "a__run1.csv");
    REQUIRE(back.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(back[i].iter == recs[i].iter);
        CHECK(back[i].global_d2 == recs[i].global_d2);
        CHECK(back[i].comparisons == recs[i].comparisons);
        CHECK(back[i].hops == recs[i].hops);
        CHECK(back[i].skips == recs[i].skips);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("aggregate equals recomputed means") {
    auto dir = temp_dir("bench_agg");
    std::vector<IterationRecord> r1(2), r2(2);
    for (int i = 0; i < 2; ++i) {
        r1[i].iter = r2[i].iter = i + 1;
        r1[i].global_d2 = 4.0 + i;
        r2[i].global_d2 = 6.0 + i;
        r1[i].comparisons = 100;
        r2[i].comparisons = 200;
    }
    write_run_csv(dir / "v__run1.csv", r1);
    write_run_csv(dir / "v__run2.csv", r2);
    write_run_csv(dir / "other__run1.csv", r1);

    auto means = aggregate_runs(dir);
    REQUIRE(means.count("v") == 1);
    REQUIRE(means.count("other") == 1);
    REQUIRE(means["v"].size() == 2);
    CHECK(means["v"][0].global_d2 == doctest::Approx(5.0));
    CHECK(means["v"][1].global_d2 == doctest::Approx(6.0));
    CHECK(means["v"][0].comparisons == 150);
    CHECK(means["other"][0].global_d2 == doctest::Approx(4.0));

    write_aggregate(dir);
    CHECK(std::filesystem::exists(dir / "aggregate.csv"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("experiment spec parsing") {
    auto dir = temp_dir("bench_cfg");
    auto cfg = dir / "cfg.json";
    {
        std::ofstream os(cfg);
        os << R"({
            "experiment": "fd-sweep",
            "output": ")" << (dir / "out").string() << R"(",
            "mesh": {"elements": 2, "side_mm": 10.0, "twist_deg": 2.0},
            "dataset": {"sizes": [500], "seeds": [1, 2], "bounds": [-0.02, 0.02]},
            "solver": {"max_iterations": 7, "convergence": "max-iter", "fd_final": 0.4,
                       "ramp_length": 3, "threads": 2},
            "backend": {"kind": "kd", "leaf_size": 8},
            "fd_grid": [0.0, 1.0],
            "scatter_iteration": 2
        })";
    }
    ExperimentSpec s = load_experiment_spec(cfg);
    CHECK(s.experiment == "fd-sweep");
    CHECK(s.mesh_elements == 2);
    CHECK(s.dataset_sizes == std::vector<std::size_t>{500});
    CHECK(s.seeds == std::vector<std::uint64_t>{1, 2});
    CHECK(s.bounds_lo == -0.02);
    CHECK(s.solver.max_iterations == 7);
    CHECK(s.solver.convergence == ConvergenceMode::MaxIter);
    CHECK(s.solver.schedule.fd_final == 0.4);
    CHECK(s.backend.leaf_size == 8);
    CHECK(s.fd_grid == std::vector<double>{0.0, 1.0});
    REQUIRE(s.scatter_iteration.has_value());
    CHECK(*s.scatter_iteration == 2);

    auto bad = dir / "bad.json";
    std::ofstream(bad) << "{ not json";
    CHECK_THROWS(load_experiment_spec(bad));
    std::filesystem::remove_all(dir);
}

TEST_CASE("refinement grid produces one CSV per run plus an aggregate") {
    auto out = temp_dir("bench_grid");
    ExperimentSpec s;
    s.experiment = "refinement-study";
    s.out_dir = out;
    s.mesh_elements = 1;
    s.dataset_sizes = {200, 400};
    s.seeds = {1, 2, 3};
    s.solver.max_iterations = 4;
    s.solver.convergence = ConvergenceMode::MaxIter;
    s.backend.kind = "kd";
    run_experiment(s);

    int run_csvs = 0;
    for (const auto& e : std::filesystem::directory_iterator(out))
        if (e.path().filename().string().find("__run") != std::string::npos) ++run_csvs;
    CHECK(run_csvs == 6);
    CHECK(std::filesystem::exists(out / "aggregate.csv"));

    auto means = aggregate_runs(out);
    CHECK(means.size() == 2);
    for (const auto& [variant, recs] : means) CHECK(recs.size() == 4);

    // deterministic: rerunning a run reproduces its CSV byte for byte
    auto before = read_run_csv(out / "n200__run1.csv");
    run_experiment(s);
    auto after = read_run_csv(out / "n200__run1.csv");
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(before[i].global_d2 == after[i].global_d2);
        CHECK(before[i].comparisons == after[i].comparisons);
    }
    std::filesystem::remove_all(out);
}

TEST_CASE("scatter CSV") {
    auto dir = temp_dir("bench_scatter");
    std::vector<double> de2{0.5, 0.25};
    std::vector<std::uint64_t> cmp{10, 20};
    write_scatter_csv(dir / "s.csv", de2, cmp);
    std::ifstream is(dir / "s.csv");
    std::string line;
    std::getline(is, line);
    CHECK(line == "point_id,final_de2,comparisons");
    std::getline(is, line);
    CHECK(line == "0,0.5,10");
    std::filesystem::remove_all(dir);
}

TEST_CASE("backend factory") {
    MaterialParams mp;
    MaterialDataset d = sample_dataset(300, -0.025, 0.025, mp, 1);
    d.bind_metric(pca_metric(d.points));

    for (const char* kind : {"linear", "kd", "kmeans", "graph"}) {
        BackendSpec b;
        b.kind = kind;
        b.graph_k = 10;
        auto idx = build_index(d, b);
        QueryParams qp;
        qp.warm_start = 5; // makes the graph search start at the target
        QueryResult r = idx->query(d.mapped_at(5), qp);
        CHECK(r.best_dist_sq == 0.0);
    }
    BackendSpec bad;
    bad.kind = "nope";
    CHECK_THROWS_AS(build_index(d, bad), std::invalid_argument);
}
