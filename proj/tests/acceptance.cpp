// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails.

#include <cstdio>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "ddmech/bench.hpp"
#include "ddmech/dataset.hpp"
#include "ddmech/material.hpp"
#include "ddmech/nn/graph.hpp"
#include "ddmech/nn/kdtree.hpp"
#include "ddmech/nn/kmeans.hpp"
#include "ddmech/solver.hpp"
#include "helpers.hpp"

using namespace ddm;

namespace {

constexpr unsigned kThreads = 8;

MaterialDataset make_bound_dataset(std::size_t n, std::uint64_t seed) {
    MaterialParams p;
    MaterialDataset d = sample_dataset(n, -0.025, 0.025, p, seed);
    d.bind_metric(pca_metric(d.points));
    return d;
}

struct Check {
    bool ok = true;
    std::string detail;
    void require(bool cond, const std::string& msg) {
        if (!cond && ok) {
            ok = false;
            detail = msg;
        }
    }
};

// 1. kd and k-means at f_d = 1 match the linear-scan oracle.
bool criterion1(Check& c) {
    for (int ds = 0; ds < 20; ++ds) {
        MaterialDataset d = make_bound_dataset(10000, 1000 + ds);
        KdTreeIndex kd(d, 16);
        KmeansTreeIndex km(d, 4, 0);
        LinearIndex lin(d);
        Rng rng(ds);
        for (int t = 0; t < 50; ++t) {
            Mapped12 q = d.mapped_at(rng.next_below(d.size()));
            for (int j = 0; j < 12; ++j) q[j] += rng.uniform(-0.1, 0.1);
            QueryParams qp;
            qp.f_d = 1.0;
            double ref = lin.query(q, QueryParams{}).best_dist_sq;
            double dk = kd.query(q, qp).best_dist_sq;
            double dm = km.query(q, qp).best_dist_sq;
            c.require(std::abs(dk - ref) <= 1e-12 * std::max(ref, 1e-300), "kd mismatch");
            c.require(std::abs(dm - ref) <= 1e-12 * std::max(ref, 1e-300), "kmeans mismatch");
        }
    }
    return c.ok;
}

// 2. Monotone descent and assignment fixed point with the exact backend.
bool criterion2(Check& c) {
    Mesh mesh = build_mesh(10.0, 5);
    BoundaryConditions bcs = twist_bcs(mesh, 2.0);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        MaterialDataset d = make_bound_dataset(10000, seed);
        MetricC metric = pca_metric(d.points);
        LinearIndex index(d);
        DdConfig cfg;
        cfg.max_iterations = 100;
        cfg.convergence = ConvergenceMode::AssignmentFixedPoint;
        cfg.seed = seed;
        cfg.threads = kThreads;
        DdResult r = dd_solve(mesh, bcs, metric, d, index, cfg);
        c.require(r.converged, "no assignment fixed point within 100 iterations");
        const auto& recs = r.state.records;
        for (std::size_t i = 1; i < recs.size(); ++i)
            c.require(recs[i].global_d2 <= recs[i - 1].global_d2 * (1.0 + 1e-12),
                      "global d2 increased at iteration " + std::to_string(i + 1));
    }
    return c.ok;
}

// 3. Mean remaining d2 after 30 iterations strictly decreases with N.
bool criterion3(Check& c) {
    Mesh mesh = build_mesh(10.0, 5);
    BoundaryConditions bcs = twist_bcs(mesh, 2.0);
    double prev_mean = std::numeric_limits<double>::infinity();
    for (std::size_t n : {1000, 10000, 100000}) {
        double sum = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            MaterialDataset d = make_bound_dataset(n, 10 * seed + n % 7);
            MetricC metric = pca_metric(d.points);
            KdTreeIndex index(d, 16); // exact at f_d = 1
            DdConfig cfg;
            cfg.max_iterations = 30;
            cfg.convergence = ConvergenceMode::MaxIter;
            cfg.seed = seed;
            cfg.threads = kThreads;
            DdResult r = dd_solve(mesh, bcs, metric, d, index, cfg);
            sum += r.state.records.back().global_d2;
        }
        double mean = sum / 5.0;
        c.require(mean < prev_mean,
                  "mean d2 did not decrease at N = " + std::to_string(n) + " (" +
                      std::to_string(mean) + " vs " + std::to_string(prev_mean) + ")");
        prev_mean = mean;
    }
    return c.ok;
}

// 4. Rank correlation between per-point distance and comparison count.
bool criterion4(Check& c) {
    Mesh mesh = build_mesh(10.0, 5);
    BoundaryConditions bcs = twist_bcs(mesh, 2.0);
    MaterialDataset d = make_bound_dataset(100000, 4);
    MetricC metric = pca_metric(d.points);
    KdTreeIndex index(d, 16);
    DdConfig cfg;
    cfg.max_iterations = 5;
    cfg.convergence = ConvergenceMode::MaxIter;
    cfg.threads = kThreads;
    cfg.scatter_iteration = 5;
    DdResult r = dd_solve(mesh, bcs, metric, d, index, cfg);

    std::vector<double> de2(r.state.scatter_de2.begin(), r.state.scatter_de2.end());
    std::vector<double> cmp;
    for (std::uint64_t v : r.state.scatter_comparisons) cmp.push_back(static_cast<double>(v));
    double rho = testhelp::spearman(de2, cmp);
    std::printf("    spearman rho = %.3f\n", rho);
    c.require(rho > 0.5, "spearman " + std::to_string(rho) + " <= 0.5");
    return c.ok;
}

// 5. Comparisons and recall both non-decreasing in f_d; k-means cheaper than
// kd at f_d = 1.
bool criterion5(Check& c) {
    Mesh mesh = build_mesh(10.0, 5);
    BoundaryConditions bcs = twist_bcs(mesh, 2.0);
    MaterialDataset d = make_bound_dataset(10000, 5);
    MetricC metric = pca_metric(d.points);
    LinearIndex oracle(d);
    KdTreeIndex kd(d, 16);
    KmeansTreeIndex km(d, 4, 0);

    auto run = [&](const NnIndex& index, double fd, std::uint64_t& total, double& recall) {
        DdConfig cfg;
        cfg.max_iterations = 30;
        cfg.convergence = ConvergenceMode::MaxIter;
        cfg.schedule.fd_final = fd;
        cfg.threads = kThreads;
        DdResult r = dd_solve(mesh, bcs, metric, d, index, cfg);
        total = 0;
        for (const auto& rec : r.state.records) total += rec.comparisons;
        std::size_t hits = 0;
        const auto& st = r.state;
        for (std::size_t e = 0; e < st.final_de2.size(); ++e) {
            Mapped12 q = metric.map_point(st.constraint_states[e]);
            double exact = oracle.query(q, QueryParams{}).best_dist_sq;
            if (st.final_de2[e] <= exact * (1.0 + 1e-12) + 1e-300) ++hits;
        }
        recall = static_cast<double>(hits) / static_cast<double>(st.final_de2.size());
    };

    std::uint64_t kd_exact_total = 0, km_exact_total = 0;
    for (const auto& [name, index] :
         std::vector<std::pair<std::string, const NnIndex*>>{{"kd", &kd}, {"kmeans", &km}}) {
        std::uint64_t prev_total = 0;
        double prev_recall = -1.0;
        for (double fd : {0.0, 0.2, 0.4, 0.6, 1.0}) {
            std::uint64_t total = 0;
            double recall = 0.0;
            run(*index, fd, total, recall);
            std::printf("    %s f_d=%.1f comparisons=%llu recall=%.4f\n", name.c_str(), fd,
                        static_cast<unsigned long long>(total), recall);
            c.require(total >= prev_total, name + " comparisons decreased at f_d");
            c.require(recall >= prev_recall, name + " recall decreased at f_d");
            prev_total = total;
            prev_recall = recall;
            if (fd == 1.0) (name == "kd" ? kd_exact_total : km_exact_total) = total;
        }
    }
    c.require(km_exact_total < kd_exact_total, "kmeans exact not cheaper than kd exact");
    return c.ok;
}

struct GraphSetup {
    Mesh mesh = build_mesh(10.0, 5);
    BoundaryConditions bcs;
    MaterialDataset data;
    MetricC metric;
    std::unique_ptr<KnnGraphIndex> graph;
    GraphSetup() : bcs(twist_bcs(mesh, 2.0)), data(make_bound_dataset(100000, 6)),
                   metric(pca_metric(data.points)) {
        KmeansTreeIndex builder(data, 4, 0);
        graph = std::make_unique<KnnGraphIndex>(data, 50, builder, 1.0, 0, kThreads);
    }
};

// 6. Warm starts cut the mean hop count over the iterations.
bool criterion6(Check& c, GraphSetup& g) {
    DdConfig cfg;
    cfg.max_iterations = 10;
    cfg.convergence = ConvergenceMode::MaxIter;
    cfg.threads = kThreads;
    DdResult r = dd_solve(g.mesh, g.bcs, g.metric, g.data, *g.graph, cfg);
    double h1 = static_cast<double>(r.state.records.front().hops);
    double h10 = static_cast<double>(r.state.records.back().hops);
    std::printf("    mean hops per query: iter 1 = %.2f, iter 10 = %.2f\n", h1 / 1000.0,
                h10 / 1000.0);
    c.require(h10 < 0.5 * h1, "warm starts did not halve the hop count");
    return c.ok;
}

// 7. A tight step bound reduces total comparisons.
bool criterion7(Check& c, GraphSetup& g) {
    auto total_for = [&](std::uint64_t fs) {
        DdConfig cfg;
        cfg.max_iterations = 10;
        cfg.convergence = ConvergenceMode::MaxIter;
        cfg.f_s = fs;
        cfg.threads = kThreads;
        DdResult r = dd_solve(g.mesh, g.bcs, g.metric, g.data, *g.graph, cfg);
        std::uint64_t total = 0;
        for (const auto& rec : r.state.records) total += rec.comparisons;
        return total;
    };
    std::uint64_t t1 = total_for(1), t10 = total_for(10);
    std::printf("    comparisons: f_s=1 %llu, f_s=10 %llu (reduction %.1f%%)\n",
                static_cast<unsigned long long>(t1), static_cast<unsigned long long>(t10),
                100.0 * (1.0 - static_cast<double>(t1) / static_cast<double>(t10)));
    c.require(t1 < t10, "f_s = 1 not cheaper than f_s = 10");
    return c.ok;
}

// 8. The moving-query skip rule never invalidates the nearest neighbor.
bool criterion8(Check& c) {
    Rng rng(8);
    int fired = 0;
    for (int t = 0; t < 10000; ++t) {
        MaterialDataset d = make_bound_dataset(100, 5000 + t % 64);
        LinearIndex lin(d);
        Mapped12 q0 = d.mapped_at(rng.next_below(d.size()));
        for (int j = 0; j < 12; ++j) q0[j] += rng.uniform(-0.2, 0.2);
        QueryResult r0 = lin.query(q0, QueryParams{});
        Mapped12 q1 = q0;
        for (int j = 0; j < 12; ++j) q1[j] += rng.uniform(-0.05, 0.05);
        if (should_skip(r0, q0, q1)) {
            ++fired;
            double kept = (q1 - d.mapped_at(r0.best_id)).squaredNorm();
            double exact = lin.query(q1, QueryParams{}).best_dist_sq;
            c.require(kept <= exact * (1.0 + 1e-12) + 1e-300, "skip kept a non-nearest point");
        }
    }
    std::printf("    skip rule fired on %d of 10000 trials, zero violations required\n", fired);
    c.require(fired > 0, "skip rule never fired; test vacuous");
    return c.ok;
}

// 9. Material and FEM regressions.
bool criterion9(Check& c) {
    MaterialParams p;
    Voigt6 eps = Voigt6::Zero();
    eps[0] = 0.01;
    Voigt6 sig = eval_material(eps, p);
    c.require(std::abs(sig[0] - 15.75) <= 1e-12 * 15.75, "sigma11 hand value");
    c.require(std::abs(sig[1] - 5.25) <= 1e-12 * 5.25, "sigma22 hand value");

    Mesh mesh = build_mesh(10.0, 3);
    Eigen::Matrix3d a;
    a << 1e-3, 4e-4, -2e-4, 4e-4, -5e-4, 3e-4, -2e-4, 3e-4, 8e-4;
    Eigen::VectorXd u(mesh.num_dofs());
    for (int n = 0; n < mesh.num_nodes(); ++n) u.segment<3>(3 * n) = a * mesh.nodes[n];
    Voigt6 expect = strain_from_tensor(a);
    for (const Voigt6& e : integration_point_strains(mesh, u))
        c.require((e - expect).norm() <= 1e-12 * expect.norm(), "patch test");

    Rng rng(9);
    Mat6 cm = testhelp::random_spd(rng, 500.0);
    Mesh one = build_mesh(10.0, 1);
    BoundaryConditions one_bcs = twist_bcs(one, 2.0);
    SystemMatrices sys(one, one_bcs, MetricC(cm));
    Eigen::MatrixXd full = Eigen::MatrixXd(sys.full_matrix());
    Eigen::MatrixXd oracle = testhelp::dense_hex_stiffness(10.0, cm);
    auto dofs = one.element_dofs(0);
    Eigen::MatrixXd local(24, 24);
    for (int i = 0; i < 24; ++i)
        for (int j = 0; j < 24; ++j) local(i, j) = full(dofs[i], dofs[j]);
    c.require((local - oracle).norm() <= 1e-10 * oracle.norm(), "dense assembly oracle");
    return c.ok;
}

// 10. Documented exclusions (wall-clock figures, billion-point scale).
bool criterion10(Check&) {
    std::printf("    wall-clock timings, index build times/sizes, and billion-point runs are\n"
                "    excluded by design; comparison counts and recall serve as proxies\n");
    return true;
}

} // namespace

int main() {
    int failures = 0;
    auto report = [&](int num, const char* desc, const std::function<bool(Check&)>& fn) {
        Check c;
        bool ok = false;
        try {
            ok = fn(c);
        } catch (const std::exception& e) {
            c.detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", num, desc,
                    ok ? "" : " -- ", ok ? "" : c.detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    };

    report(1, "tree backends at f_d=1 match the linear-scan oracle", criterion1);
    report(2, "exact solver descends monotonically to an assignment fixed point", criterion2);
    report(3, "remaining distance decreases with dataset refinement", criterion3);
    report(4, "per-point distance and comparison count rank-correlate", criterion4);
    report(5, "f_d trades comparisons against recall; k-means cheaper than kd", criterion5);

    {
        GraphSetup g;
        report(6, "warm starts cut graph hops across iterations",
               [&](Check& c) { return criterion6(c, g); });
        report(7, "step bound f_s=1 reduces comparisons vs f_s=10",
               [&](Check& c) { return criterion7(c, g); });
    }

    report(8, "delta-skip rule is sound over 10^4 randomized trials", criterion8);
    report(9, "material and FEM hand values, patch test, dense assembly oracle", criterion9);
    report(10, "wall-clock and billion-point figures excluded by design", criterion10);

    return failures == 0 ? 0 : 1;
}
