#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ddmech/dataset.hpp"
#include "ddmech/material.hpp"
#include "helpers.hpp"

using namespace ddm;

namespace {
Eigen::Matrix3d rot_from_axis_angle(const Eigen::Vector3d& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}
} // namespace

TEST_CASE("hand-derived stress values") {
    MaterialParams p; // E = 1000, alpha = 500
    Voigt6 eps = Voigt6::Zero();
    CHECK(eval_material(eps, p).norm() == 0.0);

    eps[0] = 0.01;
    Voigt6 sig = eval_material(eps, p);
    CHECK(sig[0] == doctest::Approx(15.75).epsilon(1e-12));
    CHECK(sig[1] == doctest::Approx(5.25).epsilon(1e-12));
    CHECK(sig[2] == doctest::Approx(5.25).epsilon(1e-12));
    CHECK(sig[3] == 0.0);
    CHECK(sig[4] == 0.0);
    CHECK(sig[5] == 0.0);
}

TEST_CASE("alpha = 0 is linear") {
    MaterialParams p;
    p.alpha = 0.0;
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        Voigt6 a, b;
        for (int i = 0; i < 6; ++i) {
            a[i] = rng.uniform(-0.025, 0.025);
            b[i] = rng.uniform(-0.025, 0.025);
        }
        Voigt6 lhs = eval_material(a + b, p);
        Voigt6 rhs = eval_material(a, p) + eval_material(b, p);
        CHECK((lhs - rhs).norm() <= 1e-12 * std::max(1.0, rhs.norm()));
    }
}

TEST_CASE("isotropy under random rotations") {
    MaterialParams p;
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
        Voigt6 eps;
        for (int i = 0; i < 6; ++i) eps[i] = rng.uniform(-0.025, 0.025);
        Eigen::Vector3d axis(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        Eigen::Matrix3d q = rot_from_axis_angle(axis, rng.uniform(0.0, 3.14));

        Eigen::Matrix3d e = strain_to_tensor(eps);
        Voigt6 eps_rot = strain_from_tensor(q * e * q.transpose());

        Eigen::Matrix3d s = stress_to_tensor(eval_material(eps, p));
        Voigt6 sig_rot_expect = stress_from_tensor(q * s * q.transpose());
        Voigt6 sig_rot = eval_material(eps_rot, p);
        CHECK((sig_rot - sig_rot_expect).norm() <= 1e-10 * std::max(1.0, sig_rot_expect.norm()));
    }
}

TEST_CASE("oddness is exact") {
    MaterialParams p;
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        Voigt6 eps;
        for (int i = 0; i < 6; ++i) eps[i] = rng.uniform(-0.025, 0.025);
        Voigt6 neg = eval_material(-eps, p);
        Voigt6 pos = eval_material(eps, p);
        CHECK(neg == -pos);
    }
}

TEST_CASE("tangent consistency for the linear case") {
    MaterialParams p;
    p.alpha = 0.0;
    Voigt6 eps = Voigt6::Zero();
    Mat6 d = material_tangent(eps, p);
    Rng rng(8);
    Voigt6 probe;
    for (int i = 0; i < 6; ++i) probe[i] = rng.uniform(-0.01, 0.01);
    CHECK((d * probe - eval_material(probe, p)).norm() <= 1e-6 * eval_material(probe, p).norm());
}

TEST_CASE("dataset sampling") {
    MaterialParams p;

    MaterialDataset single = sample_dataset(1, 0.0, 0.0, p, 77);
    CHECK(single.points[0].strain.norm() == 0.0);
    CHECK(single.points[0].stress.norm() == 0.0);

    MaterialDataset a = sample_dataset(5000, -0.025, 0.025, p, 42);
    MaterialDataset b = sample_dataset(5000, -0.025, 0.025, p, 42);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.points[i].strain == b.points[i].strain);
        CHECK(a.points[i].stress == b.points[i].stress);
    }

    double lo = 1e30, hi = -1e30;
    Voigt6 mean = Voigt6::Zero();
    for (const auto& pt : a.points) {
        lo = std::min(lo, pt.strain.minCoeff());
        hi = std::max(hi, pt.strain.maxCoeff());
        mean += pt.strain;
        CHECK((pt.stress - eval_material(pt.strain, p)).norm() == 0.0);
    }
    mean /= static_cast<double>(a.size());
    CHECK(lo >= -0.025);
    CHECK(hi <= 0.025);
    // uniform sd = range / sqrt(12); mean within 4 sd / sqrt(N) of midpoint
    double tol = 4.0 * (0.05 / std::sqrt(12.0)) / std::sqrt(5000.0);
    for (int i = 0; i < 6; ++i) CHECK(std::abs(mean[i]) <= tol);
}

TEST_CASE("binary round trip and format errors") {
    MaterialParams p;
    MaterialDataset d = sample_dataset(300, -0.025, 0.025, p, 3);
    auto path = std::filesystem::temp_directory_path() / "matgen_rt.mdd";
    save_dataset(d, path);
    MaterialDataset r = load_dataset(path);
    REQUIRE(r.size() == d.size());
    CHECK(r.seed == d.seed);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(r.points[i].strain == d.points[i].strain);
        CHECK(r.points[i].stress == d.points[i].stress);
    }

    auto empty = std::filesystem::temp_directory_path() / "matgen_empty.mdd";
    std::ofstream(empty).close();
    CHECK_THROWS_AS(load_dataset(empty), DatasetHeaderError);

    auto trunc = std::filesystem::temp_directory_path() / "matgen_trunc.mdd";
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        std::ofstream out(trunc, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_dataset(trunc), DatasetTruncatedError);

    auto bad = std::filesystem::temp_directory_path() / "matgen_bad.mdd";
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        bytes[bytes.size() / 2] ^= 0x5a;
        std::ofstream out(bad, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_dataset(bad), DatasetChecksumError);

    std::filesystem::remove(path);
    std::filesystem::remove(empty);
    std::filesystem::remove(trunc);
    std::filesystem::remove(bad);
}

TEST_CASE("csv round trip") {
    MaterialParams p;
    MaterialDataset d = sample_dataset(100, -0.025, 0.025, p, 6);
    auto path = std::filesystem::temp_directory_path() / "matgen_rt.csv";
    save_dataset_csv(d, path);

    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "e11,e22,e33,g12,g13,g23,s11,s22,s33,s12,s13,s23");

    MaterialDataset r = load_dataset_csv(path);
    REQUIRE(r.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK((r.points[i].strain - d.points[i].strain).norm() <=
              1e-15 * std::max(1.0, d.points[i].strain.norm()));
        CHECK((r.points[i].stress - d.points[i].stress).norm() <=
              1e-15 * std::max(1.0, d.points[i].stress.norm()));
    }
    std::filesystem::remove(path);
}

TEST_CASE("mapped coordinates regenerate from the metric") {
    MaterialParams p;
    MaterialDataset d = sample_dataset(500, -0.025, 0.025, p, 10);
    MetricC c = pca_metric(d.points);
    d.bind_metric(c);
    REQUIRE(d.metric_bound());
    for (std::size_t i = 0; i < d.size(); ++i) {
        Mapped12 expect = c.map_point(d.points[i]);
        CHECK((d.mapped_at(i) - expect).norm() <= 1e-10 * std::max(1.0, expect.norm()));
    }
}
