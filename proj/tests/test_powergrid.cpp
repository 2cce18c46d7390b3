#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fdilab/powergrid.hpp"
#include "support.hpp"

using namespace fdilab;

namespace {

BusSystem triangle(double x = 0.1) {
    return BusSystem::make("tri", {{1, 0.0}, {2, 0.0}, {3, 0.0}}, {{1, 2, x}, {2, 3, x}, {1, 3, x}});
}

std::string error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("bundled cases have the expected sizes") {
    const auto s14 = load_case(testing::case_file("ieee14"));
    CHECK(s14.n_buses() == 14);
    CHECK(s14.n_branches() == 20);
    CHECK(s14.n_measurements() == 34);
    const auto s57 = load_case(testing::case_file("ieee57"));
    CHECK(s57.n_buses() == 57);
    CHECK(s57.n_branches() == 80);
    CHECK(s57.n_measurements() == 137);
    const auto s118 = load_case(testing::case_file("ieee118"));
    CHECK(s118.n_measurements() == 304);
    CHECK(build_jacobian(s118).rows() == 304);
    CHECK(build_jacobian(s118).cols() == 117);
}

TEST_CASE("case parser reports problems with line numbers") {
    CHECK(error_of([] { parse_case("BUS,1,0\nBUS,2,0\nBRANCH,1,2,0.0\n", "z"); }).find("line 3") != std::string::npos);
    CHECK(error_of([] { parse_case("BUS,1,0\nBUS,2,0\nBRANCH,1,2,0.0\n", "z"); }).find("non-positive reactance") !=
          std::string::npos);
    CHECK(error_of([] { parse_case("BUS,1,0\nBUS,2,0\nBRANCH,2,2,0.1\n", "z"); }).find("self-loop") !=
          std::string::npos);
    CHECK(error_of([] { parse_case("BUS,1,0\nBUS,2,0\n# comment\nBRANCH,1,5,0.1\n", "z"); }).find("line 4") !=
          std::string::npos);
    CHECK(error_of([] { parse_case("BUS,1,0\nBUS,2,abc\n", "z"); }).find("line 2") != std::string::npos);
    CHECK(error_of([] { parse_case("BUS,1,0\nBUS,2,0\nBUS,3,0\nBRANCH,1,2,0.1\n", "z"); }).find("disconnected") !=
          std::string::npos);
    CHECK(error_of([] { load_case("/nonexistent/case.csv"); }).find("file not found") != std::string::npos);

    const auto sys = parse_case("# header\n\nBUS,1,0.5\nBUS,2,-0.5\nBRANCH,1,2,0.2\n", "two");
    CHECK(sys.n_buses() == 2);
    CHECK(sys.base_injections()[0] == doctest::Approx(0.5));
}

TEST_CASE("Jacobian of the 3-bus triangle") {
    const auto jac = build_jacobian(triangle());
    REQUIRE(jac.rows() == 6);
    REQUIRE(jac.cols() == 2);
    CHECK(jac.H(0, 0) == doctest::Approx(-10.0));
    CHECK(jac.H(0, 1) == doctest::Approx(0.0));
    // injection at bus 2 (row 3 + 1)
    CHECK(jac.H(4, 0) == doctest::Approx(20.0));
    CHECK(jac.H(4, 1) == doctest::Approx(-10.0));
    CHECK(jac.row_labels[0].str() == "flow:1");
    CHECK(jac.row_labels[3].str() == "inj:1");
}

TEST_CASE("Jacobian structure over random systems") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto sys = testing::random_system(rng, 3 + trial % 8);
        const auto jac = build_jacobian(sys);
        CHECK(jac.rows() == sys.n_branches() + sys.n_buses());
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac.H);
        CHECK(static_cast<std::size_t>(qr.rank()) == sys.n_states());
        for (std::size_t k = 0; k < sys.n_branches(); ++k) {
            const auto nnz = (jac.H.row(static_cast<Eigen::Index>(k)).array() != 0.0).count();
            CHECK((nnz == 1 || nnz == 2));
        }
        // Injection rows sum to zero: total generation equals total load.
        const Matrix inj = jac.H.bottomRows(static_cast<Eigen::Index>(sys.n_buses()));
        CHECK(inj.colwise().sum().cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("DC flow solution reproduces non-reference injections") {
    std::mt19937_64 rng(5);
    const auto sys = testing::random_system(rng, 8);
    const auto jac = build_jacobian(sys);
    const Vector p = sys.base_injections();
    const Vector x = solve_dc_flow(sys, p);
    const Vector z = jac.H * x;
    for (const auto& bus : sys.buses()) {
        if (bus.index == sys.reference_bus()) continue;
        CHECK(z[static_cast<Eigen::Index>(sys.n_branches() + bus.index - 1)] == doctest::Approx(p[bus.index - 1]));
    }
}

TEST_CASE("measure") {
    const auto jac = build_jacobian(triangle());
    Rng rng(1);
    const Vector x = Vector::Constant(2, 0.05);
    CHECK((measure(jac, x, NoiseModel{0.0}, rng) - jac.H * x).norm() == 0.0);
    CHECK(measure(jac, Vector::Zero(2), NoiseModel{0.0}, rng).norm() == 0.0);
    CHECK_THROWS_AS(measure(jac, Vector::Zero(3), NoiseModel{0.0}, rng), Error);

    // Monte-Carlo: the per-entry sample mean of the noise is within 3 sigma / sqrt(N).
    const double sigma = 0.01;
    const int draws = 100000;
    Vector sum = Vector::Zero(6), sumsq = Vector::Zero(6);
    Rng mc(2024);
    for (int i = 0; i < draws; ++i) {
        const Vector e = measure(jac, x, NoiseModel{sigma}, mc) - jac.H * x;
        sum += e;
        sumsq += e.cwiseProduct(e);
    }
    const Vector mean = sum / draws;
    CHECK(mean.cwiseAbs().maxCoeff() < 3.0 * sigma / std::sqrt(draws));
    const Vector sd = (sumsq / draws - mean.cwiseProduct(mean)).cwiseSqrt();
    CHECK(sd.minCoeff() > 0.98 * sigma);
    CHECK(sd.maxCoeff() < 1.02 * sigma);

    Rng a(9), b(9);
    CHECK(measure(jac, x, NoiseModel{sigma}, a) == measure(jac, x, NoiseModel{sigma}, b));
}

TEST_CASE("WLS against an independent dense solver") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const auto sys = testing::random_system(rng, 3 + trial % 8);
        const auto jac = build_jacobian(sys);
        Vector var(static_cast<Eigen::Index>(jac.rows()));
        for (auto& v : var) v = 1e-4 * (0.5 + std::abs(g(rng)));
        Vector z(static_cast<Eigen::Index>(jac.rows()));
        for (auto& v : z) v = g(rng);
        const Vector xhat = wls_estimate(jac, var, z);
        const auto oracle = testing::wls_oracle(jac.H, var, z);
        for (std::size_t i = 0; i < oracle.size(); ++i)
            CHECK(std::abs(xhat[static_cast<Eigen::Index>(i)] - oracle[i]) < 1e-10 * std::max(1.0, std::abs(oracle[i])));

        WlsEstimator est(jac, var);
        int iterations = 0;
        const Vector xi = est.estimate_iterative(z, 20, 1e-14, &iterations);
        CHECK((xi - xhat).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(iterations <= 3);
    }
}

TEST_CASE("WLS recovers noiseless states and is residual-optimal") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const auto sys = testing::random_system(rng, 3 + trial % 8);
        const auto jac = build_jacobian(sys);
        const Vector var = NoiseModel{0.01}.variances(jac.rows());
        Vector x(static_cast<Eigen::Index>(jac.cols()));
        for (auto& v : x) v = 0.1 * g(rng);
        CHECK((wls_estimate(jac, var, jac.H * x) - x).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(wls_estimate(jac, var, Vector::Zero(static_cast<Eigen::Index>(jac.rows()))).norm() == 0.0);

        if (trial % 10 == 0) {
            Rng noise_rng(static_cast<std::uint64_t>(trial));
            const Vector z = measure(jac, x, NoiseModel{0.01}, noise_rng);
            const Vector xhat = wls_estimate(jac, var, z);
            const double best = residual_norm(z, jac, xhat);
            for (int p = 0; p < 100; ++p) {
                Vector y = xhat;
                for (auto& v : y) v += 0.01 * g(rng);
                CHECK(best <= residual_norm(z, jac, y));
            }
        }
    }
}

TEST_CASE("residual norm") {
    const auto jac = build_jacobian(triangle());
    const Vector x(Vector::Constant(2, 0.03));
    Vector z = jac.H * x;
    CHECK(residual_norm(z, jac, x) == 0.0);
    z[2] += 1.0;
    CHECK(residual_norm(z, jac, x) == doctest::Approx(1.0));

    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& v : z) v = g(rng);
    double oracle = 0.0;
    for (Eigen::Index i = 0; i < jac.H.rows(); ++i) {
        double hx = 0.0;
        for (Eigen::Index j = 0; j < jac.H.cols(); ++j) hx += jac.H(i, j) * x[j];
        oracle += (z[i] - hx) * (z[i] - hx);
    }
    CHECK(residual_norm(z, jac, x) == doctest::Approx(oracle).epsilon(1e-12));
    CHECK_THROWS_AS(residual_norm(Vector::Zero(5), jac, x), Error);
}

TEST_CASE("bad-data test boundary") {
    CHECK_FALSE(bad_data_test(0.0, 0.1));
    CHECK(bad_data_test(0.1, 0.1));
    CHECK(bad_data_test(5.0, 0.1));
    CHECK_THROWS_AS(bad_data_test(1.0, 0.0), Error);
}

TEST_CASE("invalid systems are rejected") {
    CHECK_THROWS_AS(BusSystem::make("x", {{1, 0}, {2, 0}}, {{1, 2, -0.1}}), Error);
    CHECK_THROWS_AS(BusSystem::make("x", {{1, 0}, {2, 0}}, {{1, 3, 0.1}}), Error);
    CHECK_THROWS_AS(BusSystem::make("x", {{1, 0}, {2, 0}}, {{1, 2, 0.1}}, 3), Error);
    CHECK_THROWS_AS(WlsEstimator(build_jacobian(triangle()), Vector::Zero(6)), Error);
}
