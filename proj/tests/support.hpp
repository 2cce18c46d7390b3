#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "fdilab/attack.hpp"
#include "fdilab/classify.hpp"
#include "fdilab/featsel.hpp"
#include "fdilab/common.hpp"
#include "fdilab/powergrid.hpp"

#ifndef FDILAB_CASE_DIR
#define FDILAB_CASE_DIR "data/cases"
#endif

namespace testing {

inline std::string case_file(const std::string& name) { return std::string(FDILAB_CASE_DIR) + "/" + name + ".csv"; }

/// Random connected system: a random spanning tree plus a few extra branches.
inline fdilab::BusSystem random_system(std::mt19937_64& rng, std::size_t n_buses) {
    std::uniform_real_distribution<double> react(0.05, 0.5), inj(-1.0, 1.0), coin(0.0, 1.0);
    std::vector<fdilab::Bus> buses;
    for (std::size_t i = 1; i <= n_buses; ++i) buses.push_back({i, inj(rng)});
    std::vector<fdilab::Branch> branches;
    std::vector<std::size_t> order(n_buses);
    std::iota(order.begin(), order.end(), 1);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 1; i < n_buses; ++i) {
        const std::size_t parent = order[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)];
        branches.push_back({parent, order[i], react(rng)});
    }
    for (std::size_t a = 1; a <= n_buses; ++a)
        for (std::size_t b = a + 1; b <= n_buses; ++b)
            if (coin(rng) < 0.15) branches.push_back({a, b, react(rng)});
    const std::size_t ref = std::uniform_int_distribution<std::size_t>(1, n_buses)(rng);
    return fdilab::BusSystem::make("random" + std::to_string(n_buses), buses, branches, ref);
}

/// Dense Gaussian elimination with partial pivoting on plain vectors.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return x;
}

/// WLS by forming H^T W^-1 H and H^T W^-1 z entry by entry.
inline std::vector<double> wls_oracle(const fdilab::Matrix& H, const fdilab::Vector& var, const fdilab::Vector& z) {
    const auto m = static_cast<std::size_t>(H.rows()), n = static_cast<std::size_t>(H.cols());
    std::vector<std::vector<double>> g(n, std::vector<double>(n, 0.0));
    std::vector<double> rhs(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < m; ++k) g[i][j] += H(k, i) * H(k, j) / var[k];
        for (std::size_t k = 0; k < m; ++k) rhs[i] += H(k, i) * z[k] / var[k];
    }
    return gauss_solve(g, rhs);
}

/// Two Gaussian blobs in `dims` dimensions; only the first `informative`
/// coordinates carry the class signal.
inline fdilab::Dataset blobs(std::size_t n, std::size_t dims, std::size_t informative, double shift,
                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    fdilab::Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        ds.labels[i] = y;
        for (std::size_t j = 0; j < dims; ++j)
            ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                g(rng) + (j < informative ? (y ? shift : -shift) : 0.0);
    }
    return ds;
}

using fdilab::Matrix;
using fdilab::Vector;

inline double dual_objective(const Matrix& x, const std::vector<int>& y, const Vector& alpha, double gamma) {
    double quad = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.rows(); ++j)
            quad += alpha[i] * alpha[j] * y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] *
                    std::exp(-gamma * (x.row(i) - x.row(j)).squaredNorm());
    return 0.5 * quad - alpha.sum();
}

/// Projection onto {0 <= a <= C, y.a = 0} by bisection on the multiplier.
inline Vector project(const Vector& v, const std::vector<double>& y, double C) {
    auto at = [&](double mu) {
        Vector a(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) a[i] = std::clamp(v[i] - mu * y[static_cast<std::size_t>(i)], 0.0, C);
        return a;
    };
    auto gap = [&](double mu) {
        const Vector a = at(mu);
        double s = 0.0;
        for (Eigen::Index i = 0; i < a.size(); ++i) s += a[i] * y[static_cast<std::size_t>(i)];
        return s;
    };
    double lo = -1e6, hi = 1e6;  // gap is non-increasing in mu
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gap(mid) > 0 ? lo : hi) = mid;
    }
    return at(0.5 * (lo + hi));
}

/// Accelerated projected gradient on the SVM dual; slow but independent of SMO.
inline double dual_oracle(const Matrix& x, const std::vector<int>& labels, double C, double gamma) {
    const auto n = x.rows();
    std::vector<double> y(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = labels[i] == 1 ? 1.0 : -1.0;
    Eigen::MatrixXd Q(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            Q(i, j) = y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] *
                      std::exp(-gamma * (x.row(i) - x.row(j)).squaredNorm());
    const double L = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Q).eigenvalues().maxCoeff();
    Vector a = Vector::Zero(n), prev = a, w = a;
    double t = 1.0;
    for (int it = 0; it < 20000; ++it) {
        const Vector grad = Q * w - Vector::Ones(n);
        prev = a;
        a = project(w - grad / L, y, C);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        w = a + ((t - 1.0) / t_next) * (a - prev);
        t = t_next;
    }
    return 0.5 * a.dot(Q * a) - a.sum();
}

/// Worst relative gap between the analytic ANN gradient and central
/// differences over `draws` random networks and batches.
inline double ann_gradient_error(int draws, std::uint64_t seed) {
    using fdilab::Matrix;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    for (int draw = 0; draw < draws; ++draw) {
        const std::size_t L = 2 + static_cast<std::size_t>(draw) % 5;
        auto model = fdilab::ann_init(L, static_cast<std::uint64_t>(draw));
        for (auto& v : model.theta1) v = 0.3 * g(rng);
        for (auto& v : model.theta2) v = 0.3 * g(rng);
        Matrix x(5, static_cast<Eigen::Index>(L));
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
        const std::vector<int> y{0, 1, 1, 0, 1};
        fdilab::AnnGradient grad;
        fdilab::ann_loss(model, x, y, &grad);

        const double h = 1e-5;
        auto check = [&](double& param, double analytic) {
            const double keep = param;
            param = keep + h;
            const double up = fdilab::ann_loss(model, x, y);
            param = keep - h;
            const double down = fdilab::ann_loss(model, x, y);
            param = keep;
            const double numeric = (up - down) / (2 * h);
            const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
            worst = std::max(worst, std::abs(analytic - numeric) / scale);
        };
        for (Eigen::Index i = 0; i < model.w1.size(); ++i) check(model.w1.data()[i], grad.w1.data()[i]);
        for (Eigen::Index i = 0; i < model.theta1.size(); ++i) check(model.theta1[i], grad.theta1[i]);
        for (Eigen::Index i = 0; i < model.w2.size(); ++i) check(model.w2.data()[i], grad.w2.data()[i]);
        for (Eigen::Index i = 0; i < model.theta2.size(); ++i) check(model.theta2[i], grad.theta2[i]);
    }
    return worst;
}

/// Exhaustive optimum over all non-empty masks.
inline double brute_force_best(fdilab::FitnessContext& ctx) {
    const std::size_t m = ctx.n_features();
    double best = -1.0;
    for (std::uint32_t code = 1; code < (1u << m); ++code) {
        fdilab::FeatureMask mask = fdilab::FeatureMask::none(m);
        for (std::size_t j = 0; j < m; ++j) mask.set(j, (code >> j) & 1u);
        best = std::max(best, ctx.fitness(mask));
    }
    return best;
}

}  // namespace testing
