#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <vector>

#include "fdilab/classify.hpp"

namespace fdilab {

namespace {

constexpr double kTau = 1e-12;
constexpr std::size_t kCacheBytes = std::size_t{256} << 20;

double squared_distance(const double* a, const double* b, Eigen::Index d) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
        const double t = a[k] - b[k];
        s += t * t;
    }
    return s;
}

// Kernel rows computed on demand, least-recently-used rows evicted once the
// byte budget is reached.
class KernelRows {
public:
    KernelRows(const Matrix& x, double gamma)
        : x_(x), gamma_(gamma), n_(static_cast<std::size_t>(x.rows())), rows_(n_), where_(n_) {
        capacity_ = std::max<std::size_t>(2, kCacheBytes / (sizeof(double) * std::max<std::size_t>(1, n_)));
    }

    const std::vector<double>& row(std::size_t i) {
        if (!rows_[i].empty()) {
            lru_.splice(lru_.begin(), lru_, where_[i]);
            return rows_[i];
        }
        if (lru_.size() >= capacity_) {
            const std::size_t victim = lru_.back();
            lru_.pop_back();
            std::vector<double>().swap(rows_[victim]);
        }
        auto& r = rows_[i];
        r.resize(n_);
        const double* xi = x_.row(static_cast<Eigen::Index>(i)).data();
        for (std::size_t j = 0; j < n_; ++j)
            r[j] = std::exp(-gamma_ * squared_distance(xi, x_.row(static_cast<Eigen::Index>(j)).data(), x_.cols()));
        lru_.push_front(i);
        where_[i] = lru_.begin();
        return r;
    }

private:
    const Matrix& x_;
    double gamma_;
    std::size_t n_;
    std::size_t capacity_;
    std::vector<std::vector<double>> rows_;
    std::list<std::size_t> lru_;
    std::vector<std::list<std::size_t>::iterator> where_;
};

}  // namespace

void SvmConfig::validate() const {
    if (!(C > 0.0)) throw Error("svm: C must be > 0");
    if (!(gamma > 0.0)) throw Error("svm: gamma must be > 0");
    if (!(tol > 0.0)) throw Error("svm: tol must be > 0");
    if (max_passes < 1) throw Error("svm: max_passes must be >= 1");
}

double kernel_gaussian(const Eigen::Ref<const Vector>& x1, const Eigen::Ref<const Vector>& x2, double gamma) {
    if (x1.size() != x2.size()) throw Error("kernel_gaussian: length mismatch");
    if (!(gamma >= 0.0)) throw Error("kernel_gaussian: gamma must be >= 0");
    return std::exp(-gamma * (x1 - x2).squaredNorm());
}

// Working-set selection uses the maximal violating pair with second-order
// information; the update and clipping follow the standard two-variable SMO step.
SvmModel svm_train(const Matrix& x, const std::vector<int>& labels, const SvmConfig& cfg, SvmSolution* solution) {
    cfg.validate();
    const std::size_t n = labels.size();
    if (n == 0 || static_cast<std::size_t>(x.rows()) != n) throw Error("svm_train: bad training set");
    std::vector<double> y(n);
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = labels[i] == 1 ? 1.0 : -1.0;
        positives += labels[i] == 1;
    }
    if (positives == 0 || positives == n) throw Error("svm_train: training set has a single class");

    const double C = cfg.C;
    KernelRows K(x, cfg.gamma);
    std::vector<double> alpha(n, 0.0), G(n, -1.0);
    const std::size_t cap = cfg.max_passes * std::max<std::size_t>(n, 100);
    std::size_t iter = 0;
    bool converged = false;

    while (iter < cap) {
        // Select i: max over I_up of -y G.
        double gmax = -std::numeric_limits<double>::infinity();
        std::ptrdiff_t i = -1;
        for (std::size_t t = 0; t < n; ++t) {
            if (y[t] > 0 ? alpha[t] < C : alpha[t] > 0) {
                if (-y[t] * G[t] >= gmax) {
                    gmax = -y[t] * G[t];
                    i = static_cast<std::ptrdiff_t>(t);
                }
            }
        }
        double gmax2 = -std::numeric_limits<double>::infinity();
        std::ptrdiff_t j = -1;
        if (i >= 0) {
            const auto& Ki = K.row(static_cast<std::size_t>(i));
            const auto ii = static_cast<std::size_t>(i);
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < n; ++t) {
                if (!(y[t] > 0 ? alpha[t] > 0 : alpha[t] < C)) continue;
                const double v = y[t] * G[t];  // -(-y G) over I_low
                gmax2 = std::max(gmax2, v);
                const double grad_diff = gmax + v;
                if (grad_diff > 0) {
                    double quad = Ki[ii] + 1.0 - 2.0 * Ki[t];  // K_tt = 1
                    if (quad <= 0) quad = kTau;
                    const double obj = -(grad_diff * grad_diff) / quad;
                    if (obj <= best) {
                        best = obj;
                        j = static_cast<std::ptrdiff_t>(t);
                    }
                }
            }
        }
        if (i < 0 || j < 0 || gmax + gmax2 < cfg.tol) {
            converged = true;
            break;
        }
        ++iter;

        const auto ii = static_cast<std::size_t>(i), jj = static_cast<std::size_t>(j);
        const std::vector<double>* rowi = &K.row(ii);
        const double Kij = (*rowi)[jj];
        const double old_ai = alpha[ii], old_aj = alpha[jj];
        double& ai = alpha[ii];
        double& aj = alpha[jj];
        if (y[ii] != y[jj]) {
            double quad = 2.0 + 2.0 * Kij;  // Q_ii + Q_jj - 2 Q_ij with Q_ij = -K_ij
            if (quad <= 0) quad = kTau;
            const double delta = (-G[ii] - G[jj]) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0) {
                if (aj < 0) { aj = 0; ai = diff; }
            } else {
                if (ai < 0) { ai = 0; aj = -diff; }
            }
            if (diff > 0) {
                if (ai > C) { ai = C; aj = C - diff; }
            } else {
                if (aj > C) { aj = C; ai = C + diff; }
            }
        } else {
            double quad = 2.0 - 2.0 * Kij;
            if (quad <= 0) quad = kTau;
            const double delta = (G[ii] - G[jj]) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > C) {
                if (ai > C) { ai = C; aj = sum - C; }
            } else {
                if (aj < 0) { aj = 0; ai = sum; }
            }
            if (sum > C) {
                if (aj > C) { aj = C; ai = sum - C; }
            } else {
                if (ai < 0) { ai = 0; aj = sum; }
            }
        }
        const double dai = (ai - old_ai) * y[ii], daj = (aj - old_aj) * y[jj];
        // Fetching row j may evict row i, so scale row j first and re-fetch i.
        const auto& Kj = K.row(jj);
        for (std::size_t t = 0; t < n; ++t) G[t] += y[t] * Kj[t] * daj;
        rowi = &K.row(ii);
        for (std::size_t t = 0; t < n; ++t) G[t] += y[t] * (*rowi)[t] * dai;
    }

    // rho from free vectors, or the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * G[t];
        if (alpha[t] >= C) {
            if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0) {
            if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;

    SvmModel model;
    model.gamma = cfg.gamma;
    model.bias = -rho;
    std::vector<std::size_t> sv;
    for (std::size_t t = 0; t < n; ++t)
        if (alpha[t] > 0) sv.push_back(t);
    model.support.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
    model.coef.resize(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t k = 0; k < sv.size(); ++k) {
        model.support.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(sv[k]));
        model.coef[static_cast<Eigen::Index>(k)] = alpha[sv[k]] * y[sv[k]];
    }

    if (solution) {
        solution->alpha = Eigen::Map<const Vector>(alpha.data(), static_cast<Eigen::Index>(n));
        solution->y.assign(n, 0);
        double obj = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            solution->y[t] = static_cast<int>(y[t]);
            obj += alpha[t] * (G[t] - 1.0);
        }
        solution->objective = obj / 2.0;
        solution->bias = model.bias;
        solution->iterations = iter;
        solution->converged = converged;
    }
    return model;
}

double svm_decision(const SvmModel& model, const Eigen::Ref<const Vector>& x) {
    if (x.size() != model.support.cols()) throw Error("svm: feature dimension mismatch");
    double f = model.bias;
    const Eigen::Index d = x.size();
    for (Eigen::Index k = 0; k < model.support.rows(); ++k)
        f += model.coef[k] * std::exp(-model.gamma * squared_distance(model.support.row(k).data(), x.data(), d));
    return f;
}

int svm_predict(const SvmModel& model, const Eigen::Ref<const Vector>& x) {
    return svm_decision(model, x) > 0.0 ? 1 : 0;
}

}  // namespace fdilab
