#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fdilab/classify.hpp"

namespace fdilab {

namespace {

Matrix sigmoid(const Matrix& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

struct Activations {
    Matrix hidden;  // rows = samples
    Matrix out;     // sigmoid output activations
    Matrix probs;   // softmax of `out`
};

Activations forward_batch(const AnnModel& m, const Matrix& x) {
    Activations act;
    act.hidden = sigmoid((x * m.w1.transpose()).rowwise() - m.theta1.transpose());
    act.out = sigmoid((act.hidden * m.w2.transpose()).rowwise() - m.theta2.transpose());
    Matrix e = (act.out.colwise() - act.out.rowwise().maxCoeff()).array().exp().matrix();
    act.probs = e.array().colwise() / e.rowwise().sum().array();
    return act;
}

}  // namespace

void AnnConfig::validate() const {
    if (!(alpha > 0.0)) throw Error("ann: alpha must be > 0");
    if (epochs < 1) throw Error("ann: epochs must be >= 1");
    if (batch < 1) throw Error("ann: batch must be >= 1");
}

std::size_t ann_hidden_size(std::size_t inputs, std::size_t classes) {
    if (inputs < 1 || classes < 2) throw Error("ann_hidden_size: need L >= 1 and N >= 2");
    return (classes + inputs + 1) / 2;
}

AnnModel ann_init(std::size_t inputs, std::uint64_t seed) {
    const auto L = static_cast<Eigen::Index>(inputs);
    const auto M = static_cast<Eigen::Index>(ann_hidden_size(inputs));
    const auto N = static_cast<Eigen::Index>(kClassCount);
    Rng rng = make_rng(seed, "ann-init");
    auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
        const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Matrix w(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = uniform(rng, -r, r);
        return w;
    };
    AnnModel m;
    m.w1 = glorot(M, L);
    m.theta1 = Vector::Zero(M);
    m.w2 = glorot(N, M);
    m.theta2 = Vector::Zero(N);
    return m;
}

Vector ann_forward(const AnnModel& model, const Eigen::Ref<const Vector>& x) {
    if (static_cast<std::size_t>(x.size()) != model.inputs()) throw Error("ann: feature dimension mismatch");
    Matrix row = x.transpose();
    return forward_batch(model, row).probs.row(0).transpose();
}

int ann_predict(const AnnModel& model, const Eigen::Ref<const Vector>& x) {
    const Vector p = ann_forward(model, x);
    return p[1] > p[0] ? 1 : 0;
}

double ann_loss(const AnnModel& model, const Matrix& x, const std::vector<int>& labels, AnnGradient* grad) {
    const auto n = x.rows();
    if (n == 0 || static_cast<std::size_t>(n) != labels.size()) throw Error("ann_loss: bad batch");
    if (static_cast<std::size_t>(x.cols()) != model.inputs()) throw Error("ann: feature dimension mismatch");
    const Activations act = forward_batch(model, x);
    Matrix target = Matrix::Zero(n, static_cast<Eigen::Index>(kClassCount));
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto c = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)] == 1 ? 1 : 0);
        target(i, c) = 1.0;
        loss -= std::log(act.probs(i, c));
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    if (grad) {
        // d loss / d out = p - t (softmax + cross-entropy), then through the sigmoids.
        const Matrix d_out = ((act.probs - target).array() * act.out.array() * (1.0 - act.out.array())).matrix();
        const Matrix d_hidden =
            ((d_out * model.w2).array() * act.hidden.array() * (1.0 - act.hidden.array())).matrix();
        grad->w2 = d_out.transpose() * act.hidden * inv_n;
        grad->theta2 = -d_out.colwise().sum().transpose() * inv_n;
        grad->w1 = d_hidden.transpose() * x * inv_n;
        grad->theta1 = -d_hidden.colwise().sum().transpose() * inv_n;
    }
    return loss * inv_n;
}

AnnModel ann_train(const Matrix& x, const std::vector<int>& labels, const AnnConfig& cfg) {
    cfg.validate();
    const std::size_t n = labels.size();
    if (n == 0 || static_cast<std::size_t>(x.rows()) != n) throw Error("ann_train: bad training set");
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (positives == 0 || positives == n) throw Error("ann_train: training set has a single class");

    AnnModel model = ann_init(static_cast<std::size_t>(x.cols()), cfg.seed);
    Rng rng = make_rng(cfg.seed, "ann-shuffle");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    AnnGradient g;
    Matrix xb;
    std::vector<int> yb;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch) {
            const std::size_t stop = std::min(n, start + cfg.batch);
            xb.resize(static_cast<Eigen::Index>(stop - start), x.cols());
            yb.resize(stop - start);
            for (std::size_t r = start; r < stop; ++r) {
                xb.row(static_cast<Eigen::Index>(r - start)) = x.row(static_cast<Eigen::Index>(order[r]));
                yb[r - start] = labels[order[r]];
            }
            epoch_loss += ann_loss(model, xb, yb, &g) * static_cast<double>(stop - start);
            model.w1 -= cfg.alpha * g.w1;
            model.theta1 -= cfg.alpha * g.theta1;
            model.w2 -= cfg.alpha * g.w2;
            model.theta2 -= cfg.alpha * g.theta2;
        }
        if (!std::isfinite(epoch_loss)) throw Error("ann_train: non-finite loss at epoch " + std::to_string(epoch + 1));
    }
    return model;
}

}  // namespace fdilab
