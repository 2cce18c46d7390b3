#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "fdilab/attack.hpp"
#include "fdilab/common.hpp"
#include "fdilab/mask.hpp"

namespace fdilab {

// ---------------------------------------------------------------------------
// Standardization

struct ScalerStats {
    Vector mean;
    Vector std;
    std::vector<std::size_t> constant_features;  // columns whose std was forced to 1
};

ScalerStats standardize_fit(const Matrix& train);
Matrix standardize_apply(const ScalerStats& stats, const Matrix& x);
Vector standardize_apply(const ScalerStats& stats, const Vector& x);

// ---------------------------------------------------------------------------
// Configurations

/// Defaults are the grid-search winners on the 14-bus system (full features).
struct SvmConfig {
    double C = 100.0;
    double gamma = 0.1;
    double tol = 1e-3;
    /// Iteration cap in units of n pair updates; hitting it sets the warning flag.
    std::size_t max_passes = 200;

    void validate() const;
};

struct KnnConfig {
    std::size_t k = 1;

    void validate() const;
};

struct AnnConfig {
    double alpha = 0.1;
    std::size_t epochs = 200;
    std::size_t batch = 32;
    std::uint64_t seed = 1;

    void validate() const;
};

using ClassifierConfig = std::variant<SvmConfig, KnnConfig, AnnConfig>;

enum class ClassifierKind { Svm, Knn, Ann };

ClassifierKind kind_of(const ClassifierConfig& cfg);
std::string to_string(ClassifierKind kind);
ClassifierKind parse_classifier_kind(const std::string& name);
/// Compact "svm(C=...,gamma=...)" style description, also used as a cache key.
std::string describe(const ClassifierConfig& cfg);

// ---------------------------------------------------------------------------
// Gaussian-kernel SVM solved in the dual by SMO

double kernel_gaussian(const Eigen::Ref<const Vector>& x1, const Eigen::Ref<const Vector>& x2, double gamma);

struct SvmModel {
    Matrix support;  // support vectors (rows)
    Vector coef;     // alpha_i * y_i per support vector
    double bias = 0.0;
    double gamma = 0.0;
};

/// Full dual solution on the training set, kept for diagnostics.
struct SvmSolution {
    Vector alpha;
    std::vector<int> y;  // +-1
    double bias = 0.0;
    double objective = 0.0;  // 0.5 a^T Q a - sum a (minimized)
    std::size_t iterations = 0;
    bool converged = true;
};

/// `labels` in {0, 1}; mapped internally to {-1, +1}.
SvmModel svm_train(const Matrix& x, const std::vector<int>& labels, const SvmConfig& cfg,
                   SvmSolution* solution = nullptr);
double svm_decision(const SvmModel& model, const Eigen::Ref<const Vector>& x);
/// Class 1 iff the decision value is > 0.
int svm_predict(const SvmModel& model, const Eigen::Ref<const Vector>& x);

// ---------------------------------------------------------------------------
// KNN

struct KnnModel {
    Matrix x;
    std::vector<int> labels;
    std::size_t k = 1;
};

/// Euclidean k nearest (distance ties -> lower training index), majority vote
/// with vote ties -> class 0.
int knn_predict(const Matrix& train, const std::vector<int>& labels, std::size_t k,
                const Eigen::Ref<const Vector>& query);
int knn_predict(const KnnModel& model, const Eigen::Ref<const Vector>& query);

// ---------------------------------------------------------------------------
// Single-hidden-layer network: sigmoid hidden and output nodes, softmax over
// the two output activations, cross-entropy loss.

constexpr std::size_t kClassCount = 2;

std::size_t ann_hidden_size(std::size_t inputs, std::size_t classes = kClassCount);

struct AnnModel {
    Matrix w1;      // M x L
    Vector theta1;  // M
    Matrix w2;      // N x M
    Vector theta2;  // N

    std::size_t inputs() const { return static_cast<std::size_t>(w1.cols()); }
    std::size_t hidden() const { return static_cast<std::size_t>(w1.rows()); }
};

AnnModel ann_init(std::size_t inputs, std::uint64_t seed);
/// Class scores (softmax outputs), length N, summing to 1.
Vector ann_forward(const AnnModel& model, const Eigen::Ref<const Vector>& x);
int ann_predict(const AnnModel& model, const Eigen::Ref<const Vector>& x);

struct AnnGradient {
    Matrix w1;
    Vector theta1;
    Matrix w2;
    Vector theta2;
};

/// Mean cross-entropy over the rows of x and its gradient by backpropagation.
double ann_loss(const AnnModel& model, const Matrix& x, const std::vector<int>& labels,
                AnnGradient* grad = nullptr);

AnnModel ann_train(const Matrix& x, const std::vector<int>& labels, const AnnConfig& cfg);

// ---------------------------------------------------------------------------
// Unified train/predict

struct TrainedModel {
    ClassifierKind kind = ClassifierKind::Knn;
    FeatureMask mask;
    bool standardized = true;
    ScalerStats scaler;
    std::variant<SvmModel, KnnModel, AnnModel> params;
    bool warning = false;  // SVM hit its iteration cap
};

/// Restricts to `mask`, optionally standardizes with training statistics, and fits.
TrainedModel train_model(const Matrix& x, const std::vector<int>& labels, const FeatureMask& mask,
                         const ClassifierConfig& cfg, bool standardize = true);
TrainedModel train_model(const Dataset& ds, const FeatureMask& mask, const ClassifierConfig& cfg,
                         bool standardize = true);

/// `x` holds full-width samples; the model applies its own mask and scaler.
int predict_one(const TrainedModel& model, const Eigen::Ref<const Vector>& x);
std::vector<int> predict(const TrainedModel& model, const Matrix& x);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& truth);

/// Text serialization; see docs/model_format.md.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);
std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(const std::string& text);

}  // namespace fdilab
