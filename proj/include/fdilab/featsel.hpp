#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <future>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "fdilab/attack.hpp"
#include "fdilab/classify.hpp"
#include "fdilab/common.hpp"
#include "fdilab/mask.hpp"

namespace fdilab {

/// Wrapper fitness: validation accuracy of a classifier trained on the
/// masked training split. Results are cached per mask; concurrent requests
/// for the same mask train once.
class FitnessContext {
public:
    using Evaluator = std::function<double(const FeatureMask&)>;

    FitnessContext(Dataset train, Dataset validation, ClassifierConfig classifier, bool standardize = true);
    /// Arbitrary deterministic fitness over masks of length `n_features`.
    FitnessContext(std::size_t n_features, Evaluator evaluator);

    /// Splits `training_set` (stratified, `holdout` to validation) with `seed`.
    static FitnessContext from_training_set(const Dataset& training_set, double holdout, std::uint64_t seed,
                                            ClassifierConfig classifier, bool standardize = true);

    FitnessContext(const FitnessContext&) = delete;
    FitnessContext& operator=(const FitnessContext&) = delete;

    double fitness(const FeatureMask& mask);

    std::size_t n_features() const { return n_features_; }
    std::size_t trainings() const { return trainings_.load(); }
    std::size_t calls() const { return calls_.load(); }
    std::size_t cache_size() const;

private:
    std::size_t n_features_ = 0;
    Evaluator evaluator_;
    std::unordered_map<std::string, std::shared_future<double>> cache_;
    mutable std::mutex mutex_;
    std::atomic<std::size_t> trainings_{0};
    std::atomic<std::size_t> calls_{0};
};

/// Heavy-tailed step by Mantegna's algorithm with stability index lambda - 1.
/// Valid for 1 < lambda <= 3; lambda = 3 is the Gaussian limit N(0, 2).
double levy_step(double lambda, Rng& rng);

/// 1 iff sigmoid(position) > U(0, 1).
bool binarize(double position, Rng& rng);

/// Sets one uniformly chosen bit when the mask is empty.
FeatureMask repair_mask(FeatureMask mask, Rng& rng);

struct BcsParams {
    double alpha = 0.1;
    double pa = 0.25;
    double lambda = 1.5;
    std::size_t population = 30;
    std::size_t iterations = 10;

    void validate() const;
};

struct BpsoParams {
    double c1 = 2.0;
    double c2 = 2.0;
    double w = 0.7;
    double v_max = 6.0;
    std::size_t population = 30;
    std::size_t iterations = 10;

    void validate() const;
};

struct GaParams {
    double mutation_rate = 0.018;
    std::size_t population = 50;
    std::size_t iterations = 30;
    std::size_t tournament = 3;
    std::size_t elite = 1;

    void validate() const;
};

struct FsResult {
    FeatureMask best_mask;
    double best_fitness = 0.0;
    std::vector<double> trace;  // index 0 = initial population, then one per iteration
    std::size_t evaluations = 0;
};

/// Ordering used by every searcher: higher fitness, then fewer features.
bool fitter(double fa, const FeatureMask& a, double fb, const FeatureMask& b);

FsResult bcs_search(FitnessContext& ctx, const BcsParams& p, Rng& rng);
FsResult bpso_search(FitnessContext& ctx, const BpsoParams& p, Rng& rng);
FsResult ga_search(FitnessContext& ctx, const GaParams& p, Rng& rng);

/// GA search from a caller-supplied initial population.
FsResult ga_search(FitnessContext& ctx, const GaParams& p, std::vector<FeatureMask> initial, Rng& rng);

enum class FsMethod { None, Bcs, Bpso, Ga };

std::string to_string(FsMethod m);
FsMethod parse_fs_method(const std::string& name);

struct FsParams {
    BcsParams bcs;
    BpsoParams bpso;
    GaParams ga;
};

/// Dispatch; FsMethod::None evaluates the all-ones mask once.
FsResult run_feature_selection(FsMethod method, FitnessContext& ctx, const FsParams& params, Rng& rng);

/// Writes `<stem>.txt` (selected rows by label, fitness, evaluation count)
/// and `<stem>_trace.csv` (iteration,best_fitness).
void export_fs_result(const FsResult& result, const std::vector<std::string>& row_labels,
                      const std::filesystem::path& stem);

}  // namespace fdilab
