#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fdilab/attack.hpp"
#include "fdilab/classify.hpp"
#include "fdilab/featsel.hpp"
#include "fdilab/powergrid.hpp"

namespace fdilab {

// ---------------------------------------------------------------------------
// Grid search

/// Accuracy cache keyed by (dataset hash, split, classifier description);
/// optionally persisted as a tab-separated "key<TAB>value" file.
class ResultCache {
public:
    ResultCache() = default;
    explicit ResultCache(std::filesystem::path file);

    std::optional<double> find(const std::string& key) const;
    void insert(const std::string& key, double value);
    std::size_t size() const;
    /// Rewrites the backing file (no-op for in-memory caches).
    void flush() const;

private:
    std::filesystem::path file_;
    std::map<std::string, double> values_;
    mutable std::mutex mutex_;
};

struct GridSearchSpec {
    std::vector<ClassifierConfig> grid;  // evaluated and tie-broken in this order
    double holdout = 0.2;
    std::uint64_t seed = 1;
    bool standardize = true;

    void validate() const;
};

std::vector<ClassifierConfig> svm_grid(const std::vector<double>& Cs, const std::vector<double>& gammas,
                                       const SvmConfig& base = {});
std::vector<ClassifierConfig> knn_grid(const std::vector<std::size_t>& ks);
std::vector<ClassifierConfig> ann_grid(const std::vector<double>& alphas, const AnnConfig& base = {});

/// C in {1, 10, 100, 1000, 10000} x gamma in {1e-5 .. 1e-1}.
std::vector<ClassifierConfig> default_grid(ClassifierKind kind);

struct GridCell {
    ClassifierConfig config;
    double accuracy = 0.0;
    bool failed = false;
    bool cached = false;
    std::string error;
};

struct GridSearchResult {
    ClassifierConfig best;
    double best_accuracy = 0.0;
    std::vector<GridCell> cells;
    std::size_t trainings = 0;
};

/// Dataset access notification: phase name and the dataset read.
using DataObserver = std::function<void(std::string_view phase, const Dataset&)>;

GridSearchResult grid_search(const Dataset& data, const GridSearchSpec& spec, ResultCache* cache = nullptr,
                             const DataObserver& observer = {});

void write_grid_csv(const GridSearchResult& result, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Experiment matrix

struct ExperimentSpec {
    std::vector<std::filesystem::path> systems;  // case files
    std::vector<FsMethod> fs_methods{FsMethod::None, FsMethod::Bcs, FsMethod::Bpso, FsMethod::Ga};
    std::vector<ClassifierConfig> classifiers{SvmConfig{}, KnnConfig{}, AnnConfig{}};
    std::size_t n_train = 2000;
    std::size_t n_test = 500;
    GenerationConfig data;  // n and seed are overridden per system/split
    FsParams fs_params;
    ClassifierConfig wrapper = KnnConfig{12};
    double fs_holdout = 0.2;
    bool standardize = true;
    std::uint64_t seed = 7;
    std::filesystem::path trace_dir;  // FS traces written here when non-empty

    void validate() const;
};

struct ExperimentResult {
    std::string system;
    std::string fs_method;
    std::string classifier;
    std::size_t n_features = 0;
    double accuracy = 0.0;
    double wall_time = 0.0;  // seconds: feature selection + train + evaluate
    std::uint64_t seed = 0;
    FeatureMask mask;
    std::vector<double> trace;
};

struct RowFailure {
    std::string system;
    std::string fs_method;
    std::string classifier;
    std::string error;
};

struct MatrixRun {
    std::vector<ExperimentResult> rows;
    std::vector<RowFailure> failures;
};

/// Seeds: training and test data for a system use independent streams
/// derived from (seed, system); each FS run draws from (seed, system, method).
MatrixRun run_matrix(const ExperimentSpec& spec, const DataObserver& observer = {});

// ---------------------------------------------------------------------------
// Threshold calibration and reporting

/// Given quantile (linear interpolation) of WLS residuals over n_samples clean samples.
double calibrate_threshold(const BusSystem& sys, const NoiseModel& noise, std::size_t n_samples, double quantile,
                           std::uint64_t seed = 1, double load_var = 0.1);

double quantile(std::vector<double> values, double q);

struct ExportOptions {
    /// Write measured wall times; when false the column holds 0 so that
    /// identical seeds give identical files.
    bool wall_time = false;
};

inline constexpr std::string_view kResultsHeader = "system,fs_method,classifier,n_features,accuracy,wall_time_s,seed";

void export_results(const std::vector<ExperimentResult>& results, const std::filesystem::path& path,
                    ExportOptions options = {});
std::string results_csv(const std::vector<ExperimentResult>& results, ExportOptions options = {});
std::vector<ExperimentResult> read_results_csv(const std::filesystem::path& path);

/// One table per system: feature-selection rows by classifier columns.
std::string render_report(const std::vector<ExperimentResult>& results, const std::vector<RowFailure>& failures = {});

}  // namespace fdilab
