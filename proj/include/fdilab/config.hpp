#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fdilab/attack.hpp"
#include "fdilab/bench.hpp"
#include "fdilab/classify.hpp"
#include "fdilab/featsel.hpp"

namespace fdilab {

/// Every tunable of a run. Loaded from a flat `key = value` file, then
/// overridden by command-line flags; `keys()` lists the accepted names.
struct RunConfig {
    std::filesystem::path case_dir;
    std::string case_name = "ieee14";  // single-system commands
    std::vector<std::string> systems{"ieee14"};
    std::filesystem::path out_dir = "out";
    std::filesystem::path dataset;  // gridsearch / select input; generated when empty

    std::uint64_t seed = 7;
    std::size_t n = 1000;
    std::size_t n_train = 2000;
    std::size_t n_test = 500;
    GenerationConfig data;

    std::vector<FsMethod> fs_methods{FsMethod::None, FsMethod::Bcs, FsMethod::Bpso, FsMethod::Ga};
    std::vector<ClassifierKind> classifiers{ClassifierKind::Svm, ClassifierKind::Knn, ClassifierKind::Ann};
    SvmConfig svm;
    KnnConfig knn;
    AnnConfig ann;
    FsParams fs;
    std::size_t wrapper_k = 12;
    double holdout = 0.2;
    bool standardize = true;

    std::vector<double> grid_svm_c{1, 10, 100, 1000, 10000};
    std::vector<double> grid_svm_gamma{1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
    std::vector<std::size_t> grid_knn_k{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
    std::vector<double> grid_ann_alpha{1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};

    double threshold_quantile = 0.95;
    std::size_t calibration_samples = 1000;
    bool record_timing = false;
    bool write_traces = true;

    /// Throws Error for unknown keys or unparsable values.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    static const std::vector<std::string>& keys();

    /// Checks every field against the owning module's invariants.
    void validate() const;

    std::filesystem::path case_path(const std::string& name) const;
    ClassifierConfig classifier(ClassifierKind kind) const;
    std::vector<ClassifierConfig> grid(ClassifierKind kind) const;
    ExperimentSpec experiment() const;

    /// Resolved configuration as sorted `key = value` lines.
    std::string manifest() const;
};

/// Applies a `key = value` file (`#` comments, blank lines allowed) to `cfg`.
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "<config>");

void write_manifest(const RunConfig& cfg, const std::filesystem::path& path, const std::string& command);

}  // namespace fdilab
