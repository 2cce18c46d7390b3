#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fdilab/common.hpp"
#include "fdilab/powergrid.hpp"

namespace fdilab {

/// Distribution of the sparse state perturbation c. Entries are drawn as
/// s * u with s uniform on {-1, +1} and u ~ U[magnitude_low, magnitude_high].
struct AttackConfig {
    std::size_t max_targets = 0;  // 0 = ceil(n_states / 3)
    double magnitude_low = 0.01;  // radians
    double magnitude_high = 0.1;

    AttackConfig resolved(std::size_t n_states) const;
    void validate(std::size_t n_states) const;
};

struct AttackVector {
    Vector c;  // state perturbation (radians)
    Vector a;  // measurement perturbation, a = H c
};

AttackVector craft_attack(const DcJacobian& jac, const AttackConfig& cfg, Rng& rng);
AttackVector attack_from_state(const DcJacobian& jac, const Vector& c);

/// z + a.
Vector inject(const Vector& z, const AttackVector& atk);

struct DatasetMeta {
    std::string system;
    std::uint64_t seed = 0;
    double noise_sigma = 0.0;
    double load_var = 0.0;
    double attack_ratio = 0.0;
    AttackConfig attack;
};

/// Labeled measurement samples; row i of `features` has label labels[i]
/// (0 = clean, 1 = attacked).
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    DatasetMeta meta;

    std::size_t size() const { return labels.size(); }
    std::size_t n_features() const { return static_cast<std::size_t>(features.cols()); }
    std::size_t count(int label) const;

    /// Rows by index, preserving meta.
    Dataset subset(const std::vector<std::size_t>& rows) const;

    /// Content hash over features and labels.
    std::uint64_t hash() const;
};

struct Split {
    Dataset train;
    Dataset validation;
};

/// Per-class shuffled split; `holdout` of each class goes to validation.
Split stratified_split(const Dataset& ds, double holdout, std::uint64_t seed);

struct GenerationConfig {
    std::size_t n = 1000;
    double attack_ratio = 0.5;
    NoiseModel noise{0.01};
    double load_var = 0.1;
    AttackConfig attack;
    std::uint64_t seed = 1;
};

/// Per sample: each base injection is scaled by U[1 - load_var, 1 + load_var],
/// the DC flow is solved for the angles, and z = H x + noise. Exactly
/// floor(n * attack_ratio) samples (shuffled positions) receive a fresh
/// stealthy attack. Sample i draws from its own stream derived from (seed, i).
Dataset generate_dataset(const BusSystem& sys, const DcJacobian& jac, const GenerationConfig& cfg);
Dataset generate_dataset(const BusSystem& sys, const GenerationConfig& cfg);

struct StealthReport {
    double clean_flag_rate = 0.0;
    double attacked_flag_rate = 0.0;
};

StealthReport stealthiness_report(const Dataset& ds, const DcJacobian& jac, const Vector& variances,
                                  double threshold);

/// WLS residual of every sample, in row order.
std::vector<double> residuals(const Dataset& ds, const DcJacobian& jac, const Vector& variances);

/// Dataset CSV: header f1..fm,label; round-trip float precision. The writer
/// also emits the `<path>.meta` sidecar, which the reader picks up when present.
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// key = value sidecar with the generation metadata.
void write_dataset_meta(const Dataset& ds, const std::filesystem::path& path);
DatasetMeta read_dataset_meta(const std::filesystem::path& path);

}  // namespace fdilab
