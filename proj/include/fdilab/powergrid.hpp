#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "fdilab/common.hpp"

namespace fdilab {

struct Bus {
    std::size_t index = 0;  // 1-based
    double base_injection = 0.0;  // per unit, net generation minus load
};

struct Branch {
    std::size_t from = 0;  // 1-based bus indices
    std::size_t to = 0;
    double reactance = 0.0;  // per unit
};

/// Bus/branch topology of a test case. Construct through make() or load_case()
/// so that the connectivity and positivity invariants are checked.
class BusSystem {
public:
    static BusSystem make(std::string name, std::vector<Bus> buses, std::vector<Branch> branches,
                          std::size_t reference_bus = 1);

    const std::string& name() const { return name_; }
    std::size_t n_buses() const { return buses_.size(); }
    std::size_t n_branches() const { return branches_.size(); }
    std::size_t n_states() const { return buses_.size() - 1; }
    std::size_t n_measurements() const { return branches_.size() + buses_.size(); }
    std::size_t reference_bus() const { return reference_bus_; }
    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Branch>& branches() const { return branches_; }

    /// Base injections in bus order.
    Vector base_injections() const;

    /// State column for a bus, or npos for the reference bus.
    std::size_t state_column(std::size_t bus) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::string name_;
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    std::size_t reference_bus_ = 1;
};

/// Parses the case CSV format:
///   BUS,<index>,<base_injection_pu>
///   BRANCH,<from>,<to>,<reactance_pu>
/// with `#` comments. Errors carry the offending line number.
BusSystem load_case(const std::filesystem::path& path);
BusSystem parse_case(const std::string& text, std::string name);

struct RowLabel {
    enum class Kind { BranchFlow, BusInjection };
    Kind kind;
    std::size_t id;  // branch ordinal (1-based, case order) or bus index

    std::string str() const;
};

/// Linear DC measurement model: branch flows first (case order), then bus
/// injections (bus order); the reference angle column is eliminated.
struct DcJacobian {
    Matrix H;
    std::vector<RowLabel> row_labels;

    std::size_t rows() const { return static_cast<std::size_t>(H.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(H.cols()); }
};

DcJacobian build_jacobian(const BusSystem& sys);

/// Reduced bus susceptance matrix (reference row/column removed).
Matrix reduced_susceptance(const BusSystem& sys);

/// Angles at non-reference buses for the given injections (all buses, bus order).
Vector solve_dc_flow(const BusSystem& sys, const Vector& injections);

struct NoiseModel {
    double sigma = 0.01;

    /// Diagonal of W = sigma^2 I. Zero-noise models fall back to unit variances,
    /// since the WLS estimate does not depend on a scalar multiple of W.
    Vector variances(std::size_t m) const;
};

/// z = H x + e with e ~ N(0, sigma^2) i.i.d.
Vector measure(const DcJacobian& jac, const Vector& x, const NoiseModel& noise, Rng& rng);

/// Weighted least squares for a fixed Jacobian and diagonal covariance.
/// Factorizes the gain matrix G = H^T W^-1 H once.
class WlsEstimator {
public:
    WlsEstimator(const DcJacobian& jac, const Vector& variances);

    /// Direct solve of the normal equations G x = H^T W^-1 z.
    Vector estimate(const Vector& z) const;

    /// Fixed-point form x <- x + G^-1 H^T W^-1 (z - H x), started from x0 = 0.
    /// Converges in one step for the linear model; `iterations` reports the count.
    Vector estimate_iterative(const Vector& z, int max_iterations = 20, double tol = 1e-14,
                              int* iterations = nullptr) const;

    const Matrix& gain() const { return gain_; }

private:
    Matrix H_;
    Vector inv_var_;
    Matrix gain_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

Vector wls_estimate(const DcJacobian& jac, const Vector& variances, const Vector& z);

/// Squared 2-norm ||z - H x||^2.
double residual_norm(const Vector& z, const DcJacobian& jac, const Vector& x);

/// True when bad data is present (residual >= threshold).
bool bad_data_test(double residual, double threshold);

}  // namespace fdilab
