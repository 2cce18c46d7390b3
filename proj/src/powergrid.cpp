#include "fdilab/powergrid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fdilab {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
    }
    return out;
}

std::size_t parse_index(const std::string& s, std::size_t line_no) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || v == 0)
        throw Error("line " + std::to_string(line_no) + ": bad bus index '" + s + "'");
    return v;
}

double parse_real(const std::string& s, std::size_t line_no) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v))
        throw Error("line " + std::to_string(line_no) + ": bad number '" + s + "'");
    return v;
}

bool connected(std::size_t n, const std::vector<Branch>& branches) {
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::size_t components = n;
    for (const auto& br : branches) {
        const auto a = find(br.from - 1), b = find(br.to - 1);
        if (a != b) {
            parent[a] = b;
            --components;
        }
    }
    return components == 1;
}

}  // namespace

BusSystem BusSystem::make(std::string name, std::vector<Bus> buses, std::vector<Branch> branches,
                          std::size_t reference_bus) {
    const std::size_t n = buses.size();
    if (n < 2) throw Error("bus system needs at least 2 buses");
    std::sort(buses.begin(), buses.end(), [](const Bus& a, const Bus& b) { return a.index < b.index; });
    for (std::size_t k = 0; k < n; ++k)
        if (buses[k].index != k + 1)
            throw Error("bus indices must be 1.." + std::to_string(n) + " without gaps or duplicates");
    for (std::size_t k = 0; k < branches.size(); ++k) {
        const auto& br = branches[k];
        const std::string tag = "branch " + std::to_string(k + 1);
        if (br.from < 1 || br.from > n || br.to < 1 || br.to > n) throw Error(tag + ": bad bus index");
        if (br.from == br.to) throw Error(tag + ": self-loop");
        if (!(br.reactance > 0.0)) throw Error(tag + ": non-positive reactance");
    }
    if (reference_bus < 1 || reference_bus > n) throw Error("reference bus out of range");
    if (!connected(n, branches)) throw Error("disconnected graph: system is not observable");

    BusSystem sys;
    sys.name_ = std::move(name);
    sys.buses_ = std::move(buses);
    sys.branches_ = std::move(branches);
    sys.reference_bus_ = reference_bus;
    return sys;
}

Vector BusSystem::base_injections() const {
    Vector p(static_cast<Eigen::Index>(buses_.size()));
    for (std::size_t k = 0; k < buses_.size(); ++k) p[static_cast<Eigen::Index>(k)] = buses_[k].base_injection;
    return p;
}

std::size_t BusSystem::state_column(std::size_t bus) const {
    if (bus == reference_bus_) return npos;
    return bus < reference_bus_ ? bus - 1 : bus - 2;
}

BusSystem parse_case(const std::string& text, std::string name) {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<std::size_t> branch_lines;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto f = split_fields(line);
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (f[0] == "BUS") {
            if (f.size() != 3) throw Error(where + "BUS expects 2 fields");
            buses.push_back({parse_index(f[1], line_no), parse_real(f[2], line_no)});
        } else if (f[0] == "BRANCH") {
            if (f.size() != 4) throw Error(where + "BRANCH expects 3 fields");
            Branch br{parse_index(f[1], line_no), parse_index(f[2], line_no), parse_real(f[3], line_no)};
            if (!(br.reactance > 0.0)) throw Error(where + "non-positive reactance");
            if (br.from == br.to) throw Error(where + "self-loop");
            branches.push_back(br);
            branch_lines.push_back(line_no);
        } else {
            throw Error(where + "unknown record '" + f[0] + "'");
        }
    }
    const std::size_t n = buses.size();
    for (std::size_t k = 0; k < branches.size(); ++k)
        if (branches[k].from > n || branches[k].to > n)
            throw Error("line " + std::to_string(branch_lines[k]) + ": bad bus index (only " +
                        std::to_string(n) + " buses)");
    return BusSystem::make(std::move(name), std::move(buses), std::move(branches));
}

BusSystem load_case(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("file not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_case(ss.str(), path.stem().string());
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

std::string RowLabel::str() const {
    return (kind == Kind::BranchFlow ? "flow:" : "inj:") + std::to_string(id);
}

DcJacobian build_jacobian(const BusSystem& sys) {
    const auto nb = static_cast<Eigen::Index>(sys.n_branches());
    DcJacobian jac;
    jac.H = Matrix::Zero(static_cast<Eigen::Index>(sys.n_measurements()),
                         static_cast<Eigen::Index>(sys.n_states()));
    jac.row_labels.reserve(sys.n_measurements());

    auto add = [&](Eigen::Index row, std::size_t bus, double v) {
        const auto col = sys.state_column(bus);
        if (col != BusSystem::npos) jac.H(row, static_cast<Eigen::Index>(col)) += v;
    };
    for (Eigen::Index k = 0; k < nb; ++k) {
        const auto& br = sys.branches()[static_cast<std::size_t>(k)];
        const double b = 1.0 / br.reactance;
        add(k, br.from, b);
        add(k, br.to, -b);
        // Injection rows: the flow leaves `from` and enters `to`.
        add(nb + static_cast<Eigen::Index>(br.from) - 1, br.from, b);
        add(nb + static_cast<Eigen::Index>(br.from) - 1, br.to, -b);
        add(nb + static_cast<Eigen::Index>(br.to) - 1, br.to, b);
        add(nb + static_cast<Eigen::Index>(br.to) - 1, br.from, -b);
        jac.row_labels.push_back({RowLabel::Kind::BranchFlow, static_cast<std::size_t>(k) + 1});
    }
    for (const auto& bus : sys.buses()) jac.row_labels.push_back({RowLabel::Kind::BusInjection, bus.index});

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac.H);
    if (static_cast<std::size_t>(qr.rank()) != sys.n_states())
        throw Error("Jacobian rank " + std::to_string(qr.rank()) + " < " + std::to_string(sys.n_states()) +
                    ": full column rank invariant failed");
    return jac;
}

Matrix reduced_susceptance(const BusSystem& sys) {
    const auto ns = static_cast<Eigen::Index>(sys.n_states());
    Matrix B = Matrix::Zero(ns, ns);
    for (const auto& br : sys.branches()) {
        const double b = 1.0 / br.reactance;
        const auto i = sys.state_column(br.from), j = sys.state_column(br.to);
        if (i != BusSystem::npos) B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += b;
        if (j != BusSystem::npos) B(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += b;
        if (i != BusSystem::npos && j != BusSystem::npos) {
            B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -= b;
            B(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) -= b;
        }
    }
    return B;
}

Vector solve_dc_flow(const BusSystem& sys, const Vector& injections) {
    if (static_cast<std::size_t>(injections.size()) != sys.n_buses())
        throw Error("solve_dc_flow: injection vector length mismatch");
    Vector p(static_cast<Eigen::Index>(sys.n_states()));
    for (const auto& bus : sys.buses()) {
        const auto col = sys.state_column(bus.index);
        if (col != BusSystem::npos)
            p[static_cast<Eigen::Index>(col)] = injections[static_cast<Eigen::Index>(bus.index) - 1];
    }
    return Eigen::MatrixXd(reduced_susceptance(sys)).llt().solve(p);
}

Vector NoiseModel::variances(std::size_t m) const {
    if (!(sigma >= 0.0)) throw Error("noise sigma must be >= 0");
    const double v = sigma > 0.0 ? sigma * sigma : 1.0;
    return Vector::Constant(static_cast<Eigen::Index>(m), v);
}

Vector measure(const DcJacobian& jac, const Vector& x, const NoiseModel& noise, Rng& rng) {
    if (static_cast<std::size_t>(x.size()) != jac.cols()) throw Error("measure: dimension mismatch");
    if (!(noise.sigma >= 0.0)) throw Error("noise sigma must be >= 0");
    Vector z = jac.H * x;
    if (noise.sigma > 0.0) {
        std::normal_distribution<double> gauss(0.0, noise.sigma);
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] += gauss(rng);
    }
    return z;
}

WlsEstimator::WlsEstimator(const DcJacobian& jac, const Vector& variances) : H_(jac.H) {
    if (static_cast<std::size_t>(variances.size()) != jac.rows()) throw Error("covariance dimension mismatch");
    if ((variances.array() <= 0.0).any()) throw Error("covariance must be positive definite");
    inv_var_ = variances.cwiseInverse();
    gain_ = H_.transpose() * inv_var_.asDiagonal() * H_;
    llt_.compute(gain_);
    if (llt_.info() != Eigen::Success) throw Error("singular gain matrix");
}

Vector WlsEstimator::estimate(const Vector& z) const {
    if (z.size() != H_.rows()) throw Error("wls_estimate: dimension mismatch");
    return llt_.solve(H_.transpose() * inv_var_.cwiseProduct(z));
}

Vector WlsEstimator::estimate_iterative(const Vector& z, int max_iterations, double tol, int* iterations) const {
    if (z.size() != H_.rows()) throw Error("wls_estimate: dimension mismatch");
    Vector x = Vector::Zero(H_.cols());
    int k = 0;
    while (k < max_iterations) {
        const Vector step = llt_.solve(H_.transpose() * inv_var_.cwiseProduct(z - H_ * x));
        x += step;
        ++k;
        if (step.lpNorm<Eigen::Infinity>() <= tol * std::max(1.0, x.lpNorm<Eigen::Infinity>())) break;
    }
    if (iterations) *iterations = k;
    return x;
}

Vector wls_estimate(const DcJacobian& jac, const Vector& variances, const Vector& z) {
    return WlsEstimator(jac, variances).estimate(z);
}

double residual_norm(const Vector& z, const DcJacobian& jac, const Vector& x) {
    if (z.size() != jac.H.rows() || x.size() != jac.H.cols()) throw Error("residual_norm: dimension mismatch");
    return (z - jac.H * x).squaredNorm();
}

bool bad_data_test(double residual, double threshold) {
    if (!(threshold > 0.0)) throw Error("bad-data threshold must be positive");
    return residual >= threshold;
}

}  // namespace fdilab
