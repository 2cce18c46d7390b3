#include "fdilab/attack.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace fdilab {

AttackConfig AttackConfig::resolved(std::size_t n_states) const {
    AttackConfig out = *this;
    if (out.max_targets == 0) out.max_targets = (n_states + 2) / 3;
    return out;
}

void AttackConfig::validate(std::size_t n_states) const {
    const auto r = resolved(n_states);
    if (r.max_targets < 1 || r.max_targets > n_states)
        throw Error("attack max_targets must be in [1, " + std::to_string(n_states) + "]");
    if (!(magnitude_low > 0.0) || !(magnitude_low <= magnitude_high))
        throw Error("attack magnitudes must satisfy 0 < low <= high");
}

AttackVector attack_from_state(const DcJacobian& jac, const Vector& c) {
    if (static_cast<std::size_t>(c.size()) != jac.cols()) throw Error("attack: dimension mismatch");
    return {c, jac.H * c};
}

AttackVector craft_attack(const DcJacobian& jac, const AttackConfig& cfg, Rng& rng) {
    const std::size_t n = jac.cols();
    const auto r = cfg.resolved(n);
    r.validate(n);
    const std::size_t t = uniform_index(rng, 1, r.max_targets);
    // Partial Fisher-Yates picks t distinct states.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Vector c = Vector::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < t; ++k) {
        std::swap(order[k], order[uniform_index(rng, k, n - 1)]);
        const double sign = uniform_index(rng, 0, 1) == 0 ? -1.0 : 1.0;
        c[static_cast<Eigen::Index>(order[k])] = sign * uniform(rng, r.magnitude_low, r.magnitude_high);
    }
    return attack_from_state(jac, c);
}

Vector inject(const Vector& z, const AttackVector& atk) {
    if (z.size() != atk.a.size()) throw Error("inject: dimension mismatch");
    return z + atk.a;
}

std::size_t Dataset::count(int label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.meta = meta;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out.features.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(rows[k]));
        out.labels.push_back(labels.at(rows[k]));
    }
    return out;
}

std::uint64_t Dataset::hash() const {
    const auto rows = static_cast<std::uint64_t>(features.rows()), cols = static_cast<std::uint64_t>(features.cols());
    std::uint64_t h = fnv1a(&rows, sizeof rows);
    h = fnv1a(&cols, sizeof cols, h);
    h = fnv1a(features.data(), sizeof(double) * static_cast<std::size_t>(features.size()), h);
    return fnv1a(labels.data(), sizeof(int) * labels.size(), h);
}

Split stratified_split(const Dataset& ds, double holdout, std::uint64_t seed) {
    if (!(holdout > 0.0 && holdout < 1.0)) throw Error("holdout fraction must be in (0, 1)");
    Rng rng = make_rng(seed, "split");
    std::vector<std::size_t> train_rows, val_rows;
    for (int label : {0, 1}) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (ds.labels[i] == label) rows.push_back(i);
        std::shuffle(rows.begin(), rows.end(), rng);
        const auto n_val = static_cast<std::size_t>(std::llround(holdout * static_cast<double>(rows.size())));
        val_rows.insert(val_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val));
        train_rows.insert(train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_val), rows.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(val_rows.begin(), val_rows.end());
    if (train_rows.empty() || val_rows.empty()) throw Error("split leaves an empty partition");
    return {ds.subset(train_rows), ds.subset(val_rows)};
}

Dataset generate_dataset(const BusSystem& sys, const DcJacobian& jac, const GenerationConfig& cfg) {
    if (cfg.n < 2) throw Error("generate_dataset: n must be >= 2");
    if (!(cfg.attack_ratio >= 0.0 && cfg.attack_ratio <= 1.0)) throw Error("attack_ratio must be in [0, 1]");
    if (!(cfg.load_var >= 0.0 && cfg.load_var < 1.0)) throw Error("load_var must be in [0, 1)");
    if (!(cfg.noise.sigma >= 0.0)) throw Error("noise sigma must be >= 0");
    const auto attack = cfg.attack.resolved(sys.n_states());
    if (cfg.attack_ratio > 0.0) attack.validate(sys.n_states());

    const auto n_attacked = static_cast<std::size_t>(std::floor(static_cast<double>(cfg.n) * cfg.attack_ratio));
    std::vector<int> labels(cfg.n, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_attacked), 1);
    Rng shuffle_rng = make_rng(cfg.seed, "labels");
    std::shuffle(labels.begin(), labels.end(), shuffle_rng);

    const Vector base = sys.base_injections();
    const Eigen::LLT<Eigen::MatrixXd> flow(Eigen::MatrixXd(reduced_susceptance(sys)));

    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(cfg.n), static_cast<Eigen::Index>(jac.rows()));
    ds.labels = labels;
    ds.meta = {sys.name(), cfg.seed, cfg.noise.sigma, cfg.load_var, cfg.attack_ratio, attack};

    parallel_for(cfg.n, [&](std::size_t i) {
        Rng rng = make_rng(cfg.seed, "sample", i);
        Vector p(static_cast<Eigen::Index>(sys.n_states()));
        for (const auto& bus : sys.buses()) {
            const double scale = uniform(rng, 1.0 - cfg.load_var, 1.0 + cfg.load_var);
            const auto col = sys.state_column(bus.index);
            if (col != BusSystem::npos)
                p[static_cast<Eigen::Index>(col)] = scale * base[static_cast<Eigen::Index>(bus.index) - 1];
        }
        const Vector x = flow.solve(p);
        Vector z = measure(jac, x, cfg.noise, rng);
        if (labels[i] == 1) z = inject(z, craft_attack(jac, attack, rng));
        ds.features.row(static_cast<Eigen::Index>(i)) = z.transpose();
    });
    if (!ds.features.allFinite()) throw Error("generate_dataset: non-finite features");
    return ds;
}

Dataset generate_dataset(const BusSystem& sys, const GenerationConfig& cfg) {
    return generate_dataset(sys, build_jacobian(sys), cfg);
}

std::vector<double> residuals(const Dataset& ds, const DcJacobian& jac, const Vector& variances) {
    if (ds.n_features() != jac.rows()) throw Error("dataset does not match the Jacobian");
    const WlsEstimator wls(jac, variances);
    std::vector<double> out(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Vector z = ds.features.row(static_cast<Eigen::Index>(i)).transpose();
        out[i] = residual_norm(z, jac, wls.estimate(z));
    }
    return out;
}

StealthReport stealthiness_report(const Dataset& ds, const DcJacobian& jac, const Vector& variances,
                                  double threshold) {
    const auto r = residuals(ds, jac, variances);
    std::size_t flagged[2] = {0, 0}, total[2] = {0, 0};
    for (std::size_t i = 0; i < r.size(); ++i) {
        const int y = ds.labels[i] == 1 ? 1 : 0;
        ++total[y];
        if (bad_data_test(r[i], threshold)) ++flagged[y];
    }
    auto rate = [](std::size_t f, std::size_t t) { return t ? static_cast<double>(f) / static_cast<double>(t) : 0.0; };
    return {rate(flagged[0], total[0]), rate(flagged[1], total[1])};
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    for (std::size_t j = 0; j < ds.n_features(); ++j) out << 'f' << j + 1 << ',';
    out << "label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (Eigen::Index j = 0; j < ds.features.cols(); ++j)
            out << format_double(ds.features(static_cast<Eigen::Index>(i), j)) << ',';
        out << ds.labels[i] << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
    out.close();
    auto meta_path = path;
    meta_path += ".meta";
    write_dataset_meta(ds, meta_path);
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("file not found: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(path.string() + ": empty dataset file");
    const auto n_cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    if (n_cols < 2 || line.substr(line.rfind(',') + 1).rfind("label", 0) != 0)
        throw Error(path.string() + ": header must end with 'label'");
    const std::size_t m = n_cols - 1;
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (std::size_t j = 0; j < n_cols; ++j) {
            double v = 0.0;
            auto [q, ec] = std::from_chars(p, end, v);
            if (ec != std::errc{} || (j + 1 < n_cols && (q == end || *q != ',')))
                throw Error(path.string() + ": line " + std::to_string(line_no) + ": malformed row");
            p = q + 1;
            if (j < m) {
                values.push_back(v);
            } else {
                if (v != 0.0 && v != 1.0)
                    throw Error(path.string() + ": line " + std::to_string(line_no) + ": label must be 0 or 1");
                labels.push_back(static_cast<int>(v));
            }
        }
    }
    Dataset ds;
    ds.labels = std::move(labels);
    ds.features = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(ds.labels.size()),
                                     static_cast<Eigen::Index>(m));
    if (!ds.features.allFinite()) throw Error(path.string() + ": non-finite feature values");
    auto meta_path = path;
    meta_path += ".meta";
    if (std::filesystem::exists(meta_path)) ds.meta = read_dataset_meta(meta_path);
    return ds;
}

void write_dataset_meta(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    const auto& m = ds.meta;
    out << "system = " << m.system << '\n'
        << "seed = " << m.seed << '\n'
        << "noise_sigma = " << format_double(m.noise_sigma) << '\n'
        << "load_var = " << format_double(m.load_var) << '\n'
        << "attack_ratio = " << format_double(m.attack_ratio) << '\n'
        << "attack_max_targets = " << m.attack.max_targets << '\n'
        << "attack_magnitude_low = " << format_double(m.attack.magnitude_low) << '\n'
        << "attack_magnitude_high = " << format_double(m.attack.magnitude_high) << '\n'
        << "n_samples = " << ds.size() << '\n'
        << "n_features = " << ds.n_features() << '\n'
        << "n_attacked = " << ds.count(1) << '\n';
}

DatasetMeta read_dataset_meta(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("file not found: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto num = [&](const char* key) { return kv.count(key) ? std::stod(kv[key]) : 0.0; };
    DatasetMeta m;
    m.system = kv["system"];
    m.seed = kv.count("seed") ? std::stoull(kv["seed"]) : 0;
    m.noise_sigma = num("noise_sigma");
    m.load_var = num("load_var");
    m.attack_ratio = num("attack_ratio");
    m.attack.max_targets = static_cast<std::size_t>(num("attack_max_targets"));
    m.attack.magnitude_low = num("attack_magnitude_low");
    m.attack.magnitude_high = num("attack_magnitude_high");
    return m;
}

}  // namespace fdilab
