#include "fdilab/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fdilab {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != value.size()) throw Error(key + ": expected a number, got '" + value + "'");
    return v;
}

std::uint64_t to_uint(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        if (!value.empty() && value[0] != '-') v = std::stoull(value, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != value.size())
        throw Error(key + ": expected a non-negative integer, got '" + value + "'");
    return v;
}

bool to_bool(const std::string& key, const std::string& value) {
    std::string s = value;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw Error(key + ": expected a boolean, got '" + value + "'");
}

template <class T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& fmt) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
    return out;
}

struct Field {
    std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class Member>
Field double_field(Member member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = to_double(k, v); },
            [member](const RunConfig& c) { return format_double(member(c)); }};
}

template <class Member>
Field size_field(Member member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) {
                member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(to_uint(k, v));
            },
            [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <class Member>
Field bool_field(Member member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = to_bool(k, v); },
            [member](const RunConfig& c) { return std::string(member(c) ? "true" : "false"); }};
}

template <class Member>
Field path_field(Member member) {
    return {[member](RunConfig& c, const std::string&, const std::string& v) { member(c) = v; },
            [member](const RunConfig& c) { return member(c).string(); }};
}

template <class Member>
Field double_list_field(Member member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) {
                std::vector<double> out;
                for (const auto& s : split_list(v)) out.push_back(to_double(k, s));
                member(c) = out;
            },
            [member](const RunConfig& c) {
                return join<double>(member(c), [](const double& d) { return format_double(d); });
            }};
}

#define FDILAB_MEMBER(expr) [](auto& c) -> auto& { return c.expr; }

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = {
        {"case_dir", path_field(FDILAB_MEMBER(case_dir))},
        {"case", {[](RunConfig& c, const std::string&, const std::string& v) { c.case_name = v; },
                  [](const RunConfig& c) { return c.case_name; }}},
        {"systems", {[](RunConfig& c, const std::string&, const std::string& v) { c.systems = split_list(v); },
                     [](const RunConfig& c) {
                         return join<std::string>(c.systems, [](const std::string& s) { return s; });
                     }}},
        {"out_dir", path_field(FDILAB_MEMBER(out_dir))},
        {"dataset", path_field(FDILAB_MEMBER(dataset))},
        {"seed", size_field(FDILAB_MEMBER(seed))},
        {"n", size_field(FDILAB_MEMBER(n))},
        {"n_train", size_field(FDILAB_MEMBER(n_train))},
        {"n_test", size_field(FDILAB_MEMBER(n_test))},
        {"attack_ratio", double_field(FDILAB_MEMBER(data.attack_ratio))},
        {"noise_sigma", double_field(FDILAB_MEMBER(data.noise.sigma))},
        {"load_var", double_field(FDILAB_MEMBER(data.load_var))},
        {"attack.max_targets", size_field(FDILAB_MEMBER(data.attack.max_targets))},
        {"attack.magnitude_low", double_field(FDILAB_MEMBER(data.attack.magnitude_low))},
        {"attack.magnitude_high", double_field(FDILAB_MEMBER(data.attack.magnitude_high))},
        {"fs", {[](RunConfig& c, const std::string&, const std::string& v) {
                    std::vector<FsMethod> out;
                    for (const auto& s : split_list(v)) out.push_back(parse_fs_method(s));
                    c.fs_methods = out;
                },
                [](const RunConfig& c) {
                    return join<FsMethod>(c.fs_methods, [](const FsMethod& m) { return to_string(m); });
                }}},
        {"classifier", {[](RunConfig& c, const std::string&, const std::string& v) {
                            std::vector<ClassifierKind> out;
                            for (const auto& s : split_list(v)) out.push_back(parse_classifier_kind(s));
                            c.classifiers = out;
                        },
                        [](const RunConfig& c) {
                            return join<ClassifierKind>(c.classifiers,
                                                        [](const ClassifierKind& k) { return to_string(k); });
                        }}},
        {"svm.C", double_field(FDILAB_MEMBER(svm.C))},
        {"svm.gamma", double_field(FDILAB_MEMBER(svm.gamma))},
        {"svm.tol", double_field(FDILAB_MEMBER(svm.tol))},
        {"svm.max_passes", size_field(FDILAB_MEMBER(svm.max_passes))},
        {"knn.k", size_field(FDILAB_MEMBER(knn.k))},
        {"ann.alpha", double_field(FDILAB_MEMBER(ann.alpha))},
        {"ann.epochs", size_field(FDILAB_MEMBER(ann.epochs))},
        {"ann.batch", size_field(FDILAB_MEMBER(ann.batch))},
        {"ann.seed", size_field(FDILAB_MEMBER(ann.seed))},
        {"bcs.alpha", double_field(FDILAB_MEMBER(fs.bcs.alpha))},
        {"bcs.pa", double_field(FDILAB_MEMBER(fs.bcs.pa))},
        {"bcs.lambda", double_field(FDILAB_MEMBER(fs.bcs.lambda))},
        {"bcs.population", size_field(FDILAB_MEMBER(fs.bcs.population))},
        {"bcs.iterations", size_field(FDILAB_MEMBER(fs.bcs.iterations))},
        {"bpso.c1", double_field(FDILAB_MEMBER(fs.bpso.c1))},
        {"bpso.c2", double_field(FDILAB_MEMBER(fs.bpso.c2))},
        {"bpso.w", double_field(FDILAB_MEMBER(fs.bpso.w))},
        {"bpso.v_max", double_field(FDILAB_MEMBER(fs.bpso.v_max))},
        {"bpso.population", size_field(FDILAB_MEMBER(fs.bpso.population))},
        {"bpso.iterations", size_field(FDILAB_MEMBER(fs.bpso.iterations))},
        {"ga.mutation_rate", double_field(FDILAB_MEMBER(fs.ga.mutation_rate))},
        {"ga.population", size_field(FDILAB_MEMBER(fs.ga.population))},
        {"ga.iterations", size_field(FDILAB_MEMBER(fs.ga.iterations))},
        {"ga.tournament", size_field(FDILAB_MEMBER(fs.ga.tournament))},
        {"ga.elite", size_field(FDILAB_MEMBER(fs.ga.elite))},
        {"wrapper.k", size_field(FDILAB_MEMBER(wrapper_k))},
        {"holdout", double_field(FDILAB_MEMBER(holdout))},
        {"standardize", bool_field(FDILAB_MEMBER(standardize))},
        {"grid.svm.C", double_list_field(FDILAB_MEMBER(grid_svm_c))},
        {"grid.svm.gamma", double_list_field(FDILAB_MEMBER(grid_svm_gamma))},
        {"grid.knn.k", {[](RunConfig& c, const std::string& k, const std::string& v) {
                            std::vector<std::size_t> out;
                            for (const auto& s : split_list(v)) out.push_back(to_uint(k, s));
                            c.grid_knn_k = out;
                        },
                        [](const RunConfig& c) {
                            return join<std::size_t>(c.grid_knn_k, [](const std::size_t& k) { return std::to_string(k); });
                        }}},
        {"grid.ann.alpha", double_list_field(FDILAB_MEMBER(grid_ann_alpha))},
        {"threshold_quantile", double_field(FDILAB_MEMBER(threshold_quantile))},
        {"calibration_samples", size_field(FDILAB_MEMBER(calibration_samples))},
        {"record_timing", bool_field(FDILAB_MEMBER(record_timing))},
        {"write_traces", bool_field(FDILAB_MEMBER(write_traces))},
    };
    return table;
}

#undef FDILAB_MEMBER

std::string normalize_key(std::string key) {
    key = trim(key);
    std::replace(key.begin(), key.end(), '-', '_');
    return key;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    const auto k = normalize_key(key);
    const auto it = fields().find(k);
    if (it == fields().end()) throw Error("unknown config key '" + key + "'");
    it->second.set(*this, k, trim(value));
}

std::string RunConfig::get(const std::string& key) const {
    const auto it = fields().find(normalize_key(key));
    if (it == fields().end()) throw Error("unknown config key '" + key + "'");
    return it->second.get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [k, f] : fields()) out.push_back(k);
        return out;
    }();
    return names;
}

void RunConfig::validate() const {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw Error(msg);
    };
    require(!case_name.empty(), "case must not be empty");
    require(!systems.empty(), "systems must list at least one case");
    require(n >= 2, "n must be >= 2");
    require(n_train >= 2 && n_test >= 2, "n_train and n_test must be >= 2");
    require(data.attack_ratio >= 0.0 && data.attack_ratio <= 1.0, "attack_ratio must be in [0, 1]");
    require(data.noise.sigma >= 0.0, "noise_sigma must be >= 0");
    require(data.load_var >= 0.0 && data.load_var < 1.0, "load_var must be in [0, 1)");
    require(data.attack.magnitude_low > 0.0 && data.attack.magnitude_low <= data.attack.magnitude_high,
            "attack magnitudes must satisfy 0 < low <= high");
    require(!fs_methods.empty(), "fs must list at least one method");
    require(!classifiers.empty(), "classifier must list at least one classifier");
    svm.validate();
    knn.validate();
    ann.validate();
    KnnConfig{wrapper_k}.validate();
    fs.bcs.validate();
    fs.bpso.validate();
    fs.ga.validate();
    require(holdout > 0.0 && holdout < 1.0, "holdout must be in (0, 1)");
    require(threshold_quantile > 0.0 && threshold_quantile < 1.0, "threshold_quantile must be in (0, 1)");
    require(calibration_samples >= 2, "calibration_samples must be >= 2");
    require(!grid_svm_c.empty() && !grid_svm_gamma.empty() && !grid_knn_k.empty() && !grid_ann_alpha.empty(),
            "parameter grids must be non-empty");
    for (auto kind : {ClassifierKind::Svm, ClassifierKind::Knn, ClassifierKind::Ann})
        for (const auto& c : grid(kind)) std::visit([](const auto& x) { x.validate(); }, c);
}

std::filesystem::path RunConfig::case_path(const std::string& name) const {
    const std::filesystem::path given(name);
    if (std::filesystem::exists(given)) return given;
    for (const auto& candidate : {case_dir / given, case_dir / (name + ".csv")})
        if (!case_dir.empty() && std::filesystem::exists(candidate)) return candidate;
    return given;
}

ClassifierConfig RunConfig::classifier(ClassifierKind kind) const {
    switch (kind) {
        case ClassifierKind::Svm: return svm;
        case ClassifierKind::Knn: return knn;
        case ClassifierKind::Ann: return ann;
    }
    return knn;
}

std::vector<ClassifierConfig> RunConfig::grid(ClassifierKind kind) const {
    switch (kind) {
        case ClassifierKind::Svm: return svm_grid(grid_svm_c, grid_svm_gamma, svm);
        case ClassifierKind::Knn: return knn_grid(grid_knn_k);
        case ClassifierKind::Ann: return ann_grid(grid_ann_alpha, ann);
    }
    return {};
}

ExperimentSpec RunConfig::experiment() const {
    ExperimentSpec spec;
    spec.systems.clear();
    for (const auto& s : systems) spec.systems.push_back(case_path(s));
    spec.fs_methods = fs_methods;
    spec.classifiers.clear();
    for (auto kind : classifiers) spec.classifiers.push_back(classifier(kind));
    spec.n_train = n_train;
    spec.n_test = n_test;
    spec.data = data;
    spec.fs_params = fs;
    spec.wrapper = KnnConfig{wrapper_k};
    spec.fs_holdout = holdout;
    spec.standardize = standardize;
    spec.seed = seed;
    if (write_traces) spec.trace_dir = out_dir / "traces";
    return spec;
}

std::string RunConfig::manifest() const {
    std::ostringstream os;
    for (const auto& [k, f] : fields()) os << k << " = " << f.get(*this) << '\n';
    return os.str();
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(origin + ": line " + std::to_string(line_no) + ": expected 'key = value'");
        try {
            cfg.set(line.substr(0, eq), line.substr(eq + 1));
        } catch (const Error& e) {
            throw Error(origin + ": line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("file not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config_text(cfg, ss.str(), path.string());
}

void write_manifest(const RunConfig& cfg, const std::filesystem::path& path, const std::string& command) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "# fdilab " << command << " run manifest\n" << cfg.manifest();
}

}  // namespace fdilab
