#include "fdilab/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace fdilab {

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// ResultCache

ResultCache::ResultCache(std::filesystem::path file) : file_(std::move(file)) {
    std::ifstream in(file_);
    std::string line;
    while (std::getline(in, line)) {
        const auto tab = line.rfind('\t');
        if (tab == std::string::npos) continue;
        try {
            values_[line.substr(0, tab)] = std::stod(line.substr(tab + 1));
        } catch (const std::exception&) {
            // Skip corrupt lines; the entry is recomputed.
        }
    }
}

std::optional<double> ResultCache::find(const std::string& key) const {
    std::lock_guard lock(mutex_);
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

void ResultCache::insert(const std::string& key, double value) {
    std::lock_guard lock(mutex_);
    values_[key] = value;
}

std::size_t ResultCache::size() const {
    std::lock_guard lock(mutex_);
    return values_.size();
}

void ResultCache::flush() const {
    if (file_.empty()) return;
    std::lock_guard lock(mutex_);
    if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
    std::ofstream out(file_, std::ios::binary);
    if (!out) throw Error("cannot write cache " + file_.string());
    for (const auto& [k, v] : values_) out << k << '\t' << format_double(v) << '\n';
}

// ---------------------------------------------------------------------------
// Grid search

void GridSearchSpec::validate() const {
    if (grid.empty()) throw Error("grid search: empty parameter grid");
    if (!(holdout > 0.0 && holdout < 1.0)) throw Error("grid search: holdout must be in (0, 1)");
    for (const auto& cfg : grid) std::visit([](const auto& c) { c.validate(); }, cfg);
}

std::vector<ClassifierConfig> svm_grid(const std::vector<double>& Cs, const std::vector<double>& gammas,
                                       const SvmConfig& base) {
    std::vector<ClassifierConfig> out;
    for (double C : Cs)
        for (double g : gammas) {
            SvmConfig c = base;
            c.C = C;
            c.gamma = g;
            out.emplace_back(c);
        }
    return out;
}

std::vector<ClassifierConfig> knn_grid(const std::vector<std::size_t>& ks) {
    std::vector<ClassifierConfig> out;
    for (auto k : ks) out.emplace_back(KnnConfig{k});
    return out;
}

std::vector<ClassifierConfig> ann_grid(const std::vector<double>& alphas, const AnnConfig& base) {
    std::vector<ClassifierConfig> out;
    for (double a : alphas) {
        AnnConfig c = base;
        c.alpha = a;
        out.emplace_back(c);
    }
    return out;
}

std::vector<ClassifierConfig> default_grid(ClassifierKind kind) {
    switch (kind) {
        case ClassifierKind::Svm: return svm_grid({1, 10, 100, 1000, 10000}, {1e-5, 1e-4, 1e-3, 1e-2, 1e-1});
        case ClassifierKind::Knn: {
            std::vector<std::size_t> ks(20);
            for (std::size_t k = 0; k < ks.size(); ++k) ks[k] = k + 1;
            return knn_grid(ks);
        }
        case ClassifierKind::Ann: return ann_grid({1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1});
    }
    return {};
}

GridSearchResult grid_search(const Dataset& data, const GridSearchSpec& spec, ResultCache* cache,
                             const DataObserver& observer) {
    spec.validate();
    if (observer) observer("gridsearch", data);
    const Split split = stratified_split(data, spec.holdout, spec.seed);
    const std::string prefix = hex64(data.hash()) + "|holdout=" + format_double(spec.holdout) +
                               "|seed=" + std::to_string(spec.seed) + "|std=" + (spec.standardize ? "1" : "0") + "|";
    const auto mask = FeatureMask::all(data.n_features());

    GridSearchResult result;
    result.cells.resize(spec.grid.size());
    std::atomic<std::size_t> trainings{0};
    parallel_for(spec.grid.size(), [&](std::size_t i) {
        GridCell& cell = result.cells[i];
        cell.config = spec.grid[i];
        const std::string key = prefix + describe(cell.config);
        if (cache) {
            if (auto hit = cache->find(key)) {
                cell.accuracy = *hit;
                cell.cached = true;
                return;
            }
        }
        try {
            ++trainings;
            const auto model = train_model(split.train, mask, cell.config, spec.standardize);
            cell.accuracy = accuracy(predict(model, split.validation.features), split.validation.labels);
            if (cache) cache->insert(key, cell.accuracy);
        } catch (const std::exception& e) {
            cell.failed = true;
            cell.error = e.what();
        }
    });
    result.trainings = trainings.load();

    bool found = false;
    for (const auto& cell : result.cells) {
        if (cell.failed) continue;
        if (!found || cell.accuracy > result.best_accuracy) {
            result.best = cell.config;
            result.best_accuracy = cell.accuracy;
            found = true;
        }
    }
    if (!found) throw Error("grid search: every grid cell failed (" + result.cells.front().error + ")");
    return result;
}

void write_grid_csv(const GridSearchResult& result, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "classifier,params,accuracy,status\n";
    for (const auto& cell : result.cells) {
        std::string params = describe(cell.config);
        const auto open = params.find('('), close = params.rfind(')');
        const std::string name = params.substr(0, open);
        params = params.substr(open + 1, close - open - 1);
        std::replace(params.begin(), params.end(), ',', ';');
        out << name << ',' << params << ',' << (cell.failed ? "" : format_double(cell.accuracy)) << ','
            << (cell.failed ? "failed" : "ok") << '\n';
    }
}

// ---------------------------------------------------------------------------
// Experiment matrix

void ExperimentSpec::validate() const {
    if (systems.empty()) throw Error("experiment: no systems");
    if (fs_methods.empty()) throw Error("experiment: no feature-selection methods");
    if (classifiers.empty()) throw Error("experiment: no classifiers");
    if (n_train < 2 || n_test < 2) throw Error("experiment: n_train and n_test must be >= 2");
    if (!(fs_holdout > 0.0 && fs_holdout < 1.0)) throw Error("experiment: fs_holdout must be in (0, 1)");
    for (const auto& cfg : classifiers) std::visit([](const auto& c) { c.validate(); }, cfg);
    std::visit([](const auto& c) { c.validate(); }, wrapper);
    fs_params.bcs.validate();
    fs_params.bpso.validate();
    fs_params.ga.validate();
}

MatrixRun run_matrix(const ExperimentSpec& spec, const DataObserver& observer) {
    spec.validate();

    struct SystemData {
        std::string name;
        Dataset train;
        Dataset test;
        std::vector<std::string> row_labels;
    };
    std::vector<SystemData> systems;
    for (const auto& path : spec.systems) {
        const BusSystem sys = load_case(path);
        const DcJacobian jac = build_jacobian(sys);
        GenerationConfig g = spec.data;
        g.n = spec.n_train;
        g.seed = derive_seed(spec.seed, "train:" + sys.name());
        SystemData sd{sys.name(), generate_dataset(sys, jac, g), {}, {}};
        g.n = spec.n_test;
        g.seed = derive_seed(spec.seed, "test:" + sys.name());
        sd.test = generate_dataset(sys, jac, g);
        for (const auto& l : jac.row_labels) sd.row_labels.push_back(l.str());
        systems.push_back(std::move(sd));
    }

    struct Job {
        std::size_t system;
        FsMethod method;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < systems.size(); ++s)
        for (auto m : spec.fs_methods) jobs.push_back({s, m});

    std::vector<std::vector<ExperimentResult>> rows(jobs.size());
    std::vector<std::vector<RowFailure>> failures(jobs.size());
    if (!spec.trace_dir.empty()) std::filesystem::create_directories(spec.trace_dir);

    parallel_for(jobs.size(), [&](std::size_t j) {
        const auto& job = jobs[j];
        const auto& sd = systems[job.system];
        const std::string method = to_string(job.method);
        const auto t0 = std::chrono::steady_clock::now();
        FsResult fs;
        try {
            if (job.method == FsMethod::None) {
                fs = {FeatureMask::all(sd.train.n_features()), 0.0, {}, 0};
            } else {
                if (observer) observer("fs_fitness", sd.train);
                FitnessContext ctx = FitnessContext::from_training_set(
                    sd.train, spec.fs_holdout, derive_seed(spec.seed, "fs-split:" + sd.name), spec.wrapper,
                    spec.standardize);
                Rng rng = make_rng(spec.seed, "fs:" + sd.name + ":" + method);
                fs = run_feature_selection(job.method, ctx, spec.fs_params, rng);
                if (!spec.trace_dir.empty()) export_fs_result(fs, sd.row_labels, spec.trace_dir / (sd.name + "_" + method));
            }
        } catch (const std::exception& e) {
            for (const auto& cfg : spec.classifiers)
                failures[j].push_back({sd.name, method, to_string(kind_of(cfg)), e.what()});
            return;
        }
        const double fs_time = seconds_since(t0);
        for (const auto& cfg : spec.classifiers) {
            const auto t1 = std::chrono::steady_clock::now();
            try {
                if (observer) observer("final_train", sd.train);
                const auto model = train_model(sd.train, fs.best_mask, cfg, spec.standardize);
                if (observer) observer("final_eval", sd.test);
                const double acc = accuracy(predict(model, sd.test.features), sd.test.labels);
                ExperimentResult r;
                r.system = sd.name;
                r.fs_method = method;
                r.classifier = to_string(kind_of(cfg));
                r.n_features = fs.best_mask.count();
                r.accuracy = acc;
                r.wall_time = fs_time + seconds_since(t1);
                r.seed = spec.seed;
                r.mask = fs.best_mask;
                r.trace = fs.trace;
                rows[j].push_back(std::move(r));
            } catch (const std::exception& e) {
                failures[j].push_back({sd.name, method, to_string(kind_of(cfg)), e.what()});
            }
        }
    });

    MatrixRun run;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        for (auto& r : rows[j]) run.rows.push_back(std::move(r));
        for (auto& f : failures[j]) run.failures.push_back(std::move(f));
    }
    return run;
}

// ---------------------------------------------------------------------------

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw Error("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile must be in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double calibrate_threshold(const BusSystem& sys, const NoiseModel& noise, std::size_t n_samples, double q,
                           std::uint64_t seed, double load_var) {
    if (!(q > 0.0 && q < 1.0)) throw Error("calibrate_threshold: quantile must be in (0, 1)");
    const DcJacobian jac = build_jacobian(sys);
    GenerationConfig g;
    g.n = n_samples;
    g.attack_ratio = 0.0;
    g.noise = noise;
    g.load_var = load_var;
    g.seed = seed;
    const Dataset clean = generate_dataset(sys, jac, g);
    return quantile(residuals(clean, jac, noise.variances(jac.rows())), q);
}

std::string results_csv(const std::vector<ExperimentResult>& results, ExportOptions options) {
    if (results.empty()) throw Error("export_results: no results");
    std::ostringstream os;
    os << kResultsHeader << '\n';
    for (const auto& r : results) {
        char acc[32], wall[32];
        std::snprintf(acc, sizeof acc, "%.6f", r.accuracy);
        std::snprintf(wall, sizeof wall, "%.3f", options.wall_time ? r.wall_time : 0.0);
        os << r.system << ',' << r.fs_method << ',' << r.classifier << ',' << r.n_features << ',' << acc << ','
           << wall << ',' << r.seed << '\n';
    }
    return os.str();
}

void export_results(const std::vector<ExperimentResult>& results, const std::filesystem::path& path,
                    ExportOptions options) {
    const std::string text = results_csv(results, options);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

std::vector<ExperimentResult> read_results_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("file not found: " + path.string());
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kResultsHeader) throw Error(path.string() + ": unexpected results header");
    std::vector<ExperimentResult> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 7) throw Error(path.string() + ": line " + std::to_string(line_no) + ": expected 7 fields");
        ExperimentResult r;
        try {
            r.system = f[0];
            r.fs_method = f[1];
            r.classifier = f[2];
            r.n_features = std::stoul(f[3]);
            r.accuracy = std::stod(f[4]);
            r.wall_time = std::stod(f[5]);
            r.seed = std::stoull(f[6]);
        } catch (const std::exception&) {
            throw Error(path.string() + ": line " + std::to_string(line_no) + ": malformed field");
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string render_report(const std::vector<ExperimentResult>& results, const std::vector<RowFailure>& failures) {
    if (results.empty() && failures.empty()) throw Error("render_report: no results");
    std::vector<std::string> systems, methods, classifiers;
    auto remember = [](std::vector<std::string>& v, const std::string& s) {
        if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    };
    for (const auto& r : results) {
        remember(systems, r.system);
        remember(methods, r.fs_method);
        remember(classifiers, r.classifier);
    }
    auto upper = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
        return s == "NONE" ? std::string("NO FS") : s;
    };

    std::ostringstream os;
    for (const auto& sys : systems) {
        os << "System " << sys << " - test accuracy by feature-selection method\n";
        os << std::left << std::setw(8) << "FS" << std::right << std::setw(10) << "Features";
        for (const auto& c : classifiers) os << std::setw(10) << upper(c);
        os << std::setw(12) << "Time (s)" << '\n';
        for (const auto& m : methods) {
            std::string features = "-";
            double time = 0.0;
            std::vector<std::string> cells;
            bool any = false;
            for (const auto& c : classifiers) {
                auto it = std::find_if(results.begin(), results.end(), [&](const ExperimentResult& r) {
                    return r.system == sys && r.fs_method == m && r.classifier == c;
                });
                if (it == results.end()) {
                    cells.emplace_back("failed");
                    continue;
                }
                any = true;
                features = std::to_string(it->n_features);
                time = std::max(time, it->wall_time);
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * it->accuracy);
                cells.emplace_back(buf);
            }
            if (!any) continue;
            os << std::left << std::setw(8) << upper(m) << std::right << std::setw(10) << features;
            for (const auto& cell : cells) os << std::setw(10) << cell;
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.2f", time);
            os << std::setw(12) << buf << '\n';
        }
        os << '\n';
    }
    if (!failures.empty()) {
        os << "Failed rows (" << failures.size() << "):\n";
        for (const auto& f : failures)
            os << "  " << f.system << " / " << f.fs_method << " / " << f.classifier << ": " << f.error << '\n';
    }
    return os.str();
}

}  // namespace fdilab
