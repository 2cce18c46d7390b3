// fdilab command-line tool: generate, gridsearch, select, benchmark, report.

#include <CLI11.hpp>

#include <cstdio>
#include <deque>
#include <fstream>
#include <iostream>
#include <optional>
#include <utility>

#include "fdilab/attack.hpp"
#include "fdilab/bench.hpp"
#include "fdilab/classify.hpp"
#include "fdilab/config.hpp"
#include "fdilab/featsel.hpp"
#include "fdilab/powergrid.hpp"

#ifndef FDILAB_CASE_DIR
#define FDILAB_CASE_DIR "data/cases"
#endif

namespace {

using namespace fdilab;

enum Exit { kOk = 0, kUsage = 1, kRuntime = 2 };

struct UsageError : Error {
    using Error::Error;
};

/// Flag values in the order they were declared; applied after the config file.
struct Overrides {
    std::optional<std::string> config;
    std::deque<std::pair<std::string, std::optional<std::string>>> values;  // stable addresses
    std::vector<std::string> assignments;  // --set key=value
    bool record_timing = false;

    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        values.emplace_back(key, std::nullopt);
        app->add_option(flag, values.back().second, help);
    }
};

void add_data_flags(CLI::App* app, Overrides& o) {
    o.add(app, "--seed", "seed", "master seed");
    o.add(app, "--noise-sigma", "noise_sigma", "measurement noise standard deviation (pu)");
    o.add(app, "--load-var", "load_var", "relative load variation per bus");
    o.add(app, "--attack-ratio", "attack_ratio", "fraction of attacked samples");
}

void add_base_flags(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config, "key = value configuration file");
    app->add_option("--set", o.assignments, "extra key=value override (repeatable)");
    o.add(app, "--out-dir", "out_dir", "output directory");
    o.add(app, "--case-dir", "case_dir", "directory searched for case files");
}

RunConfig resolve(Overrides& o) {
    RunConfig cfg;
    cfg.case_dir = FDILAB_CASE_DIR;
    try {
        if (o.config) load_config_file(cfg, *o.config);
        for (const auto& [key, value] : o.values)
            if (value) cfg.set(key, *value);
        for (const auto& a : o.assignments) {
            const auto eq = a.find('=');
            if (eq == std::string::npos) throw Error("--set expects key=value, got '" + a + "'");
            cfg.set(a.substr(0, eq), a.substr(eq + 1));
        }
        if (o.record_timing) cfg.record_timing = true;
        cfg.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

BusSystem load_checked(const RunConfig& cfg, const std::string& name) {
    try {
        BusSystem sys = load_case(cfg.case_path(name));
        if (cfg.data.attack_ratio > 0.0) cfg.data.attack.validate(sys.n_states());
        return sys;
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

void print_counts(const Dataset& ds) {
    std::printf("samples=%zu features=%zu clean=%zu attacked=%zu\n", ds.size(), ds.n_features(), ds.count(0),
                ds.count(1));
}

/// The dataset named by `dataset`, or a fresh training set for `case`.
Dataset input_dataset(const RunConfig& cfg) {
    if (!cfg.dataset.empty()) return read_dataset_csv(cfg.dataset);
    const BusSystem sys = load_case(cfg.case_path(cfg.case_name));
    GenerationConfig g = cfg.data;
    g.n = cfg.n_train;
    g.seed = derive_seed(cfg.seed, "train:" + sys.name());
    return generate_dataset(sys, g);
}

int cmd_generate(const RunConfig& cfg) {
    const BusSystem sys = load_checked(cfg, cfg.case_name);
    const DcJacobian jac = build_jacobian(sys);
    GenerationConfig g = cfg.data;
    g.n = cfg.n;
    g.seed = cfg.seed;
    const Dataset ds = generate_dataset(sys, jac, g);

    const auto path = cfg.dataset.empty() ? cfg.out_dir / (sys.name() + ".csv") : cfg.dataset;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_dataset_csv(ds, path);
    write_manifest(cfg, cfg.out_dir / "manifest_generate.txt", "generate");
    std::printf("wrote %s\n", path.string().c_str());
    print_counts(ds);

    const double eps = calibrate_threshold(sys, cfg.data.noise, cfg.calibration_samples, cfg.threshold_quantile,
                                           derive_seed(cfg.seed, "calibration"), cfg.data.load_var);
    const auto report = stealthiness_report(ds, jac, cfg.data.noise.variances(jac.rows()), eps);
    std::printf("residual threshold (q=%g) = %.6g; flagged clean=%.4f attacked=%.4f\n", cfg.threshold_quantile, eps,
                report.clean_flag_rate, report.attacked_flag_rate);
    return kOk;
}

void write_best_config(const ClassifierConfig& best, double acc, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "# validation accuracy = " << format_double(acc) << '\n';
    if (const auto* s = std::get_if<SvmConfig>(&best))
        out << "svm.C = " << format_double(s->C) << "\nsvm.gamma = " << format_double(s->gamma) << '\n';
    else if (const auto* k = std::get_if<KnnConfig>(&best))
        out << "knn.k = " << k->k << '\n';
    else if (const auto* a = std::get_if<AnnConfig>(&best))
        out << "ann.alpha = " << format_double(a->alpha) << '\n';
}

int cmd_gridsearch(const RunConfig& cfg) {
    if (cfg.dataset.empty()) load_checked(cfg, cfg.case_name);
    const Dataset data = input_dataset(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    write_manifest(cfg, cfg.out_dir / "manifest_gridsearch.txt", "gridsearch");
    ResultCache cache(cfg.out_dir / "grid_cache.tsv");
    for (auto kind : cfg.classifiers) {
        GridSearchSpec spec{cfg.grid(kind), cfg.holdout, cfg.seed, cfg.standardize};
        const auto result = grid_search(data, spec, &cache);
        cache.flush();
        const std::string name = to_string(kind);
        write_grid_csv(result, cfg.out_dir / ("grid_" + name + ".csv"));
        write_best_config(result.best, result.best_accuracy, cfg.out_dir / ("best_" + name + ".conf"));
        std::size_t failed = 0;
        for (const auto& c : result.cells) failed += c.failed;
        std::printf("%s: best %s accuracy=%.4f (cells=%zu trained=%zu failed=%zu)\n", name.c_str(),
                    describe(result.best).c_str(), result.best_accuracy, result.cells.size(), result.trainings,
                    failed);
    }
    return kOk;
}

int cmd_select(const RunConfig& cfg) {
    if (cfg.dataset.empty()) load_checked(cfg, cfg.case_name);
    const Dataset data = input_dataset(cfg);
    std::vector<std::string> labels;
    if (cfg.dataset.empty()) {
        for (const auto& l : build_jacobian(load_case(cfg.case_path(cfg.case_name))).row_labels)
            labels.push_back(l.str());
    } else {
        for (std::size_t j = 0; j < data.n_features(); ++j) labels.push_back("f" + std::to_string(j + 1));
    }
    std::filesystem::create_directories(cfg.out_dir);
    write_manifest(cfg, cfg.out_dir / "manifest_select.txt", "select");
    FitnessContext ctx = FitnessContext::from_training_set(data, cfg.holdout, derive_seed(cfg.seed, "fs-split"),
                                                           KnnConfig{cfg.wrapper_k}, cfg.standardize);
    for (auto method : cfg.fs_methods) {
        const std::string name = to_string(method);
        Rng rng = make_rng(cfg.seed, "fs:" + name);
        const FsResult r = run_feature_selection(method, ctx, cfg.fs, rng);
        export_fs_result(r, labels, cfg.out_dir / ("select_" + name));
        std::printf("%s: %zu/%zu features, validation accuracy=%.4f, evaluations=%zu\n", name.c_str(),
                    r.best_mask.count(), r.best_mask.size(), r.best_fitness, r.evaluations);
    }
    return kOk;
}

int cmd_benchmark(const RunConfig& cfg) {
    for (const auto& s : cfg.systems) load_checked(cfg, s);
    const ExperimentSpec spec = cfg.experiment();
    std::filesystem::create_directories(cfg.out_dir);
    write_manifest(cfg, cfg.out_dir / "manifest.txt", "benchmark");

    const MatrixRun run = run_matrix(spec);
    const std::string report = render_report(run.rows, run.failures);
    {
        std::ofstream out(cfg.out_dir / "report.txt", std::ios::binary);
        out << report;
    }
    std::fputs(report.c_str(), stdout);
    if (run.rows.empty()) {
        std::fprintf(stderr, "error: every benchmark row failed\n");
        return kRuntime;
    }
    export_results(run.rows, cfg.out_dir / "results.csv", ExportOptions{cfg.record_timing});
    export_results(run.rows, cfg.out_dir / "timings.csv", ExportOptions{true});
    std::printf("wrote %s (%zu rows, %zu failed)\n", (cfg.out_dir / "results.csv").string().c_str(), run.rows.size(),
                run.failures.size());
    return kOk;
}

int cmd_report(const RunConfig& cfg, const std::optional<std::string>& results) {
    const auto path = results ? std::filesystem::path(*results) : cfg.out_dir / "results.csv";
    std::fputs(render_report(read_results_csv(path)).c_str(), stdout);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    std::setvbuf(stdout, nullptr, _IOLBF, 0);

    CLI::App app{"Stealthy false-data-injection detection benchmark"};
    app.require_subcommand(1);

    Overrides gen, grid, sel, bench, rep;
    auto* generate = app.add_subcommand("generate", "simulate a labeled measurement dataset");
    add_base_flags(generate, gen);
    add_data_flags(generate, gen);
    gen.add(generate, "--case", "case", "case file or name (e.g. ieee14)");
    gen.add(generate, "--n", "n", "number of samples");
    gen.add(generate, "--dataset", "dataset", "output CSV path");

    auto* gridsearch = app.add_subcommand("gridsearch", "select classifier parameters on a holdout split");
    add_base_flags(gridsearch, grid);
    add_data_flags(gridsearch, grid);
    grid.add(gridsearch, "--case", "case", "case used when no dataset is given");
    grid.add(gridsearch, "--n-train", "n_train", "generated training-set size");
    grid.add(gridsearch, "--dataset", "dataset", "dataset CSV to search on");
    grid.add(gridsearch, "--classifier", "classifier", "classifiers (svm,knn,ann)");

    auto* select = app.add_subcommand("select", "run wrapper feature selection on one dataset");
    add_base_flags(select, sel);
    add_data_flags(select, sel);
    sel.add(select, "--case", "case", "case used when no dataset is given");
    sel.add(select, "--n-train", "n_train", "generated training-set size");
    sel.add(select, "--dataset", "dataset", "dataset CSV");
    sel.add(select, "--fs", "fs", "methods (none,bcs,bpso,ga)");

    auto* benchmark = app.add_subcommand("benchmark", "run the system x feature selection x classifier matrix");
    add_base_flags(benchmark, bench);
    add_data_flags(benchmark, bench);
    bench.add(benchmark, "--systems", "systems", "comma-separated case names");
    bench.add(benchmark, "--n-train", "n_train", "training samples per system");
    bench.add(benchmark, "--n-test", "n_test", "test samples per system");
    bench.add(benchmark, "--fs", "fs", "methods (none,bcs,bpso,ga)");
    bench.add(benchmark, "--classifier", "classifier", "classifiers (svm,knn,ann)");
    benchmark->add_flag("--record-timing", bench.record_timing, "write measured wall times into results.csv");

    auto* report = app.add_subcommand("report", "render a results CSV as per-system tables");
    add_base_flags(report, rep);
    std::optional<std::string> results_path;
    report->add_option("--results", results_path, "results CSV (default <out-dir>/results.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (generate->parsed()) return cmd_generate(resolve(gen));
        if (gridsearch->parsed()) return cmd_gridsearch(resolve(grid));
        if (select->parsed()) return cmd_select(resolve(sel));
        if (benchmark->parsed()) return cmd_benchmark(resolve(bench));
        if (report->parsed()) return cmd_report(resolve(rep), results_path);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntime;
    }
    return kUsage;
}
