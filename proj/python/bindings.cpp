#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fdilab/bench.hpp"
#include "fdilab/config.hpp"

namespace py = pybind11;
using namespace fdilab;

namespace {

std::string config_value(const py::handle& v) {
    if (py::isinstance<py::bool_>(v)) return v.cast<bool>() ? "true" : "false";
    if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
        std::string out;
        for (const auto& item : v) {
            if (!out.empty()) out += ',';
            out += config_value(item);
        }
        return out;
    }
    return py::str(v).cast<std::string>();
}

RunConfig make_config(const py::dict& values, const std::string& case_dir) {
    RunConfig cfg;
    cfg.case_dir = case_dir;
    for (const auto& [key, value] : values) cfg.set(py::str(key).cast<std::string>(), config_value(value));
    cfg.validate();
    return cfg;
}

Dataset make_dataset(const Matrix& features, const std::vector<int>& labels) {
    if (static_cast<std::size_t>(features.rows()) != labels.size())
        throw Error("features and labels have different lengths");
    Dataset ds;
    ds.features = features;
    ds.labels = labels;
    return ds;
}

ClassifierConfig classifier_from(const std::string& kind, const py::kwargs& params) {
    const ClassifierKind k = parse_classifier_kind(kind);
    RunConfig cfg;
    for (const auto& [key, value] : params)
        cfg.set(to_string(k) + "." + py::str(key).cast<std::string>(), config_value(value));
    const auto out = cfg.classifier(k);
    std::visit([](const auto& c) { c.validate(); }, out);
    return out;
}

py::dict fs_dict(const FsResult& r) {
    py::dict d;
    d["mask"] = r.best_mask.str();
    d["selected"] = r.best_mask.indices();
    d["fitness"] = r.best_fitness;
    d["trace"] = r.trace;
    d["evaluations"] = r.evaluations;
    return d;
}

py::dict row_dict(const ExperimentResult& r) {
    py::dict d;
    d["system"] = r.system;
    d["fs_method"] = r.fs_method;
    d["classifier"] = r.classifier;
    d["n_features"] = r.n_features;
    d["accuracy"] = r.accuracy;
    d["wall_time"] = r.wall_time;
    d["seed"] = r.seed;
    d["mask"] = r.mask.str();
    d["trace"] = r.trace;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "False-data-injection detection: DC state estimation, stealthy attacks, classifiers and feature selection";

    py::register_exception<Error>(m, "FdiError", PyExc_ValueError);

    py::class_<BusSystem>(m, "BusSystem")
        .def_property_readonly("name", &BusSystem::name)
        .def_property_readonly("n_buses", &BusSystem::n_buses)
        .def_property_readonly("n_branches", &BusSystem::n_branches)
        .def_property_readonly("n_states", &BusSystem::n_states)
        .def_property_readonly("n_measurements", &BusSystem::n_measurements)
        .def_property_readonly("reference_bus", &BusSystem::reference_bus)
        .def("base_injections", &BusSystem::base_injections)
        .def("__repr__", [](const BusSystem& s) {
            return "<BusSystem " + s.name() + ": " + std::to_string(s.n_buses()) + " buses, " +
                   std::to_string(s.n_branches()) + " branches>";
        });

    m.def(
        "load_case",
        [](const std::string& name, const std::string& case_dir) {
            RunConfig cfg;
            cfg.case_dir = case_dir;
            return load_case(cfg.case_path(name));
        },
        py::arg("name"), py::arg("case_dir") = "", "Load a case by file path or by name from `case_dir`.");

    py::class_<DcJacobian>(m, "Jacobian")
        .def_readonly("H", &DcJacobian::H)
        .def_property_readonly("row_labels",
                               [](const DcJacobian& j) {
                                   std::vector<std::string> out;
                                   for (const auto& l : j.row_labels) out.push_back(l.str());
                                   return out;
                               })
        .def_property_readonly("shape", [](const DcJacobian& j) { return py::make_tuple(j.rows(), j.cols()); });

    m.def("build_jacobian", &build_jacobian, py::arg("system"));
    m.def("solve_dc_flow", &solve_dc_flow, py::arg("system"), py::arg("injections"));
    m.def("wls_estimate", &wls_estimate, py::arg("jacobian"), py::arg("variances"), py::arg("z"));
    m.def("residual_norm", &residual_norm, py::arg("z"), py::arg("jacobian"), py::arg("x"));
    m.def(
        "stealthy_attack",
        [](const DcJacobian& jac, const Vector& c) { return attack_from_state(jac, c).a; }, py::arg("jacobian"),
        py::arg("c"), "Measurement perturbation a = H c.");

    py::class_<Dataset>(m, "Dataset")
        .def(py::init(&make_dataset), py::arg("features"), py::arg("labels"))
        .def_readonly("features", &Dataset::features)
        .def_readonly("labels", &Dataset::labels)
        .def_property_readonly("size", &Dataset::size)
        .def_property_readonly("n_features", &Dataset::n_features)
        .def_property_readonly("system", [](const Dataset& d) { return d.meta.system; })
        .def_property_readonly("seed", [](const Dataset& d) { return d.meta.seed; })
        .def("count", &Dataset::count, py::arg("label"))
        .def("hash", &Dataset::hash)
        .def("write_csv", [](const Dataset& d, const std::filesystem::path& p) { write_dataset_csv(d, p); })
        .def("__len__", &Dataset::size);

    m.def("read_dataset_csv", &read_dataset_csv, py::arg("path"));
    m.def(
        "generate_dataset",
        [](const BusSystem& sys, std::size_t n, std::uint64_t seed, double attack_ratio, double noise_sigma,
           double load_var) {
            GenerationConfig g;
            g.n = n;
            g.seed = seed;
            g.attack_ratio = attack_ratio;
            g.noise.sigma = noise_sigma;
            g.load_var = load_var;
            return generate_dataset(sys, g);
        },
        py::arg("system"), py::arg("n") = 1000, py::arg("seed") = 1, py::arg("attack_ratio") = 0.5,
        py::arg("noise_sigma") = 0.01, py::arg("load_var") = 0.1);

    m.def(
        "calibrate_threshold",
        [](const BusSystem& sys, double noise_sigma, std::size_t n_samples, double quantile, std::uint64_t seed,
           double load_var) { return calibrate_threshold(sys, NoiseModel{noise_sigma}, n_samples, quantile, seed, load_var); },
        py::arg("system"), py::arg("noise_sigma") = 0.01, py::arg("n_samples") = 1000, py::arg("quantile") = 0.95,
        py::arg("seed") = 1, py::arg("load_var") = 0.1);

    m.def(
        "stealthiness_report",
        [](const Dataset& ds, const DcJacobian& jac, double threshold, double noise_sigma) {
            const auto r = stealthiness_report(ds, jac, NoiseModel{noise_sigma}.variances(jac.rows()), threshold);
            return py::make_tuple(r.clean_flag_rate, r.attacked_flag_rate);
        },
        py::arg("dataset"), py::arg("jacobian"), py::arg("threshold"), py::arg("noise_sigma") = 0.01,
        "Fractions of clean and attacked samples flagged by the residual test.");

    py::class_<TrainedModel>(m, "Model")
        .def_property_readonly("kind", [](const TrainedModel& t) { return to_string(t.kind); })
        .def_property_readonly("mask", [](const TrainedModel& t) { return t.mask.str(); })
        .def_property_readonly("warning", [](const TrainedModel& t) { return t.warning; })
        .def("predict", [](const TrainedModel& t, const Matrix& x) { return predict(t, x); }, py::arg("x"))
        .def(
            "score",
            [](const TrainedModel& t, const Matrix& x, const std::vector<int>& y) { return accuracy(predict(t, x), y); },
            py::arg("x"), py::arg("y"))
        .def("save", [](const TrainedModel& t, const std::filesystem::path& p) { save_model(t, p); }, py::arg("path"))
        .def(py::pickle([](const TrainedModel& t) { return serialize_model(t); },
                        [](const std::string& s) { return deserialize_model(s); }));

    m.def(
        "train_model",
        [](const Matrix& x, const std::vector<int>& y, const std::string& classifier, std::optional<std::string> mask,
           bool standardize, const py::kwargs& params) {
            const auto cfg = classifier_from(classifier, params);
            const FeatureMask fm =
                mask ? FeatureMask::from_string(*mask) : FeatureMask::all(static_cast<std::size_t>(x.cols()));
            py::gil_scoped_release release;
            return train_model(x, y, fm, cfg, standardize);
        },
        py::arg("x"), py::arg("y"), py::arg("classifier") = "svm", py::arg("mask") = py::none(),
        py::arg("standardize") = true,
        "Train an svm/knn/ann model; keyword arguments set classifier parameters (C, gamma, k, alpha, ...).");
    m.def("load_model", &load_model, py::arg("path"));

    m.def(
        "select_features",
        [](const Dataset& train, const std::string& method, const py::dict& config, const std::string& case_dir) {
            const RunConfig cfg = make_config(config, case_dir);
            const FsMethod fm = parse_fs_method(method);
            py::gil_scoped_release release;
            FitnessContext ctx = FitnessContext::from_training_set(train, cfg.holdout, derive_seed(cfg.seed, "fs-split"),
                                                                   KnnConfig{cfg.wrapper_k}, cfg.standardize);
            Rng rng = make_rng(cfg.seed, "fs:" + to_string(fm));
            const FsResult r = run_feature_selection(fm, ctx, cfg.fs, rng);
            py::gil_scoped_acquire acquire;
            return fs_dict(r);
        },
        py::arg("train"), py::arg("method") = "ga", py::arg("config") = py::dict(), py::arg("case_dir") = "",
        "Wrapper feature selection (none/bcs/bpso/ga) scored by KNN on a stratified holdout.");

    m.def(
        "grid_search",
        [](const Dataset& data, const std::string& classifier, const py::dict& config, const std::string& case_dir) {
            const RunConfig cfg = make_config(config, case_dir);
            GridSearchSpec spec{cfg.grid(parse_classifier_kind(classifier)), cfg.holdout, cfg.seed, cfg.standardize};
            py::gil_scoped_release release;
            const auto r = grid_search(data, spec);
            py::gil_scoped_acquire acquire;
            py::list cells;
            for (const auto& c : r.cells) {
                py::dict d;
                d["params"] = describe(c.config);
                d["accuracy"] = c.accuracy;
                d["failed"] = c.failed;
                cells.append(d);
            }
            py::dict out;
            out["best"] = describe(r.best);
            out["best_accuracy"] = r.best_accuracy;
            out["cells"] = cells;
            return out;
        },
        py::arg("data"), py::arg("classifier") = "svm", py::arg("config") = py::dict(), py::arg("case_dir") = "");

    m.def(
        "run_benchmark",
        [](const py::dict& config, const std::string& case_dir) {
            const RunConfig cfg = make_config(config, case_dir);
            const ExperimentSpec spec = cfg.experiment();
            MatrixRun run;
            {
                py::gil_scoped_release release;
                run = run_matrix(spec);
            }
            py::list rows;
            for (const auto& r : run.rows) rows.append(row_dict(r));
            py::list failures;
            for (const auto& f : run.failures)
                failures.append(py::make_tuple(f.system, f.fs_method, f.classifier, f.error));
            py::dict out;
            out["rows"] = rows;
            out["failures"] = failures;
            out["csv"] = run.rows.empty() ? std::string() : results_csv(run.rows);
            out["report"] = render_report(run.rows, run.failures);
            return out;
        },
        py::arg("config") = py::dict(), py::arg("case_dir") = "",
        "Run the systems x feature-selection x classifier matrix described by `config` (RunConfig keys).");

    m.def("config_keys", &RunConfig::keys);
    m.def(
        "config_manifest", [](const py::dict& config) { return make_config(config, "").manifest(); },
        py::arg("config") = py::dict());
}
