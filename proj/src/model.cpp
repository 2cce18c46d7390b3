#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fdilab/classify.hpp"

namespace fdilab {

ScalerStats standardize_fit(const Matrix& train) {
    if (train.rows() == 0 || train.cols() == 0) throw Error("standardize_fit: empty input");
    ScalerStats s;
    s.mean = train.colwise().mean().transpose();
    s.std.resize(train.cols());
    for (Eigen::Index j = 0; j < train.cols(); ++j) {
        const double var = (train.col(j).array() - s.mean[j]).square().mean();
        double sd = std::sqrt(var);
        if (!(sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])))) {
            sd = 1.0;
            s.constant_features.push_back(static_cast<std::size_t>(j));
        }
        s.std[j] = sd;
    }
    return s;
}

Matrix standardize_apply(const ScalerStats& stats, const Matrix& x) {
    if (x.cols() != stats.mean.size()) throw Error("standardize_apply: dimension mismatch");
    return ((x.rowwise() - stats.mean.transpose()).array().rowwise() / stats.std.transpose().array()).matrix();
}

Vector standardize_apply(const ScalerStats& stats, const Vector& x) {
    if (x.size() != stats.mean.size()) throw Error("standardize_apply: dimension mismatch");
    return (x - stats.mean).cwiseQuotient(stats.std);
}

ClassifierKind kind_of(const ClassifierConfig& cfg) { return static_cast<ClassifierKind>(cfg.index()); }

std::string to_string(ClassifierKind kind) {
    switch (kind) {
        case ClassifierKind::Svm: return "svm";
        case ClassifierKind::Knn: return "knn";
        case ClassifierKind::Ann: return "ann";
    }
    return "?";
}

ClassifierKind parse_classifier_kind(const std::string& name) {
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "svm") return ClassifierKind::Svm;
    if (s == "knn") return ClassifierKind::Knn;
    if (s == "ann") return ClassifierKind::Ann;
    throw Error("unknown classifier '" + name + "' (expected svm, knn or ann)");
}

std::string describe(const ClassifierConfig& cfg) {
    std::ostringstream os;
    if (const auto* s = std::get_if<SvmConfig>(&cfg))
        os << "svm(C=" << format_double(s->C) << ",gamma=" << format_double(s->gamma)
           << ",tol=" << format_double(s->tol) << ",max_passes=" << s->max_passes << ")";
    else if (const auto* k = std::get_if<KnnConfig>(&cfg))
        os << "knn(k=" << k->k << ")";
    else if (const auto* a = std::get_if<AnnConfig>(&cfg))
        os << "ann(alpha=" << format_double(a->alpha) << ",epochs=" << a->epochs << ",batch=" << a->batch
           << ",seed=" << a->seed << ")";
    return os.str();
}

TrainedModel train_model(const Matrix& x, const std::vector<int>& labels, const FeatureMask& mask,
                         const ClassifierConfig& cfg, bool standardize) {
    if (mask.empty()) throw Error("train_model: empty feature mask");
    if (labels.empty() || static_cast<std::size_t>(x.rows()) != labels.size())
        throw Error("train_model: empty or inconsistent training set");
    TrainedModel model;
    model.kind = kind_of(cfg);
    model.mask = mask;
    model.standardized = standardize;
    Matrix xs = select_columns(x, mask);
    if (standardize) {
        model.scaler = standardize_fit(xs);
        xs = standardize_apply(model.scaler, xs);
    }
    std::visit(
        [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, SvmConfig>) {
                SvmSolution sol;
                model.params = svm_train(xs, labels, c, &sol);
                model.warning = !sol.converged;
            } else if constexpr (std::is_same_v<T, KnnConfig>) {
                c.validate();
                if (c.k > labels.size()) throw Error("knn: k exceeds training-set size");
                model.params = KnnModel{std::move(xs), labels, c.k};
            } else {
                model.params = ann_train(xs, labels, c);
            }
        },
        cfg);
    return model;
}

TrainedModel train_model(const Dataset& ds, const FeatureMask& mask, const ClassifierConfig& cfg, bool standardize) {
    return train_model(ds.features, ds.labels, mask, cfg, standardize);
}

int predict_one(const TrainedModel& model, const Eigen::Ref<const Vector>& x) {
    Vector v = select_entries(x, model.mask);
    if (model.standardized) v = standardize_apply(model.scaler, v);
    return std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, SvmModel>) return svm_predict(p, v);
            else if constexpr (std::is_same_v<T, KnnModel>) return knn_predict(p, v);
            else return ann_predict(p, v);
        },
        model.params);
}

std::vector<int> predict(const TrainedModel& model, const Matrix& x) {
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = predict_one(model, x.row(i).transpose());
    return out;
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& truth) {
    if (predictions.empty() || predictions.size() != truth.size())
        throw Error("accuracy: empty or mismatched label vectors");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predictions[i] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr const char* kMagic = "fdilab-model";
constexpr int kVersion = 1;

void put_vector(std::ostream& os, const char* key, const Vector& v) {
    os << key << ' ' << v.size();
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << format_double(v[i]);
    os << '\n';
}

void put_matrix(std::ostream& os, const char* key, const Matrix& m) {
    os << key << ' ' << m.rows() << ' ' << m.cols();
    for (Eigen::Index i = 0; i < m.size(); ++i) os << ' ' << format_double(m.data()[i]);
    os << '\n';
}

class Reader {
public:
    explicit Reader(const std::string& text) : in_(text) {}

    std::istringstream& expect(const std::string& key) {
        std::string line;
        while (std::getline(in_, line) && line.empty()) {}
        line_ = std::istringstream(line);
        std::string got;
        line_ >> got;
        if (got != key) throw Error("model file: expected '" + key + "', found '" + got + "'");
        return line_;
    }

    Vector vector(const std::string& key) {
        auto& ls = expect(key);
        Eigen::Index n = 0;
        ls >> n;
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = number(ls);
        return v;
    }

    Matrix matrix(const std::string& key) {
        auto& ls = expect(key);
        Eigen::Index r = 0, c = 0;
        ls >> r >> c;
        Matrix m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = number(ls);
        return m;
    }

    static double number(std::istringstream& ls) {
        std::string tok;
        if (!(ls >> tok)) throw Error("model file: truncated record");
        return std::stod(tok);
    }

private:
    std::istringstream in_;
    std::istringstream line_;
};

}  // namespace

std::string serialize_model(const TrainedModel& model) {
    std::ostringstream os;
    os << kMagic << ' ' << kVersion << '\n';
    os << "variant " << to_string(model.kind) << '\n';
    os << "mask " << model.mask.str() << '\n';
    os << "standardized " << (model.standardized ? 1 : 0) << '\n';
    os << "warning " << (model.warning ? 1 : 0) << '\n';
    put_vector(os, "scaler_mean", model.standardized ? model.scaler.mean : Vector());
    put_vector(os, "scaler_std", model.standardized ? model.scaler.std : Vector());
    if (const auto* s = std::get_if<SvmModel>(&model.params)) {
        os << "gamma " << format_double(s->gamma) << '\n';
        os << "bias " << format_double(s->bias) << '\n';
        put_vector(os, "coef", s->coef);
        put_matrix(os, "support", s->support);
    } else if (const auto* k = std::get_if<KnnModel>(&model.params)) {
        os << "k " << k->k << '\n';
        os << "labels " << k->labels.size();
        for (int y : k->labels) os << ' ' << y;
        os << '\n';
        put_matrix(os, "samples", k->x);
    } else if (const auto* a = std::get_if<AnnModel>(&model.params)) {
        put_matrix(os, "w1", a->w1);
        put_vector(os, "theta1", a->theta1);
        put_matrix(os, "w2", a->w2);
        put_vector(os, "theta2", a->theta2);
    }
    os << "end\n";
    return os.str();
}

TrainedModel deserialize_model(const std::string& text) {
    Reader r(text);
    int version = 0;
    r.expect(kMagic) >> version;
    if (version != kVersion) throw Error("model file: unsupported version " + std::to_string(version));
    TrainedModel m;
    std::string s;
    r.expect("variant") >> s;
    m.kind = parse_classifier_kind(s);
    r.expect("mask") >> s;
    m.mask = FeatureMask::from_string(s);
    int flag = 0;
    r.expect("standardized") >> flag;
    m.standardized = flag != 0;
    r.expect("warning") >> flag;
    m.warning = flag != 0;
    m.scaler.mean = r.vector("scaler_mean");
    m.scaler.std = r.vector("scaler_std");
    switch (m.kind) {
        case ClassifierKind::Svm: {
            SvmModel p;
            auto& g = r.expect("gamma");
            p.gamma = Reader::number(g);
            auto& b = r.expect("bias");
            p.bias = Reader::number(b);
            p.coef = r.vector("coef");
            p.support = r.matrix("support");
            m.params = std::move(p);
            break;
        }
        case ClassifierKind::Knn: {
            KnnModel p;
            r.expect("k") >> p.k;
            auto& ls = r.expect("labels");
            std::size_t n = 0;
            ls >> n;
            p.labels.resize(n);
            for (auto& y : p.labels) ls >> y;
            p.x = r.matrix("samples");
            m.params = std::move(p);
            break;
        }
        case ClassifierKind::Ann: {
            AnnModel p;
            p.w1 = r.matrix("w1");
            p.theta1 = r.vector("theta1");
            p.w2 = r.matrix("w2");
            p.theta2 = r.vector("theta2");
            m.params = std::move(p);
            break;
        }
    }
    r.expect("end");
    return m;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << serialize_model(model);
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("file not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize_model(ss.str());
}

}  // namespace fdilab
