#include "fdilab/featsel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <numeric>

namespace fdilab {

// ---------------------------------------------------------------------------
// Fitness

FitnessContext::FitnessContext(Dataset train, Dataset validation, ClassifierConfig classifier, bool standardize) {
    if (train.n_features() != validation.n_features()) throw Error("fitness splits differ in feature count");
    if (train.size() == 0 || validation.size() == 0) throw Error("fitness splits must be non-empty");
    n_features_ = train.n_features();
    auto data = std::make_shared<const Split>(Split{std::move(train), std::move(validation)});
    evaluator_ = [data, classifier, standardize](const FeatureMask& mask) {
        const auto model = train_model(data->train, mask, classifier, standardize);
        return accuracy(predict(model, data->validation.features), data->validation.labels);
    };
}

FitnessContext::FitnessContext(std::size_t n_features, Evaluator evaluator)
    : n_features_(n_features), evaluator_(std::move(evaluator)) {
    if (n_features == 0) throw Error("fitness context needs at least one feature");
}

FitnessContext FitnessContext::from_training_set(const Dataset& training_set, double holdout, std::uint64_t seed,
                                                 ClassifierConfig classifier, bool standardize) {
    auto split = stratified_split(training_set, holdout, seed);
    return FitnessContext(std::move(split.train), std::move(split.validation), std::move(classifier), standardize);
}

double FitnessContext::fitness(const FeatureMask& mask) {
    if (mask.size() != n_features_) throw Error("fitness: mask length mismatch");
    if (mask.empty()) throw Error("fitness: empty feature mask");
    ++calls_;
    const std::string key = mask.str();
    std::promise<double> promise;
    std::shared_future<double> fut;
    bool owner = false;
    {
        std::lock_guard lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) {
            fut = it->second;
        } else {
            fut = promise.get_future().share();
            cache_.emplace(key, fut);
            owner = true;
        }
    }
    if (owner) {
        ++trainings_;
        try {
            const double f = evaluator_(mask);
            if (!(f >= 0.0 && f <= 1.0)) throw Error("fitness outside [0, 1]");
            promise.set_value(f);
        } catch (...) {
            promise.set_exception(std::current_exception());
        }
    }
    return fut.get();
}

std::size_t FitnessContext::cache_size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

// ---------------------------------------------------------------------------
// Primitives

double levy_step(double lambda, Rng& rng) {
    if (!(lambda > 1.0 && lambda <= 3.0)) throw Error("levy_step: lambda must be in (1, 3]");
    const double beta = lambda - 1.0;
    std::normal_distribution<double> gauss(0.0, 1.0);
    if (beta >= 2.0) return std::numbers::sqrt2 * gauss(rng);
    const double sigma_u =
        std::pow(std::tgamma(1.0 + beta) * std::sin(std::numbers::pi * beta / 2.0) /
                     (std::tgamma((1.0 + beta) / 2.0) * beta * std::pow(2.0, (beta - 1.0) / 2.0)),
                 1.0 / beta);
    const double u = sigma_u * gauss(rng);
    const double v = gauss(rng);
    return u / std::pow(std::abs(v), 1.0 / beta);
}

bool binarize(double position, Rng& rng) {
    const double s = 1.0 / (1.0 + std::exp(-position));
    return s > uniform(rng);
}

FeatureMask repair_mask(FeatureMask mask, Rng& rng) {
    if (mask.size() > 0 && mask.empty()) mask.set(uniform_index(rng, 0, mask.size() - 1), true);
    return mask;
}

bool fitter(double fa, const FeatureMask& a, double fb, const FeatureMask& b) {
    if (fa != fb) return fa > fb;
    return a.count() < b.count();
}

namespace {

struct Scored {
    FeatureMask mask;
    double fitness = 0.0;
};

// Evaluates all masks (possibly in parallel); rng use stays with the caller.
std::vector<double> evaluate_all(FitnessContext& ctx, const std::vector<FeatureMask>& masks) {
    std::vector<double> out(masks.size());
    parallel_for(masks.size(), [&](std::size_t i) { out[i] = ctx.fitness(masks[i]); });
    return out;
}

FeatureMask binarize_positions(const std::vector<double>& pos, Rng& rng) {
    std::vector<std::uint8_t> bits(pos.size());
    for (std::size_t j = 0; j < pos.size(); ++j) bits[j] = binarize(pos[j], rng) ? 1 : 0;
    return repair_mask(FeatureMask(std::move(bits)), rng);
}

class BestTracker {
public:
    void offer(const FeatureMask& mask, double f) {
        if (!set_ || fitter(f, mask, best.fitness, best.mask)) {
            best = {mask, f};
            set_ = true;
        }
    }
    Scored best;

private:
    bool set_ = false;
};

FsResult finish(const BestTracker& t, std::vector<double> trace, std::size_t evaluations) {
    return {t.best.mask, t.best.fitness, std::move(trace), evaluations};
}

}  // namespace

// ---------------------------------------------------------------------------
// Binary cuckoo search

void BcsParams::validate() const {
    if (!(alpha > 0.0)) throw Error("bcs: alpha must be > 0");
    if (!(pa >= 0.0 && pa <= 1.0)) throw Error("bcs: pa must be in [0, 1]");
    if (!(lambda > 1.0 && lambda <= 3.0)) throw Error("bcs: lambda must be in (1, 3]");
    if (population < 2) throw Error("bcs: population must be >= 2");
}

FsResult bcs_search(FitnessContext& ctx, const BcsParams& p, Rng& rng) {
    p.validate();
    const std::size_t m = ctx.n_features(), n = p.population;
    std::vector<std::vector<double>> pos(n, std::vector<double>(m));
    std::vector<FeatureMask> masks(n);
    auto randomize = [&](std::size_t i) {
        for (auto& v : pos[i]) v = uniform(rng, -1.0, 1.0);
        masks[i] = binarize_positions(pos[i], rng);
    };
    for (std::size_t i = 0; i < n; ++i) randomize(i);
    std::vector<double> fit = evaluate_all(ctx, masks);
    std::size_t evaluations = n;

    BestTracker best;
    for (std::size_t i = 0; i < n; ++i) best.offer(masks[i], fit[i]);
    std::vector<double> trace{best.best.fitness};

    for (std::size_t it = 0; it < p.iterations; ++it) {
        // Each cuckoo lays one egg by a Levy flight from its nest.
        std::vector<std::vector<double>> egg_pos(n, std::vector<double>(m));
        std::vector<FeatureMask> eggs(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) egg_pos[i][j] = pos[i][j] + p.alpha * levy_step(p.lambda, rng);
            eggs[i] = binarize_positions(egg_pos[i], rng);
        }
        const auto egg_fit = evaluate_all(ctx, eggs);
        evaluations += n;
        for (std::size_t i = 0; i < n; ++i) {
            best.offer(eggs[i], egg_fit[i]);
            const std::size_t host = uniform_index(rng, 0, n - 1);
            if (fitter(egg_fit[i], eggs[i], fit[host], masks[host])) {
                pos[host] = egg_pos[i];
                masks[host] = eggs[i];
                fit[host] = egg_fit[i];
            }
        }
        // Hosts discover a fraction pa of the worst nests; those are rebuilt.
        const auto n_abandon = static_cast<std::size_t>(std::floor(p.pa * static_cast<double>(n)));
        if (n_abandon > 0) {
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return fitter(fit[b], masks[b], fit[a], masks[a]);
            });
            std::vector<std::size_t> abandoned(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_abandon));
            std::vector<FeatureMask> fresh;
            for (std::size_t i : abandoned) {
                randomize(i);
                fresh.push_back(masks[i]);
            }
            const auto fresh_fit = evaluate_all(ctx, fresh);
            evaluations += fresh.size();
            for (std::size_t k = 0; k < abandoned.size(); ++k) {
                fit[abandoned[k]] = fresh_fit[k];
                best.offer(fresh[k], fresh_fit[k]);
            }
        }
        trace.push_back(best.best.fitness);
    }
    return finish(best, std::move(trace), evaluations);
}

// ---------------------------------------------------------------------------
// Binary particle swarm

void BpsoParams::validate() const {
    if (!(c1 >= 0.0) || !(c2 >= 0.0) || !(w >= 0.0)) throw Error("bpso: c1, c2, w must be >= 0");
    if (!(v_max > 0.0)) throw Error("bpso: v_max must be > 0");
    if (population < 1) throw Error("bpso: population must be >= 1");
}

FsResult bpso_search(FitnessContext& ctx, const BpsoParams& p, Rng& rng) {
    p.validate();
    const std::size_t m = ctx.n_features(), n = p.population;
    std::vector<std::vector<double>> vel(n, std::vector<double>(m, 0.0));
    std::vector<FeatureMask> x(n);
    for (auto& xi : x) xi = binarize_positions(std::vector<double>(m, 0.0), rng);
    std::vector<double> fit = evaluate_all(ctx, x);
    std::size_t evaluations = n;

    std::vector<Scored> pbest(n);
    BestTracker gbest;
    for (std::size_t i = 0; i < n; ++i) {
        pbest[i] = {x[i], fit[i]};
        gbest.offer(x[i], fit[i]);
    }
    std::vector<double> trace{gbest.best.fitness};

    for (std::size_t it = 0; it < p.iterations; ++it) {
        const FeatureMask g = gbest.best.mask;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::uint8_t> bits(m);
            for (std::size_t j = 0; j < m; ++j) {
                const double xj = x[i][j] ? 1.0 : 0.0;
                const double r1 = uniform(rng), r2 = uniform(rng);
                double v = p.w * vel[i][j] + p.c1 * r1 * ((pbest[i].mask[j] ? 1.0 : 0.0) - xj) +
                           p.c2 * r2 * ((g[j] ? 1.0 : 0.0) - xj);
                v = std::clamp(v, -p.v_max, p.v_max);
                vel[i][j] = v;
                bits[j] = binarize(v, rng) ? 1 : 0;
            }
            x[i] = repair_mask(FeatureMask(std::move(bits)), rng);
        }
        fit = evaluate_all(ctx, x);
        evaluations += n;
        for (std::size_t i = 0; i < n; ++i) {
            if (fitter(fit[i], x[i], pbest[i].fitness, pbest[i].mask)) pbest[i] = {x[i], fit[i]};
            gbest.offer(x[i], fit[i]);
        }
        trace.push_back(gbest.best.fitness);
    }
    return finish(gbest, std::move(trace), evaluations);
}

// ---------------------------------------------------------------------------
// Genetic algorithm

void GaParams::validate() const {
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw Error("ga: mutation_rate must be in [0, 1]");
    if (population < 2) throw Error("ga: population must be >= 2");
    if (tournament < 1 || tournament > population) throw Error("ga: tournament size must be in [1, population]");
    if (elite >= population) throw Error("ga: elite count must be < population");
}

FsResult ga_search(FitnessContext& ctx, const GaParams& p, Rng& rng) {
    p.validate();
    const std::size_t m = ctx.n_features();
    std::vector<FeatureMask> pop(p.population);
    for (auto& ind : pop) ind = binarize_positions(std::vector<double>(m, 0.0), rng);
    return ga_search(ctx, p, std::move(pop), rng);
}

FsResult ga_search(FitnessContext& ctx, const GaParams& p, std::vector<FeatureMask> pop, Rng& rng) {
    p.validate();
    const std::size_t m = ctx.n_features(), n = p.population;
    if (pop.size() != n) throw Error("ga: initial population size mismatch");
    for (auto& ind : pop) {
        if (ind.size() != m) throw Error("ga: individual length mismatch");
        ind = repair_mask(std::move(ind), rng);
    }
    std::vector<double> fit = evaluate_all(ctx, pop);
    std::size_t evaluations = n;
    BestTracker best;
    for (std::size_t i = 0; i < n; ++i) best.offer(pop[i], fit[i]);
    std::vector<double> trace{best.best.fitness};

    auto tournament = [&]() -> std::size_t {
        std::size_t winner = uniform_index(rng, 0, n - 1);
        for (std::size_t k = 1; k < p.tournament; ++k) {
            const std::size_t c = uniform_index(rng, 0, n - 1);
            if (fitter(fit[c], pop[c], fit[winner], pop[winner])) winner = c;
        }
        return winner;
    };
    auto mutate = [&](FeatureMask ind) {
        for (std::size_t j = 0; j < m; ++j)
            if (uniform(rng) < p.mutation_rate) ind.set(j, !ind[j]);
        return repair_mask(std::move(ind), rng);
    };

    for (std::size_t gen = 0; gen < p.iterations; ++gen) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fitter(fit[a], pop[a], fit[b], pop[b]); });
        std::vector<FeatureMask> next;
        std::vector<double> next_fit;
        next.reserve(n);
        for (std::size_t e = 0; e < p.elite; ++e) {
            next.push_back(pop[order[e]]);
            next_fit.push_back(fit[order[e]]);
        }
        std::vector<FeatureMask> children;
        while (next.size() + children.size() < n) {
            const FeatureMask& a = pop[tournament()];
            const FeatureMask& b = pop[tournament()];
            std::vector<std::uint8_t> c1 = a.bits(), c2 = b.bits();
            if (m > 1) {
                const std::size_t cut = uniform_index(rng, 1, m - 1);
                for (std::size_t j = cut; j < m; ++j) std::swap(c1[j], c2[j]);
            }
            children.push_back(mutate(FeatureMask(std::move(c1))));
            if (next.size() + children.size() < n) children.push_back(mutate(FeatureMask(std::move(c2))));
        }
        const auto child_fit = evaluate_all(ctx, children);
        evaluations += children.size();
        for (std::size_t k = 0; k < children.size(); ++k) {
            best.offer(children[k], child_fit[k]);
            next.push_back(std::move(children[k]));
            next_fit.push_back(child_fit[k]);
        }
        pop = std::move(next);
        fit = std::move(next_fit);
        trace.push_back(best.best.fitness);
    }
    return finish(best, std::move(trace), evaluations);
}

// ---------------------------------------------------------------------------

std::string to_string(FsMethod m) {
    switch (m) {
        case FsMethod::None: return "none";
        case FsMethod::Bcs: return "bcs";
        case FsMethod::Bpso: return "bpso";
        case FsMethod::Ga: return "ga";
    }
    return "?";
}

FsMethod parse_fs_method(const std::string& name) {
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "none" || s == "nofs" || s == "no-fs") return FsMethod::None;
    if (s == "bcs") return FsMethod::Bcs;
    if (s == "bpso") return FsMethod::Bpso;
    if (s == "ga") return FsMethod::Ga;
    throw Error("unknown feature-selection method '" + name + "' (expected none, bcs, bpso or ga)");
}

FsResult run_feature_selection(FsMethod method, FitnessContext& ctx, const FsParams& params, Rng& rng) {
    switch (method) {
        case FsMethod::None: {
            const auto mask = FeatureMask::all(ctx.n_features());
            const double f = ctx.fitness(mask);
            return {mask, f, {f}, 1};
        }
        case FsMethod::Bcs: return bcs_search(ctx, params.bcs, rng);
        case FsMethod::Bpso: return bpso_search(ctx, params.bpso, rng);
        case FsMethod::Ga: return ga_search(ctx, params.ga, rng);
    }
    throw Error("unknown feature-selection method");
}

void export_fs_result(const FsResult& result, const std::vector<std::string>& row_labels,
                      const std::filesystem::path& stem) {
    if (!row_labels.empty() && row_labels.size() != result.best_mask.size())
        throw Error("export_fs_result: label count does not match the mask");
    auto txt = stem;
    txt += ".txt";
    std::ofstream out(txt, std::ios::binary);
    if (!out) throw Error("cannot write " + txt.string());
    const auto idx = result.best_mask.indices();
    out << "n_selected = " << idx.size() << '\n';
    out << "selected =";
    for (std::size_t j : idx) out << ' ' << (row_labels.empty() ? "f" + std::to_string(j + 1) : row_labels[j]);
    out << '\n';
    out << "mask = " << result.best_mask.str() << '\n';
    out << "best_fitness = " << format_double(result.best_fitness) << '\n';
    out << "evaluations = " << result.evaluations << '\n';

    auto csv = stem;
    csv += "_trace.csv";
    std::ofstream tr(csv, std::ios::binary);
    if (!tr) throw Error("cannot write " + csv.string());
    tr << "iteration,best_fitness\n";
    for (std::size_t k = 0; k < result.trace.size(); ++k) tr << k << ',' << format_double(result.trace[k]) << '\n';
}

}  // namespace fdilab
