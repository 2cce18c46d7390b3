#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "fdilab/featsel.hpp"
#include "support.hpp"

using namespace fdilab;

namespace {

bool non_decreasing(const std::vector<double>& trace) {
    for (std::size_t k = 1; k < trace.size(); ++k)
        if (trace[k] < trace[k - 1]) return false;
    return true;
}

FitnessContext synthetic_context(std::uint64_t seed) {
    const auto train = testing::blobs(240, 6, 2, 0.9, seed);
    const auto val = testing::blobs(120, 6, 2, 0.9, seed + 1000);
    return FitnessContext(train, val, KnnConfig{5});
}

}  // namespace

using testing::brute_force_best;

TEST_CASE("fitness context") {
    auto ctx = synthetic_context(1);
    const auto all = FeatureMask::all(6);
    const double f = ctx.fitness(all);
    CHECK(ctx.trainings() == 1);
    CHECK(ctx.fitness(all) == f);
    CHECK(ctx.trainings() == 1);
    CHECK(ctx.calls() == 2);
    CHECK_THROWS_AS(ctx.fitness(FeatureMask::none(6)), Error);
    CHECK_THROWS_AS(ctx.fitness(FeatureMask::all(5)), Error);

    // The all-ones mask reproduces a direct train/evaluate with every feature.
    const auto train = testing::blobs(240, 6, 2, 0.9, 1), val = testing::blobs(120, 6, 2, 0.9, 1001);
    const auto model = train_model(train, all, KnnConfig{5});
    CHECK(f == accuracy(predict(model, val.features), val.labels));

    // A single perfectly separating feature scores 1.
    Dataset sep = testing::blobs(100, 4, 0, 0.0, 3), sep_val = testing::blobs(60, 4, 0, 0.0, 4);
    for (auto* d : {&sep, &sep_val})
        for (std::size_t i = 0; i < d->size(); ++i) d->features(static_cast<Eigen::Index>(i), 2) = d->labels[i] * 10.0;
    FitnessContext sctx(sep, sep_val, KnnConfig{3});
    CHECK(sctx.fitness(FeatureMask::from_string("0010")) == 1.0);
}

TEST_CASE("concurrent requests for one mask train once") {
    std::atomic<int> runs{0};
    FitnessContext ctx(8, [&](const FeatureMask& m) {
        ++runs;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        return static_cast<double>(m.count()) / 8.0;
    });
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) threads.emplace_back([&] { ctx.fitness(FeatureMask::from_string("10110000")); });
    for (auto& t : threads) t.join();
    CHECK(runs == 1);
    CHECK(ctx.trainings() == 1);
    CHECK(ctx.calls() == 8);
}

TEST_CASE("Levy steps") {
    Rng rng(17);
    const int n = 100000;
    std::vector<double> steps(n);
    for (auto& s : steps) s = levy_step(1.5, rng);
    std::vector<double> sorted = steps;
    std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
    // Median of a symmetric law: standard error ~ 1 / (2 f(0) sqrt(n)), well below 0.02 here.
    CHECK(std::abs(sorted[n / 2]) < 0.02);

    // Log-log slope of the |step| density over a tail window.
    std::vector<double> mag(n);
    for (int i = 0; i < n; ++i) mag[static_cast<std::size_t>(i)] = std::abs(steps[static_cast<std::size_t>(i)]);
    std::sort(mag.begin(), mag.end());
    const double lo = mag[static_cast<std::size_t>(0.90 * n)], hi = mag[static_cast<std::size_t>(0.999 * n)];
    const int bins = 12;
    std::vector<double> lx, ly;
    for (int b = 0; b < bins; ++b) {
        const double a = lo * std::pow(hi / lo, static_cast<double>(b) / bins);
        const double c = lo * std::pow(hi / lo, static_cast<double>(b + 1) / bins);
        const auto count = std::upper_bound(mag.begin(), mag.end(), c) - std::lower_bound(mag.begin(), mag.end(), a);
        if (count == 0) continue;
        lx.push_back(std::log(std::sqrt(a * c)));
        ly.push_back(std::log(static_cast<double>(count) / (n * (c - a))));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    CHECK(sxy / sxx == doctest::Approx(-1.5).epsilon(0.2));

    CHECK_THROWS_AS(levy_step(3.5, rng), Error);
    CHECK_THROWS_AS(levy_step(1.0, rng), Error);
    CHECK(std::isfinite(levy_step(3.0, rng)));
}

TEST_CASE("binarize and repair") {
    Rng rng(2);
    int ones = 0;
    for (int i = 0; i < 100000; ++i) ones += binarize(0.0, rng);
    CHECK(std::abs(ones / 100000.0 - 0.5) < 0.01);
    int high = 0, low = 0;
    for (int i = 0; i < 1000; ++i) {
        high += binarize(50.0, rng);
        low += binarize(-50.0, rng);
    }
    CHECK(high == 1000);
    CHECK(low == 0);

    const auto some = FeatureMask::from_string("01001");
    CHECK(repair_mask(some, rng) == some);
    const auto fixed = repair_mask(FeatureMask::none(5), rng);
    CHECK(fixed.count() == 1);
    Rng a(5), b(5);
    CHECK(repair_mask(FeatureMask::none(5), a) == repair_mask(FeatureMask::none(5), b));
}

TEST_CASE("searchers match the exhaustive optimum on a 6-feature problem") {
    auto ctx = synthetic_context(21);
    const double optimum = brute_force_best(ctx);
    BcsParams bcs;
    bcs.population = 20;
    bcs.iterations = 30;
    BpsoParams bpso;
    bpso.population = 20;
    bpso.iterations = 30;
    GaParams ga;
    int hits_bcs = 0, hits_bpso = 0, hits_ga = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng r1(seed), r2(seed), r3(seed);
        const auto a = bcs_search(ctx, bcs, r1);
        const auto b = bpso_search(ctx, bpso, r2);
        const auto c = ga_search(ctx, ga, r3);
        hits_bcs += a.best_fitness == optimum;
        hits_bpso += b.best_fitness == optimum;
        hits_ga += c.best_fitness == optimum;
        for (const auto* r : {&a, &b, &c}) {
            CHECK(non_decreasing(r->trace));
            CHECK(r->trace.back() == r->best_fitness);
            CHECK(r->best_mask.count() >= 1);
            CHECK(r->best_fitness == ctx.fitness(r->best_mask));
        }
        CHECK(a.trace.size() == bcs.iterations + 1);
        CHECK(c.trace.size() == ga.iterations + 1);
    }
    CHECK(hits_bcs >= 18);
    CHECK(hits_bpso >= 18);
    CHECK(hits_ga >= 18);
    CHECK(ctx.trainings() == ctx.cache_size());
    CHECK(ctx.cache_size() <= 63);
}

TEST_CASE("searches are deterministic and respect tie-breaking") {
    auto make = [] {
        return FitnessContext(10, [](const FeatureMask& m) {
            // Peak at features {0, 3}; extra features cost nothing in fitness.
            return (m[0] ? 0.5 : 0.0) + (m[3] ? 0.5 : 0.0);
        });
    };
    for (auto method : {FsMethod::Bcs, FsMethod::Bpso, FsMethod::Ga}) {
        auto c1 = make(), c2 = make();
        Rng r1(8), r2(8);
        const auto a = run_feature_selection(method, c1, FsParams{}, r1);
        const auto b = run_feature_selection(method, c2, FsParams{}, r2);
        CHECK(a.best_mask == b.best_mask);
        CHECK(a.trace == b.trace);
        CHECK(a.evaluations == b.evaluations);
        CHECK(a.best_fitness == 1.0);
        CHECK(c1.trainings() == c1.cache_size());
    }
    CHECK(fitter(0.9, FeatureMask::from_string("11"), 0.9, FeatureMask::from_string("111")));
    CHECK_FALSE(fitter(0.8, FeatureMask::from_string("1"), 0.9, FeatureMask::from_string("111")));

    auto ctx = make();
    Rng rng(1);
    const auto none = run_feature_selection(FsMethod::None, ctx, FsParams{}, rng);
    CHECK(none.best_mask == FeatureMask::all(10));
    CHECK(none.evaluations == 1);
}

TEST_CASE("zero iterations return the best initial candidate") {
    FitnessContext ctx(6, [](const FeatureMask& m) { return m[1] ? 0.75 : 0.25; });
    BcsParams bcs;
    bcs.iterations = 0;
    Rng rng(4);
    const auto r = bcs_search(ctx, bcs, rng);
    CHECK(r.trace.size() == 1);
    CHECK(r.evaluations == bcs.population);
    CHECK(r.best_fitness == r.trace[0]);
}

TEST_CASE("GA with no mutation keeps an identical population fixed") {
    std::mutex mu;
    std::set<std::string> seen;
    FitnessContext ctx(7, [&](const FeatureMask& m) {
        std::lock_guard lock(mu);
        seen.insert(m.str());
        return 0.5;
    });
    GaParams p;
    p.mutation_rate = 0.0;
    p.population = 10;
    p.iterations = 15;
    const auto start = FeatureMask::from_string("1010011");
    Rng rng(3);
    const auto r = ga_search(ctx, p, std::vector<FeatureMask>(10, start), rng);
    CHECK(r.best_mask == start);
    CHECK(seen.size() == 1);
    CHECK(ctx.trainings() == 1);
}

TEST_CASE("BPSO with a frozen swarm samples masks at the sigmoid(0) rate") {
    std::mutex mu;
    std::size_t ones = 0, bits = 0;
    FitnessContext ctx(40, [&](const FeatureMask& m) {
        std::lock_guard lock(mu);
        ones += m.count();
        bits += m.size();
        return 0.5;
    });
    BpsoParams p;
    p.population = 1;
    p.w = 0.0;
    p.c1 = 0.0;
    p.c2 = 0.0;
    p.iterations = 200;
    Rng rng(6);
    bpso_search(ctx, p, rng);
    CHECK(bits >= 40 * 150);
    CHECK(std::abs(static_cast<double>(ones) / static_cast<double>(bits) - 0.5) < 0.03);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(BcsParams({0.1, 1.5}).validate(), Error);
    CHECK_THROWS_AS(BcsParams({0.1, 0.25, 3.5}).validate(), Error);
    CHECK_THROWS_AS(BcsParams({0.1, 0.25, 1.5, 1}).validate(), Error);
    CHECK_THROWS_AS(GaParams({1.5}).validate(), Error);
    CHECK_THROWS_AS(GaParams({0.01, 1}).validate(), Error);
    CHECK_THROWS_AS(BpsoParams({2, 2, 0.7, 0.0}).validate(), Error);
    CHECK_THROWS_AS(parse_fs_method("pca"), Error);
    CHECK(parse_fs_method("GA") == FsMethod::Ga);
}

TEST_CASE("FS result export") {
    const auto dir = std::filesystem::temp_directory_path() / "fdilab_test_fs";
    std::filesystem::create_directories(dir);
    FsResult r{FeatureMask::from_string("0101"), 0.875, {0.5, 0.75, 0.875}, 42};
    export_fs_result(r, {"flow:1", "flow:2", "inj:1", "inj:2"}, dir / "run");
    std::ifstream txt(dir / "run.txt");
    std::string content((std::istreambuf_iterator<char>(txt)), {});
    CHECK(content.find("selected = flow:2 inj:2") != std::string::npos);
    CHECK(content.find("evaluations = 42") != std::string::npos);
    std::ifstream trace(dir / "run_trace.csv");
    std::string line;
    std::getline(trace, line);
    CHECK(line == "iteration,best_fitness");
    std::getline(trace, line);
    CHECK(line == "0,0.5");
    CHECK_THROWS_AS(export_fs_result(r, {"a"}, dir / "bad"), Error);
}
