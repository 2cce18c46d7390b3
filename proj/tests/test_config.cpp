#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fdilab/config.hpp"
#include "support.hpp"

using namespace fdilab;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("fdilab_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

#ifndef FDILAB_NO_CLI
struct CliRun {
    int status = -1;
    std::string out;
    std::string err;
};

CliRun run_cli(const std::string& args, const std::filesystem::path& dir) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + FDILAB_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                            err.string() + "\"";
    const int raw = std::system(cmd.c_str());
    CliRun r;
#ifdef WEXITSTATUS
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
#else
    r.status = raw;
#endif
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }
#endif

}  // namespace

TEST_CASE("config keys round trip through set and get") {
    RunConfig cfg;
    for (const auto& key : RunConfig::keys()) {
        const auto before = cfg.get(key);
        cfg.set(key, before);
        CHECK(cfg.get(key) == before);
    }
    cfg.set("svm.gamma", "0.25");
    CHECK(cfg.svm.gamma == 0.25);
    cfg.set("n-train", "123");
    CHECK(cfg.n_train == 123);
    cfg.set("systems", "ieee14, ieee57");
    CHECK(cfg.systems == std::vector<std::string>{"ieee14", "ieee57"});
    cfg.set("fs", "none,ga");
    CHECK(cfg.fs_methods.size() == 2);
    cfg.set("standardize", "false");
    CHECK_FALSE(cfg.standardize);

    CHECK_THROWS_AS(cfg.set("svm.sigma", "1"), Error);
    CHECK_THROWS_AS(cfg.get("nope"), Error);
    CHECK_THROWS_AS(cfg.set("n", "-3"), Error);
    CHECK_THROWS_AS(cfg.set("svm.C", "ten"), Error);
    CHECK_THROWS_AS(cfg.set("standardize", "maybe"), Error);
    CHECK_THROWS_AS(cfg.set("classifier", "tree"), Error);
    CHECK_THROWS_AS(cfg.set("fs", "aco"), Error);
}

TEST_CASE("config file then overrides") {
    RunConfig cfg;
    apply_config_text(cfg, "# comment\n\nseed = 11\nknn.k = 4   # trailing\ngrid.svm.C = 1, 10\n");
    CHECK(cfg.seed == 11);
    CHECK(cfg.knn.k == 4);
    CHECK(cfg.grid_svm_c == std::vector<double>{1, 10});
    cfg.set("seed", "12");
    CHECK(cfg.seed == 12);

    try {
        apply_config_text(cfg, "seed = 1\nbogus line\n", "x.conf");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("x.conf: line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(load_config_file(cfg, "/nonexistent/cfg.conf"), Error);
}

TEST_CASE("manifest reloads to the same configuration") {
    RunConfig cfg;
    cfg.seed = 99;
    cfg.svm.C = 3.5;
    cfg.systems = {"ieee57", "ieee118"};
    cfg.grid_knn_k = {2, 4};
    const auto dir = temp_dir("manifest");
    write_manifest(cfg, dir / "m.txt", "benchmark");
    const auto text = slurp(dir / "m.txt");
    CHECK(text.rfind("# fdilab benchmark run manifest", 0) == 0);

    RunConfig back;
    load_config_file(back, dir / "m.txt");
    CHECK(back.manifest() == cfg.manifest());
}

TEST_CASE("validation covers every module") {
    RunConfig ok;
    CHECK_NOTHROW(ok.validate());
    const std::vector<std::pair<std::string, std::string>> bad = {
        {"svm.C", "0"},          {"svm.gamma", "-1"},     {"knn.k", "0"},          {"ann.alpha", "-0.1"},
        {"ann.batch", "0"},      {"bcs.pa", "1.5"},       {"bcs.lambda", "0.5"},   {"bpso.v_max", "0"},
        {"ga.population", "1"},  {"holdout", "1"},        {"attack_ratio", "2"},   {"noise_sigma", "-1"},
        {"grid.svm.gamma", "0.1, 0"}, {"grid.knn.k", ""}, {"threshold_quantile", "1"}, {"n", "1"},
        {"systems", ""},         {"classifier", ""},
    };
    for (const auto& [key, value] : bad) {
        CAPTURE(key);
        RunConfig cfg;
        cfg.set(key, value);
        CHECK_THROWS_AS(cfg.validate(), Error);
    }
}

TEST_CASE("case lookup by name or path") {
    RunConfig cfg;
    cfg.case_dir = FDILAB_CASE_DIR;
    CHECK(std::filesystem::exists(cfg.case_path("ieee14")));
    CHECK(std::filesystem::exists(cfg.case_path("ieee57.csv")));
    CHECK(cfg.case_path(testing::case_file("ieee118")) == testing::case_file("ieee118"));
}

#ifndef FDILAB_NO_CLI
TEST_CASE("cli: generate") {
    const auto dir = temp_dir("cli_generate");
    const auto out = dir / "out";
    auto r = run_cli("generate --case ieee14.csv --n 1000 --seed 7 --out-dir \"" + out.string() + "\"", dir);
    REQUIRE(r.status == 0);
    CHECK(r.out.find("samples=1000 features=34 clean=500 attacked=500") != std::string::npos);
    const auto ds = read_dataset_csv(out / "ieee14.csv");
    CHECK(ds.size() == 1000);
    CHECK(ds.n_features() == 34);
    CHECK(ds.count(1) == 500);
    CHECK(ds.meta.seed == 7);
    CHECK(std::filesystem::exists(out / "ieee14.csv.meta"));
    CHECK(std::filesystem::exists(out / "manifest_generate.txt"));

    r = run_cli("generate --case ieee14 --n 200 --attack-ratio 0 --out-dir \"" + out.string() + "\"", dir);
    REQUIRE(r.status == 0);
    CHECK(read_dataset_csv(out / "ieee14.csv").count(1) == 0);

    r = run_cli("generate --case /nonexistent/case.csv --out-dir \"" + out.string() + "\"", dir);
    CHECK(r.status != 0);
    CHECK(r.err.find("file not found") != std::string::npos);

    r = run_cli("generate --bogus-flag", dir);
    CHECK(r.status != 0);
}

TEST_CASE("cli: invalid configuration fails before any output") {
    const auto dir = temp_dir("cli_invalid");
    std::ofstream(dir / "bad.conf") << "grid.svm.gamma = 0.1, -0.5\n";
    const auto out = dir / "out";
    const auto r = run_cli("gridsearch --config \"" + (dir / "bad.conf").string() + "\" --classifier svm --out-dir \"" +
                               out.string() + "\"",
                           dir);
    CHECK(r.status == 1);
    CHECK(r.err.find("gamma") != std::string::npos);
    CHECK_FALSE(std::filesystem::exists(out));

    const auto r2 = run_cli("benchmark --set svm.C=-1 --out-dir \"" + out.string() + "\"", dir);
    CHECK(r2.status == 1);
    CHECK_FALSE(std::filesystem::exists(out));
}

TEST_CASE("cli: gridsearch singleton and warm cache") {
    const auto dir = temp_dir("cli_grid");
    const auto out = dir / "out";
    const std::string args = "gridsearch --case ieee14 --n-train 300 --classifier knn --set grid.knn.k=5 --out-dir \"" +
                             out.string() + "\"";
    const auto cold = run_cli(args, dir);
    REQUIRE(cold.status == 0);
    CHECK(cold.out.find("trained=1") != std::string::npos);
    const auto best = slurp(out / "best_knn.conf");
    CHECK(best.find("knn.k = 5") != std::string::npos);
    const auto grid = slurp(out / "grid_knn.csv");
    CHECK(count_lines(grid) == 2);

    const auto warm = run_cli(args, dir);
    REQUIRE(warm.status == 0);
    CHECK(warm.out.find("trained=0") != std::string::npos);
    CHECK(slurp(out / "best_knn.conf") == best);
    CHECK(slurp(out / "grid_knn.csv") == grid);

    RunConfig winner;
    load_config_file(winner, out / "best_knn.conf");
    CHECK(winner.knn.k == 5);
}

TEST_CASE("cli: small benchmark is complete and reproducible") {
    const auto dir = temp_dir("cli_bench");
    std::ofstream(dir / "small.conf") << "n_train = 200\nn_test = 100\n"
                                         "bcs.population = 4\nbcs.iterations = 2\n"
                                         "bpso.population = 4\nbpso.iterations = 2\n"
                                         "ga.population = 4\nga.iterations = 2\n"
                                         "ann.epochs = 10\n";
    const auto conf = (dir / "small.conf").string();
    const auto a = run_cli("benchmark --config \"" + conf + "\" --out-dir \"" + (dir / "a").string() + "\"", dir);
    REQUIRE(a.status == 0);
    const auto b = run_cli("benchmark --config \"" + conf + "\" --out-dir \"" + (dir / "b").string() + "\"", dir);
    REQUIRE(b.status == 0);
    const auto csv = slurp(dir / "a" / "results.csv");
    CHECK(count_lines(csv) == 13);
    CHECK(csv == slurp(dir / "b" / "results.csv"));
    CHECK(slurp(dir / "a" / "report.txt") != "");
    CHECK(std::filesystem::exists(dir / "a" / "timings.csv"));
    CHECK(std::filesystem::exists(dir / "a" / "manifest.txt"));

    const auto rep = run_cli("report --results \"" + (dir / "a" / "results.csv").string() + "\"", dir);
    CHECK(rep.status == 0);
    CHECK(rep.out.find("System ieee14") != std::string::npos);
}
#endif
