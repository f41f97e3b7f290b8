#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "align/error.hpp"
#include "align/io.hpp"
#include "test_helpers.hpp"

using namespace align;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("align_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

} // namespace

TEST_CASE("wide CSV: header ids, shared grid") {
    TempDir dir;
    write_text(dir.file("wide.csv"), "t,a,b\n0,1,4\n0.5,2,5\n1,3,6\n");
    const Dataset data = load_curves(dir.file("wide.csv"));
    REQUIRE(data.size() == 2);
    CHECK(data[0].id == "a");
    CHECK(data[1].id == "b");
    REQUIRE(data[0].size() == 3);
    CHECK(data[0].values(1) == 2.0);
    CHECK(data[1].values(2) == 6.0);
}

TEST_CASE("long CSV: per-curve grids may differ") {
    TempDir dir;
    write_text(dir.file("long.csv"),
               "curve_id,t,y\nu,0,1\nu,0.4,2\nu,1,3\nv,0.1,9\nv,0.9,8\n");
    const Dataset data = load_curves(dir.file("long.csv"));
    REQUIRE(data.size() == 2);
    CHECK(data[0].size() == 3);
    CHECK(data[1].size() == 2);
    CHECK(data[1].times(0) == 0.1);
}

TEST_CASE("parse errors carry line numbers") {
    TempDir dir;
    SUBCASE("non-monotone times") {
        write_text(dir.file("bad.csv"), "curve_id,t,y\nu,0.5,1\nu,0.4,2\n");
        try {
            load_curves(dir.file("bad.csv"));
            FAIL("expected io-parse");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find(":3") != std::string::npos);
        }
    }
    SUBCASE("ragged wide row") {
        write_text(dir.file("ragged.csv"), "t,a,b\n0,1,2\n0.5,3\n");
        try {
            load_curves(dir.file("ragged.csv"), CsvFormat::wide);
            FAIL("expected io-parse");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find(":3") != std::string::npos);
        }
    }
    SUBCASE("non-numeric cell") {
        write_text(dir.file("nan.csv"), "t,a\n0,x\n");
        CHECK_THROWS_AS(load_curves(dir.file("nan.csv"), CsvFormat::wide), Error);
    }
}

TEST_CASE("save/load round-trip is exact") {
    TempDir dir;
    Rng rng(8);
    Dataset data;
    for (int i = 0; i < 3; ++i) {
        Curve c;
        c.id = "curve" + std::to_string(i);
        c.times = Eigen::VectorXd::LinSpaced(40, 0.0, 1.0);
        c.values = testutil::random_vector(rng, 40, -2.0, 2.0);
        data.push_back(c);
    }
    save_curves(dir.file("round.csv"), data);
    const Dataset loaded = load_curves(dir.file("round.csv"));
    REQUIRE(loaded.size() == data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        CHECK(loaded[i].id == data[i].id);
        CHECK((loaded[i].times - data[i].times).cwiseAbs().maxCoeff() == 0.0);
        CHECK((loaded[i].values - data[i].values).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("long format round-trips too") {
        Dataset ragged = data;
        ragged[1].times = Eigen::VectorXd::LinSpaced(17, 0.05, 0.95);
        ragged[1].values = testutil::random_vector(rng, 17, -1.0, 1.0);
        save_curves(dir.file("long.csv"), ragged);
        const Dataset loaded2 = load_curves(dir.file("long.csv"));
        REQUIRE(loaded2.size() == 3);
        CHECK(loaded2[1].size() == 17);
        CHECK((loaded2[1].values - ragged[1].values).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("run config round-trips through the key=value echo") {
    TempDir dir;
    RunConfig config;
    config.command = "fit";
    config.method = "moments";
    config.features = "max:r=100,min:r=100";
    config.warp = "standardized";
    config.fit.lambdas = {0.25, 1e5, 10.0};
    config.fit.amp_dim = 14;
    config.fit.anneal = AnnealSchedule{3, 10.0, 0.1};
    config.fit.domain = {0.0, 1.0};
    config.seed = 42;
    write_run_config(dir.file("config.txt"), config);
    const RunConfig loaded = read_run_config(dir.file("config.txt"));
    CHECK(loaded.method == "moments");
    CHECK(loaded.fit.lambdas.mom == 1e5);
    CHECK(loaded.fit.amp_dim == 14);
    REQUIRE(loaded.fit.anneal.has_value());
    CHECK(loaded.fit.anneal->phase1_iters == 3);
    REQUIRE(loaded.fit.domain.has_value());
    CHECK(loaded.fit.domain->second == 1.0);
    CHECK(loaded.seed == 42);
}

TEST_CASE("fit run writes the artifact set and metrics recompute from it") {
    TempDir dir;
    // Small dataset via the simulate command, then a fit.
    RunConfig sim_config;
    sim_config.command = "simulate";
    sim_config.scenario.kind = ScenarioKind::three;
    sim_config.scenario.n_curves = 4;
    sim_config.seed = 3;
    sim_config.out_dir = dir.file("data");
    run(sim_config);
    CHECK(fs::exists(dir.file("data/curves.csv")));
    CHECK(fs::exists(dir.file("data/truth_warps.csv")));
    CHECK(fs::exists(dir.file("data/truth_reference.csv")));

    RunConfig fit_config;
    fit_config.command = "fit";
    fit_config.method = "moments";
    fit_config.input = dir.file("data/curves.csv");
    fit_config.out_dir = dir.file("out");
    fit_config.plots = true;
    fit_config.fit.lambdas = {0.2, 1e4, 1.0};
    fit_config.fit.amp_dim = 10;
    fit_config.fit.quad_points = 801;
    fit_config.fit.max_outer_iters = 5;
    fit_config.fit.inner.max_iterations = 60;
    run(fit_config);

    for (const char* name :
         {"synchronized_curves.csv", "warps.csv", "params.csv", "metrics.txt", "config.txt",
          "report.svg"}) {
        CAPTURE(name);
        CHECK(fs::exists(dir.file(std::string("out/") + name)));
    }

    SUBCASE("metrics recomputation is consistent at 1e-9") {
        const RecomputedMetrics m = recompute_metrics(dir.file("out"), "");
        CHECK(m.consistent);
    }

    SUBCASE("emitted CSVs round-trip") {
        const Dataset z = load_curves(dir.file("out/synchronized_curves.csv"), CsvFormat::wide);
        CHECK(z.size() == 4);
        const Dataset w = load_curves(dir.file("out/warps.csv"), CsvFormat::wide);
        CHECK(w.size() == 4);
    }
}

TEST_CASE("tune run emits the report and a feasible chosen row") {
    TempDir dir;
    RunConfig sim_config;
    sim_config.command = "simulate";
    sim_config.scenario.kind = ScenarioKind::three;
    sim_config.scenario.n_curves = 4;
    sim_config.seed = 13;
    sim_config.out_dir = dir.file("data");
    run(sim_config);

    RunConfig tune;
    tune.command = "tune";
    tune.input = dir.file("data/curves.csv");
    tune.out_dir = dir.file("out");
    tune.plots = true;
    tune.fit.amp_dim = 10;
    tune.fit.quad_points = 601;
    tune.fit.max_outer_iters = 4;
    tune.fit.inner.max_iterations = 50;
    tune.grid.sync_values = {0.1, 10.0};
    tune.grid.mom_values = {1e4};
    tune.grid.w_values = {1.0};
    tune.grid.sigma_max = 0.5;
    tune.grid.pw_max = 2.0;
    run(tune);

    CHECK(fs::exists(dir.file("out/tuning_report.csv")));
    CHECK(fs::exists(dir.file("out/frontier.csv")));
    CHECK(fs::exists(dir.file("out/report.svg")));

    // The chosen row respects the bounds.
    std::ifstream in(dir.file("out/tuning_report.csv"));
    std::string line;
    std::getline(in, line); // header
    bool found_chosen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double ls, lm, lw, sync, sigma, pw;
        int feasible, chosen;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%d,%d", &ls, &lm, &lw, &sync,
                            &sigma, &pw, &feasible, &chosen) == 8);
        if (chosen) {
            found_chosen = true;
            CHECK(feasible == 1);
            CHECK(sigma <= 0.5);
            CHECK(pw <= 2.0);
        }
    }
    CHECK(found_chosen);
}

TEST_CASE("unknown method fails with a machine-readable code") {
    TempDir dir;
    write_text(dir.file("in.csv"), "t,a,b\n0,1,2\n0.5,2,3\n1,3,4\n");
    RunConfig config;
    config.command = "fit";
    config.method = "nope";
    config.input = dir.file("in.csv");
    config.out_dir = dir.file("out");
    try {
        run(config);
        FAIL("expected bad-config");
    } catch (const Error& e) {
        CHECK(e.code() == std::string(errc::bad_config));
        CHECK(std::string(e.what()).rfind("error:bad-config:", 0) == 0);
    }
}
