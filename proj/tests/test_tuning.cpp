#include <doctest.h>

#include "align/error.hpp"
#include "align/simulate.hpp"
#include "align/tuning.hpp"
#include "test_helpers.hpp"

using namespace align;

TEST_CASE("sync metric identities") {
    Eigen::MatrixXd originals(5, 3);
    originals << 1, 2, 3, 2, 3, 4, 3, 4, 5, 2, 3, 4, 1, 2, 3;

    SUBCASE("identical synchronized curves score zero") {
        Eigen::MatrixXd same = Eigen::MatrixXd::Zero(5, 3);
        same.col(0).setConstant(1.0);
        same.col(1).setConstant(1.0);
        same.col(2).setConstant(1.0);
        CHECK(sync_metric(originals, same) == 0.0);
    }
    SUBCASE("no registration scores exactly 100") {
        CHECK(sync_metric(originals, originals) == doctest::Approx(100.0).epsilon(1e-14));
    }
    SUBCASE("identical originals are undefined") {
        Eigen::MatrixXd flat = Eigen::MatrixXd::Ones(5, 3);
        CHECK_THROWS_AS(sync_metric(flat, originals), Error);
    }
    SUBCASE("one curve is undefined") {
        Eigen::MatrixXd single(5, 1);
        single.setOnes();
        CHECK_THROWS_AS(sync_metric(single, single), Error);
    }
}

TEST_CASE("sigma metric identities") {
    Dataset data;
    data.push_back(testutil::sample_curve("a", 10, 0.0, 1.0, [](double t) { return t; }));
    data.push_back(testutil::sample_curve("b", 10, 0.0, 1.0, [](double t) { return 1.0 - t; }));

    SUBCASE("perfect fits score zero") {
        std::vector<Eigen::VectorXd> fitted = {data[0].values, data[1].values};
        CHECK(sigma_metric(data, fitted) == 0.0);
    }
    SUBCASE("a uniform offset c scores exactly c") {
        std::vector<Eigen::VectorXd> fitted = {data[0].values.array() + 0.01,
                                               data[1].values.array() + 0.01};
        CHECK(sigma_metric(data, fitted) == doctest::Approx(0.01).epsilon(1e-12));
    }
}

TEST_CASE("grid defaults match the documented axes") {
    const TuningGrid grid = TuningGrid::defaults();
    CHECK(grid.mom_values == std::vector<double>{1e3, 1e4, 1e5, 1e6});
    CHECK(grid.w_values == std::vector<double>{1e-1, 1e0, 1e1});
    REQUIRE(grid.sync_values.size() == 11);
    CHECK(grid.sync_values.front() == doctest::Approx(1e-3));
    CHECK(grid.sync_values.back() == doctest::Approx(1e2));
    CHECK(grid.sigma_max == 0.1);
    CHECK(grid.pw_max == 0.5);
}

namespace {

FitConfig small_fit_config() {
    FitConfig config;
    config.specs = parse_moment_specs("max:r=100,min:r=100");
    config.family = WarpFamily::standardized;
    config.amp_dim = 10;
    config.warp_dim = 4;
    config.quad_points = 601;
    config.max_outer_iters = 6;
    config.inner.max_iterations = 80;
    return config;
}

Dataset small_sim_three() {
    Scenario scenario;
    scenario.kind = ScenarioKind::three;
    scenario.n_curves = 5;
    scenario.seed = 23;
    return simulate(scenario).data;
}

} // namespace

TEST_CASE("grid search marks feasibility, picks the Sync-minimal feasible point") {
    const Dataset data = small_sim_three();
    TuningGrid grid;
    grid.sync_values = {0.01, 1.0};
    grid.mom_values = {1e4};
    grid.w_values = {1.0};
    grid.sigma_max = 0.2;
    grid.pw_max = 1.0;

    const TuningReport report = grid_search(data, grid, small_fit_config());
    REQUIRE(report.entries.size() == 2);
    REQUIRE(report.chosen.has_value());

    SUBCASE("chosen point is feasible and minimal under exhaustive re-scan") {
        const TuningEntry& best = report.entries[*report.chosen];
        CHECK(best.feasible);
        for (const TuningEntry& e : report.entries) {
            if (e.feasible) CHECK(best.sync <= e.sync + 1e-12);
        }
    }

    SUBCASE("feasibility flags are consistent with the recorded metrics") {
        for (const TuningEntry& e : report.entries) {
            CHECK(e.feasible == (e.sigma <= grid.sigma_max && e.mean_pw <= grid.pw_max));
        }
    }

    SUBCASE("pareto subset has sync non-increasing in sigma") {
        for (size_t i = 1; i < report.pareto.size(); ++i) {
            const TuningEntry& prev = report.entries[report.pareto[i - 1]];
            const TuningEntry& cur = report.entries[report.pareto[i]];
            CHECK(prev.sigma <= cur.sigma);
            CHECK(cur.sync <= prev.sync);
        }
    }
}

TEST_CASE("single feasible point is chosen; impossible bounds flag no-feasible") {
    const Dataset data = small_sim_three();
    TuningGrid grid;
    grid.sync_values = {0.5};
    grid.mom_values = {1e4};
    grid.w_values = {1.0};

    SUBCASE("single point, generous bounds") {
        grid.sigma_max = 10.0;
        grid.pw_max = 10.0;
        const TuningReport report = grid_search(data, grid, small_fit_config());
        REQUIRE(report.chosen.has_value());
        CHECK(*report.chosen == 0);
    }
    SUBCASE("unreachable bounds") {
        grid.sigma_max = 1e-12;
        grid.pw_max = 1e-12;
        const TuningReport report = grid_search(data, grid, small_fit_config());
        CHECK(report.no_feasible_point());
    }
}

TEST_CASE("grid search is deterministic across exec modes") {
    const Dataset data = small_sim_three();
    TuningGrid grid;
    grid.sync_values = {0.1, 10.0};
    grid.mom_values = {1e3, 1e4};
    grid.w_values = {1.0};
    grid.sigma_max = 0.5;
    grid.pw_max = 2.0;

    FitConfig serial = small_fit_config();
    serial.exec = ExecMode::serial;
    FitConfig parallel = small_fit_config();
    parallel.exec = ExecMode::openmp;

    const TuningReport a = grid_search(data, grid, serial);
    const TuningReport b = grid_search(data, grid, parallel);
    REQUIRE(a.entries.size() == b.entries.size());
    for (size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].sync == b.entries[i].sync);
        CHECK(a.entries[i].sigma == b.entries[i].sigma);
        CHECK(a.entries[i].mean_pw == b.entries[i].mean_pw);
    }
    CHECK(a.chosen == b.chosen);
}
