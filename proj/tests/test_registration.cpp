#include <doctest.h>

#include "align/error.hpp"
#include "align/registration.hpp"
#include "align/simulate.hpp"
#include "align/tuning.hpp"
#include "test_helpers.hpp"

using namespace align;

namespace {

FitConfig fast_config() {
    FitConfig config;
    config.specs = parse_moment_specs("max:r=100,min:r=100");
    config.family = WarpFamily::standardized;
    config.amp_dim = 10;
    config.warp_dim = 4;
    config.quad_points = 801;
    config.max_outer_iters = 8;
    config.inner.max_iterations = 120;
    return config;
}

Dataset identical_bumps(int n_curves) {
    const testutil::TwoBump shape;
    Dataset data;
    for (int i = 0; i < n_curves; ++i) {
        data.push_back(testutil::sample_curve("c" + std::to_string(i), 60, 0.0, 1.0,
                                              [&](double t) { return shape(t, 0); }));
    }
    return data;
}

} // namespace

TEST_CASE("initialize: smoothing fits, identity warps, mean mu_theta") {
    FitConfig config = fast_config();
    const Dataset data = identical_bumps(4);
    const FitWorkspace ws(config, 0.0, 1.0);
    const InitialState init = initialize(data, config, ws);

    SUBCASE("identical curves start with zero shrinkage penalty") {
        for (const CurveParams& p : init.params) {
            CHECK((p.theta - init.params[0].theta).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK(p.warp.family == WarpFamily::standardized);
            CHECK(p.warp.gamma.cwiseAbs().maxCoeff() == 0.0);
        }
        CHECK((init.mu_theta - init.params[0].theta).cwiseAbs().maxCoeff() <= 1e-12);
    }

    SUBCASE("single-curve dataset gets its own coefficients as the mean") {
        const Dataset one = {data[0]};
        const InitialState single = initialize(one, config, ws);
        CHECK((single.mu_theta - single.params[0].theta).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("initial synchronized curves equal the smoothed observations") {
        // Z_i = smoothed Y_i at the start, so Sync opens at exactly 100%.
        Scenario scenario;
        scenario.kind = ScenarioKind::one;
        scenario.seed = 3;
        const SimOutput sim = simulate(scenario);
        const FitWorkspace ws1(config, 0.0, 1.0);
        const InitialState st = initialize(sim.data, config, ws1);
        const int n_out = 101;
        Eigen::MatrixXd z(n_out, 10), smoothed(n_out, 10);
        for (int i = 0; i < 10; ++i) {
            for (int r = 0; r < n_out; ++r) {
                const double t = r / 100.0;
                z(r, i) = ws1.amp_basis.value(st.params[i].theta, t, 0);
                smoothed(r, i) = z(r, i);
            }
        }
        CHECK(sync_metric(smoothed, z) == doctest::Approx(100.0).epsilon(1e-12));
    }
}

TEST_CASE("fit_single_curve honors its warm start") {
    FitConfig config = fast_config();
    config.lambdas = {0.1, 100.0, 1.0};
    const Dataset data = identical_bumps(2);
    const FitWorkspace ws(config, 0.0, 1.0);
    const InitialState init = initialize(data, config, ws);

    const CurveObjective obj(data[0], ws.engine, config.specs, init.params[0].warp, init.mu_theta,
                             init.targets, config.lambdas, &ws.warp_design);
    const double before = obj.value(init.params[0].pack());
    const CurveParams after =
        fit_single_curve(data[0], init.mu_theta, init.targets, config, ws, init.params[0]);
    CHECK(obj.value(after.pack()) <= before + 1e-12);

    SUBCASE("a stationary point is returned unchanged") {
        const CurveParams again =
            fit_single_curve(data[0], init.mu_theta, init.targets, config, ws, after);
        CHECK((again.pack() - after.pack()).cwiseAbs().maxCoeff() <= 1e-5);
        CHECK(obj.value(again.pack()) >= obj.value(after.pack()) - 1e-10);
    }
}

TEST_CASE("fit_single_curve with zero lambdas solves the least-squares problem") {
    FitConfig config = fast_config();
    config.lambdas = {};
    config.family = WarpFamily::identity;
    config.amp_dim = 6;
    config.inner.max_iterations = 400;

    const testutil::TwoBump shape;
    const Curve curve = testutil::sample_curve("c", 20, 0.0, 1.0, [&](double t) { return shape(t, 0); });
    const Dataset data = {curve};
    const FitWorkspace ws(config, 0.0, 1.0);
    const InitialState init = initialize(data, config, ws);

    CurveParams start = init.params[0];
    start.theta += Eigen::VectorXd::Constant(6, 0.3); // push off the optimum
    const CurveParams solved = fit_single_curve(curve, init.mu_theta, init.targets, config, ws, start);
    const Eigen::VectorXd oracle = smooth_fit(curve, ws.amp_basis, 0.0);
    CHECK((solved.theta - oracle).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("a shifted copy is aligned by a linear warp") {
    FitConfig config = fast_config();
    config.family = WarpFamily::linear;
    config.lambdas = {0.0, 1e4, 0.1};
    config.max_outer_iters = 20;
    const testutil::TwoBump shape;
    Dataset data;
    data.push_back(testutil::sample_curve("base", 80, 0.0, 1.0, [&](double t) { return shape(t, 0); }));
    data.push_back(
        testutil::sample_curve("shifted", 80, 0.0, 1.0, [&](double t) { return shape(t - 0.1, 0); }));

    const FitResult fit = register_curves(data, config);
    // The two warps should differ by the injected shift, splitting it around
    // the common frame.
    CHECK(fit.params[0].warp.alpha - fit.params[1].warp.alpha == doctest::Approx(0.1).epsilon(0.2));
    CHECK(fit.metrics.sync < 10.0);
}

TEST_CASE("register on pre-synchronized noiseless data stays put") {
    FitConfig config = fast_config();
    config.lambdas = {0.1, 1e4, 1.0};
    const Dataset data = identical_bumps(5);
    const FitResult fit = register_curves(data, config);
    CHECK(fit.metrics.sync <= 1.0);
    CHECK(fit.metrics.mean_pw <= 1e-3);
}

TEST_CASE("register: trace, step-2 exactness, target immutability, determinism") {
    Scenario scenario;
    scenario.kind = ScenarioKind::three;
    scenario.n_curves = 6;
    scenario.seed = 11;
    const SimOutput sim = simulate(scenario);

    FitConfig config = fast_config();
    config.lambdas = {0.2, 1e4, 1.0};
    config.exec = ExecMode::serial;
    const FitResult fit = register_curves(sim.data, config);

    SUBCASE("outer loop descends") {
        for (size_t i = 1; i < fit.q_trace.size(); ++i) {
            CHECK(fit.q_trace[i] <= fit.q_trace[i - 1] * (1.0 + 1e-9) + 1e-12);
        }
    }

    SUBCASE("mu_theta is exactly the mean of the thetas") {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(config.amp_dim);
        for (const CurveParams& p : fit.params) mean += p.theta;
        mean /= static_cast<double>(fit.params.size());
        CHECK((mean - fit.mu_theta).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("targets equal the initial observed-curve moments") {
        const FitWorkspace ws(config, 0.0, 1.0);
        const MomentSet expect =
            target_moments(sim.data, config.specs, ws.amp_basis, config.smooth_roughness, ws.grid);
        for (size_t l = 0; l < expect.values.size(); ++l) {
            CHECK((fit.targets.values[l] - expect.values[l]).cwiseAbs().maxCoeff() == 0.0);
        }
    }

    SUBCASE("same config and data give identical results") {
        const FitResult again = register_curves(sim.data, config);
        for (size_t i = 0; i < fit.params.size(); ++i) {
            CHECK((fit.params[i].pack() - again.params[i].pack()).cwiseAbs().maxCoeff() == 0.0);
        }
        CHECK(fit.metrics.sync == again.metrics.sync);
    }

    SUBCASE("openmp and serial agree bit for bit") {
        FitConfig parallel = config;
        parallel.exec = ExecMode::openmp;
        const FitResult par = register_curves(sim.data, parallel);
        for (size_t i = 0; i < fit.params.size(); ++i) {
            CHECK((fit.params[i].pack() - par.params[i].pack()).cwiseAbs().maxCoeff() == 0.0);
        }
        CHECK(par.metrics.sigma == fit.metrics.sigma);
    }
}

TEST_CASE("anneal schedule applies multipliers then hands back") {
    Scenario scenario;
    scenario.kind = ScenarioKind::three;
    scenario.n_curves = 4;
    scenario.seed = 5;
    const SimOutput sim = simulate(scenario);

    FitConfig config = fast_config();
    config.lambdas = {0.5, 1e4, 1.0};
    config.anneal = AnnealSchedule{2, 10.0, 0.1};
    config.max_outer_iters = 6;
    const FitResult fit = register_curves(sim.data, config);
    CHECK(fit.q_trace.size() >= 3);
    // Within phase 2 the trace still descends.
    for (size_t i = 3; i < fit.q_trace.size(); ++i) {
        CHECK(fit.q_trace[i] <= fit.q_trace[i - 1] * (1.0 + 1e-9) + 1e-12);
    }
}

TEST_CASE("register with N=1 degenerates to penalized smoothing") {
    FitConfig config = fast_config();
    config.lambdas = {0.1, 1e3, 1.0};
    const Dataset one = {identical_bumps(1)[0]};
    const FitResult fit = register_curves(one, config);
    CHECK(fit.metrics.sync == 0.0);
    CHECK(std::isfinite(fit.metrics.sigma));
}

TEST_CASE("lambda_mom > 0 without feature specs is rejected") {
    FitConfig config = fast_config();
    config.specs.clear();
    config.lambdas.mom = 10.0;
    CHECK_THROWS_AS(register_curves(identical_bumps(2), config), Error);
}
