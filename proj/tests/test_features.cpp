#include <doctest.h>

#include "align/error.hpp"
#include "align/features.hpp"
#include "test_helpers.hpp"

using namespace align;

namespace {

ScalarFn fn_of(const testutil::TwoBump& shape) {
    return [shape](double t, int d) { return shape(t, d); };
}

// g((s - a)/b) with derivatives.
ScalarFn warped_fn(const testutil::TwoBump& shape, double a, double b) {
    return [shape, a, b](double t, int d) { return shape((t - a) / b, d) / std::pow(b, d); };
}

} // namespace

TEST_CASE("feature spec parsing") {
    const FeatureSpec max_spec = FeatureSpec::parse("max:r=100");
    CHECK(max_spec.kind == FeatureKind::max);
    CHECK(max_spec.sharpness == 100.0);
    const FeatureSpec deriv_spec = FeatureSpec::parse("deriv:m=1");
    CHECK(deriv_spec.kind == FeatureKind::deriv);
    CHECK(deriv_spec.order == 1);
    CHECK_THROWS_AS(FeatureSpec::parse("peak:r=3"), Error);
    CHECK_THROWS_AS(FeatureSpec::parse("max:r=-1"), Error);

    const auto specs = parse_moment_specs("max:r=100:k=1,2,min:r=50,deriv:m=0");
    REQUIRE(specs.size() == 3);
    CHECK(specs[0].orders == std::vector<int>{1, 2});
    CHECK(specs[1].feature.sharpness == 50.0);
    CHECK(specs[2].orders == std::vector<int>{1});
}

TEST_CASE("weights normalize to one and stay non-negative") {
    const QuadGrid grid(0.0, 1.0, 2001);
    const testutil::TwoBump shape;
    for (const char* text : {"max:r=100", "min:r=100", "local:r=100", "deriv:m=0", "deriv:m=1", "deriv:m=2"}) {
        const FeatureSpec spec = FeatureSpec::parse(text);
        const Eigen::VectorXd w = feature_weights(fn_of(shape), spec, grid);
        CHECK(std::abs(grid.integrate(w) - 1.0) <= 1e-10);
        CHECK((w.array() >= 0.0).all());
    }
}

TEST_CASE("constant functions have no max/min/deriv features") {
    const QuadGrid grid(0.0, 1.0, 501);
    const ScalarFn flat = [](double, int d) { return d == 0 ? 5.0 : 0.0; };
    CHECK_THROWS_AS(feature_weights(flat, FeatureSpec::parse("max:r=100"), grid), Error);
    CHECK_THROWS_AS(feature_weights(flat, FeatureSpec::parse("min:r=100"), grid), Error);
    CHECK_THROWS_AS(feature_weights(flat, FeatureSpec::parse("deriv:m=1"), grid), Error);
    // deriv m=0 of a nonzero constant is fine: uniform weights
    const Eigen::VectorXd w = feature_weights(flat, FeatureSpec::parse("deriv:m=0"), grid);
    CHECK(w.maxCoeff() == doctest::Approx(w.minCoeff()).epsilon(1e-12));
    CHECK(moment(flat, FeatureSpec::parse("deriv:m=0"), 1, grid) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(moment(flat, FeatureSpec::parse("deriv:m=0"), 2, grid) ==
          doctest::Approx(1.0 / 12.0).epsilon(1e-6));
}

TEST_CASE("sharp max weights pile onto the increasing end") {
    const QuadGrid grid(0.0, 1.0, 2001);
    const ScalarFn line = [](double t, int d) { return d == 0 ? t : (d == 1 ? 1.0 : 0.0); };
    const Eigen::VectorXd w = feature_weights(line, FeatureSpec::parse("max:r=100"), grid);
    double top_mass = 0.0;
    for (int j = 0; j < grid.size(); ++j) {
        if (grid.points()(j) >= 0.9) top_mass += grid.weights()(j) * w(j);
    }
    CHECK(top_mass > 0.99);
}

TEST_CASE("a symmetric bump centers its max weight at the peak") {
    const QuadGrid grid(0.0, 1.0, 2001);
    const ScalarFn bump = [](double t, int d) {
        const double z = (t - 0.5) / 0.1;
        const double g = std::exp(-0.5 * z * z);
        if (d == 0) return g;
        if (d == 1) return -g * z / 0.1;
        return g * (z * z - 1.0) / 0.01;
    };
    const Eigen::VectorXd w = feature_weights(bump, FeatureSpec::parse("max:r=100"), grid);
    int argmax = 0;
    w.maxCoeff(&argmax);
    CHECK(std::abs(grid.points()(argmax) - 0.5) <= grid.step() + 1e-12);
    CHECK(moment(bump, FeatureSpec::parse("max:r=100"), 1, grid) ==
          doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("moments transform correctly under affine time warps") {
    // mu1 -> b mu1 + a, mu_k -> b^k mu_k; quadrature on one domain holding
    // both. max/min weights decay hyper-exponentially away from the extrema,
    // so the common window loses no mass. (The acceptance suite runs the full
    // six-kind version on corresponding windows.)
    const testutil::TwoBump shape;
    const double a = 0.2, b = 1.5;
    const QuadGrid grid(-1.0, 2.5, 4001);
    for (const char* text : {"max:r=100", "min:r=100"}) {
        const FeatureSpec spec = FeatureSpec::parse(text);
        const double mu1 = moment(fn_of(shape), spec, 1, grid);
        const double mu2 = moment(fn_of(shape), spec, 2, grid);
        const double mu1_warp = moment(warped_fn(shape, a, b), spec, 1, grid);
        const double mu2_warp = moment(warped_fn(shape, a, b), spec, 2, grid);
        CHECK(mu1_warp == doctest::Approx(b * mu1 + a).epsilon(1e-4));
        CHECK(mu2_warp == doctest::Approx(b * b * mu2).epsilon(1e-4));
    }
}

TEST_CASE("moments ignore positive rescaling of the raw weights") {
    // The normalization quotient makes c * I_g and I_g identical weight
    // functions; deriv:m=0 exercises it directly through |c g|.
    const QuadGrid grid(0.0, 1.0, 1001);
    const testutil::TwoBump shape;
    const FeatureSpec spec = FeatureSpec::parse("deriv:m=0");
    const ScalarFn scaled = [&shape](double t, int d) { return 7.25 * shape(t, d); };
    for (int k : {1, 2, 3}) {
        CHECK(moment(fn_of(shape), spec, k, grid) ==
              doctest::Approx(moment(scaled, spec, k, grid)).epsilon(1e-12));
    }
}

TEST_CASE("first moments stay inside the domain") {
    const QuadGrid grid(0.0, 1.0, 1001);
    const testutil::TwoBump shape;
    for (const char* text : {"max:r=100", "min:r=100", "local:r=100", "deriv:m=0", "deriv:m=2"}) {
        const double mu1 = moment(fn_of(shape), FeatureSpec::parse(text), 1, grid);
        CHECK(mu1 >= 0.0);
        CHECK(mu1 <= 1.0);
    }
}

TEST_CASE("spline moment engine agrees with the generic path") {
    const BSplineBasis basis(0.0, 1.0, 12, 3);
    const QuadGrid grid(0.0, 1.0, 2001);
    const testutil::TwoBump shape;
    const Curve curve = testutil::sample_curve("s", 80, 0.0, 1.0, [&](double t) { return shape(t, 0); });
    const Eigen::VectorXd theta = smooth_fit(curve, basis, 0.0);

    const MomentEngine engine(basis, grid);
    const auto specs = parse_moment_specs("max:r=100:k=1,2,min:r=100");
    const MomentSet values = engine.values(theta, specs);

    const ScalarFn spline_fn = [&](double t, int d) { return basis.value(theta, t, d); };
    CHECK(values.values[0](0) ==
          doctest::Approx(moment(spline_fn, specs[0].feature, 1, grid)).epsilon(1e-12));
    CHECK(values.values[0](1) ==
          doctest::Approx(moment(spline_fn, specs[0].feature, 2, grid)).epsilon(1e-12));
    CHECK(values.values[1](0) ==
          doctest::Approx(moment(spline_fn, specs[1].feature, 1, grid)).epsilon(1e-12));
}

TEST_CASE("moment gradients match finite differences") {
    const BSplineBasis basis(0.0, 1.0, 8, 3);
    const QuadGrid grid(0.0, 1.0, 801);
    const testutil::TwoBump shape;
    const Curve curve = testutil::sample_curve("g", 60, 0.0, 1.0, [&](double t) { return shape(t, 0); });
    const Eigen::VectorXd theta = smooth_fit(curve, basis, 1e-8);
    const MomentEngine engine(basis, grid);

    for (const char* text : {"max:r=100:k=1,2", "min:r=100", "deriv:m=0", "deriv:m=1", "local:r=40"}) {
        CAPTURE(text);
        const std::vector<MomentSpec> specs = {MomentSpec::parse(text)};
        std::vector<Eigen::MatrixXd> grads;
        engine.values_and_gradients(theta, specs, grads);
        for (int c = 0; c < basis.dimension(); ++c) {
            const double h = 1e-6;
            Eigen::VectorXd tp = theta, tm = theta;
            tp(c) += h;
            tm(c) -= h;
            const MomentSet up = engine.values(tp, specs);
            const MomentSet dn = engine.values(tm, specs);
            for (size_t j = 0; j < specs[0].orders.size(); ++j) {
                const double fd = (up.values[0](j) - dn.values[0](j)) / (2 * h);
                CHECK(grads[0](j, c) == doctest::Approx(fd).epsilon(2e-4).scale(1.0));
            }
        }
    }
}

TEST_CASE("target moments average the per-curve moments") {
    const BSplineBasis basis(0.0, 1.0, 10, 3);
    const QuadGrid grid(0.0, 1.0, 1001);
    const auto specs = parse_moment_specs("max:r=100");
    Dataset data;
    for (int i = 0; i < 4; ++i) {
        const double center = 0.35 + 0.1 * i;
        data.push_back(testutil::sample_curve("c" + std::to_string(i), 60, 0.0, 1.0, [center](double t) {
            const double z = (t - center) / 0.09;
            return std::exp(-0.5 * z * z);
        }));
    }
    const MomentSet target = target_moments(data, specs, basis, 1e-8, grid);

    const MomentEngine engine(basis, grid);
    double mean_mu1 = 0.0;
    for (const Curve& c : data) {
        mean_mu1 += engine.values(smooth_fit(c, basis, 1e-8), specs).values[0](0);
    }
    mean_mu1 /= 4.0;
    CHECK(target.values[0](0) == doctest::Approx(mean_mu1).epsilon(1e-8));

    SUBCASE("single-curve targets equal that curve's own moments") {
        const Dataset one = {data[0]};
        const MomentSet t1 = target_moments(one, specs, basis, 1e-8, grid);
        const MomentSet own = engine.values(smooth_fit(data[0], basis, 1e-8), specs);
        CHECK(t1.values[0](0) == doctest::Approx(own.values[0](0)).epsilon(1e-14));
    }

    SUBCASE("mirror-shifted bumps average to the midpoint") {
        Dataset pair;
        for (const double delta : {-0.08, 0.08}) {
            pair.push_back(testutil::sample_curve("m", 80, 0.0, 1.0, [delta](double t) {
                const double z = (t - 0.5 - delta) / 0.1;
                return std::exp(-0.5 * z * z);
            }));
        }
        const MomentSet target2 = target_moments(pair, specs, basis, 1e-8, grid);
        CHECK(std::abs(target2.values[0](0) - 0.5) <= 2e-3);
    }
}
