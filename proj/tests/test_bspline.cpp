#include <doctest.h>

#include "align/bspline.hpp"
#include "align/error.hpp"
#include "test_helpers.hpp"

using namespace align;

TEST_CASE("knot layout: clamped ends, uniform interior") {
    SUBCASE("minimal cubic basis has no interior knots") {
        const BSplineBasis basis(0.0, 1.0, 4, 3);
        REQUIRE(basis.knots().size() == 8);
        for (int i = 0; i < 4; ++i) {
            CHECK(basis.knots()(i) == 0.0);
            CHECK(basis.knots()(4 + i) == 1.0);
        }
    }
    SUBCASE("dim 5 puts a single interior knot at 0.5") {
        const BSplineBasis basis(0.0, 1.0, 5, 3);
        REQUIRE(basis.knots().size() == 9);
        CHECK(basis.knots()(4) == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("dim 10 on [0,18] gives 7 uniform interior knots") {
        const BSplineBasis basis(0.0, 18.0, 10, 3);
        REQUIRE(basis.knots().size() == 14);
        for (int i = 1; i <= 7; ++i) {
            CHECK(basis.knots()(3 + i) == doctest::Approx(18.0 * i / 7.0).epsilon(1e-12));
        }
    }
    SUBCASE("rejects dimension <= degree and reversed domains") {
        CHECK_THROWS_AS(BSplineBasis(0.0, 1.0, 3, 3), Error);
        CHECK_THROWS_AS(BSplineBasis(1.0, 0.0, 6, 3), Error);
    }
}

TEST_CASE("partition of unity and derivative sums") {
    const BSplineBasis basis(0.0, 2.0, 9, 3);
    for (int i = 0; i <= 1000; ++i) {
        const double t = 2.0 * i / 1000.0;
        const Eigen::VectorXd v = basis.eval(t, 0);
        CHECK(std::abs(v.sum() - 1.0) <= 1e-10);
        CHECK(basis.eval(t, 1).sum() == doctest::Approx(0.0).epsilon(1e-9));
        // local support
        CHECK((v.array() != 0.0).count() <= 4);
        CHECK((v.array() >= 0.0).all());
    }
}

TEST_CASE("derivatives match finite differences away from knots") {
    const BSplineBasis basis(0.0, 1.0, 8, 3);
    Rng rng(7);
    const double h = 1e-6;
    for (int trial = 0; trial < 50; ++trial) {
        const double t = rng.uniform(2 * h, 1.0 - 2 * h);
        const Eigen::VectorXd d1 = basis.eval(t, 1);
        const Eigen::VectorXd fd1 = (basis.eval(t + h, 0) - basis.eval(t - h, 0)) / (2 * h);
        const Eigen::VectorXd d2 = basis.eval(t, 2);
        const Eigen::VectorXd fd2 = (basis.eval(t + h, 1) - basis.eval(t - h, 1)) / (2 * h);
        for (int k = 0; k < basis.dimension(); ++k) {
            CHECK(d1(k) == doctest::Approx(fd1(k)).epsilon(1e-5).scale(std::max(1.0, std::abs(d1(k)))));
            CHECK(d2(k) == doctest::Approx(fd2(k)).epsilon(1e-5).scale(std::max(1.0, std::abs(d2(k)))));
        }
    }
}

TEST_CASE("out-of-domain evaluation clamps to the edge") {
    const BSplineBasis basis(0.0, 1.0, 6, 3);
    CHECK((basis.eval(-0.5, 0) - basis.eval(0.0, 0)).norm() == 0.0);
    CHECK((basis.eval(1.5, 0) - basis.eval(1.0, 0)).norm() == 0.0);
}

TEST_CASE("smooth_fit recovers in-span data exactly with zero roughness") {
    const BSplineBasis basis(0.0, 1.0, 7, 3);
    Rng rng(11);
    const Eigen::VectorXd theta_true = testutil::random_vector(rng, 7, -2.0, 2.0);
    Curve curve;
    curve.id = "exact";
    curve.times = Eigen::VectorXd::LinSpaced(25, 0.0, 1.0);
    curve.values.resize(25);
    for (int j = 0; j < 25; ++j) curve.values(j) = basis.value(theta_true, curve.times(j), 0);

    const Eigen::VectorXd theta = smooth_fit(curve, basis, 0.0);
    CHECK((theta - theta_true).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("smooth_fit keeps constants constant under any roughness") {
    const BSplineBasis basis(0.0, 1.0, 8, 3);
    Curve curve = testutil::sample_curve("const", 30, 0.0, 1.0, [](double) { return 3.5; });
    for (const double rough : {0.0, 1e-4, 1e2}) {
        const Eigen::VectorXd theta = smooth_fit(curve, basis, rough);
        for (int i = 0; i <= 20; ++i) {
            CHECK(basis.value(theta, i / 20.0, 0) == doctest::Approx(3.5).epsilon(1e-9));
        }
    }
}

TEST_CASE("residuals grow monotonically with roughness") {
    Rng rng(3);
    Curve curve = testutil::sample_curve("bump", 40, 0.0, 1.0, [&](double t) {
        return std::exp(-50.0 * (t - 0.45) * (t - 0.45)) + 0.05 * rng.gaussian();
    });
    const BSplineBasis basis(0.0, 1.0, 10, 3);
    double prev = -1.0;
    for (const double rough : {1e-6, 1e-4, 1e-2}) {
        const Eigen::VectorXd theta = smooth_fit(curve, basis, rough);
        double rss = 0.0;
        for (int j = 0; j < curve.size(); ++j) {
            const double r = curve.values(j) - basis.value(theta, curve.times(j), 0);
            rss += r * r;
        }
        CHECK(rss >= prev);
        prev = rss;
    }
}

TEST_CASE("smooth_fit rejects underdetermined interpolation") {
    const BSplineBasis basis(0.0, 1.0, 12, 3);
    const Curve curve = testutil::sample_curve("short", 6, 0.0, 1.0, [](double t) { return t; });
    CHECK_THROWS_AS(smooth_fit(curve, basis, 0.0), Error);
}
