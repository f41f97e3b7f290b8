#include "align/simulate.hpp"

#include <cmath>

#include "align/error.hpp"
#include "align/rng.hpp"

namespace align {

ScenarioKind parse_scenario_kind(const std::string& name) {
    if (name == "one" || name == "1") return ScenarioKind::one;
    if (name == "two" || name == "2") return ScenarioKind::two;
    if (name == "three" || name == "3") return ScenarioKind::three;
    if (name == "four" || name == "4") return ScenarioKind::four;
    throw Error(errc::bad_config, "unknown scenario '" + name + "'");
}

const char* scenario_kind_name(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::one: return "one";
        case ScenarioKind::two: return "two";
        case ScenarioKind::three: return "three";
        case ScenarioKind::four: return "four";
    }
    return "?";
}

void Scenario::validate() const {
    if (n_curves < 2) throw Error(errc::bad_config, "scenario needs at least 2 curves");
    if (n_points < 10) throw Error(errc::bad_config, "scenario needs at least 10 points per curve");
    if (!(scale_min > 0.0) || !(scale_max >= scale_min)) {
        throw Error(errc::bad_config, "invalid scale range");
    }
    if (warp_dim < 4) throw Error(errc::bad_config, "warp basis dimension must be at least 4");
}

namespace {

double gauss_bump(double t, double center, double width) {
    const double z = (t - center) / width;
    return std::exp(-0.5 * z * z);
}

// The pinned two-bump reference of the nonlinear scenarios: positive bump at
// 0.35, negative at 0.7, unit amplitudes, width 0.08.
double two_bump_reference(double t) {
    return gauss_bump(t, 0.35, 0.08) - gauss_bump(t, 0.7, 0.08);
}

} // namespace

SimOutput simulate(const Scenario& scenario) {
    scenario.validate();
    const int n = scenario.n_points;
    const int N = scenario.n_curves;
    const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(n, 0.0, 1.0);

    SimOutput out;
    out.data.resize(N);
    out.true_warps.resize(N);

    const bool gaussian_shape = scenario.kind == ScenarioKind::one || scenario.kind == ScenarioKind::two;
    if (gaussian_shape) {
        const double ref_center = scenario.kind == ScenarioKind::one
                                      ? 0.5 * (scenario.center_min + scenario.center_max)
                                      : 0.5;
        const double ref_scale = 0.5 * (scenario.scale_min + scenario.scale_max);
        out.reference = [ref_center, ref_scale](double t) { return gauss_bump(t, ref_center, ref_scale); };

        Rng rng(Rng::derive_seed(scenario.seed, "affine"));
        for (int i = 0; i < N; ++i) {
            double center;
            if (scenario.kind == ScenarioKind::one) {
                center = rng.uniform(scenario.center_min, scenario.center_max);
            } else {
                const double base = i < N / 2 ? 0.3 : 0.7;
                center = base + rng.uniform(-scenario.two_center_jitter, scenario.two_center_jitter);
            }
            const double scale = rng.uniform(scenario.scale_min, scenario.scale_max);
            // Y_i(t) = ref((t - center)/scale * ref_scale + ref_center)
            //        = ref(W_i(t)) with an affine warp.
            const double beta = ref_scale / scale;
            const double alpha = ref_center - beta * center;
            out.true_warps[i] = WarpModel::linear(alpha, beta);
            Curve& curve = out.data[i];
            curve.id = "c" + std::to_string(i + 1);
            curve.times = times;
            curve.values.resize(n);
            for (int j = 0; j < n; ++j) curve.values(j) = out.reference(alpha + beta * times(j));
        }
    } else {
        out.reference = two_bump_reference;
        const BSplineBasis warp_basis(0.0, 1.0, scenario.warp_dim, 3);
        const QuadGrid grid = QuadGrid::standard(0.0, 1.0);

        Rng warp_rng(Rng::derive_seed(scenario.seed, "warps"));
        for (int i = 0; i < N; ++i) {
            Eigen::VectorXd gamma(scenario.warp_dim);
            for (int k = 0; k < scenario.warp_dim; ++k) {
                gamma(k) = warp_rng.uniform(-scenario.warp_amplitude, scenario.warp_amplitude);
            }
            out.true_warps[i] = WarpModel::standardized_warp(warp_basis, gamma);
            const WarpEvaluator warp(out.true_warps[i], grid);
            Curve& curve = out.data[i];
            curve.id = "c" + std::to_string(i + 1);
            curve.times = times;
            curve.values.resize(n);
            for (int j = 0; j < n; ++j) curve.values(j) = out.reference(warp.eval(times(j)));
        }

        if (scenario.kind == ScenarioKind::four) {
            Rng noise_rng(Rng::derive_seed(scenario.seed, "noise"));
            Rng drift_rng(Rng::derive_seed(scenario.seed, "drift"));
            for (int i = 0; i < N; ++i) {
                const double slope = drift_rng.uniform(-scenario.drift_slope, scenario.drift_slope);
                for (int j = 0; j < n; ++j) {
                    out.data[i].values(j) += slope * times(j) + scenario.noise_sd * noise_rng.gaussian();
                }
            }
        }
    }

    out.ref_grid = Eigen::VectorXd::LinSpaced(201, 0.0, 1.0);
    out.ref_values.resize(out.ref_grid.size());
    for (int j = 0; j < out.ref_grid.size(); ++j) out.ref_values(j) = out.reference(out.ref_grid(j));
    return out;
}

double invert_warp(const WarpModel& warp, double s, const QuadGrid& grid) {
    const WarpEvaluator eval(warp, grid);
    double lo = grid.t0();
    double hi = grid.t1();
    const double w_lo = eval.eval(lo);
    const double w_hi = eval.eval(hi);
    if (s < w_lo - 1e-12 || s > w_hi + 1e-12) {
        throw Error(errc::invalid_domain, "warp inverse target outside range");
    }
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (eval.eval(mid) < s) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace align
