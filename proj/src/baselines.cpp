#include "align/baselines.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "align/error.hpp"
#include "align/tuning.hpp"

namespace align {

LandmarkSpec LandmarkSpec::parse(const std::string& comma_list, double roughness) {
    LandmarkSpec spec;
    spec.events.clear();
    spec.smooth_roughness = roughness;
    std::string token;
    std::istringstream stream(comma_list);
    while (std::getline(stream, token, ',')) {
        if (token == "max" || token == "global_max") spec.events.push_back(LandmarkEvent::global_max);
        else if (token == "min" || token == "global_min") spec.events.push_back(LandmarkEvent::global_min);
        else throw Error(errc::bad_config, "unknown landmark event '" + token + "'");
    }
    if (spec.events.empty()) throw Error(errc::bad_config, "landmark spec needs at least one event");
    return spec;
}

std::vector<double> landmark_detect(const Curve& curve, const LandmarkSpec& spec,
                                    const BSplineBasis& amp_basis, const QuadGrid& grid) {
    const Eigen::VectorXd theta = smooth_fit(curve, amp_basis, spec.smooth_roughness);
    const BasisDesign design(amp_basis, grid.points(), 0);
    const Eigen::VectorXd values = design.apply(theta, 0);

    std::vector<double> times;
    times.reserve(spec.events.size());
    for (const LandmarkEvent event : spec.events) {
        int idx = 0;
        if (event == LandmarkEvent::global_max) {
            values.maxCoeff(&idx);
        } else {
            values.minCoeff(&idx);
        }
        times.push_back(grid.points()(idx));
    }
    for (size_t l = 1; l < times.size(); ++l) {
        if (!(times[l] > times[l - 1])) {
            throw Error(errc::landmark_order, "curve '" + curve.id + "': event " + std::to_string(l) +
                                                  " at t=" + std::to_string(times[l]) +
                                                  " does not follow t=" + std::to_string(times[l - 1]));
        }
    }
    return times;
}

namespace {

WarpModel affine_event_warp(const std::vector<double>& events, const std::vector<double>& means,
                            const std::string& curve_id) {
    const int n = static_cast<int>(events.size());
    if (n == 1) {
        return WarpModel::linear(means[0] - events[0], 1.0); // pure shift
    }
    // Least squares alpha + beta * e_l ~ mean_l; exact for two events.
    double se = 0, sm = 0, see = 0, sem = 0;
    for (int l = 0; l < n; ++l) {
        se += events[l];
        sm += means[l];
        see += events[l] * events[l];
        sem += events[l] * means[l];
    }
    const double denom = n * see - se * se;
    if (std::abs(denom) < 1e-15) {
        throw Error(errc::degenerate_landmark, "curve '" + curve_id + "': coincident event times");
    }
    const double beta = (n * sem - se * sm) / denom;
    const double alpha = (sm - beta * se) / n;
    if (!(beta > 0.0)) {
        throw Error(errc::degenerate_landmark,
                    "curve '" + curve_id + "': event map has slope " + std::to_string(beta));
    }
    return WarpModel::linear(alpha, beta);
}

// Monotone piecewise-linear interpolant through {(a,a), (e_l, mean_l), (b,b)}
// projected into the standardized family by least-squares matching of
// log W' on the grid (linear in gamma).
WarpModel standardized_event_warp(const std::vector<double>& events, const std::vector<double>& means,
                                  const BSplineBasis& warp_basis, const QuadGrid& grid,
                                  const std::string& curve_id) {
    const double a = grid.t0();
    const double b = grid.t1();
    std::vector<double> xs = {a};
    std::vector<double> ys = {a};
    for (size_t l = 0; l < events.size(); ++l) {
        xs.push_back(events[l]);
        ys.push_back(means[l]);
    }
    xs.push_back(b);
    ys.push_back(b);
    for (size_t l = 1; l < xs.size(); ++l) {
        if (!(xs[l] > xs[l - 1]) || !(ys[l] > ys[l - 1])) {
            throw Error(errc::landmark_order,
                        "curve '" + curve_id + "': event map is not strictly increasing");
        }
    }

    // log of the piecewise-constant slope at each grid point.
    Eigen::VectorXd log_slope(grid.size());
    for (int j = 0; j < grid.size(); ++j) {
        const double t = grid.points()(j);
        size_t seg = 1;
        while (seg + 1 < xs.size() && t > xs[seg]) ++seg;
        log_slope(j) = std::log((ys[seg] - ys[seg - 1]) / (xs[seg] - xs[seg - 1]));
    }

    // Weighted least squares of w(s)^T gamma onto log_slope.
    const BasisDesign design(warp_basis, grid.points(), 0);
    const int q = warp_basis.dimension();
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(q, q);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(q);
    for (int j = 0; j < grid.size(); ++j) {
        const double wgt = grid.weights()(j);
        const int f = design.first(j);
        for (int r = 0; r < design.width(); ++r) {
            const double vr = design.band(0)(j, r);
            rhs(f + r) += wgt * vr * log_slope(j);
            for (int c = 0; c < design.width(); ++c) {
                normal(f + r, f + c) += wgt * vr * design.band(0)(j, c);
            }
        }
    }
    const Eigen::VectorXd gamma = normal.ldlt().solve(rhs);
    return WarpModel::standardized_warp(warp_basis, gamma);
}

// Presmoothing sigma: observed values against their own smoothing-spline fit,
// the convention comparison tables use for methods that smooth before
// registering.
double presmooth_sigma(const Dataset& data, const std::vector<Eigen::VectorXd>& presmooth_thetas,
                       const BSplineBasis& amp_basis) {
    std::vector<Eigen::VectorXd> smooth_at_samples(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        const Curve& c = data[i];
        Eigen::VectorXd v(c.size());
        for (int j = 0; j < c.size(); ++j) v(j) = amp_basis.value(presmooth_thetas[i], c.times(j), 0);
        smooth_at_samples[i] = v;
    }
    return sigma_metric(data, smooth_at_samples);
}

} // namespace

FitResult landmark_register(const Dataset& data, const LandmarkSpec& spec, WarpFamily family,
                            const FitConfig& config) {
    if (family != WarpFamily::linear && family != WarpFamily::standardized) {
        throw Error(errc::bad_config, "landmark registration supports linear or standardized warps");
    }
    if (data.empty()) throw Error(errc::bad_config, "cannot register an empty dataset");
    for (const Curve& c : data) c.validate();

    FitConfig local = config;
    local.family = family;
    const auto [t0, t1] = config.domain ? *config.domain : dataset_span(data);
    const FitWorkspace ws(local, t0, t1);
    const int n_curves = static_cast<int>(data.size());
    const int n_events = static_cast<int>(spec.events.size());

    std::vector<std::vector<double>> events(n_curves);
    std::vector<double> means(n_events, 0.0);
    std::vector<Eigen::VectorXd> presmooth_thetas(n_curves);
    for (int i = 0; i < n_curves; ++i) {
        events[i] = landmark_detect(data[i], spec, ws.amp_basis, ws.grid);
        presmooth_thetas[i] = smooth_fit(data[i], ws.amp_basis, spec.smooth_roughness);
        for (int l = 0; l < n_events; ++l) means[l] += events[i][l];
    }
    for (double& m : means) m /= static_cast<double>(n_curves);

    std::vector<CurveParams> params(n_curves);
    for (int i = 0; i < n_curves; ++i) {
        params[i].warp = family == WarpFamily::linear
                             ? affine_event_warp(events[i], means, data[i].id)
                             : standardized_event_warp(events[i], means, ws.warp_basis, ws.grid, data[i].id);
        // Amplitude fit at the warped sample times.
        const WarpEvaluator warp(params[i].warp, ws.grid, &ws.warp_design);
        Eigen::VectorXd warped(data[i].size());
        for (int j = 0; j < data[i].size(); ++j) {
            warped(j) = ws.amp_basis.clamp(warp.eval(data[i].times(j)));
        }
        const BasisDesign design(ws.amp_basis, warped, 0);
        params[i].theta = smooth_fit(data[i].values, design, ws.amp_basis, config.smooth_roughness);
    }

    Eigen::VectorXd mu_theta = Eigen::VectorXd::Zero(ws.amp_basis.dimension());
    for (const CurveParams& p : params) mu_theta += p.theta;
    mu_theta /= static_cast<double>(n_curves);

    FitResult result = assemble_result(data, local, ws, std::move(params), std::move(mu_theta),
                                       presmooth_thetas);
    result.metrics.sigma = presmooth_sigma(data, presmooth_thetas, ws.amp_basis);
    result.metrics.sigma_convention = "presmooth";
    result.converged = true;
    return result;
}

FitResult cmr_register(const Dataset& data, const FitConfig& config) {
    FitConfig cmr = config;
    cmr.lambdas.mom = 0.0;
    cmr.freeze_mu_theta = true;
    FitResult result = register_curves(data, cmr);

    const auto [t0, t1] = config.domain ? *config.domain : dataset_span(data);
    const FitWorkspace ws(cmr, t0, t1);
    std::vector<Eigen::VectorXd> presmooth_thetas(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        presmooth_thetas[i] = smooth_fit(data[i], ws.amp_basis, cmr.smooth_roughness);
    }
    result.metrics.sigma = presmooth_sigma(data, presmooth_thetas, ws.amp_basis);
    result.metrics.sigma_convention = "presmooth";
    return result;
}

} // namespace align
