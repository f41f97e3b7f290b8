#include "align/registration.hpp"

#include <cmath>
#include <limits>

#include "align/error.hpp"
#include "align/tuning.hpp"

namespace align {

void FitConfig::validate() const {
    lambdas.validate();
    if (amp_dim <= amp_degree || warp_dim <= warp_degree) {
        throw Error(errc::invalid_basis, "basis dimension must exceed its degree");
    }
    if (max_outer_iters < 1 || inner.max_iterations < 1) {
        throw Error(errc::bad_config, "iteration caps must be >= 1");
    }
    if (!(outer_tol > 0.0) || !(inner.grad_tol > 0.0)) {
        throw Error(errc::bad_config, "tolerances must be positive");
    }
    if (!(smooth_roughness >= 0.0)) throw Error(errc::bad_config, "negative smoothing roughness");
    if (output_points < 2) throw Error(errc::bad_config, "output grid needs at least 2 points");
    if (anneal && anneal->phase1_iters < 0) throw Error(errc::bad_config, "negative anneal phase length");
}

FitWorkspace::FitWorkspace(const FitConfig& config, double t0, double t1)
    : amp_basis(t0, t1, config.amp_dim, config.amp_degree),
      warp_basis(t0, t1, config.warp_dim, config.warp_degree),
      grid(t0, t1, config.quad_points > 0 ? config.quad_points : QuadGrid::default_points()),
      engine(amp_basis, grid),
      warp_design(warp_basis, grid.points(), 0) {}

InitialState initialize(const Dataset& data, const FitConfig& config, const FitWorkspace& ws) {
    if (data.empty()) throw Error(errc::bad_config, "cannot fit an empty dataset");
    InitialState state;
    state.params.resize(data.size());
    const WarpModel identity = WarpModel::identity_in_family(config.family, ws.warp_basis);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(ws.amp_basis.dimension());
    for (size_t i = 0; i < data.size(); ++i) {
        state.params[i].theta = smooth_fit(data[i], ws.amp_basis, config.smooth_roughness);
        state.params[i].warp = identity;
        sum += state.params[i].theta;
    }
    state.mu_theta = sum / static_cast<double>(data.size());
    if (!config.specs.empty()) {
        state.targets = target_moments(data, config.specs, ws.amp_basis, config.smooth_roughness, ws.grid);
    }
    return state;
}

CurveParams fit_single_curve(const Curve& curve, const Eigen::VectorXd& mu_theta, const MomentSet& targets,
                             const FitConfig& config, const FitWorkspace& ws,
                             const CurveParams& warm_start) {
    const CurveObjective objective(curve, ws.engine, config.specs, warm_start.warp, mu_theta, targets,
                                   config.lambdas, &ws.warp_design);
    const auto fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
        return grad ? objective.value_and_gradient(x, *grad) : objective.value(x);
    };
    const LbfgsResult result = lbfgs_minimize(fn, warm_start.pack(), config.inner);
    return CurveParams::unpack(result.x, ws.amp_basis.dimension(), warm_start.warp);
}

namespace {

Lambdas effective_lambdas(const FitConfig& config, int outer_iter) {
    Lambdas l = config.lambdas;
    if (config.anneal && outer_iter < config.anneal->phase1_iters) {
        l.mom *= config.anneal->mom_multiplier;
        l.sync *= config.anneal->sync_multiplier;
    }
    return l;
}

} // namespace

FitResult register_curves(const Dataset& data, const FitConfig& config,
                          const std::vector<CurveParams>* warm_start) {
    config.validate();
    for (const Curve& c : data) c.validate();
    if (config.lambdas.mom > 0.0 && config.specs.empty()) {
        throw Error(errc::bad_config, "lambda_mom > 0 requires at least one feature spec");
    }

    const auto [t0, t1] = config.domain ? *config.domain : dataset_span(data);
    const FitWorkspace ws(config, t0, t1);
    const int n_curves = static_cast<int>(data.size());

    InitialState init = initialize(data, config, ws);
    const std::vector<CurveParams> presmooth = init.params; // identity-warp smooths
    std::vector<CurveParams> params = warm_start ? *warm_start : init.params;
    if (warm_start && static_cast<int>(warm_start->size()) != n_curves) {
        throw Error(errc::dimension_mismatch, "warm start size vs curve count");
    }
    Eigen::VectorXd mu_theta = init.mu_theta;
    if (warm_start && !config.freeze_mu_theta) {
        mu_theta.setZero();
        for (const CurveParams& cp : params) mu_theta += cp.theta;
        mu_theta /= static_cast<double>(n_curves);
    }

    FitResult result;
    result.targets = init.targets;
    result.converged = false;

    FitConfig iter_config = config;
    double prev_q = std::numeric_limits<double>::infinity();
    bool prev_q_comparable = false;
    std::string pending_error_code;
    std::string pending_error_detail;

    for (int outer = 0; outer < config.max_outer_iters; ++outer) {
        iter_config.lambdas = effective_lambdas(config, outer);
        const bool annealing = config.anneal && outer < config.anneal->phase1_iters;

        // Step 1: per-curve minimization; curves are independent given the
        // frozen mu_theta and targets, so the loop parallelizes cleanly. The
        // serial path is kept as the reference the tests compare against.
        if (config.exec == ExecMode::openmp) {
#pragma omp parallel for schedule(dynamic)
            for (int i = 0; i < n_curves; ++i) {
                try {
                    params[i] = fit_single_curve(data[i], mu_theta, init.targets, iter_config, ws, params[i]);
                } catch (const Error& e) {
#pragma omp critical
                    {
                        if (pending_error_code.empty()) {
                            pending_error_code = e.code();
                            pending_error_detail = std::string(e.what()) + " [curve '" + data[i].id + "']";
                        }
                    }
                }
            }
            if (!pending_error_code.empty()) throw Error(pending_error_code, pending_error_detail);
        } else {
            for (int i = 0; i < n_curves; ++i) {
                try {
                    params[i] = fit_single_curve(data[i], mu_theta, init.targets, iter_config, ws, params[i]);
                } catch (const Error& e) {
                    throw Error(e.code(), std::string(e.what()) + " [curve '" + data[i].id + "']");
                }
            }
        }

        // Step 2: mu_theta <- mean of theta_i, in fixed curve order.
        if (!config.freeze_mu_theta) {
            mu_theta.setZero();
            for (int i = 0; i < n_curves; ++i) mu_theta += params[i].theta;
            mu_theta /= static_cast<double>(n_curves);
        }

        const ObjectiveTerms terms = objective_terms(params, data, mu_theta, init.targets,
                                                     config.specs, iter_config.lambdas, ws.engine);
        result.q_trace.push_back(terms.total);
        result.final_terms = terms;

        // Convergence on relative Q change, only across iterations sharing
        // the same lambdas (the anneal switch resets the reference).
        if (prev_q_comparable && !annealing) {
            const double denom = std::max(std::abs(prev_q), 1e-300);
            if (std::abs(prev_q - terms.total) / denom < config.outer_tol) {
                result.converged = true;
            }
        }
        prev_q = terms.total;
        prev_q_comparable = !annealing;
        if (result.converged) break;
    }

    std::vector<Eigen::VectorXd> presmooth_thetas(n_curves);
    for (int i = 0; i < n_curves; ++i) presmooth_thetas[i] = presmooth[i].theta;
    FitResult assembled = assemble_result(data, config, ws, std::move(params), std::move(mu_theta),
                                          presmooth_thetas);
    assembled.targets = std::move(result.targets);
    assembled.q_trace = std::move(result.q_trace);
    assembled.final_terms = result.final_terms;
    assembled.converged = result.converged;
    return assembled;
}

FitResult assemble_result(const Dataset& data, const FitConfig& config, const FitWorkspace& ws,
                          std::vector<CurveParams> params, Eigen::VectorXd mu_theta,
                          const std::vector<Eigen::VectorXd>& presmooth_thetas) {
    const int n_curves = static_cast<int>(data.size());
    FitResult result;
    result.params = std::move(params);
    result.mu_theta = std::move(mu_theta);

    const int n_out = config.output_points;
    result.out_grid = Eigen::VectorXd::LinSpaced(n_out, ws.grid.t0(), ws.grid.t1());
    result.synchronized_.resize(n_out, n_curves);
    result.warps.resize(n_out, n_curves);
    result.smoothed.resize(n_out, n_curves);
    for (int i = 0; i < n_curves; ++i) {
        const WarpEvaluator warp(result.params[i].warp, ws.grid, &ws.warp_design);
        for (int r = 0; r < n_out; ++r) {
            const double t = result.out_grid(r);
            result.synchronized_(r, i) = ws.amp_basis.value(result.params[i].theta, t, 0);
            result.warps(r, i) = warp.eval(t);
            result.smoothed(r, i) = ws.amp_basis.value(presmooth_thetas[i], t, 0);
        }
    }

    // Metrics: Sync on the output grid, sigma at the observation times,
    // P(W) via the quadrature grid.
    std::vector<Eigen::VectorXd> fitted(n_curves);
    double pw_sum = 0.0;
    for (int i = 0; i < n_curves; ++i) {
        fitted[i] = fitted_values(result.params[i], data[i], ws.amp_basis, ws.grid);
        pw_sum += WarpEvaluator(result.params[i].warp, ws.grid, &ws.warp_design).penalty();
    }
    result.metrics.sigma = sigma_metric(data, fitted);
    result.metrics.mean_pw = pw_sum / static_cast<double>(n_curves);
    if (n_curves >= 2) {
        try {
            result.metrics.sync = sync_metric(result.smoothed, result.synchronized_);
        } catch (const Error& e) {
            // Identical originals: nothing to synchronize, score 0.
            if (e.code() != std::string(errc::undefined_sync)) throw;
            result.metrics.sync = 0.0;
        }
    } else {
        result.metrics.sync = 0.0;
    }
    return result;
}

} // namespace align
