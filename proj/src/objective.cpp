#include "align/objective.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "align/error.hpp"

namespace align {

void Lambdas::validate() const {
    if (!(sync >= 0.0) || !(mom >= 0.0) || !(w >= 0.0) || !std::isfinite(sync) || !std::isfinite(mom) ||
        !std::isfinite(w)) {
        throw Error(errc::bad_config, "tuning parameters must be finite and non-negative");
    }
}

Eigen::VectorXd CurveParams::pack() const {
    Eigen::VectorXd x(packed_size());
    x.head(theta.size()) = theta;
    if (warp.param_count() > 0) x.tail(warp.param_count()) = warp.pack_params();
    return x;
}

CurveParams CurveParams::unpack(const Eigen::VectorXd& x, int p, const WarpModel& warp_template) {
    CurveParams out;
    out.theta = x.head(p);
    out.warp = warp_template;
    if (out.warp.param_count() > 0) out.warp.apply_params(x.tail(x.size() - p));
    return out;
}

Eigen::VectorXd fitted_values(const CurveParams& params, const Curve& curve, const BSplineBasis& amp_basis,
                              const QuadGrid& grid) {
    const WarpEvaluator warp(params.warp, grid);
    Eigen::VectorXd out(curve.size());
    for (int j = 0; j < curve.size(); ++j) {
        out(j) = amp_basis.value(params.theta, amp_basis.clamp(warp.eval(curve.times(j))), 0);
    }
    return out;
}

CurveObjective::CurveObjective(const Curve& curve, const MomentEngine& engine,
                               const std::vector<MomentSpec>& specs, const WarpModel& warp_template,
                               const Eigen::VectorXd& mu_theta, const MomentSet& targets,
                               const Lambdas& lambdas, const BasisDesign* warp_design)
    : curve_(curve),
      engine_(engine),
      specs_(specs),
      warp_template_(warp_template),
      mu_theta_(mu_theta),
      targets_(targets),
      lambdas_(lambdas),
      warp_design_(warp_design),
      p_(engine.basis().dimension()) {
    lambdas_.validate();
    if (mu_theta_.size() != p_) {
        throw Error(errc::dimension_mismatch, "mu_theta length vs amplitude dimension");
    }
}

double CurveObjective::value(const Eigen::VectorXd& x) const { return evaluate(x, nullptr); }

double CurveObjective::value_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
    return evaluate(x, &grad);
}

double CurveObjective::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    const BSplineBasis& amp = engine_.basis();
    const QuadGrid& grid = engine_.grid();
    const Eigen::VectorXd theta = x.head(p_);
    WarpModel warp = warp_template_;
    const int n_wp = warp.param_count();
    if (n_wp > 0) warp.apply_params(x.tail(n_wp));

    double warp_pen = 0.0;
    std::unique_ptr<WarpEvaluator> evaluator;
    try {
        evaluator = std::make_unique<WarpEvaluator>(warp, grid, warp_design_);
        warp_pen = lambdas_.w > 0.0 ? evaluator->penalty() : 0.0;
    } catch (const Error& e) {
        if (e.code() == errc::warp_overflow || e.code() == errc::degenerate_warp) {
            return std::numeric_limits<double>::infinity();
        }
        throw;
    }

    const int n = curve_.size();
    const int deg = amp.degree();
    double rss = 0.0;
    Eigen::VectorXd g_theta;
    Eigen::VectorXd g_warp;
    if (grad) {
        g_theta = Eigen::VectorXd::Zero(p_);
        g_warp = Eigen::VectorXd::Zero(n_wp);
    }

    double buf[(BSplineBasis::kMaxDegree + 1) * 2];
    for (int j = 0; j < n; ++j) {
        const double s_raw = evaluator->eval(curve_.times(j));
        const bool clamped = s_raw < amp.t0() || s_raw > amp.t1();
        const double s = amp.clamp(s_raw);
        const int first = amp.eval_local_into(s, grad ? 1 : 0, buf);
        double fitted = 0.0;
        double slope = 0.0;
        for (int k = 0; k <= deg; ++k) {
            fitted += buf[k] * theta(first + k);
            if (grad) slope += buf[k + deg + 1] * theta(first + k);
        }
        const double resid = curve_.values(j) - fitted;
        rss += resid * resid;
        if (grad) {
            for (int k = 0; k <= deg; ++k) {
                g_theta(first + k) -= 2.0 * resid * buf[k];
            }
            // Clamped points are locally constant in the warp parameters.
            if (n_wp > 0 && !clamped) {
                g_warp -= (2.0 * resid * slope) * evaluator->eval_gradient(curve_.times(j));
            }
        }
    }

    const Eigen::VectorXd diff = theta - mu_theta_;
    const double sync_pen = diff.squaredNorm();

    double mom_pen = 0.0;
    if (lambdas_.mom > 0.0) {
        if (grad) {
            std::vector<Eigen::MatrixXd> mom_grads;
            const MomentSet mom = engine_.values_and_gradients(theta, specs_, mom_grads);
            for (size_t l = 0; l < specs_.size(); ++l) {
                const Eigen::VectorXd delta = mom.values[l] - targets_.values[l];
                mom_pen += delta.squaredNorm();
                g_theta += lambdas_.mom * 2.0 * (mom_grads[l].transpose() * delta);
            }
        } else {
            const MomentSet mom = engine_.values(theta, specs_);
            mom_pen = mom.squared_distance(targets_);
        }
    }

    if (grad) {
        g_theta += 2.0 * lambdas_.sync * diff;
        if (n_wp > 0 && lambdas_.w > 0.0) g_warp += lambdas_.w * evaluator->penalty_gradient();
        grad->resize(dim());
        grad->head(p_) = g_theta;
        if (n_wp > 0) grad->tail(n_wp) = g_warp;
    }

    return rss + lambdas_.sync * sync_pen + lambdas_.mom * mom_pen + lambdas_.w * warp_pen;
}

void CurveObjective::terms(const CurveParams& params, double& fit, double& sync_pen, double& mom_pen,
                           double& warp_pen) const {
    const QuadGrid& grid = engine_.grid();
    const WarpEvaluator evaluator(params.warp, grid);
    const Eigen::VectorXd fitted = fitted_values(params, curve_, engine_.basis(), grid);
    fit = (curve_.values - fitted).squaredNorm();
    sync_pen = (params.theta - mu_theta_).squaredNorm();
    mom_pen = lambdas_.mom > 0.0 ? engine_.values(params.theta, specs_).squared_distance(targets_) : 0.0;
    warp_pen = evaluator.penalty();
}

ObjectiveTerms objective_terms(const std::vector<CurveParams>& params_all, const Dataset& data,
                               const Eigen::VectorXd& mu_theta, const MomentSet& targets,
                               const std::vector<MomentSpec>& specs, const Lambdas& lambdas,
                               const MomentEngine& engine) {
    if (params_all.size() != data.size()) {
        throw Error(errc::dimension_mismatch, "parameter count vs curve count");
    }
    ObjectiveTerms acc;
    const double n = static_cast<double>(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        const CurveObjective obj(data[i], engine, specs, params_all[i].warp, mu_theta, targets, lambdas);
        double fit = 0, sync_pen = 0, mom_pen = 0, warp_pen = 0;
        try {
            obj.terms(params_all[i], fit, sync_pen, mom_pen, warp_pen);
        } catch (const Error& e) {
            throw Error(e.code(), "curve '" + data[i].id + "': " + e.what());
        }
        acc.fit += fit / n;
        acc.sync_pen += sync_pen / n;
        acc.mom_pen += mom_pen / n;
        acc.warp_pen += warp_pen / n;
    }
    acc.total = acc.fit + lambdas.sync * acc.sync_pen + lambdas.mom * acc.mom_pen + lambdas.w * acc.warp_pen;
    return acc;
}

Eigen::VectorXd objective_gradient(const CurveParams& params, const Curve& curve,
                                   const Eigen::VectorXd& mu_theta, const MomentSet& targets,
                                   const std::vector<MomentSpec>& specs, const Lambdas& lambdas,
                                   const MomentEngine& engine) {
    const CurveObjective obj(curve, engine, specs, params.warp, mu_theta, targets, lambdas);
    Eigen::VectorXd grad;
    const double value = obj.value_and_gradient(params.pack(), grad);
    if (!std::isfinite(value)) {
        throw Error(errc::degenerate_warp, "objective_gradient at an infeasible warp");
    }
    return grad;
}

} // namespace align
