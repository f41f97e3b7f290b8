#pragma once

#include <Eigen/Core>

#include "align/curve.hpp"
#include "align/features.hpp"
#include "align/warp.hpp"

namespace align {

// Tuning parameters of the penalized criterion.
struct Lambdas {
    double sync = 0.0;
    double mom = 0.0;
    double w = 0.0;

    void validate() const;
};

// Per-curve unknowns: amplitude coefficients plus the warp.
struct CurveParams {
    Eigen::VectorXd theta;
    WarpModel warp;

    int packed_size() const { return static_cast<int>(theta.size()) + warp.param_count(); }
    Eigen::VectorXd pack() const;
    static CurveParams unpack(const Eigen::VectorXd& x, int p, const WarpModel& warp_template);
};

// The four term means over curves; total = fit + lambda-weighted penalties.
struct ObjectiveTerms {
    double fit = 0.0;      // mean ||Y_i - Yhat_i||^2
    double sync_pen = 0.0; // mean ||theta_i - mu_theta||^2
    double mom_pen = 0.0;  // mean sum (mu_Zi - mu_target)^2 (0 when lambda_mom = 0)
    double warp_pen = 0.0; // mean P(W_i)
    double total = 0.0;
};

// Model values z(W(t_j))^T theta at the curve's sample times (warped times
// clamped into the basis domain).
Eigen::VectorXd fitted_values(const CurveParams& params, const Curve& curve, const BSplineBasis& amp_basis,
                              const QuadGrid& grid);

// One curve's contribution to Q and its gradient in the packed coordinates
// [theta; warp params]. Built once per curve per outer iteration; cheap to
// evaluate repeatedly inside the inner solver.
class CurveObjective {
public:
    CurveObjective(const Curve& curve, const MomentEngine& engine, const std::vector<MomentSpec>& specs,
                   const WarpModel& warp_template, const Eigen::VectorXd& mu_theta, const MomentSet& targets,
                   const Lambdas& lambdas, const BasisDesign* warp_design = nullptr);

    int dim() const { return p_ + warp_template_.param_count(); }
    int theta_dim() const { return p_; }
    const WarpModel& warp_template() const { return warp_template_; }

    // +infinity when the warp leaves the representable regime (overflow /
    // degenerate slope); the line search treats that as a rejected step.
    double value(const Eigen::VectorXd& x) const;

    // Returns the value and fills grad (same infinity convention; grad is
    // untouched in that case).
    double value_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;

    // Raw per-curve terms at the given parameters.
    void terms(const CurveParams& params, double& fit, double& sync_pen, double& mom_pen,
               double& warp_pen) const;

private:
    double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const;

    const Curve& curve_;
    const MomentEngine& engine_;
    const std::vector<MomentSpec>& specs_;
    WarpModel warp_template_;
    Eigen::VectorXd mu_theta_;
    const MomentSet& targets_;
    Lambdas lambdas_;
    const BasisDesign* warp_design_ = nullptr;
    int p_ = 0;
};

// Mean terms over the dataset.
ObjectiveTerms objective_terms(const std::vector<CurveParams>& params_all, const Dataset& data,
                               const Eigen::VectorXd& mu_theta, const MomentSet& targets,
                               const std::vector<MomentSpec>& specs, const Lambdas& lambdas,
                               const MomentEngine& engine);

// Gradient of one curve's contribution (packed layout); test/oracle surface.
Eigen::VectorXd objective_gradient(const CurveParams& params, const Curve& curve,
                                   const Eigen::VectorXd& mu_theta, const MomentSet& targets,
                                   const std::vector<MomentSpec>& specs, const Lambdas& lambdas,
                                   const MomentEngine& engine);

} // namespace align
