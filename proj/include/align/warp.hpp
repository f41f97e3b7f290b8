#pragma once

#include <Eigen/Core>

#include "align/bspline.hpp"
#include "align/grid.hpp"

namespace align {

enum class WarpFamily { identity, linear, free_form, standardized };

const char* warp_family_name(WarpFamily family);
WarpFamily parse_warp_family(const std::string& name);

// Strictly increasing time transformation on the basis domain [a, b].
//   identity:      W(t) = t
//   linear:        W(t) = alpha + beta * t, beta > 0
//   free_form:     W(t) = gamma0 + a + int_a^t exp(f(s)) ds
//   standardized:  W(t) = a + (b-a) * int_a^t exp(f) / int_a^b exp(f)
// with f(s) = w(s)^T gamma on the warp basis. The standardized family pins
// W(a) = a and W(b) = b so all curves share the time span.
struct WarpModel {
    WarpFamily family = WarpFamily::identity;
    double gamma0 = 0.0;
    Eigen::VectorXd gamma;
    double alpha = 0.0;
    double beta = 1.0;
    BSplineBasis basis; // warp basis; meaningful for free_form/standardized

    static WarpModel identity_warp();
    static WarpModel linear(double alpha, double beta);
    static WarpModel free_form_warp(const BSplineBasis& basis, double gamma0, Eigen::VectorXd gamma);
    static WarpModel standardized_warp(const BSplineBasis& basis, Eigen::VectorXd gamma);

    // Identity member of `family` over the given warp basis.
    static WarpModel identity_in_family(WarpFamily family, const BSplineBasis& basis);

    int param_count() const;
    Eigen::VectorXd pack_params() const;            // optimizer parameterization
    void apply_params(const Eigen::VectorXd& x);    // inverse of pack_params

    void validate() const;
};

// Per-model evaluation state: one O(grid) setup, then O(1) per query.
// The exp(f) integrals of the nonlinear families are cumulative trapezoid
// tables on the shared grid, linearly interpolated at arbitrary t; parameter
// gradients differentiate through exactly that scheme.
class WarpEvaluator {
public:
    // warp_design, when given, must be the model's basis sampled on `grid`
    // (deriv 0); callers fitting many warps share one to avoid rebuilding it.
    // The grid is held by reference and must outlive the evaluator.
    WarpEvaluator(const WarpModel& model, const QuadGrid& grid, const BasisDesign* warp_design = nullptr);
    WarpEvaluator(const WarpModel&, QuadGrid&&, const BasisDesign* = nullptr) = delete;

    double eval(double t) const;
    double derivative(double t) const;

    // P(W) = ( int { 1/W'(t) - 1 } dt )^2 on the domain.
    double penalty() const;

    // dW(t)/dparams in the pack_params() order; empty for identity.
    Eigen::VectorXd eval_gradient(double t) const;
    Eigen::VectorXd penalty_gradient() const;

    const WarpModel& model() const { return model_; }
    const QuadGrid& grid() const { return grid_; }

private:
    void build_gradient_tables() const;

    WarpModel model_;
    const QuadGrid& grid_;
    double domain_len_ = 1.0;

    // Nonlinear families only.
    Eigen::VectorXd f_;        // f on grid
    Eigen::VectorXd exp_f_;    // exp(f) on grid
    Eigen::VectorXd cum_;      // cumulative integral of exp(f)
    double total_ = 0.0;       // cum_ at the right endpoint

    const BasisDesign* design_ = nullptr; // shared or owned warp-basis design
    BasisDesign owned_design_;

    mutable bool have_grad_tables_ = false;
    mutable Eigen::MatrixXd cum_k_;    // grid x q, cumulative of exp(f) w_k
    mutable Eigen::VectorXd total_k_;  // last row of cum_k_
};

// One-shot conveniences (build an evaluator on the shared standard grid).
double warp_eval(const WarpModel& model, double t, const QuadGrid& grid);
double warp_derivative(const WarpModel& model, double t, const QuadGrid& grid);
double warp_penalty(const WarpModel& model, const QuadGrid& grid);

} // namespace align
