#pragma once

#include <Eigen/Core>

#include "align/curve.hpp"
#include "align/grid.hpp"

namespace align {

// Clamped B-spline basis on [t0, t1] with uniform interior knots.
// Knot count = dimension + degree + 1; endpoint knots carry multiplicity
// degree + 1. Evaluation uses the Cox-de Boor / de Boor derivative recursion
// over the (degree+1) locally supported functions.
class BSplineBasis {
public:
    BSplineBasis() = default;
    BSplineBasis(double t0, double t1, int dimension, int degree = 3);

    int dimension() const { return dimension_; }
    int degree() const { return degree_; }
    double t0() const { return t0_; }
    double t1() const { return t1_; }
    const Eigen::VectorXd& knots() const { return knots_; }

    // Degrees above this are rejected at construction; evaluation scratch
    // lives on the stack.
    static constexpr int kMaxDegree = 10;

    // Nonzero basis functions at t (clamped to the domain): ders(k, d) is the
    // d-th derivative of basis function first+k, for d = 0..nder.
    struct Local {
        int first = 0;
        Eigen::MatrixXd ders;
    };
    Local eval_local(double t, int nder) const;

    // Allocation-free variant: writes (degree+1) x (nder+1) values into `out`
    // column-major (entry k + d*(degree+1)); returns the first basis index.
    int eval_local_into(double t, int nder, double* out) const;

    // Dense: all `dimension` basis values (or deriv-th derivatives) at t.
    Eigen::VectorXd eval(double t, int deriv = 0) const;

    // Spline value z(t)^T coef (or its derivative).
    double value(const Eigen::VectorXd& coef, double t, int deriv = 0) const;

    bool in_domain(double t) const { return t >= t0_ && t <= t1_; }
    double clamp(double t) const;

private:
    int find_span(double t) const;

    double t0_ = 0.0, t1_ = 1.0;
    int dimension_ = 0;
    int degree_ = 3;
    Eigen::VectorXd knots_;
};

// Basis sampled at a fixed set of times with derivatives 0..max_deriv
// precomputed in banded form. This is the hot path for objective and moment
// evaluation: apply() is O(n * (degree+1)).
class BasisDesign {
public:
    BasisDesign() = default;
    BasisDesign(const BSplineBasis& basis, const Eigen::VectorXd& times, int max_deriv);

    int rows() const { return static_cast<int>(first_.size()); }
    int width() const { return width_; }
    int max_deriv() const { return static_cast<int>(bands_.size()) - 1; }
    int dimension() const { return dimension_; }

    // (B_deriv coef) evaluated sparsely.
    Eigen::VectorXd apply(const Eigen::VectorXd& coef, int deriv) const;

    // out += B_deriv^T alpha (alpha has one entry per row).
    void add_transpose_apply(const Eigen::VectorXd& alpha, int deriv, Eigen::VectorXd& out) const;

    // Dense row (length = dimension); for oracles and small solves.
    Eigen::VectorXd dense_row(int r, int deriv) const;

    int first(int r) const { return first_[r]; }
    const Eigen::MatrixXd& band(int deriv) const { return bands_[deriv]; }

private:
    int width_ = 0;
    int dimension_ = 0;
    std::vector<int> first_;
    std::vector<Eigen::MatrixXd> bands_; // bands_[d] is rows x width
};

// Penalized least squares fit of a curve on the basis:
//   minimize sum_j (y_j - z(t_j)^T theta)^2 + roughness * int (z''(t)^T theta)^2 dt.
// The roughness integral uses the shared trapezoid grid.
Eigen::VectorXd smooth_fit(const Curve& curve, const BSplineBasis& basis, double roughness);

// Same fit given a precomputed design at the curve's sample times.
Eigen::VectorXd smooth_fit(const Eigen::VectorXd& values, const BasisDesign& design,
                           const BSplineBasis& basis, double roughness);

// Gram matrix of second derivatives on the quadrature grid (the roughness penalty).
Eigen::MatrixXd roughness_matrix(const BSplineBasis& basis, const QuadGrid& grid);

} // namespace align
