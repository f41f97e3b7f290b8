#pragma once

#include <Eigen/Core>

namespace align {

// Shared quadrature grid: composite trapezoid on uniformly spaced points.
// All integrals in the toolkit go through one of these, so refinement tests
// only have to vary a single knob (ALIGN_QUAD_POINTS overrides the default).
class QuadGrid {
public:
    QuadGrid() = default;
    QuadGrid(double t0, double t1, int n_points);

    // Uses the ALIGN_QUAD_POINTS environment variable when set, else 2001.
    static QuadGrid standard(double t0, double t1);
    static int default_points();

    const Eigen::VectorXd& points() const { return points_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    int size() const { return static_cast<int>(points_.size()); }
    double t0() const { return t0_; }
    double t1() const { return t1_; }
    double step() const { return step_; }

    double integrate(const Eigen::VectorXd& values) const { return weights_.dot(values); }

    // Cumulative trapezoid table: out[j] = integral of `values` from t0 to points[j].
    Eigen::VectorXd cumulative(const Eigen::VectorXd& values) const;

    // Linear interpolation of a table sampled on this grid; t is clamped.
    double interpolate(const Eigen::VectorXd& table, double t) const;

private:
    double t0_ = 0.0, t1_ = 1.0, step_ = 0.0;
    Eigen::VectorXd points_;
    Eigen::VectorXd weights_;
};

} // namespace align
