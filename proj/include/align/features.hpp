#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "align/bspline.hpp"
#include "align/curve.hpp"
#include "align/grid.hpp"

namespace align {

enum class FeatureKind { max, min, local, deriv };

// Which feature function weights the time axis: (g - min g)^r, (max g - g)^r,
// exp(-r |g'| / sqrt|g''|), or |g^(m)|, normalized to integrate to one.
struct FeatureSpec {
    FeatureKind kind = FeatureKind::max;
    double sharpness = 100.0; // r, for max/min/local
    int order = 0;            // m, for deriv

    // "max:r=100", "min:r=50", "local:r=100", "deriv:m=1"
    static FeatureSpec parse(const std::string& text);
    std::string to_string() const;
};

// A feature plus the moment orders to match (k = 1 first moment, k >= 2
// central). Parsed as e.g. "max:r=100:k=1,2"; orders default to {1}.
struct MomentSpec {
    FeatureSpec feature;
    std::vector<int> orders = {1};

    static MomentSpec parse(const std::string& text);
    std::string to_string() const;
};

std::vector<MomentSpec> parse_moment_specs(const std::string& comma_list);

// Moments per spec: values[l](j) is the orders[j]-th moment under spec l.
struct MomentSet {
    std::vector<Eigen::VectorXd> values;

    double squared_distance(const MomentSet& other) const;
};

// g and the derivatives a feature needs, sampled on the quadrature grid.
struct FnSamples {
    Eigen::VectorXd g;
    Eigen::VectorXd d1, d2; // local kind
    Eigen::VectorXd dm;     // deriv kind, m-th derivative
};

// fn(t, d) = d-th derivative of g at t.
using ScalarFn = std::function<double(double, int)>;

FnSamples sample_function(const ScalarFn& fn, const FeatureSpec& spec, const QuadGrid& grid);

// Normalized feature weights on the grid (trapezoid integral exactly 1).
// Throws flat-curve when the unnormalized mass vanishes.
Eigen::VectorXd feature_weights(const FnSamples& samples, const FeatureSpec& spec, const QuadGrid& grid);
Eigen::VectorXd feature_weights(const ScalarFn& fn, const FeatureSpec& spec, const QuadGrid& grid);

// First (k=1) or central (k>=2) moment of the normalized weights.
double weighted_moment(const Eigen::VectorXd& weights, int k, const QuadGrid& grid);

double moment(const ScalarFn& fn, const FeatureSpec& spec, int k, const QuadGrid& grid);

// Moment values (and optionally d mu / d theta) for splines Z(t) = z(t)^T theta.
// Gradients are analytic for max/min/deriv and central-difference for local.
class MomentEngine {
public:
    MomentEngine(const BSplineBasis& amp_basis, const QuadGrid& grid);

    MomentSet values(const Eigen::VectorXd& theta, const std::vector<MomentSpec>& specs) const;

    // grads[l] is orders.size() x p.
    MomentSet values_and_gradients(const Eigen::VectorXd& theta, const std::vector<MomentSpec>& specs,
                                   std::vector<Eigen::MatrixXd>& grads) const;

    const BSplineBasis& basis() const { return basis_; }
    const QuadGrid& grid() const { return grid_; }

private:
    FnSamples sample_spline(const Eigen::VectorXd& theta, const FeatureSpec& spec) const;

    BSplineBasis basis_;
    QuadGrid grid_; // owned; engines outlive most call sites
    BasisDesign design_; // derivs 0..degree on the grid
};

// Cross-curve mean moments of the smoothed observed curves (the fixed target
// of the synchronization model; computed once, never updated).
MomentSet target_moments(const Dataset& data, const std::vector<MomentSpec>& specs,
                         const BSplineBasis& amp_basis, double smooth_roughness, const QuadGrid& grid);

} // namespace align
