#pragma once

#include <functional>

#include <Eigen/Core>

namespace align {

struct LbfgsOptions {
    int max_iterations = 200;
    double grad_tol = 1e-8; // on ||g||_inf, scaled by max(1, ||x||_inf)
    int history = 10;
    int max_line_search = 50;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    bool converged = false;
};

// fn(x, grad): returns the value; fills *grad when non-null. A non-finite
// value marks an infeasible point and is rejected by the line search.
using ValueGradFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

// Limited-memory BFGS with Armijo backtracking. Monotone: the returned value
// never exceeds fn(x0). Line-search exhaustion returns best-so-far with
// converged = false.
LbfgsResult lbfgs_minimize(const ValueGradFn& fn, const Eigen::VectorXd& x0, const LbfgsOptions& opts);

} // namespace align
