#include "align/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace align {

namespace {
bool below_tol(const Eigen::VectorXd& g, const Eigen::VectorXd& x, double tol) {
    return g.cwiseAbs().maxCoeff() <= tol * std::max(1.0, x.cwiseAbs().maxCoeff());
}
} // namespace

LbfgsResult lbfgs_minimize(const ValueGradFn& fn, const Eigen::VectorXd& x0, const LbfgsOptions& opts) {
    LbfgsResult result;
    result.x = x0;
    Eigen::VectorXd g(x0.size());
    result.value = fn(result.x, &g);
    result.gradient = g;
    if (!std::isfinite(result.value)) return result; // infeasible start; caller keeps warm start

    const int n = static_cast<int>(x0.size());
    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        if (below_tol(g, result.x, opts.grad_tol)) {
            result.converged = true;
            return result;
        }

        // Two-loop recursion for d = -H g.
        Eigen::VectorXd d = -g;
        if (!s_hist.empty()) {
            const int m = static_cast<int>(s_hist.size());
            Eigen::VectorXd alpha(m);
            for (int i = m - 1; i >= 0; --i) {
                alpha(i) = rho_hist[i] * s_hist[i].dot(d);
                d -= alpha(i) * y_hist[i];
            }
            const double ys = y_hist.back().dot(s_hist.back());
            const double yy = y_hist.back().squaredNorm();
            if (yy > 0.0) d *= ys / yy;
            for (int i = 0; i < m; ++i) {
                const double beta = rho_hist[i] * y_hist[i].dot(d);
                d += (alpha(i) - beta) * s_hist[i];
            }
        }

        double dg = d.dot(g);
        if (!(dg < 0.0)) { // not a descent direction; restart from steepest descent
            d = -g;
            dg = -g.squaredNorm();
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        double step = 1.0;
        if (iter == 0) {
            const double gnorm = g.norm();
            if (gnorm > 1.0) step = 1.0 / gnorm;
        }

        constexpr double c1 = 1e-4;
        bool accepted = false;
        Eigen::VectorXd x_new(n), g_new(n);
        double f_new = 0.0;
        for (int ls = 0; ls < opts.max_line_search; ++ls) {
            x_new = result.x + step * d;
            if (ls == 0) {
                // The unit step is usually accepted; fuse the gradient call.
                f_new = fn(x_new, &g_new);
            } else {
                f_new = fn(x_new, nullptr);
            }
            if (std::isfinite(f_new) && f_new <= result.value + c1 * step * dg) {
                if (ls != 0) f_new = fn(x_new, &g_new);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) return result; // best-so-far, converged = false

        Eigen::VectorXd s = x_new - result.x;
        Eigen::VectorXd y = g_new - g;
        const double ys = y.dot(s);
        if (ys > 1e-10 * s.norm() * y.norm()) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / ys);
            if (static_cast<int>(s_hist.size()) > opts.history) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }

        result.x = std::move(x_new);
        result.value = f_new;
        g = g_new;
        result.gradient = g;
        result.iterations = iter + 1;
    }
    result.converged = below_tol(g, result.x, opts.grad_tol);
    return result;
}

} // namespace align
