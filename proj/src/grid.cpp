#include "align/grid.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>

namespace align {

QuadGrid::QuadGrid(double t0, double t1, int n_points) : t0_(t0), t1_(t1) {
    if (!(t1 > t0)) throw std::invalid_argument("QuadGrid: t1 must exceed t0");
    if (n_points < 2) throw std::invalid_argument("QuadGrid: need at least 2 points");
    points_ = Eigen::VectorXd::LinSpaced(n_points, t0, t1);
    step_ = (t1 - t0) / static_cast<double>(n_points - 1);
    weights_ = Eigen::VectorXd::Constant(n_points, step_);
    weights_(0) = 0.5 * step_;
    weights_(n_points - 1) = 0.5 * step_;
}

int QuadGrid::default_points() {
    if (const char* env = std::getenv("ALIGN_QUAD_POINTS")) {
        const int n = std::atoi(env);
        if (n >= 2) return n;
    }
    return 2001;
}

QuadGrid QuadGrid::standard(double t0, double t1) { return QuadGrid(t0, t1, default_points()); }

Eigen::VectorXd QuadGrid::cumulative(const Eigen::VectorXd& values) const {
    Eigen::VectorXd out(values.size());
    out(0) = 0.0;
    for (int j = 1; j < values.size(); ++j) {
        out(j) = out(j - 1) + 0.5 * step_ * (values(j - 1) + values(j));
    }
    return out;
}

double QuadGrid::interpolate(const Eigen::VectorXd& table, double t) const {
    const int n = static_cast<int>(table.size());
    if (t <= t0_) return table(0);
    if (t >= t1_) return table(n - 1);
    const double pos = (t - t0_) / step_;
    int j = std::min(static_cast<int>(pos), n - 2);
    const double frac = pos - static_cast<double>(j);
    return table(j) + frac * (table(j + 1) - table(j));
}

} // namespace align
