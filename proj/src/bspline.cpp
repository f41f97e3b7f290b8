#include "align/bspline.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "align/error.hpp"

namespace align {

BSplineBasis::BSplineBasis(double t0, double t1, int dimension, int degree)
    : t0_(t0), t1_(t1), dimension_(dimension), degree_(degree) {
    if (!(t1 > t0)) {
        throw Error(errc::invalid_domain, "basis domain [" + std::to_string(t0) + ", " + std::to_string(t1) + "]");
    }
    if (degree < 0 || dimension <= degree) {
        throw Error(errc::invalid_basis, "dimension " + std::to_string(dimension) +
                                             " must exceed degree " + std::to_string(degree));
    }
    if (degree > kMaxDegree) {
        throw Error(errc::invalid_basis, "degree " + std::to_string(degree) + " exceeds the supported cap " +
                                             std::to_string(kMaxDegree));
    }
    const int n_knots = dimension + degree + 1;
    knots_.resize(n_knots);
    for (int i = 0; i <= degree; ++i) {
        knots_(i) = t0;
        knots_(n_knots - 1 - i) = t1;
    }
    // Uniform interior knots: dimension - degree spans of equal width.
    const int n_spans = dimension - degree;
    const double h = (t1 - t0) / static_cast<double>(n_spans);
    for (int i = 1; i < n_spans; ++i) {
        knots_(degree + i) = t0 + h * static_cast<double>(i);
    }
}

double BSplineBasis::clamp(double t) const { return std::min(std::max(t, t0_), t1_); }

int BSplineBasis::find_span(double t) const {
    // Valid spans start at indices degree .. dimension-1.
    if (t >= knots_(dimension_)) return dimension_ - 1;
    if (t <= knots_(degree_)) return degree_;
    const double* lo = knots_.data() + degree_;
    const double* hi = knots_.data() + dimension_ + 1;
    const double* it = std::upper_bound(lo, hi, t);
    return static_cast<int>(it - knots_.data()) - 1;
}

int BSplineBasis::eval_local_into(double t, int nder, double* out) const {
    t = clamp(t);
    const int p = degree_;
    const int span = find_span(t);
    constexpr int cap = kMaxDegree + 1;

    // Piegl & Tiller A2.3: all nonzero basis functions and derivatives.
    double ndu[cap][cap];
    double left[cap], right[cap];
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = t - knots_(span + 1 - j);
        right[j] = knots_(span + j) - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    for (int d = 0; d <= nder; ++d) {
        for (int k = 0; k <= p; ++k) out[k + d * (p + 1)] = 0.0;
    }
    for (int j = 0; j <= p; ++j) out[j] = ndu[j][p];

    const int n_eff = std::min(nder, p); // higher derivatives vanish
    if (n_eff > 0) {
        double a[2][cap];
        for (int r = 0; r <= p; ++r) {
            int s1 = 0, s2 = 1;
            a[0][0] = 1.0;
            for (int k = 1; k <= n_eff; ++k) {
                double d = 0.0;
                const int rk = r - k;
                const int pk = p - k;
                if (r >= k) {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                    d = a[s2][0] * ndu[rk][pk];
                }
                const int j1 = (rk >= -1) ? 1 : -rk;
                const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
                for (int j = j1; j <= j2; ++j) {
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                    d += a[s2][j] * ndu[rk + j][pk];
                }
                if (r <= pk) {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                out[r + k * (p + 1)] = d;
                std::swap(s1, s2);
            }
        }
        double factor = static_cast<double>(p);
        for (int k = 1; k <= n_eff; ++k) {
            for (int j = 0; j <= p; ++j) out[j + k * (p + 1)] *= factor;
            factor *= static_cast<double>(p - k);
        }
    }
    return span - p;
}

BSplineBasis::Local BSplineBasis::eval_local(double t, int nder) const {
    Local out;
    out.ders.resize(degree_ + 1, nder + 1);
    out.first = eval_local_into(t, nder, out.ders.data());
    return out;
}

Eigen::VectorXd BSplineBasis::eval(double t, int deriv) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dimension_);
    if (deriv > degree_) return out; // polynomial pieces vanish
    double buf[(kMaxDegree + 1) * (kMaxDegree + 2)];
    const int first = eval_local_into(t, deriv, buf);
    for (int k = 0; k <= degree_; ++k) out(first + k) = buf[k + deriv * (degree_ + 1)];
    return out;
}

double BSplineBasis::value(const Eigen::VectorXd& coef, double t, int deriv) const {
    if (deriv > degree_) return 0.0;
    double buf[(kMaxDegree + 1) * (kMaxDegree + 2)];
    const int first = eval_local_into(t, deriv, buf);
    double acc = 0.0;
    for (int k = 0; k <= degree_; ++k) acc += buf[k + deriv * (degree_ + 1)] * coef(first + k);
    return acc;
}

BasisDesign::BasisDesign(const BSplineBasis& basis, const Eigen::VectorXd& times, int max_deriv)
    : width_(basis.degree() + 1), dimension_(basis.dimension()) {
    const int n = static_cast<int>(times.size());
    first_.resize(n);
    bands_.assign(max_deriv + 1, Eigen::MatrixXd(n, width_));
    std::vector<double> buf(static_cast<size_t>(width_) * (max_deriv + 1));
    for (int r = 0; r < n; ++r) {
        first_[r] = basis.eval_local_into(times(r), max_deriv, buf.data());
        for (int d = 0; d <= max_deriv; ++d) {
            for (int k = 0; k < width_; ++k) bands_[d](r, k) = buf[k + d * width_];
        }
    }
}

Eigen::VectorXd BasisDesign::apply(const Eigen::VectorXd& coef, int deriv) const {
    const Eigen::MatrixXd& band = bands_[deriv];
    Eigen::VectorXd out(rows());
    for (int r = 0; r < rows(); ++r) {
        double acc = 0.0;
        const int f = first_[r];
        for (int k = 0; k < width_; ++k) acc += band(r, k) * coef(f + k);
        out(r) = acc;
    }
    return out;
}

void BasisDesign::add_transpose_apply(const Eigen::VectorXd& alpha, int deriv, Eigen::VectorXd& out) const {
    const Eigen::MatrixXd& band = bands_[deriv];
    for (int r = 0; r < rows(); ++r) {
        const double a = alpha(r);
        if (a == 0.0) continue;
        const int f = first_[r];
        for (int k = 0; k < width_; ++k) out(f + k) += a * band(r, k);
    }
}

Eigen::VectorXd BasisDesign::dense_row(int r, int deriv) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dimension_);
    for (int k = 0; k < width_; ++k) out(first_[r] + k) = bands_[deriv](r, k);
    return out;
}

Eigen::MatrixXd roughness_matrix(const BSplineBasis& basis, const QuadGrid& grid) {
    const int p = basis.dimension();
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(p, p);
    if (basis.degree() < 2) return omega;
    const BasisDesign design(basis, grid.points(), 2);
    const int w = design.width();
    for (int r = 0; r < design.rows(); ++r) {
        const double wt = grid.weights()(r);
        const int f = design.first(r);
        for (int a = 0; a < w; ++a) {
            const double va = design.band(2)(r, a);
            if (va == 0.0) continue;
            for (int b = 0; b < w; ++b) {
                omega(f + a, f + b) += wt * va * design.band(2)(r, b);
            }
        }
    }
    return omega;
}

Eigen::VectorXd smooth_fit(const Eigen::VectorXd& values, const BasisDesign& design,
                           const BSplineBasis& basis, double roughness) {
    const int p = basis.dimension();
    const int n = design.rows();
    if (values.size() != n) {
        throw Error(errc::dimension_mismatch, "smooth_fit: design rows vs value count");
    }
    if (roughness < 0.0) throw Error(errc::bad_config, "smooth_fit: negative roughness");
    if (roughness == 0.0 && n < p) {
        throw Error(errc::rank_deficiency,
                    "smooth_fit: " + std::to_string(n) + " points cannot determine " + std::to_string(p) +
                        " coefficients without roughness");
    }

    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    const int w = design.width();
    for (int r = 0; r < n; ++r) {
        const int f = design.first(r);
        for (int a = 0; a < w; ++a) {
            const double va = design.band(0)(r, a);
            rhs(f + a) += va * values(r);
            for (int b = 0; b < w; ++b) normal(f + a, f + b) += va * design.band(0)(r, b);
        }
    }
    if (roughness > 0.0) {
        normal += roughness * roughness_matrix(basis, QuadGrid::standard(basis.t0(), basis.t1()));
    }

    const Eigen::LDLT<Eigen::MatrixXd> solver(normal);
    const Eigen::VectorXd theta = solver.solve(rhs);
    const double scale = normal.diagonal().cwiseAbs().maxCoeff() + rhs.cwiseAbs().maxCoeff() + 1.0;
    if (!theta.allFinite() || (normal * theta - rhs).cwiseAbs().maxCoeff() > 1e-8 * scale) {
        throw Error(errc::rank_deficiency, "smooth_fit: singular normal system");
    }
    return theta;
}

Eigen::VectorXd smooth_fit(const Curve& curve, const BSplineBasis& basis, double roughness) {
    curve.validate();
    if (curve.times(0) < basis.t0() - 1e-12 || curve.times(curve.size() - 1) > basis.t1() + 1e-12) {
        throw Error(errc::invalid_domain, "curve '" + curve.id + "' has samples outside the basis domain");
    }
    const BasisDesign design(basis, curve.times, 0);
    return smooth_fit(curve.values, design, basis, roughness);
}

} // namespace align
