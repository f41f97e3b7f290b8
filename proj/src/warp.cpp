#include "align/warp.hpp"

#include <cmath>

#include "align/error.hpp"

namespace align {

const char* warp_family_name(WarpFamily family) {
    switch (family) {
        case WarpFamily::identity: return "identity";
        case WarpFamily::linear: return "linear";
        case WarpFamily::free_form: return "free";
        case WarpFamily::standardized: return "standardized";
    }
    return "?";
}

WarpFamily parse_warp_family(const std::string& name) {
    if (name == "identity") return WarpFamily::identity;
    if (name == "linear") return WarpFamily::linear;
    if (name == "free") return WarpFamily::free_form;
    if (name == "standardized") return WarpFamily::standardized;
    throw Error(errc::bad_config, "unknown warp family '" + name + "'");
}

WarpModel WarpModel::identity_warp() { return WarpModel{}; }

WarpModel WarpModel::linear(double alpha, double beta) {
    WarpModel m;
    m.family = WarpFamily::linear;
    m.alpha = alpha;
    m.beta = beta;
    m.validate();
    return m;
}

WarpModel WarpModel::free_form_warp(const BSplineBasis& basis, double gamma0, Eigen::VectorXd gamma) {
    WarpModel m;
    m.family = WarpFamily::free_form;
    m.basis = basis;
    m.gamma0 = gamma0;
    m.gamma = std::move(gamma);
    m.validate();
    return m;
}

WarpModel WarpModel::standardized_warp(const BSplineBasis& basis, Eigen::VectorXd gamma) {
    WarpModel m;
    m.family = WarpFamily::standardized;
    m.basis = basis;
    m.gamma = std::move(gamma);
    m.validate();
    return m;
}

WarpModel WarpModel::identity_in_family(WarpFamily family, const BSplineBasis& basis) {
    switch (family) {
        case WarpFamily::identity: return identity_warp();
        case WarpFamily::linear: return linear(0.0, 1.0);
        case WarpFamily::free_form:
            return free_form_warp(basis, 0.0, Eigen::VectorXd::Zero(basis.dimension()));
        case WarpFamily::standardized:
            return standardized_warp(basis, Eigen::VectorXd::Zero(basis.dimension()));
    }
    throw Error(errc::bad_config, "invalid warp family");
}

int WarpModel::param_count() const {
    switch (family) {
        case WarpFamily::identity: return 0;
        case WarpFamily::linear: return 2;
        case WarpFamily::free_form: return 1 + static_cast<int>(gamma.size());
        case WarpFamily::standardized: return static_cast<int>(gamma.size());
    }
    return 0;
}

Eigen::VectorXd WarpModel::pack_params() const {
    Eigen::VectorXd x(param_count());
    switch (family) {
        case WarpFamily::identity: break;
        case WarpFamily::linear:
            // beta enters as log(beta), keeping the slope positive without
            // constraints; this is Eq.-style f = const in disguise.
            x(0) = alpha;
            x(1) = std::log(beta);
            break;
        case WarpFamily::free_form:
            x(0) = gamma0;
            x.tail(gamma.size()) = gamma;
            break;
        case WarpFamily::standardized:
            x = gamma;
            break;
    }
    return x;
}

void WarpModel::apply_params(const Eigen::VectorXd& x) {
    if (x.size() != param_count()) {
        throw Error(errc::dimension_mismatch, "warp parameter vector of wrong length");
    }
    switch (family) {
        case WarpFamily::identity: break;
        case WarpFamily::linear:
            alpha = x(0);
            beta = std::exp(x(1));
            break;
        case WarpFamily::free_form:
            gamma0 = x(0);
            gamma = x.tail(x.size() - 1);
            break;
        case WarpFamily::standardized:
            gamma = x;
            break;
    }
}

void WarpModel::validate() const {
    if (family == WarpFamily::linear && !(beta > 0.0)) {
        throw Error(errc::degenerate_warp, "linear warp requires beta > 0, got " + std::to_string(beta));
    }
    if (family == WarpFamily::free_form || family == WarpFamily::standardized) {
        if (basis.dimension() == 0) throw Error(errc::invalid_basis, "warp model is missing its basis");
        if (gamma.size() != basis.dimension()) {
            throw Error(errc::dimension_mismatch, "gamma length " + std::to_string(gamma.size()) +
                                                      " vs warp basis dimension " +
                                                      std::to_string(basis.dimension()));
        }
        if (!gamma.allFinite()) throw Error(errc::bad_config, "non-finite warp coefficients");
    }
}

namespace {
constexpr double kExpOverflow = 700.0;
constexpr double kDegenerateSlope = 1e-12;

[[noreturn]] void throw_overflow(const WarpModel& model, const BSplineBasis& basis, double t) {
    // Name the coefficient contributing most at the offending point.
    int worst = 0;
    double worst_abs = -1.0;
    const Eigen::VectorXd row = basis.eval(t, 0);
    for (int k = 0; k < model.gamma.size(); ++k) {
        const double c = std::abs(row(k) * model.gamma(k));
        if (c > worst_abs) {
            worst_abs = c;
            worst = k;
        }
    }
    throw Error(errc::warp_overflow, "exp(f) overflow at t=" + std::to_string(t) +
                                         "; dominant coefficient gamma[" + std::to_string(worst) + "]=" +
                                         std::to_string(model.gamma(worst)));
}
} // namespace

WarpEvaluator::WarpEvaluator(const WarpModel& model, const QuadGrid& grid, const BasisDesign* warp_design)
    : model_(model), grid_(grid), domain_len_(grid.t1() - grid.t0()) {
    model_.validate();
    if (model_.family == WarpFamily::free_form || model_.family == WarpFamily::standardized) {
        if (warp_design != nullptr && warp_design->dimension() == model_.basis.dimension() &&
            warp_design->rows() == grid_.size()) {
            design_ = warp_design;
        } else {
            owned_design_ = BasisDesign(model_.basis, grid_.points(), 0);
            design_ = &owned_design_;
        }
        f_ = design_->apply(model_.gamma, 0);
        for (int j = 0; j < f_.size(); ++j) {
            if (f_(j) > kExpOverflow) throw_overflow(model_, model_.basis, grid_.points()(j));
        }
        exp_f_ = f_.array().exp();
        cum_ = grid_.cumulative(exp_f_);
        total_ = cum_(cum_.size() - 1);
        if (!(total_ > 0.0)) throw Error(errc::degenerate_warp, "warp integral vanished (exp(f) underflow)");
    }
}

double WarpEvaluator::eval(double t) const {
    const double a = grid_.t0();
    switch (model_.family) {
        case WarpFamily::identity: return t;
        case WarpFamily::linear: return model_.alpha + model_.beta * t;
        case WarpFamily::free_form: return model_.gamma0 + a + grid_.interpolate(cum_, t);
        case WarpFamily::standardized: return a + domain_len_ * grid_.interpolate(cum_, t) / total_;
    }
    return t;
}

double WarpEvaluator::derivative(double t) const {
    switch (model_.family) {
        case WarpFamily::identity: return 1.0;
        case WarpFamily::linear: return model_.beta;
        case WarpFamily::free_form: return std::exp(model_.basis.value(model_.gamma, t, 0));
        case WarpFamily::standardized:
            return domain_len_ * std::exp(model_.basis.value(model_.gamma, t, 0)) / total_;
    }
    return 1.0;
}

double WarpEvaluator::penalty() const {
    if (model_.family == WarpFamily::identity) return 0.0;
    if (model_.family == WarpFamily::linear) {
        if (model_.beta <= kDegenerateSlope) {
            throw Error(errc::degenerate_warp, "linear warp slope " + std::to_string(model_.beta));
        }
        const double a = domain_len_ * (1.0 / model_.beta - 1.0);
        return a * a;
    }
    // 1/W' on the grid; for standardized, W' = (b-a) exp(f) / total.
    const double scale = model_.family == WarpFamily::standardized ? total_ / domain_len_ : 1.0;
    double acc = 0.0;
    for (int j = 0; j < exp_f_.size(); ++j) {
        const double slope = exp_f_(j) / scale;
        if (slope <= kDegenerateSlope) {
            throw Error(errc::degenerate_warp,
                        "W' = " + std::to_string(slope) + " at t=" + std::to_string(grid_.points()(j)));
        }
        acc += grid_.weights()(j) * (1.0 / slope - 1.0);
    }
    return acc * acc;
}

void WarpEvaluator::build_gradient_tables() const {
    if (have_grad_tables_) return;
    const int q = static_cast<int>(model_.gamma.size());
    cum_k_.resize(grid_.size(), q);
    total_k_.resize(q);
    Eigen::VectorXd integrand(grid_.size());
    for (int k = 0; k < q; ++k) {
        for (int j = 0; j < grid_.size(); ++j) {
            const int off = k - design_->first(j);
            const double wk = (off >= 0 && off < design_->width()) ? design_->band(0)(j, off) : 0.0;
            integrand(j) = exp_f_(j) * wk;
        }
        cum_k_.col(k) = grid_.cumulative(integrand);
        total_k_(k) = cum_k_(grid_.size() - 1, k);
    }
    have_grad_tables_ = true;
}

Eigen::VectorXd WarpEvaluator::eval_gradient(double t) const {
    switch (model_.family) {
        case WarpFamily::identity: return Eigen::VectorXd();
        case WarpFamily::linear: {
            Eigen::VectorXd g(2);
            g(0) = 1.0;                  // d/d alpha
            g(1) = model_.beta * t;      // d/d log(beta)
            return g;
        }
        case WarpFamily::free_form: {
            build_gradient_tables();
            const int q = static_cast<int>(model_.gamma.size());
            Eigen::VectorXd g(1 + q);
            g(0) = 1.0;
            for (int k = 0; k < q; ++k) g(1 + k) = grid_.interpolate(cum_k_.col(k), t);
            return g;
        }
        case WarpFamily::standardized: {
            build_gradient_tables();
            const int q = static_cast<int>(model_.gamma.size());
            const double ct = grid_.interpolate(cum_, t);
            Eigen::VectorXd g(q);
            for (int k = 0; k < q; ++k) {
                const double ckt = grid_.interpolate(cum_k_.col(k), t);
                g(k) = domain_len_ * (ckt * total_ - ct * total_k_(k)) / (total_ * total_);
            }
            return g;
        }
    }
    return Eigen::VectorXd();
}

Eigen::VectorXd WarpEvaluator::penalty_gradient() const {
    switch (model_.family) {
        case WarpFamily::identity: return Eigen::VectorXd();
        case WarpFamily::linear: {
            Eigen::VectorXd g = Eigen::VectorXd::Zero(2);
            const double a = domain_len_ * (1.0 / model_.beta - 1.0);
            // d/d log(beta): beta * dP/dbeta with dA/dbeta = -T / beta^2.
            g(1) = 2.0 * a * (-domain_len_ / model_.beta);
            return g;
        }
        case WarpFamily::free_form: {
            build_gradient_tables();
            const int q = static_cast<int>(model_.gamma.size());
            const Eigen::VectorXd inv = exp_f_.cwiseInverse();
            const double a = grid_.integrate(inv) - domain_len_;
            Eigen::VectorXd g = Eigen::VectorXd::Zero(1 + q);
            for (int k = 0; k < q; ++k) {
                double da = 0.0;
                for (int j = 0; j < grid_.size(); ++j) {
                    const int off = k - design_->first(j);
                    if (off < 0 || off >= design_->width()) continue;
                    da -= grid_.weights()(j) * inv(j) * design_->band(0)(j, off);
                }
                g(1 + k) = 2.0 * a * da;
            }
            return g;
        }
        case WarpFamily::standardized: {
            build_gradient_tables();
            const int q = static_cast<int>(model_.gamma.size());
            const Eigen::VectorXd inv = exp_f_.cwiseInverse();
            const double int_inv = grid_.integrate(inv);
            const double a = total_ * int_inv / domain_len_ - domain_len_;
            Eigen::VectorXd g(q);
            for (int k = 0; k < q; ++k) {
                double d_int_inv = 0.0;
                for (int j = 0; j < grid_.size(); ++j) {
                    const int off = k - design_->first(j);
                    if (off < 0 || off >= design_->width()) continue;
                    d_int_inv -= grid_.weights()(j) * inv(j) * design_->band(0)(j, off);
                }
                const double da = (total_k_(k) * int_inv + total_ * d_int_inv) / domain_len_;
                g(k) = 2.0 * a * da;
            }
            return g;
        }
    }
    return Eigen::VectorXd();
}

double warp_eval(const WarpModel& model, double t, const QuadGrid& grid) {
    return WarpEvaluator(model, grid).eval(t);
}

double warp_derivative(const WarpModel& model, double t, const QuadGrid& grid) {
    return WarpEvaluator(model, grid).derivative(t);
}

double warp_penalty(const WarpModel& model, const QuadGrid& grid) {
    return WarpEvaluator(model, grid).penalty();
}

} // namespace align
