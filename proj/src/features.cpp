#include "align/features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "align/error.hpp"

namespace align {

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string token;
    std::istringstream stream(text);
    while (std::getline(stream, token, sep)) parts.push_back(token);
    return parts;
}

} // namespace

FeatureSpec FeatureSpec::parse(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.empty()) throw Error(errc::bad_config, "empty feature spec");
    FeatureSpec spec;
    const std::string& kind = parts[0];
    if (kind == "max") spec.kind = FeatureKind::max;
    else if (kind == "min") spec.kind = FeatureKind::min;
    else if (kind == "local") spec.kind = FeatureKind::local;
    else if (kind == "deriv") spec.kind = FeatureKind::deriv;
    else throw Error(errc::bad_config, "unknown feature kind '" + kind + "'");

    for (size_t i = 1; i < parts.size(); ++i) {
        const auto eq = parts[i].find('=');
        if (eq == std::string::npos) throw Error(errc::bad_config, "bad feature option '" + parts[i] + "'");
        const std::string key = parts[i].substr(0, eq);
        const std::string val = parts[i].substr(eq + 1);
        if (key == "r") {
            spec.sharpness = std::stod(val);
        } else if (key == "m") {
            spec.order = std::stoi(val);
        } else if (key == "k") {
            continue; // consumed by MomentSpec::parse
        } else {
            throw Error(errc::bad_config, "unknown feature option '" + key + "'");
        }
    }
    if (spec.kind != FeatureKind::deriv && !(spec.sharpness > 0.0)) {
        throw Error(errc::bad_config, "feature sharpness r must be positive");
    }
    if (spec.kind == FeatureKind::deriv && spec.order < 0) {
        throw Error(errc::bad_config, "derivative order m must be non-negative");
    }
    return spec;
}

std::string FeatureSpec::to_string() const {
    std::ostringstream out;
    switch (kind) {
        case FeatureKind::max: out << "max:r=" << sharpness; break;
        case FeatureKind::min: out << "min:r=" << sharpness; break;
        case FeatureKind::local: out << "local:r=" << sharpness; break;
        case FeatureKind::deriv: out << "deriv:m=" << order; break;
    }
    return out.str();
}

MomentSpec MomentSpec::parse(const std::string& text) {
    MomentSpec spec;
    spec.feature = FeatureSpec::parse(text);
    for (const auto& part : split(text, ':')) {
        if (part.rfind("k=", 0) == 0) {
            spec.orders.clear();
            for (const auto& item : split(part.substr(2), ',')) {
                spec.orders.push_back(std::stoi(item));
            }
        }
    }
    if (spec.orders.empty()) throw Error(errc::bad_config, "moment orders must be non-empty");
    std::vector<int> sorted = spec.orders;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() || sorted.front() < 1) {
        throw Error(errc::bad_config, "moment orders must be distinct integers >= 1");
    }
    return spec;
}

std::string MomentSpec::to_string() const {
    std::ostringstream out;
    out << feature.to_string() << ":k=";
    for (size_t i = 0; i < orders.size(); ++i) out << (i ? "," : "") << orders[i];
    return out.str();
}

std::vector<MomentSpec> parse_moment_specs(const std::string& comma_list) {
    // Feature specs are comma separated; a k=1,2 suffix owns its commas, so we
    // split on commas not followed by a digit-only token ownership ambiguity by
    // splitting on commas that start a new kind name.
    std::vector<MomentSpec> specs;
    std::string current;
    auto flush = [&]() {
        if (!current.empty()) {
            specs.push_back(MomentSpec::parse(current));
            current.clear();
        }
    };
    const auto tokens = split(comma_list, ',');
    for (const auto& token : tokens) {
        const bool starts_kind = token.rfind("max", 0) == 0 || token.rfind("min", 0) == 0 ||
                                 token.rfind("local", 0) == 0 || token.rfind("deriv", 0) == 0;
        if (starts_kind) flush();
        if (current.empty()) {
            current = token;
        } else {
            current += "," + token;
        }
    }
    flush();
    if (specs.empty()) throw Error(errc::bad_config, "no feature specs in '" + comma_list + "'");
    return specs;
}

double MomentSet::squared_distance(const MomentSet& other) const {
    if (values.size() != other.values.size()) {
        throw Error(errc::dimension_mismatch, "moment sets differ in feature count");
    }
    double acc = 0.0;
    for (size_t l = 0; l < values.size(); ++l) {
        acc += (values[l] - other.values[l]).squaredNorm();
    }
    return acc;
}

FnSamples sample_function(const ScalarFn& fn, const FeatureSpec& spec, const QuadGrid& grid) {
    const int n = grid.size();
    FnSamples s;
    auto fill = [&](Eigen::VectorXd& out, int d) {
        out.resize(n);
        for (int j = 0; j < n; ++j) out(j) = fn(grid.points()(j), d);
    };
    switch (spec.kind) {
        case FeatureKind::max:
        case FeatureKind::min: fill(s.g, 0); break;
        case FeatureKind::local:
            fill(s.d1, 1);
            fill(s.d2, 2);
            break;
        case FeatureKind::deriv: fill(s.dm, spec.order); break;
    }
    return s;
}

Eigen::VectorXd feature_weights(const FnSamples& samples, const FeatureSpec& spec, const QuadGrid& grid) {
    const int n = grid.size();

    switch (spec.kind) {
        case FeatureKind::max:
        case FeatureKind::min: {
            if (samples.g.size() != n) throw Error(errc::dimension_mismatch, "feature samples vs grid");
            const double g_min = samples.g.minCoeff();
            const double g_max = samples.g.maxCoeff();
            const double range = g_max - g_min;
            if (!(range > 0.0)) {
                throw Error(errc::flat_curve, "constant function has no max/min feature");
            }
            // Powers like (.)^100 live in log space; eps keeps the log finite
            // at the attained extremum.
            const double eps = 1e-12 * range;
            Eigen::ArrayXd d;
            if (spec.kind == FeatureKind::max) {
                d = samples.g.array() - g_min + eps;
            } else {
                d = g_max - samples.g.array() + eps;
            }
            const Eigen::ArrayXd u = spec.sharpness * d.log();
            Eigen::VectorXd w = (u - u.maxCoeff()).exp().matrix();
            const double mass = grid.integrate(w);
            if (!(mass > 0.0)) throw Error(errc::flat_curve, "feature weights have no mass");
            return w / mass;
        }
        case FeatureKind::local: {
            if (samples.d1.size() != n || samples.d2.size() != n) {
                throw Error(errc::dimension_mismatch, "feature samples vs grid");
            }
            const double scale = samples.d2.cwiseAbs().maxCoeff();
            if (!(scale > 0.0)) {
                throw Error(errc::flat_curve, "second derivative vanishes everywhere");
            }
            const double floor = 1e-10 * scale;
            const double r = spec.sharpness;
            Eigen::VectorXd u(n);
            std::vector<bool> masked(n, false);
            double u_max = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j) {
                const double curv = std::abs(samples.d2(j));
                if (curv == 0.0) {
                    masked[j] = true; // exact zeros carry zero weight
                } else {
                    u(j) = -r * std::abs(samples.d1(j)) / std::sqrt(std::max(curv, floor));
                    u_max = std::max(u_max, u(j));
                }
            }
            if (!std::isfinite(u_max)) throw Error(errc::flat_curve, "feature weights have no mass");
            Eigen::VectorXd w(n);
            for (int j = 0; j < n; ++j) w(j) = masked[j] ? 0.0 : std::exp(u(j) - u_max);
            const double mass = grid.integrate(w);
            if (!(mass > 0.0)) throw Error(errc::flat_curve, "feature weights have no mass");
            return w / mass;
        }
        case FeatureKind::deriv: {
            if (samples.dm.size() != n) throw Error(errc::dimension_mismatch, "feature samples vs grid");
            const Eigen::VectorXd v = samples.dm.cwiseAbs();
            const double mass = grid.integrate(v);
            if (!(mass > 0.0)) {
                throw Error(errc::flat_curve, "derivative of order " + std::to_string(spec.order) +
                                                  " vanishes everywhere");
            }
            return v / mass;
        }
    }
    throw Error(errc::bad_config, "unreachable feature kind");
}

Eigen::VectorXd feature_weights(const ScalarFn& fn, const FeatureSpec& spec, const QuadGrid& grid) {
    return feature_weights(sample_function(fn, spec, grid), spec, grid);
}

double weighted_moment(const Eigen::VectorXd& weights, int k, const QuadGrid& grid) {
    if (k < 1) throw Error(errc::bad_config, "moment order must be >= 1");
    const Eigen::ArrayXd t = grid.points().array();
    const double mu1 = grid.integrate((t * weights.array()).matrix());
    if (k == 1) return mu1;
    return grid.integrate(((t - mu1).pow(k) * weights.array()).matrix());
}

double moment(const ScalarFn& fn, const FeatureSpec& spec, int k, const QuadGrid& grid) {
    return weighted_moment(feature_weights(fn, spec, grid), k, grid);
}

MomentEngine::MomentEngine(const BSplineBasis& amp_basis, const QuadGrid& grid)
    : basis_(amp_basis), grid_(grid), design_(amp_basis, grid.points(), amp_basis.degree()) {}

FnSamples MomentEngine::sample_spline(const Eigen::VectorXd& theta, const FeatureSpec& spec) const {
    FnSamples s;
    switch (spec.kind) {
        case FeatureKind::max:
        case FeatureKind::min: s.g = design_.apply(theta, 0); break;
        case FeatureKind::local:
            s.d1 = design_.apply(theta, 1);
            s.d2 = design_.apply(theta, 2);
            break;
        case FeatureKind::deriv:
            if (spec.order > basis_.degree()) {
                throw Error(errc::bad_config, "derivative order m=" + std::to_string(spec.order) +
                                                  " exceeds amplitude basis degree");
            }
            s.dm = design_.apply(theta, spec.order);
            break;
    }
    return s;
}

MomentSet MomentEngine::values(const Eigen::VectorXd& theta, const std::vector<MomentSpec>& specs) const {
    MomentSet out;
    out.values.reserve(specs.size());
    for (const MomentSpec& spec : specs) {
        const Eigen::VectorXd w = feature_weights(sample_spline(theta, spec.feature), spec.feature, grid_);
        Eigen::VectorXd vals(spec.orders.size());
        for (size_t j = 0; j < spec.orders.size(); ++j) {
            vals(j) = weighted_moment(w, spec.orders[j], grid_);
        }
        out.values.push_back(std::move(vals));
    }
    return out;
}

namespace {

// Central moments mu^c_0..mu^c_K about mu1 (mu^c_0 = 1, mu^c_1 = 0).
Eigen::VectorXd central_moment_table(const Eigen::VectorXd& weights, double mu1, int k_max,
                                     const QuadGrid& grid) {
    Eigen::VectorXd table(k_max + 1);
    table(0) = 1.0;
    if (k_max >= 1) table(1) = 0.0;
    const Eigen::ArrayXd centered = grid.points().array() - mu1;
    for (int k = 2; k <= k_max; ++k) {
        table(k) = grid.integrate((centered.pow(k) * weights.array()).matrix());
    }
    return table;
}

} // namespace

MomentSet MomentEngine::values_and_gradients(const Eigen::VectorXd& theta,
                                             const std::vector<MomentSpec>& specs,
                                             std::vector<Eigen::MatrixXd>& grads) const {
    const int p = basis_.dimension();
    const int n = grid_.size();
    MomentSet out;
    out.values.reserve(specs.size());
    grads.assign(specs.size(), Eigen::MatrixXd());

    for (size_t l = 0; l < specs.size(); ++l) {
        const MomentSpec& spec = specs[l];
        const FeatureSpec& feat = spec.feature;
        const int n_orders = static_cast<int>(spec.orders.size());
        const int k_max = *std::max_element(spec.orders.begin(), spec.orders.end());
        Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n_orders, p);

        if (feat.kind == FeatureKind::local) {
            // Analytic form is unwieldy (normalization quotient over a masked,
            // floored curvature); central differences per coordinate instead.
            const FnSamples base = sample_spline(theta, feat);
            const Eigen::VectorXd w = feature_weights(base, feat, grid_);
            Eigen::VectorXd vals(n_orders);
            for (int j = 0; j < n_orders; ++j) vals(j) = weighted_moment(w, spec.orders[j], grid_);
            for (int c = 0; c < p; ++c) {
                const double h = 1e-6 * std::max(1.0, std::abs(theta(c)));
                Eigen::VectorXd tp = theta, tm = theta;
                tp(c) += h;
                tm(c) -= h;
                const Eigen::VectorXd wp = feature_weights(sample_spline(tp, feat), feat, grid_);
                const Eigen::VectorXd wm = feature_weights(sample_spline(tm, feat), feat, grid_);
                for (int j = 0; j < n_orders; ++j) {
                    grad(j, c) = (weighted_moment(wp, spec.orders[j], grid_) -
                                  weighted_moment(wm, spec.orders[j], grid_)) /
                                 (2.0 * h);
                }
            }
            out.values.push_back(std::move(vals));
            grads[l] = std::move(grad);
            continue;
        }

        const FnSamples samples = sample_spline(theta, feat);
        const Eigen::VectorXd w = feature_weights(samples, feat, grid_);
        const double mu1 = weighted_moment(w, 1, grid_);
        const Eigen::VectorXd central = central_moment_table(w, mu1, std::max(k_max, 1), grid_);

        // rho_j = omega_j * (dv_j/dtheta) / S. Sums over j of coeff_j * rho_j
        // reduce to banded design products plus a few dense rows.
        auto accumulate = [&](const Eigen::ArrayXd& coeff) -> Eigen::VectorXd {
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(p);
            if (feat.kind == FeatureKind::deriv) {
                const double mass = grid_.integrate(samples.dm.cwiseAbs());
                Eigen::VectorXd alpha(n);
                for (int j = 0; j < n; ++j) {
                    const double sign = samples.dm(j) > 0.0 ? 1.0 : (samples.dm(j) < 0.0 ? -1.0 : 0.0);
                    alpha(j) = coeff(j) * grid_.weights()(j) * sign / mass;
                }
                design_.add_transpose_apply(alpha, feat.order, acc);
                return acc;
            }
            // max / min
            const double g_min = samples.g.minCoeff();
            const double g_max = samples.g.maxCoeff();
            int j_min = 0, j_max = 0;
            samples.g.minCoeff(&j_min);
            samples.g.maxCoeff(&j_max);
            const double eps = 1e-12 * (g_max - g_min);
            const double r = feat.sharpness;
            Eigen::VectorXd alpha(n);
            for (int j = 0; j < n; ++j) {
                const double d = feat.kind == FeatureKind::max ? samples.g(j) - g_min + eps
                                                               : g_max - samples.g(j) + eps;
                alpha(j) = coeff(j) * grid_.weights()(j) * w(j) * r / d;
            }
            const double alpha_sum = alpha.sum();
            const Eigen::VectorXd d_eps = 1e-12 * (design_.dense_row(j_max, 0) - design_.dense_row(j_min, 0));
            if (feat.kind == FeatureKind::max) {
                design_.add_transpose_apply(alpha, 0, acc);
                acc += alpha_sum * (d_eps - design_.dense_row(j_min, 0));
            } else {
                Eigen::VectorXd neg = Eigen::VectorXd::Zero(p);
                design_.add_transpose_apply(alpha, 0, neg);
                acc = -neg + alpha_sum * (design_.dense_row(j_max, 0) + d_eps);
            }
            return acc;
        };

        const Eigen::ArrayXd t_centered = grid_.points().array() - mu1;
        const Eigen::VectorXd grad_mu1 = accumulate(t_centered);

        Eigen::VectorXd vals(n_orders);
        for (int j = 0; j < n_orders; ++j) {
            const int k = spec.orders[j];
            if (k == 1) {
                vals(j) = mu1;
                grad.row(j) = grad_mu1.transpose();
            } else {
                vals(j) = central(k);
                const Eigen::VectorXd part = accumulate(t_centered.pow(k) - central(k));
                grad.row(j) = (part - static_cast<double>(k) * central(k - 1) * grad_mu1).transpose();
            }
        }
        out.values.push_back(std::move(vals));
        grads[l] = std::move(grad);
    }
    return out;
}

MomentSet target_moments(const Dataset& data, const std::vector<MomentSpec>& specs,
                         const BSplineBasis& amp_basis, double smooth_roughness, const QuadGrid& grid) {
    if (data.empty()) throw Error(errc::bad_config, "target moments of an empty dataset");
    const MomentEngine engine(amp_basis, grid);
    MomentSet sum;
    for (const Curve& curve : data) {
        Eigen::VectorXd theta;
        try {
            theta = smooth_fit(curve, amp_basis, smooth_roughness);
        } catch (const Error& e) {
            throw Error(e.code(), "curve '" + curve.id + "': " + e.what());
        }
        MomentSet m;
        try {
            m = engine.values(theta, specs);
        } catch (const Error& e) {
            throw Error(e.code(), "curve '" + curve.id + "': " + e.what());
        }
        if (sum.values.empty()) {
            sum = std::move(m);
        } else {
            for (size_t l = 0; l < sum.values.size(); ++l) sum.values[l] += m.values[l];
        }
    }
    for (auto& v : sum.values) v /= static_cast<double>(data.size());
    return sum;
}

} // namespace align
