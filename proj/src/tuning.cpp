#include "align/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "align/error.hpp"

namespace align {

double sync_metric(const Eigen::MatrixXd& originals, const Eigen::MatrixXd& synchronized_curves) {
    if (originals.rows() != synchronized_curves.rows() || originals.cols() != synchronized_curves.cols()) {
        throw Error(errc::dimension_mismatch, "sync_metric: curve sets of different shape");
    }
    if (originals.cols() < 2) throw Error(errc::undefined_sync, "sync_metric needs at least two curves");

    auto spread = [](const Eigen::MatrixXd& curves) {
        const Eigen::VectorXd mean = curves.rowwise().mean();
        return (curves.colwise() - mean).squaredNorm() /
               static_cast<double>(curves.rows() * curves.cols());
    };
    const double denom = spread(originals);
    if (denom < 1e-15) {
        throw Error(errc::undefined_sync, "original curves are already identical");
    }
    return 100.0 * spread(synchronized_curves) / denom;
}

double sigma_metric(const Dataset& data, const std::vector<Eigen::VectorXd>& fitted) {
    if (data.size() != fitted.size()) {
        throw Error(errc::dimension_mismatch, "sigma_metric: dataset vs fitted count");
    }
    double sum = 0.0;
    long count = 0;
    for (size_t i = 0; i < data.size(); ++i) {
        if (data[i].values.size() != fitted[i].size()) {
            throw Error(errc::dimension_mismatch, "sigma_metric: curve '" + data[i].id + "' length mismatch");
        }
        sum += (data[i].values - fitted[i]).squaredNorm();
        count += data[i].size();
    }
    if (count == 0) throw Error(errc::dimension_mismatch, "sigma_metric: no observations");
    return std::sqrt(sum / static_cast<double>(count));
}

std::vector<double> TuningGrid::default_sync_axis() {
    std::vector<double> axis;
    for (int i = 0; i < 11; ++i) {
        axis.push_back(std::pow(10.0, -3.0 + 0.5 * static_cast<double>(i)));
    }
    return axis;
}

TuningGrid TuningGrid::defaults() {
    TuningGrid grid;
    grid.sync_values = default_sync_axis();
    return grid;
}

void TuningGrid::validate() const {
    if (sync_values.empty() || mom_values.empty() || w_values.empty()) {
        throw Error(errc::bad_config, "tuning grid axes must be non-empty");
    }
    for (const auto* axis : {&sync_values, &mom_values, &w_values}) {
        for (double v : *axis) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw Error(errc::bad_config, "tuning grid values must be positive");
            }
        }
    }
    if (!(sigma_max > 0.0) || !(pw_max > 0.0)) {
        throw Error(errc::bad_config, "tuning bounds must be positive");
    }
}

TuningReport grid_search(const Dataset& data, const TuningGrid& grid, const FitConfig& base_config) {
    grid.validate();
    const int n_mom = static_cast<int>(grid.mom_values.size());
    const int n_w = static_cast<int>(grid.w_values.size());
    const int n_sync = static_cast<int>(grid.sync_values.size());

    TuningReport report;
    report.entries.resize(static_cast<size_t>(n_mom) * n_w * n_sync);

    // The coarse (mom, w) pairs are independent jobs; the fine lambda_sync
    // sweep within a pair is sequential so each fit warm-starts the next.
    const int n_pairs = n_mom * n_w;
#pragma omp parallel for schedule(dynamic) if (base_config.exec == ExecMode::openmp)
    for (int pair = 0; pair < n_pairs; ++pair) {
        const int im = pair / n_w;
        const int iw = pair % n_w;
        FitConfig config = base_config;
        config.exec = ExecMode::serial; // parallelism lives at the pair level
        std::vector<CurveParams> warm;
        bool have_warm = false;
        for (int is = 0; is < n_sync; ++is) {
            config.lambdas.mom = grid.mom_values[im];
            config.lambdas.w = grid.w_values[iw];
            config.lambdas.sync = grid.sync_values[is];
            const FitResult fit =
                register_curves(data, config, have_warm ? &warm : nullptr);
            warm = fit.params;
            have_warm = true;
            TuningEntry entry;
            entry.lambdas = config.lambdas;
            entry.sync = fit.metrics.sync;
            entry.sigma = fit.metrics.sigma;
            entry.mean_pw = fit.metrics.mean_pw;
            entry.feasible = entry.sigma <= grid.sigma_max && entry.mean_pw <= grid.pw_max;
            report.entries[(static_cast<size_t>(im) * n_w + iw) * n_sync + is] = entry;
        }
    }

    // Minimal-Sync feasible point; ties toward smaller sigma then smaller
    // lambda_sync.
    for (int idx = 0; idx < static_cast<int>(report.entries.size()); ++idx) {
        const TuningEntry& e = report.entries[idx];
        if (!e.feasible) continue;
        if (!report.chosen) {
            report.chosen = idx;
            continue;
        }
        const TuningEntry& best = report.entries[*report.chosen];
        const auto key = [](const TuningEntry& x) {
            return std::make_tuple(x.sync, x.sigma, x.lambdas.sync);
        };
        if (key(e) < key(best)) report.chosen = idx;
    }

    // Pareto staircase over (sigma, sync), sigma ascending.
    std::vector<int> order(report.entries.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const TuningEntry& ea = report.entries[a];
        const TuningEntry& eb = report.entries[b];
        if (ea.sigma != eb.sigma) return ea.sigma < eb.sigma;
        return ea.sync < eb.sync;
    });
    double best_sync = std::numeric_limits<double>::infinity();
    for (int idx : order) {
        if (report.entries[idx].sync < best_sync) {
            best_sync = report.entries[idx].sync;
            report.pareto.push_back(idx);
        }
    }
    return report;
}

} // namespace align
