#pragma once

#include <optional>
#include <vector>

#include "align/registration.hpp"

namespace align {

// Sync: residual cross-curve variability of the synchronized curves as a
// percentage of the same quantity for the (smoothed) unsynchronized curves.
// Columns are curves, rows a common sample grid. Throws undefined-sync when
// the originals are already identical.
double sync_metric(const Eigen::MatrixXd& originals, const Eigen::MatrixXd& synchronized_curves);

// sigma: sqrt( sum_ij (Y_ij - Yhat_ij)^2 / total observation count ).
double sigma_metric(const Dataset& data, const std::vector<Eigen::VectorXd>& fitted);

struct TuningGrid {
    std::vector<double> sync_values; // fine axis
    std::vector<double> mom_values = {1e3, 1e4, 1e5, 1e6};
    std::vector<double> w_values = {1e-1, 1e0, 1e1};
    double sigma_max = 0.1;
    double pw_max = 0.5;

    // Logarithmic 1e-3 .. 1e2, 11 points.
    static std::vector<double> default_sync_axis();
    static TuningGrid defaults();

    void validate() const;
};

struct TuningEntry {
    Lambdas lambdas;
    double sync = 0.0;
    double sigma = 0.0;
    double mean_pw = 0.0;
    bool feasible = false;
};

struct TuningReport {
    std::vector<TuningEntry> entries; // fixed enumeration order: mom, w, sync
    std::optional<int> chosen;        // vacant when no feasible point exists
    std::vector<int> pareto;          // indices, sigma ascending / sync decreasing

    bool no_feasible_point() const { return !chosen.has_value(); }
};

// Fits every grid point (warm-starting along the lambda_sync axis), marks
// feasibility against (sigma_max, pw_max), and picks the minimal-Sync
// feasible point; ties break toward smaller sigma then smaller lambda_sync.
TuningReport grid_search(const Dataset& data, const TuningGrid& grid, const FitConfig& base_config);

} // namespace align
