#pragma once

#include <optional>
#include <string>
#include <vector>

#include "align/lbfgs.hpp"
#include "align/objective.hpp"

namespace align {

enum class ExecMode { serial, openmp };

// Two-phase schedule: early iterations overweight the moment penalty to lock
// the features in, then weight shifts back to shrinkage.
struct AnnealSchedule {
    int phase1_iters = 3;
    double mom_multiplier = 10.0;
    double sync_multiplier = 0.1;
};

struct FitConfig {
    Lambdas lambdas;
    std::vector<MomentSpec> specs;
    WarpFamily family = WarpFamily::standardized;
    int amp_dim = 12;
    int warp_dim = 4;
    int amp_degree = 3;
    int warp_degree = 3;
    double smooth_roughness = 1e-6; // data prep, targets, presmoothing
    int max_outer_iters = 50;
    double outer_tol = 1e-6; // relative Q change
    LbfgsOptions inner;      // defaults: 200 iterations, 1e-8 gradient tol
    std::optional<AnnealSchedule> anneal;
    int quad_points = 0;   // 0 = ALIGN_QUAD_POINTS or 2001
    int output_points = 201;
    ExecMode exec = ExecMode::openmp;
    std::optional<std::pair<double, double>> domain; // default: dataset span

    // Continuous monotone registration mode: mu_theta stays at its initial
    // value (smoothed cross-sectional mean) and step 2 is skipped.
    bool freeze_mu_theta = false;

    void validate() const;
};

struct FitMetrics {
    double sync = 0.0;    // percent; 0 when N < 2
    double sigma = 0.0;   // RMS observation discrepancy
    double mean_pw = 0.0; // mean P(W_i)
    std::string sigma_convention = "fit"; // baselines report "presmooth"
};

struct FitResult {
    std::vector<CurveParams> params;
    Eigen::VectorXd mu_theta;
    MomentSet targets;

    Eigen::VectorXd out_grid;      // output sample times
    Eigen::MatrixXd synchronized_; // out_grid.size() x N, Z_i
    Eigen::MatrixXd warps;         // out_grid.size() x N, W_i
    Eigen::MatrixXd smoothed;      // out_grid.size() x N, presmoothed observed curves

    FitMetrics metrics;
    std::vector<double> q_trace; // total Q per outer iteration
    ObjectiveTerms final_terms;
    bool converged = false;
};

// Shared geometry for one fit: bases, quadrature grid, moment engine, and
// the warp-basis design reused by every warp evaluation.
struct FitWorkspace {
    BSplineBasis amp_basis;
    BSplineBasis warp_basis;
    QuadGrid grid;
    MomentEngine engine;
    BasisDesign warp_design;

    FitWorkspace(const FitConfig& config, double t0, double t1);
};

struct InitialState {
    std::vector<CurveParams> params;
    Eigen::VectorXd mu_theta;
    MomentSet targets;
};

// theta_i from presmoothing, identity warps within the family, mu_theta the
// coefficient mean, targets the (never updated) observed-curve mean moments.
InitialState initialize(const Dataset& data, const FitConfig& config, const FitWorkspace& ws);

// Step 1 for one curve: joint quasi-Newton descent over (theta_i, warp
// params) from the warm start; never returns a worse objective value.
CurveParams fit_single_curve(const Curve& curve, const Eigen::VectorXd& mu_theta, const MomentSet& targets,
                             const FitConfig& config, const FitWorkspace& ws, const CurveParams& warm_start);

// The full alternating algorithm.
FitResult register_curves(const Dataset& data, const FitConfig& config,
                          const std::vector<CurveParams>* warm_start = nullptr);

// Samples Z_i / W_i / smoothed originals on the output grid and computes the
// metrics; shared by the registration and baseline paths.
FitResult assemble_result(const Dataset& data, const FitConfig& config, const FitWorkspace& ws,
                          std::vector<CurveParams> params, Eigen::VectorXd mu_theta,
                          const std::vector<Eigen::VectorXd>& presmooth_thetas);

} // namespace align
