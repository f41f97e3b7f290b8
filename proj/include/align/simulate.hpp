#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "align/curve.hpp"
#include "align/warp.hpp"

namespace align {

enum class ScenarioKind { one, two, three, four };

ScenarioKind parse_scenario_kind(const std::string& name);
const char* scenario_kind_name(ScenarioKind kind);

// Seeded generators for the four benchmark families on [0, 1]:
//   one:   a Gaussian bell stretched and shifted along the time axis
//   two:   as one, but half the curves centered near 0.3 and half near 0.7
//   three: a fixed one-max-one-min shape under random standardized warps
//   four:  three plus observation noise and a per-curve linear drift
struct Scenario {
    ScenarioKind kind = ScenarioKind::one;
    int n_curves = 10;
    int n_points = 100;
    std::uint64_t seed = 1;

    // Severity knobs.
    double center_min = 0.4, center_max = 0.6; // kind one peak locations
    double scale_min = 0.08, scale_max = 0.16; // kinds one/two time stretch
    double two_center_jitter = 0.03;           // kind two spread around 0.3 / 0.7
    double warp_amplitude = 1.0;               // kinds three/four gamma range
    int warp_dim = 4;                          // kinds three/four warp basis size
    double noise_sd = 0.01;                    // kind four
    double drift_slope = 0.1;                  // kind four slope range

    void validate() const;
};

struct SimOutput {
    Dataset data;
    std::vector<WarpModel> true_warps;
    std::function<double(double)> reference; // the unwarped common shape
    Eigen::VectorXd ref_grid;                // reference sampled for sidecars
    Eigen::VectorXd ref_values;
};

SimOutput simulate(const Scenario& scenario);

// Inverse of a strictly increasing warp by bisection: returns t in [t0, t1]
// with W(t) = s (s must lie in [W(t0), W(t1)]).
double invert_warp(const WarpModel& warp, double s, const QuadGrid& grid);

} // namespace align
