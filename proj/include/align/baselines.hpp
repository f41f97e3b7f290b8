#pragma once

#include <vector>

#include "align/registration.hpp"

namespace align {

enum class LandmarkEvent { global_max, global_min };

struct LandmarkSpec {
    std::vector<LandmarkEvent> events = {LandmarkEvent::global_max};
    double smooth_roughness = 1e-6; // detection presmoothing

    static LandmarkSpec parse(const std::string& comma_list, double roughness);
};

// Argmax/argmin times of the smoothed curve on the fine grid, in spec order.
// Throws landmark-order when the detected times violate the spec's order.
std::vector<double> landmark_detect(const Curve& curve, const LandmarkSpec& spec,
                                    const BSplineBasis& amp_basis, const QuadGrid& grid);

// Classic marker registration: warps send each curve's event times to the
// cross-curve mean event times; amplitudes are then fit by penalized least
// squares at the warped sample times. Baselines report the presmoothing
// sigma (observed vs smoothed curves), matching how such methods are usually
// scored, and flag it via metrics.sigma_convention = "presmooth".
FitResult landmark_register(const Dataset& data, const LandmarkSpec& spec, WarpFamily family,
                            const FitConfig& config);

// Continuous monotone registration as the lambda_mom = 0 specialization:
// shrink toward the smoothed cross-sectional mean, mu_theta frozen.
FitResult cmr_register(const Dataset& data, const FitConfig& config);

} // namespace align
