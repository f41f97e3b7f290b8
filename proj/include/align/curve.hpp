#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace align {

// One sampled functional observation: a label, a strictly increasing time
// grid, and the observed values. Different curves may use different grids.
struct Curve {
    std::string id;
    Eigen::VectorXd times;
    Eigen::VectorXd values;

    int size() const { return static_cast<int>(times.size()); }

    // Throws dimension-mismatch / invalid-domain on malformed data.
    void validate() const;
};

using Dataset = std::vector<Curve>;

// Smallest closed interval [t0, t1] covering every sample time.
std::pair<double, double> dataset_span(const Dataset& data);

} // namespace align
