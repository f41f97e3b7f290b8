#include "align/curve.hpp"

#include <cmath>
#include <limits>

#include "align/error.hpp"

namespace align {

void Curve::validate() const {
    if (times.size() != values.size()) {
        throw Error(errc::dimension_mismatch,
                    "curve '" + id + "': " + std::to_string(times.size()) + " times vs " +
                        std::to_string(values.size()) + " values");
    }
    if (times.size() == 0) {
        throw Error(errc::dimension_mismatch, "curve '" + id + "' is empty");
    }
    for (int j = 0; j < times.size(); ++j) {
        if (!std::isfinite(times(j)) || !std::isfinite(values(j))) {
            throw Error(errc::io_parse, "curve '" + id + "': non-finite entry at index " + std::to_string(j));
        }
        if (j > 0 && !(times(j) > times(j - 1))) {
            throw Error(errc::invalid_domain,
                        "curve '" + id + "': times not strictly increasing at index " + std::to_string(j));
        }
    }
}

std::pair<double, double> dataset_span(const Dataset& data) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const Curve& c : data) {
        if (c.size() == 0) continue;
        lo = std::min(lo, c.times(0));
        hi = std::max(hi, c.times(c.size() - 1));
    }
    if (!(hi > lo)) throw Error(errc::invalid_domain, "dataset has a degenerate time span");
    return {lo, hi};
}

} // namespace align
