#pragma once

#include <stdexcept>
#include <string>

namespace align {

// All recoverable failures carry a short machine-readable code plus detail.
// The CLI prints them as "error:<code>: <detail>" and exits nonzero.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& detail)
        : std::runtime_error("error:" + code + ": " + detail), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

namespace errc {
inline constexpr const char* invalid_basis = "invalid-basis";
inline constexpr const char* invalid_domain = "invalid-domain";
inline constexpr const char* rank_deficiency = "rank-deficiency";
inline constexpr const char* warp_overflow = "warp-overflow";
inline constexpr const char* degenerate_warp = "degenerate-warp";
inline constexpr const char* flat_curve = "flat-curve";
inline constexpr const char* dimension_mismatch = "dimension-mismatch";
inline constexpr const char* undefined_sync = "undefined-sync";
inline constexpr const char* landmark_order = "landmark-order";
inline constexpr const char* degenerate_landmark = "degenerate-landmark";
inline constexpr const char* io_parse = "io-parse";
inline constexpr const char* bad_config = "bad-config";
} // namespace errc

} // namespace align
