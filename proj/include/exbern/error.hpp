#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace exbern {

enum class ErrorCode {
    invalid_dimension,
    invalid_radii,
    singular_input,
    radius_not_on_grid,
    window_outside_grid,
    domain_error,
    not_elliptic,
    singular_system,
    singular_cell,
    ill_conditioned_window,
    insufficient_window,
    not_harmonic,
    unsupported_grid,
    grid_mismatch,
    parse_error,
    config_error,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_dimension: return "invalid-dimension";
    case ErrorCode::invalid_radii: return "invalid-radii";
    case ErrorCode::singular_input: return "singular-input";
    case ErrorCode::radius_not_on_grid: return "radius-not-on-grid";
    case ErrorCode::window_outside_grid: return "window-outside-grid";
    case ErrorCode::domain_error: return "domain-error";
    case ErrorCode::not_elliptic: return "not-elliptic";
    case ErrorCode::singular_system: return "singular-system";
    case ErrorCode::singular_cell: return "singular-cell-resolution-failure";
    case ErrorCode::ill_conditioned_window: return "ill-conditioned-window";
    case ErrorCode::insufficient_window: return "insufficient-window";
    case ErrorCode::not_harmonic: return "not-harmonic";
    case ErrorCode::unsupported_grid: return "unsupported-grid";
    case ErrorCode::grid_mismatch: return "grid-mismatch";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::config_error: return "config-error";
    }
    return "unknown";
}

/// Exception carrying a machine-readable code alongside the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace exbern
