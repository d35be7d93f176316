#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emfg {

enum class ErrorCode {
    invalid_argument,
    non_finite,
    unsupported_dimension,
    singular_coupling,
    contraction_failure,
    control_saturation,
    domain_too_small,
    blow_up,
    finite_escape,
    singular_denominator,
    root_solve_failure,
    non_smooth_probe,
    schema,
    io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::unsupported_dimension: return "unsupported_dimension";
    case ErrorCode::singular_coupling: return "singular_coupling";
    case ErrorCode::contraction_failure: return "contraction_failure";
    case ErrorCode::control_saturation: return "control_saturation";
    case ErrorCode::domain_too_small: return "domain_too_small";
    case ErrorCode::blow_up: return "blow_up";
    case ErrorCode::finite_escape: return "finite_escape";
    case ErrorCode::singular_denominator: return "singular_denominator";
    case ErrorCode::root_solve_failure: return "root_solve_failure";
    case ErrorCode::non_smooth_probe: return "non_smooth_probe";
    case ErrorCode::schema: return "schema";
    case ErrorCode::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Thrown by the velocity solver when the fixed-point iteration stalls.
class ContractionFailure : public Error {
public:
    ContractionFailure(const std::string& message, double residual, int iterations)
        : Error(ErrorCode::contraction_failure, message), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// Non-finite state during a forward integration; carries the first bad step.
class BlowUp : public Error {
public:
    BlowUp(const std::string& message, int step)
        : Error(ErrorCode::blow_up, message), step_(step) {}

    int step() const noexcept { return step_; }

private:
    int step_;
};

/// Riccati solution escaping to infinity before the initial time.
class FiniteEscape : public Error {
public:
    FiniteEscape(const std::string& message, double time)
        : Error(ErrorCode::finite_escape, message), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) throw Error(code, message);
}

} // namespace emfg
