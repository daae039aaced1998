#pragma once

#include <stdexcept>
#include <string>

namespace nlflow {

enum class ErrorCode {
  invalid_argument,
  stencil_exceeds_halo,
  window_out_of_bounds,
  set_touches_boundary,
  insufficient_halo,
  infeasible_dual,
  not_converged,
  domain_too_small,
  domain_limited,
  budget_exceeded,
  mismatched_problems,
  not_a_boundary_probe,
  degenerate_radius,
  quadrature_failure,
  nesting_violation,
  io_error,
  parse_error,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::stencil_exceeds_halo: return "stencil exceeds halo";
    case ErrorCode::window_out_of_bounds: return "window out of bounds";
    case ErrorCode::set_touches_boundary: return "set touches computational boundary";
    case ErrorCode::insufficient_halo: return "insufficient halo";
    case ErrorCode::infeasible_dual: return "infeasible dual";
    case ErrorCode::not_converged: return "not converged";
    case ErrorCode::domain_too_small: return "domain too small";
    case ErrorCode::domain_limited: return "domain-limited";
    case ErrorCode::budget_exceeded: return "budget exceeded";
    case ErrorCode::mismatched_problems: return "mismatched problems";
    case ErrorCode::not_a_boundary_probe: return "not a boundary probe";
    case ErrorCode::degenerate_radius: return "degenerate radius";
    case ErrorCode::quadrature_failure: return "quadrature non-convergence";
    case ErrorCode::nesting_violation: return "nesting violation";
    case ErrorCode::io_error: return "i/o error";
    case ErrorCode::parse_error: return "parse error";
  }
  return "unknown error";
}

/// Library-wide exception. The message always starts with the code's text so
/// callers matching on what() see the stable phrase.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(detail.empty() ? std::string(to_string(code))
                                          : std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// True for failures of the numerics (as opposed to bad input).
  bool numerical() const noexcept {
    return code_ == ErrorCode::not_converged || code_ == ErrorCode::domain_limited ||
           code_ == ErrorCode::domain_too_small || code_ == ErrorCode::quadrature_failure ||
           code_ == ErrorCode::nesting_violation;
  }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& detail = {}) {
  if (!cond) throw Error(code, detail);
}

}  // namespace nlflow
