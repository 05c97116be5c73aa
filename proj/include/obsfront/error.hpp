#pragma once

#include <stdexcept>
#include <string>

namespace obsfront {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  domain_violation,
  a1_failure,
  a2_failure,
  a3_failure,
  a4_failure,
  scaling_failure,
  no_convergence,
  non_monotone_profile,
  fit_degenerate,
  half_line_collapse,
  center_outside,
  obstacle_out_of_rect,
  empty_fluid,
  disconnected_fluid,
  inner_radius_not_found,
  zeta_infeasible,
  cfl_violation,
  nan_detected,
  front_overlaps_obstacle,
  insufficient_overlap,
  front_speed_nonpositive,
  constraint_violation,
  derivative_inconsistency,
  hmu_construction_failure,
  empty_interface,
  insufficient_interfaces,
  never_satisfied,
  invalid_params,
  config_error,
  io_error,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries the module that raised it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string module, const std::string& message)
      : std::runtime_error("[" + module + "] " + to_string(code) + ": " + message),
        code_(code),
        module_(std::move(module)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorCode code_;
  std::string module_;
};

}  // namespace obsfront
