#include "obsfront/error.hpp"

namespace obsfront {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
      return "invalid-argument";
    case ErrorCode::dimension_mismatch:
      return "dimension-mismatch";
    case ErrorCode::domain_violation:
      return "domain-violation";
    case ErrorCode::a1_failure:
      return "a1-failure";
    case ErrorCode::a2_failure:
      return "a2-failure";
    case ErrorCode::a3_failure:
      return "a3-failure";
    case ErrorCode::a4_failure:
      return "a4-failure";
    case ErrorCode::scaling_failure:
      return "scaling-failure";
    case ErrorCode::no_convergence:
      return "no-convergence";
    case ErrorCode::non_monotone_profile:
      return "non-monotone-profile";
    case ErrorCode::fit_degenerate:
      return "fit-degenerate";
    case ErrorCode::half_line_collapse:
      return "half-line-collapse";
    case ErrorCode::center_outside:
      return "center-outside";
    case ErrorCode::obstacle_out_of_rect:
      return "obstacle-out-of-rect";
    case ErrorCode::empty_fluid:
      return "empty-fluid";
    case ErrorCode::disconnected_fluid:
      return "disconnected-fluid";
    case ErrorCode::inner_radius_not_found:
      return "inner-radius-not-found";
    case ErrorCode::zeta_infeasible:
      return "zeta-infeasible";
    case ErrorCode::cfl_violation:
      return "cfl-violation";
    case ErrorCode::nan_detected:
      return "nan-detected";
    case ErrorCode::front_overlaps_obstacle:
      return "front-overlaps-obstacle";
    case ErrorCode::insufficient_overlap:
      return "insufficient-overlap";
    case ErrorCode::front_speed_nonpositive:
      return "front-speed-nonpositive";
    case ErrorCode::constraint_violation:
      return "constraint-violation";
    case ErrorCode::derivative_inconsistency:
      return "derivative-inconsistency";
    case ErrorCode::hmu_construction_failure:
      return "hmu-construction-failure";
    case ErrorCode::empty_interface:
      return "empty-interface";
    case ErrorCode::insufficient_interfaces:
      return "insufficient-interfaces";
    case ErrorCode::never_satisfied:
      return "never-satisfied";
    case ErrorCode::invalid_params:
      return "invalid-params";
    case ErrorCode::config_error:
      return "config-error";
    case ErrorCode::io_error:
      return "io-error";
  }
  return "unknown";
}

}  // namespace obsfront
