#pragma once

#include <functional>
#include <vector>

#include "obsfront/grid_solver.hpp"

namespace obsfront {

// Space-time field used to seed runs: writes m values at (t, x).
using SpaceTimeField = std::function<void(double t, Point x, double* out)>;

struct EntireOptions {
  std::vector<double> n_list;   // start offsets; empty selects (20, 30, 40)/c
  enum class InitMode { front, supersolution };
  InitMode init = InitMode::front;
  SpaceTimeField supersolution;  // required for InitMode::supersolution
  double compare_every = 2.0;    // time between stored comparison samples
  double monotone_every = 0.5;   // time between u_t sign checks
  double gap_offset = 5.0;       // planar-front gap measured at t = -n + gap_offset / c
  double overlap_tol = 1e-3;     // largest admissible u_1 on the obstacle boundary at start
  double monotone_tol = 1e-8;
};

struct EntireApprox {
  std::vector<double> n_list;        // aligned to the time step
  std::vector<double> gap;           // gap[k] = sup |u_{n_{k+1}} - u_{n_k}| over t in [-n_k, 0]
  std::vector<double> n_order_violation;  // max(u_{n_{k+1}} - u_{n_k}) over the same samples
  std::vector<double> min_time_increment;  // per n: min of u(t2) - u(t1) over checks
  std::vector<long> monotone_violations;   // per n: cells below -monotone_tol
  double front_gap = 0.0;            // largest n, against Phi(x1 + c t + s0)
  double front_gap_time = 0.0;
  StateGrid final_state;             // largest n at t = 0
  Trajectory trajectory;             // largest n summaries at comparison samples
  double dt = 0.0;
};

// Runs u_n from t = -n for each n with the same grid, step and time lattice.
// Front initial data come from an obstacle-free run of the same scheme, so runs differ
// only through the obstacle.
EntireApprox approximate_entire_solution(const Scenario& base, const EntireOptions& opts = {});

struct LimitOptions {
  double relax_time = 400.0;
  double tol = 1e-5;           // stop when max |u_t| <= tol
  double window = 10.0;        // local-uniformity window [-window, window]^2
  double far_radius = 0.0;     // 0 selects bound_radius + 5
  bool allow_unconverged = false;
};

struct LimitState {
  StateGrid u_inf;
  ResidualNorms residual;
  double far_field_deviation = 0.0;  // sup over |x| >= far_radius of |1 - u|
  double min_value = 1.0;            // over fluid cells and components
  Point min_location;
  double window_min = 1.0;
  bool converged = false;
  double relax_time_used = 0.0;
  double final_update_rate = 0.0;    // max |u_t| at exit
  bool identically_one(double tol) const { return min_value >= 1.0 - 10.0 * tol; }
};

// Relaxes from `start` with Neumann far field until max |u_t| <= tol.
LimitState extract_u_infinity(const Scenario& scen, const StateGrid& start,
                              const LimitOptions& opts = {});

struct PassageOptions {
  double start_x = 8.0;        // 1/2-level position at t = 0
  double ahead = 15.0;         // comoving window extent ahead of the front
  double behind = 15.0;        // and behind it
  double half_height = 32.0;
  double t_end = 230.0;
  double shift_length = 5.0;   // comoving re-grid stride
  double snapshot_every = 1.0;
  double gap_window = 10.0;    // |x1 + c t + s0| <= gap_window
};

struct GapSample {
  double t = 0.0;
  double front_x = 0.0;
  double gap_discrete = 0.0;   // against the obstacle-free run of the same scheme
  double gap_continuum = 0.0;  // against Phi(x1 + c t + s0)
  bool comoving = false;
};

struct PassageResult {
  Scenario fixed;              // obstacle phase scenario (grid, front, step)
  StateGrid release_state;     // end of the obstacle phase
  Trajectory fixed_trajectory;
  std::vector<GapSample> gaps;
  double release_time = 0.0;
  double final_gap_discrete = 0.0, final_gap_continuum = 0.0;
  double planar_speed_discrete = 0.0;  // speed of the obstacle-free run of the same scheme
};

// Fixed-phase grid of run_passage: from `ahead` past the release abscissa to start_x + 2.
MaskedGrid passage_grid(ObstaclePtr obs, double h, const PassageOptions& opts = {});

// Front passage: fixed grid around the obstacle until the front clears it, then an
// obstacle-free comoving window. `observer` sees fixed-phase snapshots.
PassageResult run_passage(const SystemDef& sys, std::shared_ptr<const FrontProfile> front,
                          ObstaclePtr obs, double h, const PassageOptions& opts = {},
                          const Observer& observer = {}, BoundaryMode mode = BoundaryMode::mirror,
                          int workers = 1);

}  // namespace obsfront
