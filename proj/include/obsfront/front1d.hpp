#pragma once

#include <string>
#include <vector>

#include "obsfront/system.hpp"

namespace obsfront {

struct FrontOptions {
  double half_width = 0.0;  // 0 selects 30/b_est from the linearizations
  double h = 0.05;
  double tol = 1e-8;        // speed increment tolerance of the freezing stage
  double tol_res = 1e-9;    // discrete ODE residual target
  double initial_shift = 0.0;
  int max_freeze_steps = 200000;
  int max_newton = 40;
};

// Discrete planar front on a uniform grid, with a C2 quintic Hermite representation off grid.
class FrontProfile {
 public:
  FrontProfile() = default;
  FrontProfile(Vec diffusion, double c, double xi_min, double h, std::vector<Vec> values,
               std::vector<Vec> slopes, std::vector<Vec> curvatures);

  int m() const { return static_cast<int>(phi_.size()); }
  int size() const { return phi_.empty() ? 0 : static_cast<int>(phi_[0].size()); }
  double c() const { return c_; }
  double h() const { return h_; }
  double xi_min() const { return xi_min_; }
  double xi_max() const { return xi_min_ + h_ * (size() - 1); }
  double xi(int j) const { return xi_min_ + h_ * j; }
  const Vec& values(int i) const { return phi_[i]; }
  const Vec& slopes(int i) const { return dphi_[i]; }
  const Vec& curvatures(int i) const { return d2phi_[i]; }
  const Vec& diffusion() const { return D_; }

  // Value and derivatives at an arbitrary abscissa; saturates to 0 / 1 beyond the grid.
  double value(int i, double xi) const;
  void eval(double xi, double* phi, double* dphi = nullptr, double* d2phi = nullptr) const;

  // Solver bookkeeping.
  double residual = 0.0;
  int freeze_steps = 0;
  int newton_iterations = 0;
  bool strictly_increasing = false;  // strict below the round-off plateau at 1

 private:
  Vec D_;
  double c_ = 0.0, xi_min_ = 0.0, h_ = 0.0;
  std::vector<Vec> phi_, dphi_, d2phi_;
};

struct DecayReport {
  double a = 0.0, b = 0.0;
  double b_left = 0.0, b_right = 0.0;
  double Kbar1 = 0.0;
  double Cconc = 0.0;
  double fit_residual_left = 0.0, fit_residual_right = 0.0;
  bool envelope_ok = false;
  bool impo_ok = false;
};

struct HalflineOptions {
  double half_width = 40.0;  // right end of [0, Xi]
  double h = 0.05;
  double tol = 1e-7;         // elliptic residual target
  double shift = 0.0;        // 0 selects Xi/2
  double max_time = 20000.0;
};

struct HalflineProfile {
  double h = 0.0;
  std::vector<Vec> values;  // values[i][j] at xi = j*h
  double residual = 0.0;
  double time = 0.0;
  int steps = 0;
  double min_time_increment = 0.0;  // smallest U(t+dt) - U(t) seen
  bool increasing = false;  // strict up to the round-off plateau at 1
  double half_width() const { return h * (values.empty() ? 0 : values[0].size() - 1); }
};

FrontProfile solve_planar_front(const SystemDef& sys, const FrontOptions& opts = {});
DecayReport front_diagnostics(const FrontProfile& prof, const SystemDef& sys);
HalflineProfile solve_halfline_ground_state(const SystemDef& sys, const FrontProfile& front,
                                            const HalflineOptions& opts = {});

// Max-norm of the discrete front ODE residual on the interior at speed c_trial.
double front_residual(const SystemDef& sys, const FrontProfile& prof, double c_trial);

// Level-1/2 drift velocity of the comoving flow started at the profile with speed c_trial.
double phase_drift(const SystemDef& sys, const FrontProfile& prof, double c_trial,
                   double duration);

// Linearization-based exponential rate estimate used for the default truncation.
double linear_decay_estimate(const SystemDef& sys);

void write_front_profile(const std::string& path, const FrontProfile& prof,
                         const DecayReport& rep);
FrontProfile read_front_profile(const std::string& path);

}  // namespace obsfront
