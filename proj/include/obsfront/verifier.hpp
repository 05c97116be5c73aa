#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "obsfront/front1d.hpp"
#include "obsfront/geometry.hpp"
#include "obsfront/system.hpp"

namespace obsfront {

// Value and space-time derivatives of the smooth branch of a candidate at one point.
struct CandidateEval {
  Vec value, ut, lap;
  std::vector<Point> grad;
  std::vector<char> active;  // branch indicator per component
  void resize(int m);
};

enum class Clip { none, lower_zero, upper_one };

class CandidateFunction {
 public:
  using ValueFn = std::function<void(double t, Point x, double* out)>;
  using DerivFn = std::function<void(double t, Point x, CandidateEval& out)>;

  // `raw` is the smooth branch; `clip` selects max(raw, 0) or min(raw, 1).
  CandidateFunction(int m, ValueFn raw, DerivFn analytic = {}, Clip clip = Clip::none,
                    double fd_step = 1e-3);

  int m() const { return m_; }
  Clip clip() const { return clip_; }
  bool has_analytic() const { return static_cast<bool>(analytic_); }
  double fd_step() const { return hd_; }

  // Clipped value.
  void value(double t, Point x, double* out) const;
  // Smooth-branch derivatives (analytic when available) plus the active flags.
  void eval(double t, Point x, CandidateEval& out) const;
  // Fourth-order central differences of the smooth branch; `speed` (|u_t|/|grad u|)
  // shortens the time step.
  void eval_fd(double t, Point x, CandidateEval& out, double speed = 0.0, double step_scale = 1.0) const;
  // Step used by eval_fd at (t, x) and the rounding floor of its second differences.
  double fd_step_at(double t, Point x) const;
  double fd_noise_at(double t, Point x) const;

 private:
  int m_;
  ValueFn raw_;
  DerivFn analytic_;
  Clip clip_;
  double hd_;
};

enum class Expect { subsolution, supersolution, any };

struct SampleRegion {
  using Draw = std::function<void(std::mt19937_64& rng, double& t, Point& x)>;
  // Boundary draw also returns nu, the unit normal pointing out of the fluid.
  using DrawBoundary = std::function<void(std::mt19937_64& rng, double& t, Point& x, Point& nu)>;
  Draw draw;
  long count = 100000;
  DrawBoundary draw_boundary;
  long boundary_count = 0;
  std::uint64_t seed = 7;
  Expect expect = Expect::any;
  double tol_factor = 1e-3;   // tol_ver = tol_factor * term scale at the sample, plus the rounding floor of F
  long fd_check_every = 97;   // compare analytic and numeric derivatives on a subset
  double fd_rel_tol = 1e-5;
  bool keep_samples = false;
};

struct Violation {
  double t = 0.0;
  Point x;
  int component = 0;
  double value = 0.0, tol = 0.0;
  bool boundary = false;
};

struct ResidualSample {
  double t = 0.0;
  Point x;
  Vec L, scale;
};

struct ResidualReport {
  Vec min_L, max_L;             // per component over active samples
  Vec min_normal, max_normal;   // nu . grad w_i over active boundary samples
  double worst_excess = 0.0;    // largest signed excess past the tolerance (<= 0 passes)
  double min_margin = 0.0;      // sub: min(-L)/scale, super: min(L)/scale over active samples
  long samples = 0, active = 0, skipped = 0, boundary_samples = 0;
  long violation_count = 0;
  std::vector<Violation> violations;  // first few
  double max_fd_mismatch = 0.0;       // relative, over checked smooth samples
  long fd_nonsmooth = 0;              // checks skipped because the differences had not settled
  std::vector<ResidualSample> stored;
  bool ok() const { return violation_count == 0; }
  std::string to_text() const;
};

// L_i[w] = (w_i)_t - D_i Lap w_i - F_i(w) at one point.
void operator_values(const CandidateFunction& cand, const SystemDef& sys, double t, Point x,
                     CandidateEval& ev, Vec& L, Vec& scale);

ResidualReport operator_residual(const CandidateFunction& cand, const SystemDef& sys,
                                 const SampleRegion& region);

// One line per constant: name, value, and the inequality that produced it.
struct AuditEntry {
  std::string name;
  double value = 0.0;
  std::string rule;
};
using AuditTrail = std::vector<AuditEntry>;
std::string audit_text(const AuditTrail& trail);

// Shared inputs of the explicit constructions.
struct ConstructionInputs {
  ConstantsLedger ledger;
  std::shared_ptr<const PQFunctions> pq;
  std::shared_ptr<const FrontProfile> front;
  ObstaclePtr obstacle;        // null or empty for the whole plane
  ZetaFunction zeta;           // trivial means zeta == 1
  double zeta_sup = 1.0, zeta_grad_sup = 0.0, zeta_lap_sup = 0.0;
  double obstacle_radius = 0.0;  // K inside B(0, obstacle_radius)
  Vec D;
  double safety = 2.0;
};

// Fills the zeta norms from a built field.
ConstructionInputs make_inputs(const ConstantsLedger& ledger, std::shared_ptr<const PQFunctions> pq,
                               std::shared_ptr<const FrontProfile> front, const ZetaField& zeta,
                               ObstaclePtr obstacle, const Vec& D);

// Smallest C > 1 with Phi <= level on (-inf, -C] and Phi >= 1 - level on [C, inf);
// with `concave`, also Phi'' <= 0 on [C, inf).
double front_tail_cut(const FrontProfile& f, double level, bool concave = false);
// min_i inf over [-C, C] of Phi_i'.
double front_min_slope(const FrontProfile& f, double C);

struct SolutionPair {
  CandidateFunction lower, upper;
  double delta = 0.0, w = 0.0, T = 0.0, C = 0.0, kappa = 0.0;
  AuditTrail audit;
};

// Pair Phi(xi) -/+ 2a delta/q_* Q(xi) zeta e^{eta t}, xi = x1 + c t -/+ w e^{eta t}, valid for t <= T.
// delta <= 0 and w <= 0 select the constraint-chain values.
SolutionPair build_entire_pair(const ConstructionInputs& in, double delta = 0.0, double w = 0.0);

struct RadialProfile {
  double mu = 0.0, H = 0.0, r0 = 0.0, h0 = 0.0;
  double value(double r) const;
  double d1(double r) const;
  double d2(double r) const;
};

// C2 h_mu: flat on [0, r0], quintic ramp of h' up to 1 on [r0, H], identity beyond H,
// with (N-1)/r h' + h'' <= mu/2 (N = 2). H is the smallest value found by bisection.
RadialProfile build_hmu(double mu);

struct KeySubsolution {
  CandidateFunction lower;
  RadialProfile hmu;
  double delta = 0.0, C1 = 0.0, C2 = 0.0, kappa = 0.0, w = 0.0, T = 0.0;
  double R1 = 0.0, R2 = 0.0, R3 = 0.0;
  Point x0;
  AuditTrail audit;
};

// max(Phi(xi) - delta Q(xi) zeta e^{-delta t}, 0) with
// xi = -h_mu(|x - x0|) + 3/4 c t + w e^{-delta t} + H_mu + C1. x0 defaults to (R3 + R_K, 0).
KeySubsolution build_key_subsolution(const ConstructionInputs& in, double delta = 0.0);

struct LargeTimePair {
  CandidateFunction lower, upper;
  double delta1 = 0.0, delta = 0.0, beta = 0.0, rho = 0.0, C = 0.0, kappa = 0.0, Tstar = 0.0, T = 0.0;
  AuditTrail audit;
};

// Phi(xi) -/+ delta Q(xi) zeta e^{-beta t}, xi = x1 + c(t + T) -/+ rho delta (1 - e^{-beta t}), t >= 0.
LargeTimePair build_large_time_pair(const ConstructionInputs& in, double delta = 0.0);

// Default sample regions: a band around the front level sets, the zeta collar, and
// boundary points of K (found by bisection along rays from the origin).
SampleRegion entire_pair_region(const ConstructionInputs& in, const SolutionPair& pair, Expect e,
                                long count = 100000, double span = 0.0);
SampleRegion key_region(const ConstructionInputs& in, const KeySubsolution& key, long count = 100000);
SampleRegion large_time_region(const ConstructionInputs& in, const LargeTimePair& pair, Expect e,
                               long count = 100000, double span = 20.0);

}  // namespace obsfront
