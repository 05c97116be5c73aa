#include "obsfront/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace obsfront {

namespace {

constexpr const char* kModule = "verifier";
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxViolations = 20;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool in_fluid(const ObstaclePtr& obs, Point x) { return !obs || obs->is_empty() || obs->phi(x) > 0.0; }

// Outermost boundary point of K along the ray at angle th.
Point boundary_point(const Obstacle& obs, double th) {
  const double R = obs.bound_radius() + 1.0;
  const Point d{std::cos(th), std::sin(th)};
  double hi = R, lo = R;
  const int n = 400;
  for (int k = 1; k <= n; ++k) {
    const double r = R * (1.0 - static_cast<double>(k) / n);
    if (obs.phi({r * d.x, r * d.y}) <= 0.0) {
      lo = r;
      break;
    }
    hi = r;
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (obs.phi({mid * d.x, mid * d.y}) <= 0.0 ? lo : hi) = mid;
  }
  return {hi * d.x, hi * d.y};
}

void throw_constraint(const std::string& rule, double lhs, double rhs) {
  std::ostringstream os;
  os << "constraint fails: " << rule << " (" << lhs << " vs " << rhs << ")";
  throw Error(ErrorCode::constraint_violation, kModule, os.str());
}

double need(const LedgerValue& v, const char* name) {
  if (!v.known() || !(v.value > 0.0))
    throw Error(ErrorCode::invalid_argument, kModule, std::string("ledger constant ") + name + " is missing");
  return v.value;
}

// Space-time phase xi and its derivatives.
struct Phase {
  double xi = 0.0, xt = 0.0, lap = 0.0;
  Point grad;
};

// Phi(xi) + sigma k Q(xi) zeta(x) E(t), with xi and E supplied per point.
struct FrontPerturbation {
  std::shared_ptr<const FrontProfile> front;
  std::shared_ptr<const PQFunctions> pq;
  ZetaFunction zeta;
  double sigma = 1.0, k = 0.0;
  std::function<Phase(double, Point)> phase;
  std::function<void(double, double&, double&)> decay;  // E and E_t

  void raw(double t, Point x, double* out) const {
    const Phase ph = phase(t, x);
    double E, Et;
    decay(t, E, Et);
    const double z = zeta.value(x);
    const int m = front->m();
    double phi[8];
    front->eval(ph.xi, phi);
    for (int i = 0; i < m; ++i) out[i] = phi[i] + sigma * k * pq->q(i, ph.xi) * z * E;
  }

  void derivs(double t, Point x, CandidateEval& ev) const {
    const Phase ph = phase(t, x);
    double E, Et;
    decay(t, E, Et);
    double z, lz;
    Point gz;
    zeta.derivs(x, z, gz, lz);
    const int m = front->m();
    double phi[8], d1[8], d2[8];
    front->eval(ph.xi, phi, d1, d2);
    const double g2 = ph.grad.x * ph.grad.x + ph.grad.y * ph.grad.y;
    const double gdz = ph.grad.x * gz.x + ph.grad.y * gz.y;
    const double sk = sigma * k;
    for (int i = 0; i < m; ++i) {
      const double q = pq->q(i, ph.xi), q1 = pq->q(i, ph.xi, 1), q2 = pq->q(i, ph.xi, 2);
      ev.value[i] = phi[i] + sk * q * z * E;
      ev.ut[i] = d1[i] * ph.xt + sk * (q1 * ph.xt * z * E + q * z * Et);
      ev.grad[i] = {d1[i] * ph.grad.x + sk * E * (q1 * z * ph.grad.x + q * gz.x),
                    d1[i] * ph.grad.y + sk * E * (q1 * z * ph.grad.y + q * gz.y)};
      ev.lap[i] = d2[i] * g2 + d1[i] * ph.lap + sk * E * (q2 * g2 * z + q1 * ph.lap * z + 2.0 * q1 * gdz + q * lz);
    }
  }
};

CandidateFunction make_candidate(const FrontPerturbation& fp, Clip clip, double fd_step) {
  auto shared = std::make_shared<FrontPerturbation>(fp);
  return CandidateFunction(
      fp.front->m(), [shared](double t, Point x, double* out) { shared->raw(t, x, out); },
      [shared](double t, Point x, CandidateEval& ev) { shared->derivs(t, x, ev); }, clip, fd_step);
}

double zeta_sup_checked(const ConstructionInputs& in) { return std::max(1.0, in.zeta_sup); }

}  // namespace

void CandidateEval::resize(int m) {
  value.assign(m, 0.0);
  ut.assign(m, 0.0);
  lap.assign(m, 0.0);
  grad.assign(m, Point{});
  active.assign(m, 1);
}

CandidateFunction::CandidateFunction(int m, ValueFn raw, DerivFn analytic, Clip clip, double fd_step)
    : m_(m), raw_(std::move(raw)), analytic_(std::move(analytic)), clip_(clip), hd_(fd_step) {
  if (m < 1 || m > 8) throw Error(ErrorCode::invalid_argument, kModule, "candidates need 1 to 8 components");
  if (!raw_) throw Error(ErrorCode::invalid_argument, kModule, "candidate has no evaluator");
}

void CandidateFunction::value(double t, Point x, double* out) const {
  raw_(t, x, out);
  for (int i = 0; i < m_; ++i) {
    if (clip_ == Clip::lower_zero) out[i] = std::max(out[i], 0.0);
    if (clip_ == Clip::upper_one) out[i] = std::min(out[i], 1.0);
  }
}

void CandidateFunction::eval(double t, Point x, CandidateEval& ev) const {
  if (!analytic_) {
    eval_fd(t, x, ev);
    return;
  }
  ev.resize(m_);
  analytic_(t, x, ev);
  for (int i = 0; i < m_; ++i)
    ev.active[i] = clip_ == Clip::lower_zero ? ev.value[i] > 0.0
                   : clip_ == Clip::upper_one ? ev.value[i] < 1.0
                                              : 1;
}

double CandidateFunction::fd_step_at(double t, Point x) const {
  // Arguments of size X carry absolute rounding ~1e-16 X; balance it against the h^4 truncation.
  const double mag = 1.0 + std::abs(t) + std::abs(x.x) + std::abs(x.y);
  return std::max(hd_, std::exp2(std::ceil(std::log2(std::pow(1e-16 * mag, 1.0 / 6.0)))));
}

double CandidateFunction::fd_noise_at(double t, Point x) const {
  const double h = fd_step_at(t, x);
  return 1e-14 * (1.0 + std::abs(t) + std::abs(x.x) + std::abs(x.y)) / (h * h);
}

void CandidateFunction::eval_fd(double t, Point x, CandidateEval& ev, double speed, double step_scale) const {
  ev.resize(m_);
  const double h = step_scale * fd_step_at(t, x);
  double f[5][8], c0[8];
  raw_(t, x, c0);
  auto stencil = [&](auto shift) {
    for (int k = -2; k <= 2; ++k)
      if (k != 0) shift(k, f[k + 2]);
  };
  // time
  // Fast-moving profiles need a proportionally shorter time step.
  const double ht = h / std::max(1.0, speed);
  stencil([&](int k, double* out) { raw_(t + k * ht, x, out); });
  for (int i = 0; i < m_; ++i) {
    ev.value[i] = c0[i];
    ev.ut[i] = (-f[4][i] + 8.0 * f[3][i] - 8.0 * f[1][i] + f[0][i]) / (12.0 * ht);
  }
  for (int dir = 0; dir < 2; ++dir) {
    stencil([&](int k, double* out) {
      Point p = x;
      (dir == 0 ? p.x : p.y) += k * h;
      raw_(t, p, out);
    });
    for (int i = 0; i < m_; ++i) {
      const double d1 = (-f[4][i] + 8.0 * f[3][i] - 8.0 * f[1][i] + f[0][i]) / (12.0 * h);
      const double d2 = (-f[4][i] + 16.0 * f[3][i] - 30.0 * c0[i] + 16.0 * f[1][i] - f[0][i]) / (12.0 * h * h);
      (dir == 0 ? ev.grad[i].x : ev.grad[i].y) = d1;
      ev.lap[i] += d2;
    }
  }
  for (int i = 0; i < m_; ++i)
    ev.active[i] = clip_ == Clip::lower_zero ? c0[i] > 0.0 : clip_ == Clip::upper_one ? c0[i] < 1.0 : 1;
}

void operator_values(const CandidateFunction& cand, const SystemDef& sys, double t, Point x,
                     CandidateEval& ev, Vec& L, Vec& scale) {
  const int m = cand.m();
  if (m != sys.m()) throw Error(ErrorCode::dimension_mismatch, kModule, "candidate and system sizes differ");
  cand.eval(t, x, ev);
  double w[8], F[8];
  for (int i = 0; i < m; ++i) {
    w[i] = ev.value[i];
    if (cand.clip() == Clip::lower_zero) w[i] = std::max(w[i], 0.0);
    if (cand.clip() == Clip::upper_one) w[i] = std::min(w[i], 1.0);
  }
  sys.field().eval(w, F);
  L.resize(m);
  scale.resize(m);
  for (int i = 0; i < m; ++i) {
    L[i] = ev.ut[i] - sys.D()[i] * ev.lap[i] - F[i];
    scale[i] = std::abs(ev.ut[i]) + sys.D()[i] * std::abs(ev.lap[i]) + std::abs(F[i]);
  }
}

namespace {

// Absolute error of F(w) from rounding w: a few ulps of w through the Jacobian row sums.
void rounding_floor(const CandidateFunction& cand, const SystemDef& sys, const CandidateEval& ev, Vec& out) {
  const int m = cand.m();
  Vec w(ev.value.begin(), ev.value.end());
  for (double& v : w) v = std::clamp(v, 0.0, 1.0);
  const Eigen::MatrixXd J = jacobian(sys, w);
  out.assign(m, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) out[i] += 1e-15 * std::abs(J(i, j)) * std::max(std::abs(w[j]), 1e-300);
}

}  // namespace

ResidualReport operator_residual(const CandidateFunction& cand, const SystemDef& sys,
                                 const SampleRegion& region) {
  if (!region.draw) throw Error(ErrorCode::invalid_argument, kModule, "sample region has no draw");
  const int m = cand.m();
  ResidualReport rep;
  rep.min_L.assign(m, kInf);
  rep.max_L.assign(m, -kInf);
  rep.min_normal.assign(m, kInf);
  rep.max_normal.assign(m, -kInf);
  rep.worst_excess = -kInf;
  rep.min_margin = kInf;
  std::mt19937_64 rng(region.seed);
  CandidateEval ev, fd[3];
  Vec L, scale, floor_F;
  auto record = [&](const Violation& v) {
    ++rep.violation_count;
    if (rep.violations.size() < kMaxViolations) rep.violations.push_back(v);
  };
  for (long k = 0; k < region.count; ++k) {
    double t;
    Point x;
    region.draw(rng, t, x);
    operator_values(cand, sys, t, x, ev, L, scale);
    rounding_floor(cand, sys, ev, floor_F);
    ++rep.samples;
    bool any = false;
    for (int i = 0; i < m; ++i) {
      if (!ev.active[i]) continue;
      any = true;
      rep.min_L[i] = std::min(rep.min_L[i], L[i]);
      rep.max_L[i] = std::max(rep.max_L[i], L[i]);
      const double tol = region.tol_factor * scale[i] + floor_F[i];
      if (region.expect == Expect::any) continue;
      const double signed_L = region.expect == Expect::subsolution ? L[i] : -L[i];
      rep.worst_excess = std::max(rep.worst_excess, signed_L - tol);
      if (scale[i] > 0.0) rep.min_margin = std::min(rep.min_margin, -signed_L / scale[i]);
      if (signed_L > tol) record({t, x, i, L[i], tol, false});
    }
    if (any) ++rep.active;
    else ++rep.skipped;
    if (region.keep_samples) rep.stored.push_back({t, x, L, scale});
    if (cand.has_analytic() && region.fd_check_every > 0 && k % region.fd_check_every == 0) {
      double speed = 0.0;
      for (int i = 0; i < m; ++i)
        speed = std::max(speed, std::abs(ev.ut[i]) / (std::hypot(ev.grad[i].x, ev.grad[i].y) + 1e-300));
      speed = std::min(speed, 1e8);
      for (int lvl = 0; lvl < 3; ++lvl) cand.eval_fd(t, x, fd[lvl], speed, std::ldexp(1.0, -lvl));
      const double noise = 16.0 * cand.fd_noise_at(t, x);
      for (int i = 0; i < m; ++i) {
        if (!ev.active[i]) continue;
        const double D = sys.D()[i];
        const double floor = scale[i] + noise / region.fd_rel_tol;
        auto gap = [&](const CandidateEval& a, const CandidateEval& b) {
          return (std::abs(a.ut[i] - b.ut[i]) + D * std::abs(a.lap[i] - b.lap[i])) / floor;
        };
        double mis = kInf, drift = 0.0;
        for (int lvl = 0; lvl < 3; ++lvl) {
          mis = std::min(mis, gap(ev, fd[lvl]));
          if (lvl > 0) drift = std::max(drift, gap(fd[lvl - 1], fd[lvl]));
        }
        // Differences that move with the step straddle a C2 junction: not a smooth region.
        if (mis > region.fd_rel_tol && drift > 0.1 * mis) {
          ++rep.fd_nonsmooth;
          continue;
        }
        rep.max_fd_mismatch = std::max(rep.max_fd_mismatch, mis);
        if (mis > region.fd_rel_tol) {
          std::ostringstream os;
          os << "analytic and numeric derivatives differ by " << mis << " (relative) for component " << i
             << " at t = " << t << ", x = (" << x.x << ", " << x.y << ")";
          throw Error(ErrorCode::derivative_inconsistency, kModule, os.str());
        }
      }
    }
  }
  if (region.draw_boundary) {
    for (long k = 0; k < region.boundary_count; ++k) {
      double t;
      Point x, nu;
      region.draw_boundary(rng, t, x, nu);
      cand.eval(t, x, ev);
      ++rep.boundary_samples;
      for (int i = 0; i < m; ++i) {
        if (!ev.active[i]) continue;
        const double dn = nu.x * ev.grad[i].x + nu.y * ev.grad[i].y;
        rep.min_normal[i] = std::min(rep.min_normal[i], dn);
        rep.max_normal[i] = std::max(rep.max_normal[i], dn);
        if (region.expect == Expect::any) continue;
        // Subsolutions need nu . grad <= 0, supersolutions >= 0.
        const double signed_dn = region.expect == Expect::subsolution ? dn : -dn;
        const double tol = region.tol_factor * std::hypot(ev.grad[i].x, ev.grad[i].y);
        rep.worst_excess = std::max(rep.worst_excess, signed_dn - tol);
        if (signed_dn > tol) record({t, x, i, dn, tol, true});
      }
    }
  }
  if (rep.worst_excess == -kInf) rep.worst_excess = 0.0;
  if (rep.min_margin == kInf) rep.min_margin = 0.0;
  return rep;
}

std::string ResidualReport::to_text() const {
  std::ostringstream os;
  os.precision(6);
  os << "samples " << samples << " active " << active << " skipped " << skipped << " boundary "
     << boundary_samples << "\n";
  for (std::size_t i = 0; i < min_L.size(); ++i) {
    os << "component " << i << ": L in [" << min_L[i] << ", " << max_L[i] << "]";
    if (boundary_samples > 0) os << ", nu.grad in [" << min_normal[i] << ", " << max_normal[i] << "]";
    os << "\n";
  }
  os << "worst excess " << worst_excess << ", min relative margin " << min_margin
     << ", derivative check mismatch " << max_fd_mismatch << " (" << fd_nonsmooth << " non-smooth points skipped)\n";
  os << "violations " << violation_count << "\n";
  for (const auto& v : violations)
    os << "  " << (v.boundary ? "boundary" : "interior") << " t=" << v.t << " x=(" << v.x.x << ", "
       << v.x.y << ") i=" << v.component << " value=" << v.value << " tol=" << v.tol << "\n";
  return os.str();
}

std::string audit_text(const AuditTrail& trail) {
  std::ostringstream os;
  os.precision(10);
  for (const auto& e : trail) os << e.name << " = " << e.value << "    [" << e.rule << "]\n";
  return os.str();
}

ConstructionInputs make_inputs(const ConstantsLedger& ledger, std::shared_ptr<const PQFunctions> pq,
                               std::shared_ptr<const FrontProfile> front, const ZetaField& zeta,
                               ObstaclePtr obstacle, const Vec& D) {
  ConstructionInputs in;
  in.ledger = ledger;
  in.pq = std::move(pq);
  in.front = std::move(front);
  in.obstacle = obstacle && !obstacle->is_empty() ? obstacle : nullptr;
  in.zeta = zeta.fn;
  in.zeta_sup = zeta.sup_value;
  in.zeta_grad_sup = zeta.sup_grad;
  in.zeta_lap_sup = zeta.sup_lap;
  in.obstacle_radius = in.obstacle ? in.obstacle->bound_radius() : 0.0;
  in.D = D;
  return in;
}

double front_tail_cut(const FrontProfile& f, double level, bool concave) {
  const int n = f.size(), m = f.m();
  double left = -f.xi_min();  // saturation to 0 below the grid
  for (int j = 0; j < n; ++j) {
    bool ok = true;
    for (int i = 0; i < m; ++i) ok = ok && f.values(i)[j] <= level;
    if (!ok) break;
    left = -f.xi(j);
  }
  double right = f.xi_max();
  for (int j = n - 1; j >= 0; --j) {
    bool ok = true;
    for (int i = 0; i < m; ++i) {
      ok = ok && f.values(i)[j] >= 1.0 - level;
      if (concave) ok = ok && f.curvatures(i)[j] <= 1e-12;
    }
    if (!ok) break;
    right = f.xi(j);
  }
  return std::max({1.0 + 1e-9, left, right});
}

double front_min_slope(const FrontProfile& f, double C) {
  const int m = f.m();
  double kappa = kInf;
  double phi[8], d1[8];
  const int n = std::max(200, static_cast<int>(std::ceil(8.0 * C / f.h())));
  for (int k = 0; k <= n; ++k) {
    const double xi = -C + 2.0 * C * k / n;
    f.eval(xi, phi, d1);
    for (int i = 0; i < m; ++i) kappa = std::min(kappa, d1[i]);
  }
  return kappa;
}

SolutionPair build_entire_pair(const ConstructionInputs& in, double delta, double w) {
  const ConstantsLedger& L = in.ledger;
  const double s = in.safety;
  const double eps0 = need(L.eps0, "eps0"), eta = need(L.eta, "eta"), a = need(L.a, "a"),
               b = need(L.b, "b"), c = need(L.c, "c"), Lambda = need(L.Lambda, "Lambda"),
               Dbar = need(L.Dbar, "Dbar");
  const double qs = in.pq->pf().q_low, qS = in.pq->pf().q_high, M = in.pq->M();
  const double zs = zeta_sup_checked(in), zg = in.zeta_grad_sup, zl = in.zeta_lap_sup;
  const double R = in.obstacle_radius;
  AuditTrail audit;

  const double delta_max = 2.0 * eps0 / qs;
  if (delta <= 0.0) {
    delta = delta_max / s;
    audit.push_back({"delta", delta, "delta = 2 eps0 / q_*, divided by the safety factor"});
  } else {
    if (delta > delta_max) throw_constraint("delta q_* <= 2 eps0", delta * qs, 2.0 * eps0);
    audit.push_back({"delta", delta, "given; delta q_* <= 2 eps0"});
  }
  const double C = front_tail_cut(*in.front, delta * qs);
  audit.push_back({"C", C, "Phi <= delta q_* on (-inf,-C], Phi >= 1 - delta q_* on [C,inf)"});
  const double kappa = front_min_slope(*in.front, C);
  audit.push_back({"kappa", kappa, "min_i inf_[-C,C] Phi_i'"});
  if (!(kappa > 0.0)) throw_constraint("kappa > 0", kappa, 0.0);
  const double rhs = 2.0 * a / qs * ((c * M + eta * M + Dbar * M + Lambda * qS) * zs + 2.0 * Dbar * M * zg + Dbar * qS * zl);
  const std::string w_rule =
      "w eta kappa >= 2a/q_* ((cM + eta M + Dbar M + Lambda q^*)|zeta| + 2 Dbar M |grad zeta| + Dbar q^* |Lap zeta|)";
  if (w <= 0.0) {
    w = s * rhs / (eta * kappa);
    audit.push_back({"w", w, w_rule + ", times the safety factor"});
  } else {
    if (w * eta * kappa < rhs) throw_constraint(w_rule, w * eta * kappa, rhs);
    audit.push_back({"w", w, "given; " + w_rule});
  }
  const double e_bound = std::min({1.0 / w, qs * qs / (2.0 * a * qS * zs), kappa * qs / (4.0 * a * delta * M * zs)});
  const double T1 = std::log(e_bound / s) / eta;
  audit.push_back({"T_exp", T1, "e^{eta T} < min(1/w, q_*^2/(2a q^* |zeta|), kappa q_*/(4a delta M |zeta|)), bound divided by the safety factor"});
  const double T2 = 2.0 * (std::log(delta) / b - s * (R + 1.0)) / c;
  audit.push_back({"T_bdry", T2, "L + cT/2 + 1 <= ln(delta)/b with L the outer obstacle radius, (L+1) scaled by the safety factor"});
  const double T = std::min({T1, T2, -1.0});
  audit.push_back({"T", T, "min(T_exp, T_bdry, -1)"});

  const double k = 2.0 * a * delta / qs;
  audit.push_back({"amplitude", k, "2 a delta / q_*"});
  auto make = [&](double sigma) {
    FrontPerturbation fp;
    fp.front = in.front;
    fp.pq = in.pq;
    fp.zeta = in.zeta;
    fp.sigma = sigma;
    fp.k = k;
    fp.phase = [c, w, eta, sigma](double t, Point x) {
      const double E = std::exp(eta * t);
      Phase ph;
      ph.xi = x.x + c * t + sigma * w * E;
      ph.xt = c + sigma * w * eta * E;
      ph.grad = {1.0, 0.0};
      return ph;
    };
    fp.decay = [eta](double t, double& E, double& Et) {
      E = std::exp(eta * t);
      Et = eta * E;
    };
    return make_candidate(fp, sigma < 0 ? Clip::lower_zero : Clip::upper_one, std::ldexp(1.0, -10));
  };
  return SolutionPair{make(-1.0), make(1.0), delta, w, T, C, kappa, audit};
}

double RadialProfile::value(double r) const {
  if (r >= H) return r;
  if (r <= r0) return h0;
  const double l = H - r0, s = (r - r0) / l;
  // integral of the quintic smoothstep
  return h0 + l * (s * s * s * s * (2.5 + s * (-3.0 + s)));
}

double RadialProfile::d1(double r) const {
  if (r >= H) return 1.0;
  if (r <= r0) return 0.0;
  return PQFunctions::chi((r - r0) / (H - r0));
}

double RadialProfile::d2(double r) const {
  if (r >= H || r <= r0) return 0.0;
  return PQFunctions::chi_d1((r - r0) / (H - r0)) / (H - r0);
}

RadialProfile build_hmu(double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu))
    throw Error(ErrorCode::hmu_construction_failure, kModule, "mu must be positive and finite");
  // For H = 1 the constraint reads max_r (h'/r + h'') <= mu H / 2; scale-free in H.
  const int nr = 4000;
  auto worst = [&](double frac) {
    RadialProfile p{1.0, 1.0, frac, 0.0};
    double f = 0.0;
    for (int k = 1; k <= nr; ++k) {
      const double r = frac + (1.0 - frac) * k / nr;
      f = std::max(f, p.d1(r) / r + p.d2(r));
    }
    return f;
  };
  double best_frac = 0.5, best = kInf;
  for (int k = 1; k < 100; ++k) {
    const double frac = k / 100.0;
    const double f = worst(frac);
    if (f < best) {
      best = f;
      best_frac = frac;
    }
  }
  for (double step = 0.005; step > 1e-5; step *= 0.5) {
    for (double cand : {best_frac - step, best_frac + step}) {
      if (cand <= 0.0 || cand >= 1.0) continue;
      const double f = worst(cand);
      if (f < best) {
        best = f;
        best_frac = cand;
      }
    }
  }
  RadialProfile p;
  p.mu = mu;
  p.H = 2.0 * best / mu * (1.0 + 1e-3);
  p.r0 = best_frac * p.H;
  p.h0 = p.H - 0.5 * (p.H - p.r0);
  // Sampled check of the differential inequality.
  for (int k = 1; k <= 20000; ++k) {
    const double r = 1.5 * p.H * k / 20000.0;
    if (p.d1(r) / r + p.d2(r) > 0.5 * mu * (1.0 + 1e-9)) {
      std::ostringstream os;
      os << "h_mu violates h'/r + h'' <= mu/2 at r = " << r;
      throw Error(ErrorCode::hmu_construction_failure, kModule, os.str());
    }
  }
  return p;
}

KeySubsolution build_key_subsolution(const ConstructionInputs& in, double delta) {
  const ConstantsLedger& L = in.ledger;
  const double s = in.safety;
  const double eps0 = need(L.eps0, "eps0"), varpi = need(L.varpi, "varpi"), c = need(L.c, "c"),
               Lambda = need(L.Lambda, "Lambda"), Dbar = need(L.Dbar, "Dbar");
  const double qs = in.pq->pf().q_low, qS = in.pq->pf().q_high, M = in.pq->M();
  const double zs = zeta_sup_checked(in), zg = in.zeta_grad_sup, zl = in.zeta_lap_sup;
  const double R = in.obstacle_radius;
  AuditTrail audit;
  const double delta_max = std::min({2.0 * eps0 / (qS * zs), 0.5 * varpi, 1.0});
  const std::string d_rule = "0 < delta < min(2 eps0/(q^* |zeta|), varpi/2, 1)";
  if (delta <= 0.0) {
    delta = delta_max / s;
    audit.push_back({"delta", delta, d_rule + ", bound divided by the safety factor"});
  } else {
    if (delta >= delta_max) throw_constraint(d_rule, delta, delta_max);
    audit.push_back({"delta", delta, "given; " + d_rule});
  }
  const double mu = c / (4.0 * Dbar);
  audit.push_back({"mu", mu, "mu = c/(4 Dbar)"});
  const RadialProfile hmu = build_hmu(mu);
  audit.push_back({"H_mu", hmu.H, "smallest H in the spline family with h'/r + h'' <= mu/2"});
  audit.push_back({"h_mu(0)", hmu.h0, "h_mu(r) = r beyond H_mu"});
  const double C1 = front_tail_cut(*in.front, delta * qs, true);
  audit.push_back({"C1", C1, "Phi <= delta q_* on (-inf,-C1], Phi >= 1 - delta q_* and Phi'' <= 0 on [C1,inf)"});
  const double kappa = front_min_slope(*in.front, C1);
  audit.push_back({"kappa", kappa, "min_i inf_[-C1,C1] Phi_i'"});
  if (!(kappa > 0.0)) throw_constraint("kappa > 0", kappa, 0.0);
  const double C2 = std::max(C1, front_tail_cut(*in.front, 0.5 * delta * qs));
  audit.push_back({"C2", C2, "Phi <= delta q_*/2 on (-inf,-C2], Phi >= 1 - delta q_*/2 on [C2,inf), C2 >= C1"});
  const double rhs = (Lambda + 1.0) * qS * zs + (c + Dbar) * M * zs + 2.0 * Dbar * M * zg + Dbar * qS * zl;
  const double w = s * rhs / kappa;
  audit.push_back({"w", w, "w kappa >= (Lambda+1) q^* |zeta| + (c + Dbar) M |zeta| + 2 Dbar M |grad zeta| + Dbar q^* |Lap zeta|, times the safety factor"});
  const double T = 4.0 / (3.0 * c) * (C1 + C2 + hmu.h0 + w + 1.0);
  audit.push_back({"T", T, "T >= 4/(3c) (C1 + C2 + h_mu(0) + w + 1)"});
  const double R1 = w + hmu.H + C1 + C2;
  const double R2 = 0.75 * c * T + hmu.H - hmu.h0;
  const double R3 = std::max({R1 + R, R2, w + hmu.H + C1 + C2 + R + c * T});
  audit.push_back({"R1", R1, "R1 = w + H_mu + C1 + C2"});
  audit.push_back({"R2", R2, "R2 = 3/4 c T + H_mu - h_mu(0)"});
  audit.push_back({"R3", R3, "R3 = max(R1 + L, R2, w + H_mu + C1 + C2 + L + cT), L the outer obstacle radius"});
  const Point x0{R3 + R + 1.0, 0.0};
  audit.push_back({"x0_1", x0.x, "B(x0, R3) inside the fluid"});

  FrontPerturbation fp;
  fp.front = in.front;
  fp.pq = in.pq;
  fp.zeta = in.zeta;
  fp.sigma = -1.0;
  fp.k = delta;
  const double shift = hmu.H + C1;
  fp.phase = [hmu, x0, c, w, delta, shift](double t, Point x) {
    const double dx = x.x - x0.x, dy = x.y - x0.y;
    const double r = std::hypot(dx, dy);
    const double E = std::exp(-delta * t);
    Phase ph;
    ph.xi = -hmu.value(r) + 0.75 * c * t + w * E + shift;
    ph.xt = 0.75 * c - delta * w * E;
    const double h1 = hmu.d1(r);
    if (h1 > 0.0) {
      ph.grad = {-h1 * dx / r, -h1 * dy / r};
      ph.lap = -(hmu.d2(r) + h1 / r);
    }
    return ph;
  };
  fp.decay = [delta](double t, double& E, double& Et) {
    E = std::exp(-delta * t);
    Et = -delta * E;
  };
  KeySubsolution out{make_candidate(fp, Clip::lower_zero, std::ldexp(1.0, -6)), hmu, delta, C1, C2, kappa,
                     w, T, R1, R2, R3, x0, audit};
  return out;
}

LargeTimePair build_large_time_pair(const ConstructionInputs& in, double delta) {
  const ConstantsLedger& L = in.ledger;
  const double s = in.safety;
  const double eps0 = need(L.eps0, "eps0"), varpi = need(L.varpi, "varpi"), a = need(L.a, "a"),
               b = need(L.b, "b"), c = need(L.c, "c"), Lambda = need(L.Lambda, "Lambda"),
               Dbar = need(L.Dbar, "Dbar");
  const double qs = in.pq->pf().q_low, qS = in.pq->pf().q_high, M = in.pq->M();
  const double zs = zeta_sup_checked(in), zg = in.zeta_grad_sup, zl = in.zeta_lap_sup;
  const double R = in.obstacle_radius;
  AuditTrail audit;
  const double delta1 = 2.0 * eps0 / s;
  audit.push_back({"delta1", delta1, "0 < delta1 < 2 eps0, bound divided by the safety factor"});
  const double delta_max = std::min(1.0, delta1 / (qS * zs));
  const std::string d_rule = "0 < delta < min(1, delta1/(q^* |zeta|))";
  if (delta <= 0.0) {
    delta = delta_max / s;
    audit.push_back({"delta", delta, d_rule + ", bound divided by the safety factor"});
  } else {
    if (delta >= delta_max) throw_constraint(d_rule, delta, delta_max);
    audit.push_back({"delta", delta, "given; " + d_rule});
  }
  const double beta = std::min({delta, b * c, 0.5 * varpi}) / s;
  audit.push_back({"beta", beta, "0 < beta < min(delta, bc, varpi/2), bound divided by the safety factor"});
  const double C = front_tail_cut(*in.front, delta1);
  audit.push_back({"C", C, "Phi <= delta1 on (-inf,-C], Phi >= 1 - delta1 on [C,inf)"});
  const double kappa = front_min_slope(*in.front, C);
  audit.push_back({"kappa", kappa, "min_i inf_[-C,C] Phi_i'"});
  if (!(kappa > 0.0)) throw_constraint("kappa > 0", kappa, 0.0);
  const double rhs = (beta * qS + c * M + Lambda * qS + Dbar * M) * zs + Dbar * qS * zl + 2.0 * Dbar * M * zg;
  const double rho = s * rhs / (beta * kappa);
  audit.push_back({"rho", rho, "beta rho kappa >= (beta q^* + cM + Lambda q^* + Dbar M)|zeta| + Dbar q^* |Lap zeta| + 2 Dbar M |grad zeta|, times the safety factor"});
  const double Ta = s * (1.0 + rho + R) / c;
  const double Tb = (R + rho + std::log(s * a / (delta * qs)) / b) / c;
  const double Tstar = std::max(Ta, Tb);
  audit.push_back({"T*", Tstar, "c T* >= 1 + rho + L and a e^{-b(-L + c T* - rho)} <= delta q_*, L the outer obstacle radius, safety on both"});

  auto make = [&](double sigma) {
    FrontPerturbation fp;
    fp.front = in.front;
    fp.pq = in.pq;
    fp.zeta = in.zeta;
    fp.sigma = sigma;
    fp.k = delta;
    const double T = Tstar;
    const double rd = rho * delta;
    fp.phase = [c, T, rd, beta, sigma](double t, Point x) {
      const double E = std::exp(-beta * t);
      Phase ph;
      ph.xi = x.x + c * (t + T) + sigma * rd * (1.0 - E);
      ph.xt = c + sigma * rd * beta * E;
      ph.grad = {1.0, 0.0};
      return ph;
    };
    fp.decay = [beta](double t, double& E, double& Et) {
      E = std::exp(-beta * t);
      Et = -beta * E;
    };
    return make_candidate(fp, sigma < 0 ? Clip::lower_zero : Clip::upper_one, std::ldexp(1.0, -10));
  };
  return LargeTimePair{make(-1.0), make(1.0), delta1, delta, beta, rho, C, kappa, Tstar, Tstar, audit};
}

namespace {

SampleRegion::DrawBoundary boundary_draw(const ConstructionInputs& in, double t_lo, double t_hi) {
  if (!in.obstacle) return {};
  ObstaclePtr obs = in.obstacle;
  return [obs, t_lo, t_hi](std::mt19937_64& rng, double& t, Point& x, Point& nu) {
    t = uniform(rng, t_lo, t_hi);
    x = boundary_point(*obs, uniform(rng, 0.0, 2.0 * std::numbers::pi));
    const Point n = obs->normal(x);
    nu = {-n.x, -n.y};
  };
}

// Points in the fluid near the obstacle, where zeta varies.
Point collar_point(const ConstructionInputs& in, std::mt19937_64& rng) {
  const double R = in.obstacle_radius + 2.0 * (in.zeta.trivial() ? 1.0 : in.zeta.collar()) + 1.0;
  for (;;) {
    const Point p{uniform(rng, -R, R), uniform(rng, -R, R)};
    if (p.x * p.x + p.y * p.y <= R * R && in_fluid(in.obstacle, p)) return p;
  }
}

}  // namespace

SampleRegion entire_pair_region(const ConstructionInputs& in, const SolutionPair& pair, Expect e,
                                long count, double span) {
  const double eta = in.ledger.eta.value, c = in.ledger.c.value;
  if (span <= 0.0) span = 10.0 / eta;
  const double T = pair.T, C = pair.C, w = pair.w;
  const double sigma = e == Expect::subsolution ? -1.0 : 1.0;
  const double Y = in.obstacle_radius + 10.0;
  SampleRegion reg;
  reg.count = count;
  reg.expect = e;
  ObstaclePtr obs = in.obstacle;
  reg.draw = [=](std::mt19937_64& rng, double& t, Point& x) {
    t = uniform(rng, T - span, T);
    if (uniform(rng, 0.0, 1.0) < 0.6) {
      do {
        const double xi = uniform(rng, -C - 5.0, C + 5.0);
        x = {xi - c * t - sigma * w * std::exp(eta * t), uniform(rng, -Y, Y)};
      } while (!in_fluid(obs, x));
    } else {
      x = collar_point(in, rng);
    }
  };
  reg.draw_boundary = boundary_draw(in, T - span, T);
  reg.boundary_count = reg.draw_boundary ? count / 10 : 0;
  return reg;
}

SampleRegion key_region(const ConstructionInputs& in, const KeySubsolution& key, long count) {
  const double c = in.ledger.c.value;
  const RadialProfile h = key.hmu;
  const double T = key.T, C1 = key.C1, C2 = key.C2, w = key.w, delta = key.delta;
  const Point x0 = key.x0;
  ObstaclePtr obs = in.obstacle;
  SampleRegion reg;
  reg.count = count;
  reg.expect = Expect::subsolution;
  reg.draw = [=](std::mt19937_64& rng, double& t, Point& x) {
    do {
      t = uniform(rng, 0.0, T);
      double r;
      if (uniform(rng, 0.0, 1.0) < 0.7) {
        const double xi = uniform(rng, -C2 - 2.0, C1 + 2.0);
        r = -xi + 0.75 * c * t + w * std::exp(-delta * t) + h.H + C1;
        if (r < h.H) r = uniform(rng, 0.0, h.H);
      } else {
        r = uniform(rng, 0.0, h.H + 1.0);
      }
      const double th = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      x = {x0.x + r * std::cos(th), x0.y + r * std::sin(th)};
    } while (!in_fluid(obs, x));
  };
  reg.draw_boundary = boundary_draw(in, 0.0, T);
  reg.boundary_count = reg.draw_boundary ? count / 10 : 0;
  return reg;
}

SampleRegion large_time_region(const ConstructionInputs& in, const LargeTimePair& pair, Expect e,
                               long count, double span) {
  const double c = in.ledger.c.value;
  const double sigma = e == Expect::subsolution ? -1.0 : 1.0;
  const double T = pair.T, C = pair.C, rd = pair.rho * pair.delta, beta = pair.beta;
  const double Y = in.obstacle_radius + 10.0;
  ObstaclePtr obs = in.obstacle;
  SampleRegion reg;
  reg.count = count;
  reg.expect = e;
  reg.draw = [=](std::mt19937_64& rng, double& t, Point& x) {
    t = uniform(rng, 0.0, span);
    if (uniform(rng, 0.0, 1.0) < 0.6) {
      do {
        const double xi = uniform(rng, -C - 5.0, C + 5.0);
        x = {xi - c * (t + T) - sigma * rd * (1.0 - std::exp(-beta * t)), uniform(rng, -Y, Y)};
      } while (!in_fluid(obs, x));
    } else {
      x = collar_point(in, rng);
    }
  };
  reg.draw_boundary = boundary_draw(in, 0.0, span);
  reg.boundary_count = reg.draw_boundary ? count / 10 : 0;
  return reg;
}

}  // namespace obsfront
