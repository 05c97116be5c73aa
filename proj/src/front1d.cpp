#include "obsfront/front1d.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace obsfront {

namespace {

constexpr const char* kModule = "front1d";

// Thomas algorithm; lower/diag/upper are constant along the system.
void solve_constant_tridiag(double lower, double diag, double upper, Vec& rhs, Vec& scratch) {
  const std::size_t n = rhs.size();
  scratch.resize(n);
  scratch[0] = upper / diag;
  rhs[0] /= diag;
  for (std::size_t k = 1; k < n; ++k) {
    const double denom = diag - lower * scratch[k - 1];
    scratch[k] = upper / denom;
    rhs[k] = (rhs[k] - lower * rhs[k - 1]) / denom;
  }
  for (std::size_t k = n - 1; k-- > 0;) rhs[k] -= scratch[k] * rhs[k + 1];
}

double sampled_lipschitz(const SystemDef& sys, int per_axis = 11) {
  const int m = sys.m();
  std::vector<int> idx(static_cast<std::size_t>(m), 0);
  Vec u(static_cast<std::size_t>(m));
  double best = 0.0;
  for (;;) {
    for (int i = 0; i < m; ++i) u[i] = static_cast<double>(idx[i]) / (per_axis - 1);
    const Eigen::MatrixXd J = jacobian(sys, u);
    for (int i = 0; i < m; ++i) best = std::max(best, J.row(i).cwiseAbs().sum());
    int k = 0;
    while (k < m && ++idx[k] == per_axis) idx[k++] = 0;
    if (k == m) break;
  }
  return std::max(best, 1e-3);
}

double half_level(const Vec& v, double xi0, double h) {
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (v[j] >= 0.5 && v[j - 1] < 0.5)
      return xi0 + h * (static_cast<double>(j - 1) + (0.5 - v[j - 1]) / (v[j] - v[j - 1]));
  }
  return v.front() >= 0.5 ? xi0 : xi0 + h * static_cast<double>(v.size() - 1);
}

// Semi-implicit comoving flow: implicit diffusion and advection, explicit reaction.
struct ComovingFlow {
  const SystemDef& sys;
  double h, dt;
  std::vector<Vec> v;
  std::vector<Vec> f;
  Vec scratch, rhs;
  Vec ub, fb;

  ComovingFlow(const SystemDef& s, double hh, double dtt, std::vector<Vec> init)
      : sys(s), h(hh), dt(dtt), v(std::move(init)) {
    f.assign(v.size(), Vec(v[0].size()));
    ub.resize(v.size());
    fb.resize(v.size());
  }

  void step(double c) {
    const int m = static_cast<int>(v.size());
    const std::size_t n = v[0].size();
    for (std::size_t j = 0; j < n; ++j) {
      for (int i = 0; i < m; ++i) ub[i] = v[i][j];
      sys.field().eval(ub.data(), fb.data());
      for (int i = 0; i < m; ++i) f[i][j] = fb[i];
    }
    for (int i = 0; i < m; ++i) {
      const double d = sys.D()[i] / (h * h);
      const double adv = c / (2.0 * h);
      const double lower = -dt * (d + adv);
      const double upper = -dt * (d - adv);
      const double diag = 1.0 + 2.0 * dt * d;
      rhs.assign(n - 2, 0.0);
      for (std::size_t j = 1; j + 1 < n; ++j) rhs[j - 1] = v[i][j] + dt * f[i][j];
      rhs.front() -= lower * v[i][0];
      rhs.back() -= upper * v[i][n - 1];
      solve_constant_tridiag(lower, diag, upper, rhs, scratch);
      for (std::size_t j = 1; j + 1 < n; ++j) v[i][j] = rhs[j - 1];
    }
  }
};

double discrete_residual(const SystemDef& sys, const std::vector<Vec>& v, double c, double h) {
  const int m = static_cast<int>(v.size());
  const std::size_t n = v[0].size();
  Vec ub(static_cast<std::size_t>(m)), fb(static_cast<std::size_t>(m));
  double worst = 0.0;
  for (std::size_t j = 1; j + 1 < n; ++j) {
    for (int i = 0; i < m; ++i) ub[i] = v[i][j];
    sys.field().eval(ub.data(), fb.data());
    for (int i = 0; i < m; ++i) {
      const double g = sys.D()[i] * (v[i][j + 1] - 2.0 * v[i][j] + v[i][j - 1]) / (h * h) -
                       c * (v[i][j + 1] - v[i][j - 1]) / (2.0 * h) + fb[i];
      worst = std::max(worst, std::abs(g));
    }
  }
  return worst;
}

struct NewtonResult {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

NewtonResult newton_polish(const SystemDef& sys, std::vector<Vec>& v, double& c, double h,
                           std::size_t j0, double tol, int max_iter) {
  const int m = static_cast<int>(v.size());
  const std::size_t n = v[0].size();
  const std::size_t inner = n - 2;
  const auto N = static_cast<Eigen::Index>(inner * m + 1);
  auto idx = [m](std::size_t j, int i) { return static_cast<Eigen::Index>((j - 1) * m + i); };

  auto residual_vec = [&](const std::vector<Vec>& w, double cc, Eigen::VectorXd& G) {
    G.resize(N);
    Vec ub(static_cast<std::size_t>(m)), fb(static_cast<std::size_t>(m));
    for (std::size_t j = 1; j + 1 < n; ++j) {
      for (int i = 0; i < m; ++i) ub[i] = w[i][j];
      sys.field().eval(ub.data(), fb.data());
      for (int i = 0; i < m; ++i)
        G[idx(j, i)] = sys.D()[i] * (w[i][j + 1] - 2.0 * w[i][j] + w[i][j - 1]) / (h * h) -
                       cc * (w[i][j + 1] - w[i][j - 1]) / (2.0 * h) + fb[i];
    }
    G[N - 1] = w[0][j0] - 0.5;
  };

  NewtonResult out;
  Eigen::VectorXd G;
  residual_vec(v, c, G);
  double gnorm = G.cwiseAbs().maxCoeff();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  std::vector<Eigen::Triplet<double>> trip;
  for (int it = 0; it < max_iter; ++it) {
    if (gnorm < tol) {
      out.converged = true;
      break;
    }
    trip.clear();
    trip.reserve(inner * static_cast<std::size_t>(m) * (m + 4) + 1);
    for (std::size_t j = 1; j + 1 < n; ++j) {
      Vec u(static_cast<std::size_t>(m));
      for (int i = 0; i < m; ++i) u[i] = v[i][j];
      const Eigen::MatrixXd J = jacobian(sys, u);
      for (int i = 0; i < m; ++i) {
        const auto row = idx(j, i);
        const double d = sys.D()[i] / (h * h);
        const double adv = c / (2.0 * h);
        if (j > 1) trip.emplace_back(row, idx(j - 1, i), d + adv);
        if (j + 2 < n) trip.emplace_back(row, idx(j + 1, i), d - adv);
        for (int l = 0; l < m; ++l) {
          const double val = J(i, l) + (l == i ? -2.0 * d : 0.0);
          if (val != 0.0 || l == i) trip.emplace_back(row, idx(j, l), val);
        }
        trip.emplace_back(row, N - 1, -(v[i][j + 1] - v[i][j - 1]) / (2.0 * h));
      }
    }
    trip.emplace_back(N - 1, idx(j0, 0), 1.0);
    Eigen::SparseMatrix<double> A(N, N);
    A.setFromTriplets(trip.begin(), trip.end());
    lu.compute(A);
    if (lu.info() != Eigen::Success) break;
    const Eigen::VectorXd dx = lu.solve(-G);
    if (lu.info() != Eigen::Success || !dx.allFinite()) break;

    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 12; ++ls, alpha *= 0.5) {
      std::vector<Vec> w = v;
      for (std::size_t j = 1; j + 1 < n; ++j)
        for (int i = 0; i < m; ++i) w[i][j] += alpha * dx[idx(j, i)];
      const double cc = c + alpha * dx[N - 1];
      Eigen::VectorXd Gn;
      residual_vec(w, cc, Gn);
      const double nn = Gn.cwiseAbs().maxCoeff();
      if (nn < gnorm || nn < tol) {
        v = std::move(w);
        c = cc;
        G = std::move(Gn);
        gnorm = nn;
        accepted = true;
        break;
      }
    }
    out.iterations = it + 1;
    if (!accepted) break;
  }
  out.residual = gnorm;
  out.converged = gnorm < tol;
  return out;
}

void quintic_coeffs(double y0, double d0, double s0, double y1, double d1, double s1, double h,
                    double* a) {
  const double dy = y1 - y0;
  a[0] = y0;
  a[1] = h * d0;
  a[2] = 0.5 * h * h * s0;
  a[3] = 10.0 * dy - h * (6.0 * d0 + 4.0 * d1) - 0.5 * h * h * (3.0 * s0 - s1);
  a[4] = -15.0 * dy + h * (8.0 * d0 + 7.0 * d1) + 0.5 * h * h * (3.0 * s0 - 2.0 * s1);
  a[5] = 6.0 * dy - 3.0 * h * (d0 + d1) - 0.5 * h * h * (s0 - s1);
}

}  // namespace

FrontProfile::FrontProfile(Vec diffusion, double c, double xi_min, double h,
                           std::vector<Vec> values, std::vector<Vec> slopes,
                           std::vector<Vec> curvatures)
    : D_(std::move(diffusion)),
      c_(c),
      xi_min_(xi_min),
      h_(h),
      phi_(std::move(values)),
      dphi_(std::move(slopes)),
      d2phi_(std::move(curvatures)) {
  if (phi_.empty() || phi_.size() != dphi_.size() || phi_.size() != d2phi_.size())
    throw Error(ErrorCode::dimension_mismatch, kModule, "profile arrays disagree in size");
  if (!(h_ > 0.0)) throw Error(ErrorCode::invalid_argument, kModule, "grid spacing must be positive");
}

void FrontProfile::eval(double xi, double* phi, double* dphi, double* d2phi) const {
  const int mm = m();
  const int n = size();
  const double s = (xi - xi_min_) / h_;
  if (!(s > 0.0) || s >= n - 1) {
    const bool right = s >= n - 1;
    for (int i = 0; i < mm; ++i) {
      phi[i] = right ? 1.0 : 0.0;
      if (dphi) dphi[i] = 0.0;
      if (d2phi) d2phi[i] = 0.0;
    }
    return;
  }
  const int j = static_cast<int>(s);
  const double t = s - j;
  double a[6];
  for (int i = 0; i < mm; ++i) {
    quintic_coeffs(phi_[i][j], dphi_[i][j], d2phi_[i][j], phi_[i][j + 1], dphi_[i][j + 1],
                   d2phi_[i][j + 1], h_, a);
    const double p = a[0] + t * (a[1] + t * (a[2] + t * (a[3] + t * (a[4] + t * a[5]))));
    phi[i] = std::clamp(p, 0.0, 1.0);
    if (dphi)
      dphi[i] = (a[1] + t * (2.0 * a[2] + t * (3.0 * a[3] + t * (4.0 * a[4] + t * 5.0 * a[5])))) / h_;
    if (d2phi)
      d2phi[i] = (2.0 * a[2] + t * (6.0 * a[3] + t * (12.0 * a[4] + t * 20.0 * a[5]))) / (h_ * h_);
  }
}

double FrontProfile::value(int i, double xi) const {
  double buf[8];
  std::vector<double> big;
  double* out = buf;
  if (m() > 8) {
    big.resize(m());
    out = big.data();
  }
  eval(xi, out);
  return out[i];
}

double linear_decay_estimate(const SystemDef& sys) {
  const int m = sys.m();
  const Vec zero(static_cast<std::size_t>(m), 0.0), one(static_cast<std::size_t>(m), 1.0);
  const double s0 = -spectral_abscissa(jacobian(sys, zero));
  const double s1 = -spectral_abscissa(jacobian(sys, one));
  const double s = std::min(s0, s1);
  if (!(s > 0.0))
    throw Error(ErrorCode::a2_failure, kModule, "an equilibrium is not linearly stable");
  return std::sqrt(s / sys.Dbar());
}

FrontProfile solve_planar_front(const SystemDef& sys, const FrontOptions& opts) {
  if (!(opts.h > 0.0)) throw Error(ErrorCode::invalid_argument, kModule, "h must be positive");
  const int m = sys.m();
  double half = opts.half_width;
  if (half <= 0.0) half = std::clamp(30.0 / linear_decay_estimate(sys), 10.0, 80.0);
  const auto N = static_cast<std::size_t>(std::llround(half / opts.h));
  if (N < 8) throw Error(ErrorCode::invalid_argument, kModule, "grid too coarse for the half-width");
  half = static_cast<double>(N) * opts.h;
  const double h = opts.h;
  const std::size_t n = 2 * N + 1;
  const std::size_t j0 = N;

  std::vector<Vec> init(static_cast<std::size_t>(m), Vec(n));
  for (int i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double xi = -half + h * static_cast<double>(j);
      init[i][j] = 0.5 * (1.0 + std::tanh((xi - opts.initial_shift) / 2.0));
    }
    init[i][0] = 0.0;
    init[i][n - 1] = 1.0;
  }

  const double dt = std::min(1.0, 0.5 / sampled_lipschitz(sys));
  ComovingFlow flow(sys, h, dt, std::move(init));
  constexpr int kBlock = 10;
  const double block_time = kBlock * dt;
  const double gamma = 0.1;
  double c = 0.0;
  double p_prev = half_level(flow.v[0], -half, h);
  int steps = 0;
  bool newton_done = false;
  NewtonResult nr;
  double freeze_tol = std::max(opts.tol, 1e-5);
  std::vector<Vec> before;
  for (;;) {
    before = flow.v;
    for (int k = 0; k < kBlock; ++k) flow.step(c);
    steps += kBlock;
    const double p = half_level(flow.v[0], -half, h);
    const double drift = (p - p_prev) / block_time;
    p_prev = p;
    const double c_new = c - drift - gamma * p;
    double change = 0.0;
    for (int i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        change = std::max(change, std::abs(flow.v[i][j] - before[i][j]));
    const bool settled = std::abs(c_new - c) < freeze_tol && change / block_time < 10.0 * freeze_tol;
    c = c_new;
    if (settled && !newton_done) {
      std::vector<Vec> trial = flow.v;
      double c_trial = c;
      nr = newton_polish(sys, trial, c_trial, h, j0, 1e-12, opts.max_newton);
      newton_done = true;
      if (nr.converged || nr.residual < opts.tol_res) {
        flow.v = std::move(trial);
        c = c_trial;
        break;
      }
      freeze_tol = opts.tol;  // fall back to the plain freezing iteration
    } else if (settled) {
      break;
    }
    if (steps >= opts.max_freeze_steps) {
      std::ostringstream os;
      os << "freezing iteration did not settle after " << steps << " steps (last speed " << c
         << ", residual " << discrete_residual(sys, flow.v, c, h) << ")";
      throw Error(ErrorCode::no_convergence, kModule, os.str());
    }
  }

  std::vector<Vec>& v = flow.v;
  const double res = discrete_residual(sys, v, c, h);
  if (res > 10.0 * opts.tol_res && !(nr.converged)) {
    std::ostringstream os;
    os << "front residual " << res << " above tolerance " << opts.tol_res;
    throw Error(ErrorCode::no_convergence, kModule, os.str());
  }
  bool strict = true;
  for (int i = 0; i < m; ++i) {
    for (std::size_t j = 0; j + 1 < n; ++j) {
      const double d = v[i][j + 1] - v[i][j];
      if (d < -1e-12) {
        std::ostringstream os;
        os << "component " << i << " decreases at xi = " << -half + h * static_cast<double>(j)
           << " by " << -d;
        throw Error(ErrorCode::non_monotone_profile, kModule, os.str());
      }
      // Next to 1 the spacing of doubles hides the increase.
      if (!(d > 0.0) && v[i][j] < 1.0 - 1e-12) strict = false;
    }
  }

  std::vector<Vec> dv(static_cast<std::size_t>(m), Vec(n)), d2v(static_cast<std::size_t>(m), Vec(n));
  for (int i = 0; i < m; ++i) {
    const Vec& p = v[i];
    dv[i][0] = (-3.0 * p[0] + 4.0 * p[1] - p[2]) / (2.0 * h);
    dv[i][n - 1] = (3.0 * p[n - 1] - 4.0 * p[n - 2] + p[n - 3]) / (2.0 * h);
    dv[i][1] = (p[2] - p[0]) / (2.0 * h);
    dv[i][n - 2] = (p[n - 1] - p[n - 3]) / (2.0 * h);
    for (std::size_t j = 2; j + 2 < n; ++j)
      dv[i][j] = (-p[j + 2] + 8.0 * p[j + 1] - 8.0 * p[j - 1] + p[j - 2]) / (12.0 * h);
  }
  {
    Vec ub(static_cast<std::size_t>(m)), fb(static_cast<std::size_t>(m));
    for (std::size_t j = 0; j < n; ++j) {
      for (int i = 0; i < m; ++i) ub[i] = v[i][j];
      sys.field().eval(ub.data(), fb.data());
      for (int i = 0; i < m; ++i) d2v[i][j] = (c * dv[i][j] - fb[i]) / sys.D()[i];
    }
  }
  FrontProfile prof(sys.D(), c, -half, h, v, std::move(dv), std::move(d2v));
  prof.residual = res;
  prof.freeze_steps = steps;
  prof.newton_iterations = nr.iterations;
  prof.strictly_increasing = strict;
  return prof;
}

double front_residual(const SystemDef& sys, const FrontProfile& prof, double c_trial) {
  std::vector<Vec> v;
  for (int i = 0; i < prof.m(); ++i) v.push_back(prof.values(i));
  return discrete_residual(sys, v, c_trial, prof.h());
}

double phase_drift(const SystemDef& sys, const FrontProfile& prof, double c_trial,
                   double duration) {
  std::vector<Vec> v;
  for (int i = 0; i < prof.m(); ++i) v.push_back(prof.values(i));
  const double dt = std::min(1.0, 0.5 / sampled_lipschitz(sys));
  ComovingFlow flow(sys, prof.h(), dt, std::move(v));
  const double p0 = half_level(flow.v[0], prof.xi_min(), prof.h());
  const int steps = std::max(1, static_cast<int>(std::lround(duration / dt)));
  for (int k = 0; k < steps; ++k) flow.step(c_trial);
  const double p1 = half_level(flow.v[0], prof.xi_min(), prof.h());
  return (p1 - p0) / (steps * dt);
}

namespace {

struct LogFit {
  double slope = 0.0, intercept = 0.0, rms = 0.0;
  int points = 0;
};

LogFit fit_log_linear(const std::vector<double>& x, const std::vector<double>& y) {
  LogFit f;
  f.points = static_cast<int>(x.size());
  if (f.points < 2) return f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double ly = std::log(y[k]);
    sx += x[k];
    sy += ly;
    sxx += x[k] * x[k];
    sxy += x[k] * ly;
  }
  const double nn = static_cast<double>(x.size());
  const double den = nn * sxx - sx * sx;
  f.slope = (nn * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / nn;
  double ss = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double r = std::log(y[k]) - (f.intercept + f.slope * x[k]);
    ss += r * r;
  }
  f.rms = std::sqrt(ss / nn);
  return f;
}

}  // namespace

DecayReport front_diagnostics(const FrontProfile& prof, const SystemDef& sys) {
  (void)sys;
  DecayReport rep;
  const int m = prof.m();
  const int n = prof.size();
  const double half = prof.xi_max();
  constexpr double kFloor = 1e-13;

  std::vector<double> xl, yl, xr, yr;
  for (int j = 0; j < n; ++j) {
    const double xi = prof.xi(j);
    const double ax = std::abs(xi);
    if (ax < 0.6 * half || ax > 0.85 * half) continue;
    double env = 0.0;
    for (int i = 0; i < m; ++i)
      env = std::max(env, xi < 0 ? prof.values(i)[j] : 1.0 - prof.values(i)[j]);
    if (env < kFloor) continue;
    if (xi < 0) {
      xl.push_back(ax);
      yl.push_back(env);
    } else {
      xr.push_back(ax);
      yr.push_back(env);
    }
  }
  if (xl.size() < 10 || xr.size() < 10)
    throw Error(ErrorCode::fit_degenerate, kModule,
                "too few tail points above round-off in the fit window; reduce the half-width");
  const LogFit left = fit_log_linear(xl, yl);
  const LogFit right = fit_log_linear(xr, yr);
  rep.b_left = -left.slope;
  rep.b_right = -right.slope;
  rep.fit_residual_left = left.rms;
  rep.fit_residual_right = right.rms;
  if (!(rep.b_left > 0.0) || !(rep.b_right > 0.0))
    throw Error(ErrorCode::fit_degenerate, kModule, "tails are not decaying in the fit window");
  rep.b = std::min(rep.b_left, rep.b_right);

  double a = 0.0;
  for (int j = 0; j < n; ++j) {
    const double xi = prof.xi(j);
    const double w = std::exp(rep.b * std::abs(xi));
    for (int i = 0; i < m; ++i) {
      const double base = xi < 0 ? prof.values(i)[j] : 1.0 - prof.values(i)[j];
      const double val = std::max({base, std::abs(prof.slopes(i)[j]), std::abs(prof.curvatures(i)[j])});
      a = std::max(a, val * w);
    }
  }
  rep.a = a * (1.0 + 1e-12);
  rep.envelope_ok = true;
  for (int j = 0; j < n && rep.envelope_ok; ++j) {
    const double xi = prof.xi(j);
    const double env = rep.a * std::exp(-rep.b * std::abs(xi));
    for (int i = 0; i < m; ++i) {
      const double base = xi < 0 ? prof.values(i)[j] : 1.0 - prof.values(i)[j];
      if (base > env || std::abs(prof.slopes(i)[j]) > env || std::abs(prof.curvatures(i)[j]) > env)
        rep.envelope_ok = false;
    }
  }

  // Curvature-to-slope ratio over the region where the slope is resolved above round-off.
  double max_slope = 0.0, max_curv = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      max_slope = std::max(max_slope, prof.slopes(i)[j]);
      max_curv = std::max(max_curv, std::abs(prof.curvatures(i)[j]));
    }
  const double slope_floor = 1e-10 * max_slope;
  double k1 = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if (prof.slopes(i)[j] > slope_floor)
        k1 = std::max(k1, std::abs(prof.curvatures(i)[j]) / prof.slopes(i)[j]);
  rep.Kbar1 = k1 * (1.0 + 1e-12);
  rep.impo_ok = std::isfinite(rep.Kbar1);
  for (int i = 0; i < m && rep.impo_ok; ++i)
    for (int j = 0; j < n; ++j)
      if (prof.slopes(i)[j] > slope_floor &&
          std::abs(prof.curvatures(i)[j]) > rep.Kbar1 * prof.slopes(i)[j])
        rep.impo_ok = false;

  const double curv_tol = 1e-6 * max_curv;
  int last_convex = -1;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if (prof.curvatures(i)[j] > curv_tol) last_convex = std::max(last_convex, j);
  rep.Cconc = last_convex < 0 ? prof.xi_min() : prof.xi(std::min(last_convex + 1, n - 1));
  return rep;
}

HalflineProfile solve_halfline_ground_state(const SystemDef& sys, const FrontProfile& front,
                                            const HalflineOptions& opts) {
  if (!(opts.h > 0.0) || !(opts.half_width > 10.0 * opts.h))
    throw Error(ErrorCode::invalid_argument, kModule, "half-line grid is degenerate");
  const int m = sys.m();
  if (front.m() != m)
    throw Error(ErrorCode::dimension_mismatch, kModule, "front and system disagree in m");
  const auto N = static_cast<std::size_t>(std::llround(opts.half_width / opts.h));
  const double h = opts.h;
  const std::size_t n = N + 1;
  const double shift = opts.shift > 0.0 ? opts.shift : 0.5 * h * static_cast<double>(N);

  AuditOptions ao;
  ao.random_samples = 1000;
  const AssumptionReport audit = audit_assumptions(sys, ao);
  const PQFunctions pq(audit.pf);

  // Subsolution start: the front shifted right, lowered along Q until it vanishes at 0.
  std::vector<Vec> phi(static_cast<std::size_t>(m), Vec(n));
  Vec buf(static_cast<std::size_t>(m));
  for (std::size_t j = 0; j < n; ++j) {
    front.eval(h * static_cast<double>(j) - shift, buf.data());
    for (int i = 0; i < m; ++i) phi[i][j] = buf[i];
  }
  double theta = 0.0;
  for (int i = 0; i < m; ++i) theta = std::max(theta, phi[i][0] / pq.q(i, -shift));
  HalflineProfile out;
  out.h = h;
  out.values.assign(static_cast<std::size_t>(m), Vec(n));
  for (int i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double s = h * static_cast<double>(j) - shift;
      out.values[i][j] = std::max(phi[i][j] - theta * pq.q(i, s), 0.0);
    }
    out.values[i][0] = 0.0;
    out.values[i][n - 1] = 1.0;
  }

  const double dt = std::min(1.0, 0.9 / std::max(audit.ledger.Lambda.value, 1e-3));
  std::vector<Vec>& U = out.values;
  std::vector<Vec> F(static_cast<std::size_t>(m), Vec(n));
  Vec fb(static_cast<std::size_t>(m)), rhs, scratch;
  double min_inc = std::numeric_limits<double>::infinity();
  auto elliptic_residual = [&]() {
    double worst = 0.0;
    for (std::size_t j = 1; j + 1 < n; ++j) {
      for (int i = 0; i < m; ++i) buf[i] = U[i][j];
      sys.field().eval(buf.data(), fb.data());
      for (int i = 0; i < m; ++i)
        worst = std::max(worst, std::abs(sys.D()[i] * (U[i][j + 1] - 2.0 * U[i][j] + U[i][j - 1]) /
                                                 (h * h) +
                                             fb[i]));
    }
    return worst;
  };
  double t = 0.0;
  int steps = 0;
  double res = elliptic_residual();
  while (res > opts.tol) {
    if (t > opts.max_time) {
      std::ostringstream os;
      os << "half-line iteration stalled at residual " << res << " after t = " << t;
      throw Error(ErrorCode::no_convergence, kModule, os.str());
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (int i = 0; i < m; ++i) buf[i] = U[i][j];
      sys.field().eval(buf.data(), fb.data());
      for (int i = 0; i < m; ++i) F[i][j] = fb[i];
    }
    for (int i = 0; i < m; ++i) {
      const double d = dt * sys.D()[i] / (h * h);
      rhs.assign(n - 2, 0.0);
      for (std::size_t j = 1; j + 1 < n; ++j) rhs[j - 1] = U[i][j] + dt * F[i][j];
      rhs.front() += d * U[i][0];
      rhs.back() += d * U[i][n - 1];
      solve_constant_tridiag(-d, 1.0 + 2.0 * d, -d, rhs, scratch);
      for (std::size_t j = 1; j + 1 < n; ++j) {
        min_inc = std::min(min_inc, rhs[j - 1] - U[i][j]);
        U[i][j] = rhs[j - 1];
      }
    }
    t += dt;
    ++steps;
    if (steps % 10 == 0) res = elliptic_residual();
  }
  out.residual = elliptic_residual();
  out.time = t;
  out.steps = steps;
  out.min_time_increment = steps ? min_inc : 0.0;
  const double level = half_level(U[0], 0.0, h);
  if (level > 0.9 * opts.half_width || U[0][n / 2] < 0.5) {
    std::ostringstream os;
    os << "half-line state collapsed (half-level at " << level << "); increase the shift or Xi";
    throw Error(ErrorCode::half_line_collapse, kModule, os.str());
  }
  out.increasing = true;
  for (int i = 0; i < m; ++i)
    for (std::size_t j = 0; j + 1 < n; ++j)
      // Strict below the round-off plateau next to 1, non-decreasing on it.
      if (U[i][j] < 1.0 - 1e-12 ? !(U[i][j + 1] > U[i][j]) : U[i][j + 1] < U[i][j])
        out.increasing = false;
  return out;
}

void write_front_profile(const std::string& path, const FrontProfile& prof,
                         const DecayReport& rep) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::io_error, kModule, "cannot open " + path);
  os << std::setprecision(17);
  os << "# obsfront front profile\n";
  os << "# m = " << prof.m() << "\n";
  os << "# c = " << prof.c() << "\n";
  os << "# a = " << rep.a << "\n";
  os << "# b = " << rep.b << "\n";
  os << "# Kbar1 = " << rep.Kbar1 << "\n";
  os << "# Cconc = " << rep.Cconc << "\n";
  os << "# D =";
  for (double d : prof.diffusion()) os << " " << d;
  os << "\n# columns: xi phi_1..phi_m dphi_1..dphi_m d2phi_1..d2phi_m\n";
  for (int j = 0; j < prof.size(); ++j) {
    os << prof.xi(j);
    for (int i = 0; i < prof.m(); ++i) os << " " << prof.values(i)[j];
    for (int i = 0; i < prof.m(); ++i) os << " " << prof.slopes(i)[j];
    for (int i = 0; i < prof.m(); ++i) os << " " << prof.curvatures(i)[j];
    os << "\n";
  }
  if (!os) throw Error(ErrorCode::io_error, kModule, "write failed for " + path);
}

FrontProfile read_front_profile(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::io_error, kModule, "cannot open " + path);
  int m = 0;
  double c = 0.0;
  Vec D;
  std::vector<double> xi;
  std::vector<Vec> v, dv, d2v;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string key, eq;
      ls >> key >> eq;
      if (key == "m") ls >> m;
      if (key == "c") ls >> c;
      if (key == "D") {
        double d;
        while (ls >> d) D.push_back(d);
      }
      continue;
    }
    if (m <= 0) throw Error(ErrorCode::io_error, kModule, "profile header lacks m");
    if (v.empty()) {
      v.assign(static_cast<std::size_t>(m), {});
      dv.assign(static_cast<std::size_t>(m), {});
      d2v.assign(static_cast<std::size_t>(m), {});
    }
    std::istringstream ls(line);
    double x;
    ls >> x;
    xi.push_back(x);
    for (auto* arr : {&v, &dv, &d2v})
      for (int i = 0; i < m; ++i) {
        double val;
        if (!(ls >> val)) throw Error(ErrorCode::io_error, kModule, "short row in " + path);
        (*arr)[i].push_back(val);
      }
  }
  if (xi.size() < 3) throw Error(ErrorCode::io_error, kModule, "profile has too few rows");
  if (D.size() != static_cast<std::size_t>(m)) D.assign(static_cast<std::size_t>(m), 1.0);
  const double h = (xi.back() - xi.front()) / static_cast<double>(xi.size() - 1);
  return FrontProfile(D, c, xi.front(), h, std::move(v), std::move(dv), std::move(d2v));
}

}  // namespace obsfront
