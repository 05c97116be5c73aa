#include "obsfront/system.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace obsfront {

namespace {

constexpr const char* kModule = "systems";

class CubicField final : public ReactionField {
 public:
  CubicField(int m, double a) : m_(m), a_(a) {}
  int components() const override { return m_; }
  void eval(const double* u, double* f) const override {
    for (int i = 0; i < m_; ++i) f[i] = u[i] * (1.0 - u[i]) * (u[i] - a_);
  }
  bool has_jacobian() const override { return true; }
  void jacobian(const double* u, double* jac) const override {
    for (int i = 0; i < m_; ++i) {
      for (int j = 0; j < m_; ++j) jac[i * m_ + j] = 0.0;
      jac[i * m_ + i] = -3.0 * u[i] * u[i] + 2.0 * (1.0 + a_) * u[i] - a_;
    }
  }
  void eval_soa(const double* const* u, double* const* f, std::size_t n) const override {
    for (int i = 0; i < m_; ++i) {
      const double* ui = u[i];
      double* fi = f[i];
      for (std::size_t k = 0; k < n; ++k) fi[k] = ui[k] * (1.0 - ui[k]) * (ui[k] - a_);
    }
  }

 private:
  int m_;
  double a_;
};

class MonostableField final : public ReactionField {
 public:
  int components() const override { return 1; }
  void eval(const double* u, double* f) const override { f[0] = u[0] * (1.0 - u[0]); }
  bool has_jacobian() const override { return true; }
  void jacobian(const double* u, double* jac) const override { jac[0] = 1.0 - 2.0 * u[0]; }
};

class PolynomialField final : public ReactionField {
 public:
  explicit PolynomialField(std::vector<std::vector<Monomial>> terms) : terms_(std::move(terms)) {}
  int components() const override { return static_cast<int>(terms_.size()); }
  void eval(const double* u, double* f) const override {
    const int m = components();
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (const auto& t : terms_[i]) {
        double v = t.coeff;
        for (int j = 0; j < m; ++j) v *= ipow(u[j], t.exponents[j]);
        s += v;
      }
      f[i] = s;
    }
  }
  bool has_jacobian() const override { return true; }
  void jacobian(const double* u, double* jac) const override {
    const int m = components();
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (const auto& t : terms_[i]) {
          const int ej = t.exponents[j];
          if (ej == 0) continue;
          double v = t.coeff * ej * ipow(u[j], ej - 1);
          for (int k = 0; k < m; ++k)
            if (k != j) v *= ipow(u[k], t.exponents[k]);
          s += v;
        }
        jac[i * m + j] = s;
      }
    }
  }

 private:
  static double ipow(double x, int e) {
    double r = 1.0;
    for (int k = 0; k < e; ++k) r *= x;
    return r;
  }
  std::vector<std::vector<Monomial>> terms_;
};

Eigen::MatrixXd jac_at(const SystemDef& sys, const Eigen::VectorXd& u) {
  return jacobian(sys, std::span<const double>(u.data(), static_cast<std::size_t>(u.size())));
}

bool inside_box(const SystemDef& sys, const Eigen::VectorXd& u) {
  for (int i = 0; i < u.size(); ++i)
    if (!(u[i] > sys.box_lo() && u[i] < sys.box_hi())) return false;
  return true;
}

std::vector<Eigen::VectorXd> ball_samples(const Eigen::VectorXd& center, double radius, int n,
                                          std::mt19937_64& rng) {
  const int m = static_cast<int>(center.size());
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(static_cast<std::size_t>(n) + 2 * m + 1);
  pts.push_back(center);
  for (int k = 0; k < m; ++k) {
    for (double sgn : {-1.0, 1.0}) {
      Eigen::VectorXd p = center;
      p[k] += sgn * radius;
      pts.push_back(p);
    }
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int s = 0; s < n; ++s) {
    Eigen::VectorXd dir(m);
    for (int k = 0; k < m; ++k) dir[k] = gauss(rng);
    const double nrm = dir.norm();
    if (nrm == 0.0) continue;
    const double r = radius * std::pow(unif(rng), 1.0 / m);
    pts.push_back(center + (r / nrm) * dir);
  }
  return pts;
}

Eigen::VectorXd perron_vector(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  const auto& ev = es.eigenvalues();
  int best = 0;
  for (int k = 1; k < ev.size(); ++k)
    if (ev[k].real() > ev[best].real()) best = k;
  Eigen::VectorXd v = es.eigenvectors().col(best).real();
  if (v.sum() < 0.0) v = -v;
  return v;
}

// Largest lambda with a*r <= -lambda*r componentwise.
double best_lambda(const Eigen::MatrixXd& a, const Eigen::VectorXd& r) {
  const Eigen::VectorXd ar = a * r;
  double lam = std::numeric_limits<double>::infinity();
  for (int i = 0; i < r.size(); ++i) lam = std::min(lam, -ar[i] / r[i]);
  return lam;
}

struct EpsAttempt {
  bool ok = false;
  double varpi = 0.0;
  Eigen::MatrixXd mu0, mu1;
  std::string why;
};

Eigen::MatrixXd sampled_mu(const SystemDef& sys, const Eigen::VectorXd& e, double radius, int n,
                           std::mt19937_64& rng) {
  const int m = sys.m();
  Eigen::MatrixXd mu = Eigen::MatrixXd::Constant(m, m, -std::numeric_limits<double>::infinity());
  for (const auto& p : ball_samples(e, radius, n, rng)) {
    if (!inside_box(sys, p)) continue;
    mu = mu.cwiseMax(jac_at(sys, p));
  }
  // Strict upper bound with positive off-diagonals keeps the matrix irreducible.
  return mu.array() + 1e-8;
}

double cone_margin(const Eigen::MatrixXd& mu, const std::vector<Eigen::VectorXd>& pts) {
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& w : pts) {
    if ((w.array() <= 0.0).any()) continue;
    const Eigen::VectorXd aw = mu * w;
    for (int i = 0; i < w.size(); ++i) margin = std::min(margin, -aw[i] / w[i]);
  }
  return margin;
}

EpsAttempt try_eps(const SystemDef& sys, const PFData& pf, double eps, const AuditOptions& opts) {
  EpsAttempt out;
  const int m = sys.m();
  std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(m);
  out.mu0 = sampled_mu(sys, zero, 4.0 * eps, opts.ball_samples, rng);
  out.mu1 = sampled_mu(sys, one, 4.0 * eps, opts.ball_samples, rng);

  auto strictly_below = [](const Eigen::VectorXd& lhs, const Eigen::VectorXd& rhs) {
    return (lhs.array() < rhs.array()).all();
  };
  const Eigen::VectorXd P0 = pf.P0(), Q0 = pf.Q0(), P1 = pf.P1(), Q1 = pf.Q1();
  if (!strictly_below(out.mu0 * P0, -0.5 * pf.lambda0 * P0) ||
      !strictly_below(out.mu0 * Q0, -0.5 * pf.lambda0 * Q0)) {
    out.why = "neighborhood matrix at 0 not contracting on P0/Q0";
    return out;
  }
  if (!strictly_below(out.mu1 * P1, -0.5 * pf.lambda1 * P1) ||
      !strictly_below(out.mu1 * Q1, -0.5 * pf.lambda1 * Q1)) {
    out.why = "neighborhood matrix at 1 not contracting on P1/Q1";
    return out;
  }
  auto near0 = ball_samples(P0, 2.0 * eps, opts.ball_samples, rng);
  auto q0 = ball_samples(Q0, 2.0 * eps, opts.ball_samples, rng);
  near0.insert(near0.end(), q0.begin(), q0.end());
  auto near1 = ball_samples(P1, 2.0 * eps, opts.ball_samples, rng);
  auto q1 = ball_samples(Q1, 2.0 * eps, opts.ball_samples, rng);
  near1.insert(near1.end(), q1.begin(), q1.end());
  const double margin = std::min(cone_margin(out.mu0, near0), cone_margin(out.mu1, near1));
  if (!(margin > 0.0)) {
    out.why = "no positive cone margin";
    return out;
  }
  out.varpi = 0.5 * margin;
  out.ok = true;
  return out;
}

std::string vec_str(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << "(";
  for (int i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ")";
  return os.str();
}

}  // namespace

void ReactionField::jacobian(const double*, double*) const {
  throw Error(ErrorCode::invalid_argument, kModule, "field has no analytic Jacobian");
}

void ReactionField::eval_soa(const double* const* u, double* const* f, std::size_t n) const {
  const int m = components();
  double ub[8], fb[8];
  std::vector<double> uv, fv;
  double* up = ub;
  double* fp = fb;
  if (m > 8) {
    uv.resize(m);
    fv.resize(m);
    up = uv.data();
    fp = fv.data();
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (int i = 0; i < m; ++i) up[i] = u[i][k];
    eval(up, fp);
    for (int i = 0; i < m; ++i) f[i][k] = fp[i];
  }
}

SystemDef::SystemDef(std::string name, Vec diffusion, std::shared_ptr<const ReactionField> field,
                     double box_lo, double box_hi)
    : name_(std::move(name)),
      diffusion_(std::move(diffusion)),
      field_(std::move(field)),
      box_lo_(box_lo),
      box_hi_(box_hi) {
  if (!field_) throw Error(ErrorCode::invalid_argument, kModule, "null reaction field");
  if (field_->components() < 1)
    throw Error(ErrorCode::invalid_argument, kModule, "system needs at least one component");
  if (static_cast<int>(diffusion_.size()) != field_->components())
    throw Error(ErrorCode::dimension_mismatch, kModule,
                "diffusion has " + std::to_string(diffusion_.size()) + " entries, field has " +
                    std::to_string(field_->components()) + " components");
  if (!(box_lo_ < 0.0 && box_hi_ > 1.0))
    throw Error(ErrorCode::invalid_argument, kModule, "admissible box must contain [0,1]^m");
}

double SystemDef::Dbar() const { return *std::max_element(diffusion_.begin(), diffusion_.end()); }
double SystemDef::Dunder() const {
  return *std::min_element(diffusion_.begin(), diffusion_.end());
}

Vec eval_field(const SystemDef& sys, std::span<const double> u) {
  if (static_cast<int>(u.size()) != sys.m())
    throw Error(ErrorCode::dimension_mismatch, kModule, "state has wrong component count");
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(u[i] > sys.box_lo() && u[i] < sys.box_hi())) {
      std::ostringstream os;
      os << "u[" << i << "] = " << u[i] << " outside admissible box (" << sys.box_lo() << ", "
         << sys.box_hi() << ")";
      throw Error(ErrorCode::domain_violation, kModule, os.str());
    }
  }
  Vec f(u.size());
  sys.field().eval(u.data(), f.data());
  return f;
}

Eigen::MatrixXd finite_difference_jacobian(const SystemDef& sys, std::span<const double> u) {
  const int m = sys.m();
  Eigen::MatrixXd jac(m, m);
  Vec up(u.begin(), u.end()), um(u.begin(), u.end());
  const double base = std::cbrt(std::numeric_limits<double>::epsilon());
  for (int j = 0; j < m; ++j) {
    const double step = base * std::max(1.0, std::abs(u[j]));
    up[j] = u[j] + step;
    um[j] = u[j] - step;
    const Vec fp = eval_field(sys, up);
    const Vec fm = eval_field(sys, um);
    for (int i = 0; i < m; ++i) jac(i, j) = (fp[i] - fm[i]) / (up[j] - um[j]);
    up[j] = u[j];
    um[j] = u[j];
  }
  return jac;
}

Eigen::MatrixXd jacobian(const SystemDef& sys, std::span<const double> u) {
  if (!sys.field().has_jacobian()) return finite_difference_jacobian(sys, u);
  eval_field(sys, u);  // domain check
  const int m = sys.m();
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> jac(m, m);
  sys.field().jacobian(u.data(), jac.data());
  return jac;
}

SystemDef cubic_pair(double a, int m, Vec diffusion) {
  if (!(a > 0.0 && a < 1.0))
    throw Error(ErrorCode::invalid_argument, kModule, "cubic threshold must lie in (0,1)");
  if (m < 1) throw Error(ErrorCode::invalid_argument, kModule, "m must be positive");
  if (diffusion.empty()) diffusion.assign(static_cast<std::size_t>(m), 1.0);
  std::ostringstream name;
  name << "cubic_pair(a=" << a << ")";
  return SystemDef(name.str(), std::move(diffusion), std::make_shared<CubicField>(m, a));
}

SystemDef monostable_probe() {
  return SystemDef("monostable", {1.0}, std::make_shared<MonostableField>());
}

SystemDef polynomial_system(std::string name, Vec diffusion,
                            std::vector<std::vector<Monomial>> terms) {
  const std::size_t m = terms.size();
  for (auto& row : terms)
    for (auto& t : row) {
      if (t.exponents.size() != m)
        throw Error(ErrorCode::dimension_mismatch, kModule,
                    "monomial exponent list must have one entry per component");
      for (int e : t.exponents)
        if (e < 0) throw Error(ErrorCode::invalid_argument, kModule, "negative exponent");
    }
  return SystemDef(std::move(name), std::move(diffusion),
                   std::make_shared<PolynomialField>(std::move(terms)));
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::formula:
      return "formula";
    case Provenance::estimated:
      return "estimated";
    case Provenance::config:
      return "config";
  }
  return "unknown";
}

void ConstantsLedger::set_front(double speed, double a_fit, double b_fit) {
  c = {speed, Provenance::estimated, "front solver speed"};
  a = {a_fit, Provenance::estimated, "tail envelope fit"};
  b = {b_fit, Provenance::estimated, "tail envelope fit"};
  update_eta();
}

void ConstantsLedger::set_obstacle_radius(double radius, Provenance p, std::string origin) {
  L = {radius, p, std::move(origin)};
}

void ConstantsLedger::update_eta() {
  if (b.known() && c.known() && varpi.known())
    eta = {std::min(0.5 * b.value * c.value, 0.5 * varpi.value), Provenance::formula,
           "min(bc/2, varpi/2)"};
}

std::vector<std::pair<std::string, LedgerValue>> ConstantsLedger::entries() const {
  return {{"Lambda", Lambda}, {"varpi", varpi}, {"eps0", eps0}, {"Dbar", Dbar},
          {"Dunder", Dunder}, {"eta", eta},     {"a", a},       {"b", b},
          {"c", c},           {"L", L},         {"M", M}};
}

PFData complete_pf(PFData pf) {
  const auto m = pf.R0.size();
  if (m == 0 || pf.R1.size() != m)
    throw Error(ErrorCode::dimension_mismatch, kModule, "PF vectors must have equal length");
  if ((pf.R0.array() <= 0.0).any() || (pf.R1.array() <= 0.0).any())
    throw Error(ErrorCode::scaling_failure, kModule, "PF vectors must be strictly positive");
  if (pf.eta0 <= 0.0) pf.eta0 = 0.5 * (pf.R1.array() / pf.R0.array()).minCoeff();
  if (pf.eta1 <= 0.0) pf.eta1 = 0.5 * (pf.R0.array() / pf.R1.array()).minCoeff();
  if (!((pf.eta0 * pf.R0).array() < pf.R1.array()).all())
    throw Error(ErrorCode::scaling_failure, kModule, "eta0*R0 is not strictly below R1");
  if (!((pf.eta1 * pf.R1).array() < pf.R0.array()).all())
    throw Error(ErrorCode::scaling_failure, kModule, "eta1*R1 is not strictly below R0");
  pf.p_low = (pf.eta0 * pf.R0).minCoeff();
  pf.p_high = pf.R1.maxCoeff();
  pf.q_low = (pf.eta1 * pf.R1).minCoeff();
  pf.q_high = pf.R0.maxCoeff();
  return pf;
}

double PQFunctions::chi(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return s * s * s * (s * (6.0 * s - 15.0) + 10.0);
}

double PQFunctions::chi_d1(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  const double t = s * (1.0 - s);
  return 30.0 * t * t;
}

double PQFunctions::chi_d2(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  return 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
}

PQFunctions::PQFunctions(PFData pf) : pf_(complete_pf(std::move(pf))) {
  double chi_sup = 0.0;
  constexpr int kScan = 100000;
  for (int k = 0; k <= kScan; ++k) {
    const double s = static_cast<double>(k) / kScan;
    chi_sup = std::max(chi_sup, std::abs(chi_d1(s)) + std::abs(chi_d2(s)));
  }
  chi_sup *= 1.0 + 1e-6;
  const Eigen::VectorXd dp = pf_.P1() - pf_.P0();
  const Eigen::VectorXd dq = pf_.Q0() - pf_.Q1();
  M_ = (dp.cwiseAbs() + dq.cwiseAbs()).maxCoeff() * chi_sup;
}

double PQFunctions::p(int i, double s, int deriv) const {
  const double lo = pf_.eta0 * pf_.R0[i], hi = pf_.R1[i];
  switch (deriv) {
    case 0:
      return chi(s) * hi + (1.0 - chi(s)) * lo;
    case 1:
      return chi_d1(s) * (hi - lo);
    default:
      return chi_d2(s) * (hi - lo);
  }
}

double PQFunctions::q(int i, double s, int deriv) const {
  const double lo = pf_.R0[i], hi = pf_.eta1 * pf_.R1[i];
  switch (deriv) {
    case 0:
      return chi(s) * hi + (1.0 - chi(s)) * lo;
    case 1:
      return chi_d1(s) * (hi - lo);
    default:
      return chi_d2(s) * (hi - lo);
  }
}

PQFunctions build_pq(const PFData& pf) { return PQFunctions(pf); }

double spectral_abscissa(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

bool is_irreducible(const Eigen::MatrixXd& a, double tol) {
  const int n = static_cast<int>(a.rows());
  if (n <= 1) return true;
  auto reach_all = [&](bool transpose) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (int j = 0; j < n; ++j) {
        const double v = transpose ? a(j, i) : a(i, j);
        if (j != i && v > tol && !seen[j]) {
          seen[j] = 1;
          stack.push_back(j);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  return reach_all(false) && reach_all(true);
}

AssumptionReport audit_assumptions(const SystemDef& sys, const AuditOptions& opts) {
  if (opts.lattice < 2)
    throw Error(ErrorCode::invalid_argument, kModule, "sampling needs at least 2 points per axis");
  const int m = sys.m();
  if (m > 4)
    throw Error(ErrorCode::invalid_argument, kModule, "audit supports at most 4 components");

  AssumptionReport rep;
  rep.a1_ok = std::all_of(sys.D().begin(), sys.D().end(), [](double d) { return d > 0.0; });
  if (!rep.a1_ok)
    throw AssumptionError(ErrorCode::a1_failure, "diffusion rates must be positive", rep);

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(m);
  {
    const Vec f0 = eval_field(sys, std::span<const double>(zero.data(), m));
    const Vec f1 = eval_field(sys, std::span<const double>(one.data(), m));
    for (int i = 0; i < m; ++i)
      rep.equilibrium_residual =
          std::max({rep.equilibrium_residual, std::abs(f0[i]), std::abs(f1[i])});
  }
  const Eigen::MatrixXd J0 = jac_at(sys, zero);
  const Eigen::MatrixXd J1 = jac_at(sys, one);
  rep.eig0 = Eigen::EigenSolver<Eigen::MatrixXd>(J0, false).eigenvalues();
  rep.eig1 = Eigen::EigenSolver<Eigen::MatrixXd>(J1, false).eigenvalues();
  rep.abscissa0 = rep.eig0.real().maxCoeff();
  rep.abscissa1 = rep.eig1.real().maxCoeff();
  rep.a2_ok = rep.equilibrium_residual <= 1e-12 && rep.abscissa0 < 0.0 && rep.abscissa1 < 0.0;
  if (!rep.a2_ok) {
    std::ostringstream os;
    if (rep.equilibrium_residual > 1e-12)
      os << "0 or 1 is not an equilibrium (|F| = " << rep.equilibrium_residual << ")";
    else
      os << "unstable equilibrium: spectral abscissa at 0 = " << rep.abscissa0 << ", at 1 = "
         << rep.abscissa1;
    throw AssumptionError(ErrorCode::a2_failure, os.str(), rep);
  }

  // Lattice plus random sampling of the order interval for (A4) and Lambda.
  int lattice = opts.lattice;
  while (lattice > 2 && std::pow(static_cast<double>(lattice), m) > std::pow(17.0, 4)) --lattice;
  std::vector<Eigen::VectorXd> samples;
  {
    std::vector<int> idx(static_cast<std::size_t>(m), 0);
    for (;;) {
      Eigen::VectorXd p(m);
      for (int i = 0; i < m; ++i) p[i] = static_cast<double>(idx[i]) / (lattice - 1);
      samples.push_back(p);
      int k = 0;
      while (k < m && ++idx[k] == lattice) idx[k++] = 0;
      if (k == m) break;
    }
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int s = 0; s < opts.random_samples; ++s) {
      Eigen::VectorXd p(m);
      for (int i = 0; i < m; ++i) p[i] = unif(rng);
      samples.push_back(p);
    }
  }
  rep.min_offdiag = m > 1 ? std::numeric_limits<double>::infinity() : 0.0;
  double lambda_big = 0.0;
  Eigen::VectorXd lambda_at = zero;
  for (const auto& p : samples) {
    const Eigen::MatrixXd J = jac_at(sys, p);
    for (int i = 0; i < m; ++i) {
      const double rowsum = J.row(i).cwiseAbs().sum();
      if (rowsum > lambda_big) {
        lambda_big = rowsum;
        lambda_at = p;
      }
      for (int j = 0; j < m; ++j) {
        if (i != j && J(i, j) < rep.min_offdiag) {
          rep.min_offdiag = J(i, j);
          rep.min_offdiag_at.assign(p.data(), p.data() + m);
        }
      }
    }
  }
  rep.ledger.Lambda = {lambda_big, Provenance::estimated,
                       "sampled sup of Jacobian absolute row sums"};
  rep.ledger.Lambda_at.assign(lambda_at.data(), lambda_at.data() + m);
  rep.ledger.Dbar = {sys.Dbar(), Provenance::formula, "max diffusion rate"};
  rep.ledger.Dunder = {sys.Dunder(), Provenance::formula, "min diffusion rate"};
  rep.a4_ok = rep.min_offdiag >= -1e-12;
  if (!rep.a4_ok) {
    std::ostringstream os;
    os << "negative off-diagonal Jacobian entry " << rep.min_offdiag << " at u = (";
    for (int i = 0; i < m; ++i) os << (i ? ", " : "") << rep.min_offdiag_at[i];
    os << ")";
    throw AssumptionError(ErrorCode::a4_failure, os.str(), rep);
  }

  // Perron-Frobenius data.
  PFData pf;
  const PFSeed* seed = opts.pf_override ? &*opts.pf_override : (sys.pf_seed ? &*sys.pf_seed : nullptr);
  if (seed) {
    if (seed->R0.size() != m || seed->R1.size() != m)
      throw Error(ErrorCode::dimension_mismatch, kModule, "PF vectors have wrong length");
    pf.R0 = seed->R0;
    pf.R1 = seed->R1;
    pf.lambda0 = seed->lambda0 > 0.0 ? seed->lambda0 : best_lambda(J0, pf.R0);
    pf.lambda1 = seed->lambda1 > 0.0 ? seed->lambda1 : best_lambda(J1, pf.R1);
    pf.source = seed->source.empty() ? "user" : seed->source;
  } else {
    auto pick = [&](const Eigen::MatrixXd& J, std::string& src) {
      if (is_irreducible(J)) {
        Eigen::VectorXd v = perron_vector(J);
        if ((v.array() > 0.0).all()) {
          src = "perron";
          return Eigen::VectorXd(v / v.minCoeff());
        }
      }
      src = "uniform";
      return Eigen::VectorXd(Eigen::VectorXd::Ones(m));
    };
    std::string s0, s1;
    pf.R0 = pick(J0, s0);
    pf.R1 = pick(J1, s1);
    pf.lambda0 = best_lambda(J0, pf.R0);
    pf.lambda1 = best_lambda(J1, pf.R1);
    pf.source = s0 + "/" + s1;
  }
  pf.eta0 = opts.eta0;
  pf.eta1 = opts.eta1;
  rep.a3_residual0 = (J0 * pf.R0 + pf.lambda0 * pf.R0).maxCoeff();
  rep.a3_residual1 = (J1 * pf.R1 + pf.lambda1 * pf.R1).maxCoeff();
  rep.a3_ok = (pf.R0.array() > 0.0).all() && (pf.R1.array() > 0.0).all() && pf.lambda0 > 0.0 &&
              pf.lambda1 > 0.0 && rep.a3_residual0 <= 1e-10 && rep.a3_residual1 <= 1e-10;
  rep.pf = pf;
  if (!rep.a3_ok) {
    std::ostringstream os;
    os << "no valid positive vector: R0 = " << vec_str(pf.R0) << " (lambda0 = " << pf.lambda0
       << ", residual " << rep.a3_residual0 << "), R1 = " << vec_str(pf.R1)
       << " (lambda1 = " << pf.lambda1 << ", residual " << rep.a3_residual1 << ")";
    throw AssumptionError(ErrorCode::a3_failure, os.str(), rep);
  }
  pf = complete_pf(pf);
  rep.pf = pf;
  const PQFunctions pq(pf);
  rep.ledger.M = {pq.M(), Provenance::formula, "sup of |p'|+|p''|+|q'|+|q''| over the smoothstep"};

  // Neighborhood radius and decay margin, halving until the sampled conditions hold.
  double eps = std::min(pf.p_low, pf.q_low) / 8.0;
  EpsAttempt att;
  int halvings = 0;
  for (; halvings < 40; ++halvings) {
    att = try_eps(sys, pf, eps, opts);
    if (att.ok) break;
    eps *= 0.5;
  }
  if (!att.ok)
    throw AssumptionError(ErrorCode::a3_failure,
                          "no neighborhood radius satisfies the decay-margin conditions: " + att.why,
                          rep);
  if (halvings > 0)
    rep.notes.push_back("eps0 halved " + std::to_string(halvings) +
                        " times from min(p_*, q_*)/8 to satisfy the sampled margin conditions");
  rep.ledger.eps0 = {eps, Provenance::estimated,
                     halvings ? "min(p_*,q_*)/8 halved until margins hold" : "min(p_*,q_*)/8"};
  rep.ledger.varpi = {att.varpi, Provenance::estimated, "half the sampled cone margin"};
  rep.ledger.mu0 = att.mu0;
  rep.ledger.mu1 = att.mu1;
  return rep;
}

}  // namespace obsfront
