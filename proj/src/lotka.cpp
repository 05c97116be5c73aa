#include "obsfront/lotka.hpp"

#include <algorithm>
#include <sstream>

namespace obsfront {

namespace {

class LVCooperativeField final : public ReactionField {
 public:
  explicit LVCooperativeField(const LVParams& p) : p_(p) {}
  int components() const override { return 2; }
  void eval(const double* u, double* f) const override {
    f[0] = u[0] * (1.0 - p_.k1 - u[0] + p_.k1 * u[1]);
    f[1] = p_.r * (1.0 - u[1]) * (p_.k2 * u[0] - u[1]);
  }
  bool has_jacobian() const override { return true; }
  void jacobian(const double* u, double* jac) const override {
    jac[0] = 1.0 - p_.k1 - 2.0 * u[0] + p_.k1 * u[1];
    jac[1] = p_.k1 * u[0];
    jac[2] = p_.r * p_.k2 * (1.0 - u[1]);
    jac[3] = p_.r * (2.0 * u[1] - p_.k2 * u[0] - 1.0);
  }
  void eval_soa(const double* const* u, double* const* f, std::size_t n) const override {
    const double* a = u[0];
    const double* b = u[1];
    double* fa = f[0];
    double* fb = f[1];
    const double k1 = p_.k1, k2 = p_.k2, r = p_.r;
    for (std::size_t k = 0; k < n; ++k) {
      fa[k] = a[k] * (1.0 - k1 - a[k] + k1 * b[k]);
      fb[k] = r * (1.0 - b[k]) * (k2 * a[k] - b[k]);
    }
  }

 private:
  LVParams p_;
};

}  // namespace

void validate(const LVParams& p) {
  if (!(p.k1 > 1.0 && p.k2 > 1.0 && p.r > 0.0 && p.d > 0.0)) {
    std::ostringstream os;
    os << "need k1 > 1, k2 > 1, r > 0, d > 0; got k1=" << p.k1 << " k2=" << p.k2 << " r=" << p.r
       << " d=" << p.d;
    throw Error(ErrorCode::invalid_params, "lotka-app", os.str());
  }
}

SystemDef lv_system(const LVParams& p) {
  validate(p);
  std::ostringstream name;
  name << "lv(k1=" << p.k1 << ", k2=" << p.k2 << ", r=" << p.r << ", d=" << p.d << ")";
  SystemDef sys(name.str(), {1.0, p.d}, std::make_shared<LVCooperativeField>(p));
  PFSeed seed;
  seed.R0 = Eigen::Vector2d(1.0, 2.0 * p.k2);
  seed.R1 = Eigen::Vector2d(2.0 * p.k1, 1.0);
  seed.lambda0 = 0.5 * std::min(0.5 * p.r, p.k1 - 1.0);
  seed.lambda1 = 0.5 * std::min(0.5, p.r * (p.k2 - 1.0));
  seed.source = "lv-closed-form";
  sys.pf_seed = seed;
  return sys;
}

std::array<double, 2> lv_competitive_field(const LVParams& p, std::array<double, 2> u) {
  return {u[0] * (1.0 - u[0] - p.k1 * u[1]), p.r * u[1] * (1.0 - u[1] - p.k2 * u[0])};
}

std::array<double, 2> lv_transform(std::array<double, 2> u) { return {u[0], 1.0 - u[1]}; }
std::array<double, 2> lv_inverse_transform(std::array<double, 2> u) { return lv_transform(u); }

LVSpeedConditions lv_speed_conditions(const LVParams& p, int n_max) {
  validate(p);
  LVSpeedConditions out;
  const double k1 = p.k1, k2 = p.k2, r = p.r, d = p.d;
  const double den = d - r * (k2 - 1.0);
  if (den > 0.0) {
    const double x = d * k1 / den;
    out.P1 = 1.0 < x && x < 2.0 * (k2 - 1.0) / k2;
  }
  out.P2 = (r + d * (k1 - 1.0)) / (k2 * r) < 3.0 - 2.0 * k1;
  if (k2 > 2.0) {
    for (int n = 2; n <= n_max && !out.P3; ++n) {
      const double nn = n;
      if (!(1.0 < k1 && k1 < 1.0 + nn / ((nn - 1.0) * (2.0 * nn - 1.0)))) continue;
      const double base = d * (k1 - 1.0) * (nn - 1.0) * (nn - 1.0) / (nn * nn);
      const bool w1 = 2.0 * base / k2 < r && r < base;
      const bool w2 = base / k2 < r && r < 2.0 * base;
      if (w1 || w2) {
        out.P3 = true;
        out.p3_witness_n = n;
      }
    }
  }
  out.P4 = (2.0 * r + 4.0 * d * (k1 - 1.0)) / (r * k2) < 3.0 - k1;
  return out;
}

}  // namespace obsfront
