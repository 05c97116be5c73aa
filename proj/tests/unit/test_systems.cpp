#include "doctest.h"

#include <cmath>
#include <random>

#include "obsfront/lotka.hpp"
#include "obsfront/system.hpp"

using namespace obsfront;

namespace {
Vec at(const SystemDef& s, std::initializer_list<double> u) {
  Vec v(u);
  return eval_field(s, v);
}
}  // namespace

TEST_CASE("eval_field at equilibria and a hand-evaluated LV point") {
  const auto cubic = cubic_pair(0.25);
  const auto f0 = at(cubic, {0.0, 0.0});
  CHECK(f0[0] == 0.0);
  CHECK(f0[1] == 0.0);
  const auto lv = lv_system({1.1, 2.0, 1.0, 1.0});
  const auto f1 = at(lv, {1.0, 1.0});
  CHECK(std::fabs(f1[0]) < 1e-15);
  CHECK(std::fabs(f1[1]) < 1e-15);
  // 0.5 (1 - 1.1 - 0.5) and (1 - 0)(2 * 0.5 - 0)
  const auto f2 = at(lv, {0.5, 0.0});
  CHECK(f2[0] == doctest::Approx(-0.3).epsilon(1e-14));
  CHECK(f2[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("cubic field matches u(1-u)(u-a) componentwise") {
  const auto s = cubic_pair(0.3);
  const auto f = at(s, {0.5, 0.8});
  CHECK(f[0] == doctest::Approx(0.5 * 0.5 * 0.2));
  CHECK(f[1] == doctest::Approx(0.8 * 0.2 * 0.5));
}

TEST_CASE("analytic Jacobians") {
  const auto lv = lv_system({1.1, 2.0, 1.0, 1.0});
  Vec z{0.0, 0.0}, o{1.0, 1.0};
  auto j0 = jacobian(lv, z);
  CHECK(j0(0, 0) == doctest::Approx(-0.1));
  CHECK(j0(0, 1) == doctest::Approx(0.0));
  CHECK(j0(1, 0) == doctest::Approx(2.0));
  CHECK(j0(1, 1) == doctest::Approx(-1.0));
  auto j1 = jacobian(lv, o);
  CHECK(j1(0, 0) == doctest::Approx(-1.0));
  CHECK(j1(0, 1) == doctest::Approx(1.1));
  CHECK(j1(1, 0) == doctest::Approx(0.0));
  CHECK(j1(1, 1) == doctest::Approx(-1.0));
  auto jc = jacobian(cubic_pair(0.25), z);
  CHECK(jc(0, 0) == doctest::Approx(-0.25));
  CHECK(jc(1, 1) == doctest::Approx(-0.25));
  CHECK(jc(0, 1) == 0.0);
  CHECK(jc(1, 0) == 0.0);
}

TEST_CASE("analytic Jacobian agrees with finite differences on random states") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (const auto& s : {cubic_pair(0.25), lv_system({1.3, 2.5, 0.7, 1.4})}) {
    for (int k = 0; k < 50; ++k) {
      Vec u{U(rng), U(rng)};
      const auto a = jacobian(s, u);
      const auto f = finite_difference_jacobian(s, u);
      CHECK((a - f).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("LV audit reproduces the closed-form PF data") {
  const auto rep = audit_assumptions(lv_system({1.1, 2.0, 1.0, 1.0}));
  CHECK(rep.ok());
  std::vector<double> ev{rep.eig0[0].real(), rep.eig0[1].real()};
  std::sort(ev.begin(), ev.end());
  CHECK(ev[0] == doctest::Approx(-1.0));
  CHECK(ev[1] == doctest::Approx(-0.1));
  CHECK(rep.pf.R0[0] == doctest::Approx(1.0));
  CHECK(rep.pf.R0[1] == doctest::Approx(4.0));
  CHECK(rep.pf.R1[0] == doctest::Approx(2.2));
  CHECK(rep.pf.R1[1] == doctest::Approx(1.0));
  // 1/2 min(r/2, k1 - 1)
  CHECK(rep.pf.lambda0 == doctest::Approx(0.05));
  CHECK(rep.min_offdiag >= 0.0);
}

TEST_CASE("decoupled cubic pair: zero off-diagonals, unit PF vectors") {
  const auto rep = audit_assumptions(cubic_pair(0.25));
  CHECK(rep.ok());
  CHECK(rep.min_offdiag == 0.0);
  for (int i = 0; i < 2; ++i) {
    CHECK(rep.pf.R0[i] == doctest::Approx(1.0));
    CHECK(rep.pf.R1[i] == doctest::Approx(1.0));
  }
  // eta needs the front data.
  CHECK_FALSE(rep.ledger.eta.known());
  ConstantsLedger L = rep.ledger;
  L.set_front(0.35, 1.0, 0.7);
  CHECK(L.eta.value == doctest::Approx(std::min(0.35 * 0.7 / 2.0, L.varpi.value / 2.0)));
}

TEST_CASE("monostable probe fails A2 at zero") {
  bool thrown = false;
  try {
    audit_assumptions(monostable_probe());
  } catch (const AssumptionError& e) {
    thrown = true;
    CHECK(e.code() == ErrorCode::a2_failure);
    CHECK(e.report().abscissa0 == doctest::Approx(1.0));
  }
  CHECK(thrown);
}

TEST_CASE("ledger Lambda bounds Jacobian row sums at fresh random states") {
  const auto s = lv_system({1.5, 3.0, 2.0, 0.5});
  const auto rep = audit_assumptions(s);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 5000; ++k) {
    Vec u{U(rng), U(rng)};
    worst = std::max(worst, jacobian(s, u).cwiseAbs().rowwise().sum().maxCoeff());
  }
  // Sampling can miss the sup by a little; the corners hold the extremes here.
  CHECK(rep.ledger.Lambda.value >= worst * (1.0 - 1e-3));
}

TEST_CASE("P and Q interpolate the PF endpoints monotonically") {
  PFData pf;
  pf.R0 = Eigen::Vector2d(1.0, 4.0);
  pf.R1 = Eigen::Vector2d(2.2, 1.0);
  pf.lambda0 = 0.05;
  pf.lambda1 = 0.25;
  pf.eta0 = 0.2;
  pf.eta1 = 0.2;
  pf = complete_pf(pf);
  // eta0 R0 = (0.2, 0.8) lies strictly below R1.
  CHECK(pf.P0()[0] == doctest::Approx(0.2));
  CHECK(pf.P0()[1] == doctest::Approx(0.8));
  CHECK((pf.P0().array() < pf.P1().array()).all());
  const PQFunctions pq(pf);
  for (int i = 0; i < 2; ++i) {
    CHECK(pq.p(i, -1.0) == doctest::Approx(pf.P0()[i]));
    CHECK(pq.q(i, -1.0) == doctest::Approx(pf.Q0()[i]));
    CHECK(pq.p(i, 2.0) == doctest::Approx(pf.P1()[i]));
    CHECK(pq.q(i, 2.0) == doctest::Approx(pf.Q1()[i]));
    double sup = 0.0;
    for (int k = 0; k <= 400; ++k) {
      const double x = -1.0 + 3.0 * k / 400.0;
      CHECK(pq.p(i, x, 1) >= -1e-15);
      CHECK(pq.q(i, x, 1) <= 1e-15);
      CHECK(pq.p(i, x) >= std::min(pf.P0()[i], pf.P1()[i]) - 1e-15);
      CHECK(pq.p(i, x) <= std::max(pf.P0()[i], pf.P1()[i]) + 1e-15);
      sup = std::max(sup, std::fabs(pq.p(i, x, 1)) + std::fabs(pq.p(i, x, 2)) + std::fabs(pq.q(i, x, 1)) +
                              std::fabs(pq.q(i, x, 2)));
    }
    CHECK(sup <= pq.M() + 1e-12);
  }
}

TEST_CASE("smoothstep endpoints") {
  CHECK(PQFunctions::chi(0.0) == 0.0);
  CHECK(PQFunctions::chi(1.0) == 1.0);
  CHECK(PQFunctions::chi(-3.0) == 0.0);
  CHECK(PQFunctions::chi(5.0) == 1.0);
  CHECK(PQFunctions::chi(0.5) == doctest::Approx(0.5));
  CHECK(PQFunctions::chi_d1(0.0) == 0.0);
  CHECK(PQFunctions::chi_d2(1.0) == doctest::Approx(0.0));
}

TEST_CASE("invalid diffusion is rejected") {
  CHECK_THROWS_AS(audit_assumptions(cubic_pair(0.25, 2, {1.0, -1.0})), Error);
}
