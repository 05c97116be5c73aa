#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "obsfront/front1d.hpp"
#include "obsfront/lotka.hpp"

using namespace obsfront;

namespace {
const double kC = (1.0 - 2.0 * 0.25) / std::sqrt(2.0);
double closed_form(double xi) { return 1.0 / (1.0 + std::exp(-xi / std::sqrt(2.0))); }

const FrontProfile& cubic_front() {
  static const FrontProfile f = [] {
    FrontOptions o;
    o.h = 0.05;
    o.half_width = 30.0;
    return solve_planar_front(cubic_pair(0.25), o);
  }();
  return f;
}
}  // namespace

TEST_CASE("cubic front speed and profile against the closed form") {
  const auto& f = cubic_front();
  CHECK(std::fabs(f.c() - kC) / kC < 1e-2);
  CHECK(std::fabs(f.c() - kC) < 1e-4);
  double err = 0.0;
  for (int j = 0; j < f.size(); ++j)
    for (int i = 0; i < 2; ++i) err = std::max(err, std::fabs(f.values(i)[j] - closed_form(f.xi(j))));
  CHECK(err < 1e-3);
  CHECK(f.strictly_increasing);
  CHECK(f.residual <= 1e-9);
  for (int i = 0; i < 2; ++i) {
    CHECK(f.values(i).front() <= 1e-4);
    CHECK(1.0 - f.values(i).back() <= 1e-4);
  }
  CHECK(f.value(0, 0.0) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("front residual is minimal at the computed speed") {
  const auto& f = cubic_front();
  const auto sys = cubic_pair(0.25);
  CHECK(front_residual(sys, f, f.c()) <= 1e-9);
  CHECK(front_residual(sys, f, f.c() + 0.05) > 1e-3);
}

TEST_CASE("off-grid evaluation interpolates value and derivatives") {
  const auto& f = cubic_front();
  double phi[2], d1[2], d2[2];
  f.eval(0.37, phi, d1, d2);
  const double p = closed_form(0.37);
  CHECK(phi[0] == doctest::Approx(p).epsilon(1e-4));
  CHECK(d1[0] == doctest::Approx(p * (1 - p) / std::sqrt(2.0)).epsilon(1e-3));
  // Saturation outside the grid.
  CHECK(f.value(0, -1e3) == 0.0);
  CHECK(f.value(0, 1e3) == 1.0);
}

TEST_CASE("decay fit recovers the 1/sqrt(2) tail rate") {
  const auto& f = cubic_front();
  const auto rep = front_diagnostics(f, cubic_pair(0.25));
  CHECK(std::fabs(rep.b - 1.0 / std::sqrt(2.0)) / (1.0 / std::sqrt(2.0)) < 0.03);
  CHECK(rep.envelope_ok);
  CHECK(rep.impo_ok);
  // Phi'' changes sign at the half level of the symmetric profile.
  CHECK(std::fabs(rep.Cconc) <= 2.0 * f.h());
  double ratio = 0.0;
  for (int j = 0; j < f.size(); ++j)
    for (int i = 0; i < 2; ++i)
      if (f.slopes(i)[j] > 0.0) ratio = std::max(ratio, std::fabs(f.curvatures(i)[j]) / f.slopes(i)[j]);
  CHECK(rep.Kbar1 >= ratio * (1.0 - 1e-12));
}

TEST_CASE("LV fronts: symmetric parameters give zero speed, P2 parameters positive speed") {
  FrontOptions o;
  o.half_width = 20.0;
  const auto sym = solve_planar_front(lv_system({2.0, 2.0, 1.0, 1.0}), o);
  CHECK(std::fabs(sym.c()) <= 1e-3);
  const auto pos = solve_planar_front(lv_system({1.1, 2.0, 1.0, 1.0}), o);
  CHECK(pos.c() > 0.0);
  CHECK(pos.strictly_increasing);
}

TEST_CASE("half-line ground state of the cubic pair") {
  HalflineOptions ho;
  ho.half_width = 40.0;
  const auto hl = solve_halfline_ground_state(cubic_pair(0.25), cubic_front(), ho);
  for (const auto& v : hl.values) {
    CHECK(v.front() == 0.0);
    CHECK(v.back() >= 0.999);
    for (std::size_t j = 1; j < v.size(); ++j) CHECK(v[j] > v[j - 1]);
  }
  CHECK(hl.residual <= 1e-6);
  CHECK(hl.increasing);
  CHECK(hl.min_time_increment >= 0.0);
}

TEST_CASE("half-line ground state of the LV system") {
  FrontOptions o;
  o.half_width = 20.0;
  const auto sys = lv_system({1.1, 2.0, 1.0, 1.0});
  const auto f = solve_planar_front(sys, o);
  const auto hl = solve_halfline_ground_state(sys, f);
  REQUIRE(hl.values.size() == 2);
  CHECK(hl.values[0].front() == 0.0);
  CHECK(hl.values[1].front() == 0.0);
  CHECK(hl.increasing);
}

TEST_CASE("profile file round trip") {
  const auto& f = cubic_front();
  const auto rep = front_diagnostics(f, cubic_pair(0.25));
  const std::string path = "test_front_profile.txt";
  write_front_profile(path, f, rep);
  const auto g = read_front_profile(path);
  CHECK(g.size() == f.size());
  CHECK(g.c() == doctest::Approx(f.c()).epsilon(1e-14));
  CHECK(g.values(1)[100] == doctest::Approx(f.values(1)[100]).epsilon(1e-14));
  std::remove(path.c_str());
}

TEST_CASE("fit fails cleanly when the tails are all round-off") {
  FrontOptions o;
  o.half_width = 120.0;
  o.h = 0.1;
  const auto sys = lv_system({1.1, 2.0, 1.0, 1.0});
  const auto f = solve_planar_front(sys, o);
  CHECK_THROWS_AS(front_diagnostics(f, sys), Error);
}
