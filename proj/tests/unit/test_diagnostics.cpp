#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "obsfront/diagnostics.hpp"

using namespace obsfront;

namespace {
std::shared_ptr<const FrontProfile> cubic_front() {
  static auto f = std::make_shared<const FrontProfile>(solve_planar_front(cubic_pair(0.25)));
  return f;
}

StateGrid sample_front(const MaskedGrid& g, double shift) {
  StateGrid s;
  s.m = 2;
  s.nx = g.nx;
  s.ny = g.ny;
  s.u.assign(2, Vec(static_cast<std::size_t>(g.nx * g.ny)));
  for (int c = 0; c < g.nx * g.ny; ++c) {
    double p[2];
    cubic_front()->eval(g.center(c).x + shift, p);
    for (int i = 0; i < 2; ++i) s.u[i][c] = g.is_fluid(c) ? p[i] : std::nan("");
  }
  return s;
}
}  // namespace

TEST_CASE("planar front interface is the line x1 = 0") {
  const auto g = make_mask(make_no_obstacle(), {-15, 15, -2, 2}, 0.1);
  const auto I = interface_set(sample_front(g, 0.0), g);
  CHECK(std::fabs(I.mean_x) <= g.h);
  for (const auto& seg : I.segments) {
    CHECK(std::fabs(seg.first.x) <= g.h);
    CHECK(std::fabs(seg.second.x) <= g.h);
  }
  CHECK(I.length == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("saturated states have no interface") {
  const auto g = make_mask(make_disk(1.0), {-4, 4, -4, 4}, 0.1);
  auto s = sample_front(g, 100.0);
  try {
    interface_set(s, g);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_interface);
  }
  CHECK_THROWS_AS(front_width(s, g, 0.1), Error);
}

TEST_CASE("geodesic distance: exact along axes, longer than Euclidean around a disk") {
  const auto g = make_mask(make_no_obstacle(), {-3, 3, -1, 1}, 0.1);
  const int a = g.index(5, 10), b = g.index(45, 10);
  const auto d = geodesic_distance(g, {{a, 0.0}});
  CHECK(d[b] == doctest::Approx(4.0).epsilon(1e-12));
  const auto gd = make_mask(make_disk(1.0), {-5, 5, -5, 5}, 0.05);
  int src = -1, dst = -1;
  for (int c = 0; c < gd.nx * gd.ny; ++c) {
    const auto p = gd.center(c);
    if (std::fabs(p.y - 0.025) < 1e-9 && std::fabs(p.x + 2.025) < 1e-9) src = c;
    if (std::fabs(p.y - 0.025) < 1e-9 && std::fabs(p.x - 2.025) < 1e-9) dst = c;
  }
  REQUIRE(src >= 0);
  REQUIRE(dst >= 0);
  const auto dd = geodesic_distance(gd, {{src, 0.0}});
  // Two tangent segments and the arc between the tangent points.
  const double r = 2.025;
  const double exact = 2.0 * std::sqrt(r * r - 1.0) + (M_PI - 2.0 * std::acos(1.0 / r));
  CHECK(dd[dst] > 4.05);
  CHECK(dd[dst] >= exact * (1.0 - 1e-9));
  CHECK(dd[dst] <= exact * 1.09);
  for (int c = 0; c < gd.nx * gd.ny; ++c)
    if (std::isfinite(dd[c])) {
      const auto p = gd.center(c), q = gd.center(src);
      CHECK(dd[c] >= std::hypot(p.x - q.x, p.y - q.y) - 1e-9);
    }
}

TEST_CASE("interface distance of shifted planar fronts") {
  const auto g = make_mask(make_no_obstacle(), {-15, 15, -2, 2}, 0.1);
  const auto A = interface_set(sample_front(g, 0.0), g);
  const auto B = interface_set(sample_front(g, -1.3), g);
  CHECK(interface_distance(A, B, g) == doctest::Approx(1.3).epsilon(0.05));
  CHECK(interface_distance(A, A, g) <= 1e-9);
}

TEST_CASE("global mean speed of an obstacle-free run is the front speed") {
  Scenario s(cubic_pair(0.25));
  s.grid = make_mask(make_no_obstacle(), {-15, 15, -2, 2}, 0.1);
  s.front = cubic_front();
  s.front_shift = -8.0;
  s.t_end = 40.0;
  s.snapshot_every = 2.0;
  s.keep_states = true;
  const auto tr = run(s);
  const auto sp = global_mean_speed(tr, s.grid);
  const double c = cubic_front()->c();
  CHECK(std::fabs(sp.gamma - c) <= 0.05 * c);
  CHECK(sp.gamma >= 0.0);
  for (const auto& p : sp.pairs) CHECK(p.dt >= 0.5 * 40.0 - 1e-9);
}

TEST_CASE("stationary interfaces have zero speed") {
  const auto g = make_mask(make_no_obstacle(), {-15, 15, -2, 2}, 0.1);
  const auto I = interface_set(sample_front(g, 0.0), g);
  std::vector<Interface> seq;
  for (int k = 0; k < 12; ++k) {
    seq.push_back(I);
    seq.back().t = k;
  }
  const auto sp = global_mean_speed(seq, g);
  CHECK(std::fabs(sp.gamma) <= 1e-3);
  seq.resize(4);
  CHECK_THROWS_AS(global_mean_speed(seq, g), Error);
}

TEST_CASE("front width of the exact profile") {
  const auto g = make_mask(make_no_obstacle(), {-20, 20, -1, 1}, 0.1);
  const auto s = sample_front(g, 0.0);
  for (double eps : {0.1, 0.01}) {
    // Phi exits [eps, 1 - eps] at |xi| = sqrt(2) log((1 - eps)/eps).
    const double analytic = std::sqrt(2.0) * std::log((1.0 - eps) / eps);
    const auto w = front_width(s, g, eps);
    CHECK(std::fabs(w.M - analytic) <= 2.0 * g.h);
  }
  // Not satisfiable on a domain narrower than the width.
  const auto small = make_mask(make_no_obstacle(), {-3, 3, -1, 1}, 0.1);
  try {
    front_width(sample_front(small, 0.0), small, 0.01);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::never_satisfied);
  }
}

TEST_CASE("propagation classification thresholds") {
  LimitState L;
  L.converged = true;
  L.residual.max_norm = {1e-6, 1e-6};
  L.min_value = 0.9995;
  CHECK(classify_propagation(L).kind == Propagation::complete);
  L.min_value = 0.3;
  L.min_location = {1.0, 2.0};
  const auto b = classify_propagation(L);
  CHECK(b.kind == Propagation::blocked);
  CHECK(b.min_value == 0.3);
  CHECK(b.location.y == 2.0);
  L.min_value = 0.8;
  CHECK(classify_propagation(L).kind == Propagation::undecided);
  L.min_value = 0.3;
  L.residual.max_norm = {1e-2, 0.0};
  CHECK(classify_propagation(L).kind == Propagation::undecided);
  L.residual.max_norm = {1e-6, 1e-6};
  L.converged = false;
  CHECK(classify_propagation(L).kind == Propagation::undecided);
}

TEST_CASE("csv writers") {
  const auto g = make_mask(make_no_obstacle(), {-15, 15, -2, 2}, 0.1);
  std::vector<Interface> seq{interface_set(sample_front(g, 0.0), g)};
  write_interface_csv("test_interfaces.csv", seq);
  std::ifstream in("test_interfaces.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header.find("mean_x") != std::string::npos);
  CHECK_FALSE(row.empty());
  std::remove("test_interfaces.csv");
}
