#include "doctest.h"

#include <cmath>
#include <random>

#include "obsfront/geometry.hpp"

using namespace obsfront;

namespace {
std::vector<Point> interior_points(const Obstacle& o, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double R = o.bound_radius();
  std::uniform_real_distribution<double> U(-R, R);
  std::vector<Point> out;
  while (static_cast<int>(out.size()) < n) {
    const Point p{U(rng), U(rng)};
    if (o.phi(p) < -0.05) out.push_back(p);
  }
  return out;
}
}  // namespace

TEST_CASE("convex shapes are star-shaped from random interior centers") {
  for (const auto& o : {make_disk(1.0), make_ellipse(2.0, 1.0), make_rectangle(4.0, 2.0)}) {
    CHECK(is_star_shaped(*o, {0.0, 0.0}).verdict == Verdict::yes);
    for (const auto& c : interior_points(*o, 10, 17)) CHECK(is_star_shaped(*o, c).verdict == Verdict::yes);
  }
}

TEST_CASE("annulus with a channel is not star-shaped; the witness sits on the inner ring") {
  const auto a = make_annulus_channel(2.0, 3.0, 0.1);
  for (const Point c : {Point{0.0, 2.5}, Point{-2.5, 0.0}, Point{0.0, -2.6}}) {
    REQUIRE(a->phi(c) < 0.0);
    const auto v = is_star_shaped(*a, c);
    CHECK(v.verdict == Verdict::no);
    REQUIRE(v.witness.has_value());
    CHECK(std::hypot(v.witness->x, v.witness->y) == doctest::Approx(2.0).epsilon(0.02));
  }
}

TEST_CASE("centers outside the obstacle are rejected") {
  CHECK_THROWS_AS(is_star_shaped(*make_disk(1.0), {2.0, 0.0}), Error);
}

TEST_CASE("directional convexity verdicts") {
  CHECK(is_directionally_convex(*make_ellipse(2.0, 1.0), {1.0, 0.0}, 0.0).verdict == Verdict::yes);
  CHECK(is_directionally_convex(*make_rectangle(4.0, 2.0), {1.0, 0.0}, 0.0).verdict == Verdict::yes);
  // A shallow bite keeps every horizontal chord through x1 = 0.
  const auto cres = make_crescent(1.0, 1.6);
  CHECK(is_directionally_convex(*cres, {1.0, 0.0}, 0.0).verdict == Verdict::yes);
  CHECK(is_directionally_convex(*cres, {0.0, 1.0}, 0.0).verdict == Verdict::no);
  const auto ann = is_directionally_convex(*make_annulus_channel(2.0, 3.0, 0.1), {1.0, 0.0}, 0.0);
  CHECK(ann.verdict == Verdict::no);
  CHECK(ann.witness.has_value());
}

TEST_CASE("empty obstacle mask is all fluid") {
  const auto g = make_mask(make_no_obstacle(), {-2, 2, -1, 1}, 0.1);
  CHECK(g.fluid_count == g.nx * g.ny);
  CHECK(g.ghosts.empty());
}

TEST_CASE("disk boundary layer scales with the perimeter") {
  const auto g = make_mask(make_disk(1.0), {-4, 4, -4, 4}, 0.05);
  // Cells 4-adjacent to the fluid form an 8-connected digital curve: on average
  // max(|cos|, |sin|) cells per unit length over h, i.e. 2 sqrt(2)/pi * perimeter / h.
  const double expect = 2.0 * std::sqrt(2.0) / M_PI * 2.0 * M_PI / 0.05;
  CHECK(std::fabs(static_cast<double>(g.ghosts.size()) - expect) <= 0.05 * expect);
  for (const auto& gs : g.ghosts) {
    CHECK(gs.count > 0);
    double w = 0.0;
    for (int k = 0; k < gs.count; ++k) {
      CHECK(g.is_fluid(gs.nodes[k]));
      w += gs.weights[k];
    }
    CHECK(w == doctest::Approx(1.0));
    // The ghost has an obstacle neighbour.
    const int i = gs.cell % g.nx, j = gs.cell / g.nx;
    bool nb = false;
    for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}})
      nb = nb || g.kind[g.index(i + di, j + dj)] == CellKind::obstacle;
    CHECK(nb);
  }
}

TEST_CASE("annulus channel connectivity depends on the slit width in cells") {
  CHECK_NOTHROW(make_mask(make_annulus_channel(2.0, 3.0, 0.1), {-5, 5, -5, 5}, 0.1));
  bool thrown = false;
  try {
    make_mask(make_annulus_channel(2.0, 3.0, 0.1), {-5, 5, -5, 5}, 0.25);
  } catch (const Error& e) {
    thrown = true;
    CHECK(e.code() == ErrorCode::disconnected_fluid);
  }
  CHECK(thrown);
}

TEST_CASE("obstacle must fit inside the rectangle") {
  CHECK_THROWS_AS(make_mask(make_disk(3.0), {-2, 2, -2, 2}, 0.1), Error);
}

TEST_CASE("obstacle frame radii") {
  const auto fr = analyze_obstacle(*make_disk(1.5));
  CHECK(fr.inner_radius > 0.0);
  CHECK(fr.inner_radius <= 1.5);
  CHECK(fr.bound_radius >= 1.5);
  const auto rf = analyze_obstacle(*make_rectangle(4.0, 2.0));
  CHECK(rf.inner_radius <= 1.0 + 1e-12);
  CHECK(rf.bound_radius >= std::hypot(2.0, 1.0) - 1e-12);
}

TEST_CASE("zeta is identically one without an obstacle") {
  const auto g = make_mask(make_no_obstacle(), {-3, 3, -3, 3}, 0.1);
  const auto z = build_zeta(g, 0.05, 1.0);
  CHECK(z.fn.trivial());
  for (double v : z.values) CHECK(v == 1.0);
}

TEST_CASE("zeta around the unit disk at eta/Dbar = 0.1") {
  const auto g = make_mask(make_disk(1.0), {-8, 8, -8, 8}, 0.05);
  const auto z = build_zeta(g, 0.1, 1.0);
  CHECK(z.min_value > 1.0);
  CHECK(z.normal_deriv_min >= 0.95);
  CHECK(z.normal_deriv_max <= 1.05);
  CHECK(z.max_ratio_analytic <= 0.1);
  CHECK(z.max_ratio_grid <= 0.1);
  for (std::size_t c = 0; c < z.values.size(); ++c)
    if (g.is_fluid(static_cast<int>(c))) CHECK(z.values[c] > 1.0);
}

TEST_CASE("mask run-length text has one line per row plus a header") {
  const auto g = make_mask(make_disk(1.0), {-2, 2, -2, 2}, 0.2);
  const auto txt = mask_to_rle(g);
  CHECK(std::count(txt.begin(), txt.end(), '\n') == g.ny + 1);
}

TEST_CASE("rigid motion moves the obstacle") {
  const auto t = make_transformed(make_rectangle(4.0, 2.0), M_PI / 2.0, {1.0, 0.0});
  CHECK(t->phi({1.0, 1.5}) < 0.0);
  CHECK(t->phi({2.5, 0.0}) > 0.0);
}
