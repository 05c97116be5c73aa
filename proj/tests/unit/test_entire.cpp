#include "doctest.h"

#include <cmath>

#include "obsfront/diagnostics.hpp"
#include "obsfront/entire.hpp"

using namespace obsfront;

namespace {
std::shared_ptr<const FrontProfile> cubic_front() {
  static auto f = std::make_shared<const FrontProfile>(solve_planar_front(cubic_pair(0.25)));
  return f;
}

Scenario base(ObstaclePtr obs, Rect r) {
  Scenario s(cubic_pair(0.25));
  s.grid = make_mask(obs, r, 0.1);
  s.front = cubic_front();
  return s;
}
}  // namespace

TEST_CASE("without an obstacle every u_n is the same planar front") {
  auto s = base(make_no_obstacle(), {-12, 52, -0.5, 0.5});
  const auto ea = approximate_entire_solution(s);
  REQUIRE(ea.gap.size() == 2);
  for (double g : ea.gap) CHECK(g <= 1e-4);
  CHECK(ea.monotone_violations.back() == 0);
  CHECK(ea.front_gap < 5e-3);
}

TEST_CASE("entire approximation around a small disk: monotone in n and in t") {
  auto s = base(make_disk(0.8), {-6, 34, -3, 3});
  const double c = cubic_front()->c();
  EntireOptions o;
  o.n_list = {14.0 / c, 19.0 / c, 24.0 / c};
  const auto ea = approximate_entire_solution(s, o);
  REQUIRE(ea.gap.size() == 2);
  CHECK(ea.gap[1] < ea.gap[0]);
  CHECK(ea.gap[0] < 1e-3);
  CHECK(ea.min_time_increment.back() >= -1e-8);
  CHECK(ea.monotone_violations.back() == 0);
  CHECK(ea.final_state.t == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("entire approximation input errors") {
  auto s = base(make_disk(1.0), {-6, 24, -3, 3});
  const double c = cubic_front()->c();
  EntireOptions one;
  one.n_list = {10.0 / c};
  CHECK_THROWS_AS(approximate_entire_solution(s, one), Error);
  EntireOptions close;
  close.n_list = {0.5 / c, 1.0 / c};
  try {
    approximate_entire_solution(s, close);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::front_overlaps_obstacle);
  }
  Scenario neg(cubic_pair(0.75));
  neg.grid = s.grid;
  neg.front = std::make_shared<const FrontProfile>(solve_planar_front(cubic_pair(0.75)));
  EntireOptions ok;
  ok.n_list = {10.0, 20.0};
  try {
    approximate_entire_solution(neg, ok);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::front_speed_nonpositive);
  }
}

TEST_CASE("u_infinity from the invaded state is identically one") {
  auto s = base(make_disk(1.0), {-5, 5, -5, 5});
  StateGrid one = initial_state(s);
  for (auto& comp : one.u)
    for (double& v : comp)
      if (v == v) v = 1.0;
  const auto lim = extract_u_infinity(s, one);
  CHECK(lim.converged);
  CHECK(lim.min_value == 1.0);
  CHECK(lim.identically_one(1e-6));
  CHECK(lim.residual.worst() <= 1e-12);
  CHECK(classify_propagation(lim).kind == Propagation::complete);
}

TEST_CASE("u_infinity reports non-convergence") {
  auto s = base(make_disk(1.0), {-5, 5, -5, 5});
  s.front_shift = 0.0;
  const auto mid = initial_state(s);
  LimitOptions o;
  o.relax_time = 1.0;
  CHECK_THROWS_AS(extract_u_infinity(s, mid, o), Error);
  o.allow_unconverged = true;
  const auto lim = extract_u_infinity(s, mid, o);
  CHECK_FALSE(lim.converged);
  CHECK(classify_propagation(lim).kind == Propagation::undecided);
}

TEST_CASE("short passage: release bookkeeping and the discrete planar speed") {
  PassageOptions po;
  po.start_x = 4.0;
  po.ahead = 3.0;
  po.behind = 3.0;
  po.half_height = 3.0;
  po.t_end = 0.0;
  const auto obs = make_disk(0.5);
  const auto res = run_passage(cubic_pair(0.25), cubic_front(), obs, 0.1, po);
  const auto g = passage_grid(obs, 0.1, po);
  CHECK(res.fixed.grid.nx == g.nx);
  CHECK(res.fixed.grid.x_lo == g.x_lo);
  CHECK(res.release_state.t == doctest::Approx(res.release_time));
  CHECK(res.planar_speed_discrete == doctest::Approx(cubic_front()->c()).epsilon(1e-3));
  REQUIRE_FALSE(res.gaps.empty());
  CHECK(res.gaps.front().gap_discrete <= 1e-12);
  // Front released behind the obstacle.
  CHECK(res.gaps.back().front_x == doctest::Approx(-(0.5 + 3.0 + 1.0)).epsilon(0.02));
}
