#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>

#include "obsfront/grid_solver.hpp"

using namespace obsfront;

namespace {
std::shared_ptr<const FrontProfile> cubic_front() {
  static auto f = std::make_shared<const FrontProfile>(solve_planar_front(cubic_pair(0.25)));
  return f;
}

Scenario uniform_scenario(double v, ObstaclePtr obs) {
  Scenario s(cubic_pair(0.25));
  s.grid = make_mask(obs, {-4, 4, -3, 3}, 0.1);
  s.init.kind = InitialCondition::Kind::uniform;
  s.init.uniform = {v, v};
  s.far_field = FarField::neumann;
  s.t_end = 5.0;
  return s;
}
}  // namespace

TEST_CASE("constant equilibria are preserved exactly") {
  for (double v : {0.0, 1.0}) {
    auto s = uniform_scenario(v, make_disk(1.0));
    GridStepper st(s);
    st.initialize();
    st.advance(500);
    const auto u = st.state();
    for (int i = 0; i < 2; ++i)
      for (int c = 0; c < u.nx * u.ny; ++c)
        if (s.grid.is_fluid(c)) CHECK(u.at(i, c) == v);
  }
}

TEST_CASE("auto time step satisfies the monotonicity bound") {
  const auto sys = cubic_pair(0.25, 2, {1.0, 2.0});
  const double L = sample_Lambda(sys);
  const double h = 0.1;
  const double dt = auto_dt(sys, h, L);
  CHECK(dt * (4.0 * 2.0 / (h * h) + L) <= 1.0);
  CHECK(L >= 0.75 - 1e-12);
}

TEST_CASE("planar front advances at the one-dimensional speed") {
  Scenario s(cubic_pair(0.25));
  s.grid = make_mask(make_no_obstacle(), {-25, 15, -0.5, 0.5}, 0.1);
  s.front = cubic_front();
  s.front_shift = -10.0;
  const double c = s.front->c();
  s.t_end = 10.0 / c;
  const auto tr = run(s);
  REQUIRE(tr.records.size() >= 2);
  const double x0 = tr.records.front().interface_x[0];
  const double x1 = tr.records.back().interface_x[0];
  const double travelled = x0 - x1;
  CHECK(x0 == doctest::Approx(10.0).epsilon(0.01));
  CHECK(std::fabs(travelled - c * s.t_end) <= 0.03 * c * s.t_end);
}

TEST_CASE("zero-length time range gives the initial condition only") {
  Scenario s(cubic_pair(0.25));
  s.grid = make_mask(make_disk(1.0), {-5, 10, -3, 3}, 0.1);
  s.front = cubic_front();
  s.front_shift = -5.0;
  s.keep_states = true;
  const auto tr = run(s);
  REQUIRE(tr.states.size() == 1);
  const auto u0 = initial_state(s);
  for (int c = 0; c < u0.nx * u0.ny; ++c)
    if (s.grid.is_fluid(c)) CHECK(tr.states[0].at(0, c) == u0.at(0, c));
}

TEST_CASE("symmetric data around a disk stay symmetric") {
  Scenario s(cubic_pair(0.25));
  s.grid = make_mask(make_disk(1.0), {-6, 8, -4, 4}, 0.1);
  s.front = cubic_front();
  s.front_shift = -4.0;
  s.boundary = BoundaryMode::staircase;
  GridStepper st(s);
  st.initialize();
  st.advance(3000);
  const auto u = st.state();
  double asym = 0.0;
  for (int j = 0; j < u.ny; ++j)
    for (int i = 0; i < u.nx; ++i) {
      const int a = u.nx * j + i, b = u.nx * (u.ny - 1 - j) + i;
      if (s.grid.is_fluid(a)) asym = std::max(asym, std::fabs(u.at(0, a) - u.at(0, b)));
    }
  CHECK(asym <= 1e-8);
}

TEST_CASE("ordered initial data stay ordered") {
  Scenario base(cubic_pair(0.3, 2, {1.0, 0.5}));
  base.grid = make_mask(make_disk(1.0), {-3, 3, -3, 3}, 0.1);
  base.far_field = FarField::neumann;
  base.init.kind = InitialCondition::Kind::uniform;
  base.init.uniform = {0.0, 0.0};
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int n = base.grid.nx * base.grid.ny;
  for (int pair = 0; pair < 5; ++pair) {
    StateGrid lo, hi;
    lo.m = hi.m = 2;
    lo.nx = hi.nx = base.grid.nx;
    lo.ny = hi.ny = base.grid.ny;
    lo.u.assign(2, Vec(n));
    hi.u.assign(2, Vec(n));
    for (int i = 0; i < 2; ++i)
      for (int c = 0; c < n; ++c) {
        lo.u[i][c] = U(rng);
        hi.u[i][c] = lo.u[i][c] + (1.0 - lo.u[i][c]) * U(rng);
      }
    GridStepper a(base), b(base);
    a.load(lo);
    b.load(hi);
    a.advance(200);
    b.advance(200);
    const auto ua = a.state(), ub = b.state();
    double worst = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int c = 0; c < n; ++c)
        if (base.grid.is_fluid(c)) {
          worst = std::max(worst, ua.at(i, c) - ub.at(i, c));
          CHECK(ua.at(i, c) >= -1e-10);
          CHECK(ub.at(i, c) <= 1.0 + 1e-10);
        }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("elliptic residual flags stationary and moving states") {
  auto one = uniform_scenario(1.0, make_disk(1.0));
  const auto r1 = residual_elliptic(initial_state(one), one);
  CHECK(r1.worst() <= 1e-14);
  Scenario s(cubic_pair(0.25));
  s.grid = make_mask(make_no_obstacle(), {-10, 10, -1, 1}, 0.1);
  s.front = cubic_front();
  const auto r2 = residual_elliptic(initial_state(s), s);
  CHECK(r2.worst() > 1e-2);
}

TEST_CASE("rhs of a planar front equals -c Phi' up to discretization") {
  Scenario s(cubic_pair(0.25));
  s.grid = make_mask(make_no_obstacle(), {-10, 10, -1, 1}, 0.05);
  s.front = cubic_front();
  GridStepper st(s);
  st.initialize();
  const auto f = st.rhs();
  const double c = s.front->c();
  double err = 0.0;
  for (int cell = 0; cell < s.grid.nx * s.grid.ny; ++cell) {
    const double x = s.grid.center(cell).x;
    if (std::fabs(x) > 8.0) continue;
    double phi[2], d1[2];
    s.front->eval(x, phi, d1);
    err = std::max(err, std::fabs(f[0][cell] - c * d1[0]));
  }
  // u_t = c Phi' for a front moving toward -x1.
  CHECK(err < 1e-3);
}

TEST_CASE("staircase Laplacian is symmetric with zero row sums") {
  const auto g = make_mask(make_disk(1.0), {-3, 3, -3, 3}, 0.2);
  const auto A = assemble_laplacian(g, BoundaryMode::staircase);
  Eigen::SparseMatrix<double> At = A.transpose();
  CHECK((Eigen::MatrixXd(A) - Eigen::MatrixXd(At)).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(A.cols());
  CHECK((A * ones).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("snapshot files round trip bitwise, obstacle cells as NaN") {
  Scenario s(cubic_pair(0.25));
  s.grid = make_mask(make_disk(1.0), {-4, 6, -3, 3}, 0.1);
  s.front = cubic_front();
  const auto u = initial_state(s);
  const std::string path = "test_snapshot.bin";
  write_snapshot(path, u, 0.1);
  double h = 0.0;
  const auto v = read_snapshot(path, &h);
  CHECK(h == 0.1);
  REQUIRE(v.nx == u.nx);
  REQUIRE(v.ny == u.ny);
  for (int i = 0; i < 2; ++i)
    for (int c = 0; c < u.nx * u.ny; ++c) {
      if (s.grid.is_fluid(c)) {
        CHECK(std::memcmp(&u.u[i][c], &v.u[i][c], sizeof(double)) == 0);
      } else if (s.grid.kind[c] == CellKind::obstacle) {
        CHECK(std::isnan(v.u[i][c]));
      }
    }
  std::remove(path.c_str());
}

TEST_CASE("trajectory snapshots and event log") {
  Scenario s(cubic_pair(0.25));
  s.grid = make_mask(make_disk(1.0), {-5, 10, -4, 4}, 0.1);
  s.front = cubic_front();
  s.front_shift = -8.0;
  s.t_end = 10.0;
  s.snapshot_every = 0.5;
  const auto tr = run(s);
  CHECK(tr.records.size() == 21);
  CHECK(tr.max_preclamp_violation <= 1e-10);
  for (std::size_t k = 1; k < tr.records.size(); ++k)
    CHECK(tr.records[k].interface_x[0] < tr.records[k - 1].interface_x[0]);
  const std::string path = "test_events.csv";
  write_event_log(path, tr);
  FILE* f = std::fopen(path.c_str(), "r");
  REQUIRE(f);
  int lines = 0;
  for (int ch; (ch = std::fgetc(f)) != EOF;) lines += ch == '\n';
  std::fclose(f);
  CHECK(lines == 22);
  std::remove(path.c_str());
}
