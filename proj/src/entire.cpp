#include "obsfront/entire.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace obsfront {

namespace {

constexpr const char* kModule = "entire-limits";

MaskedGrid row_grid(const MaskedGrid& g) {
  return make_mask(make_no_obstacle(), {g.x_lo, g.x_hi(), -0.5 * g.h, 0.5 * g.h}, g.h);
}

// Broadcast a one-row state over the fluid cells of a 2D grid.
StateGrid broadcast_row(const StateGrid& row, const MaskedGrid& g) {
  StateGrid s;
  s.m = row.m;
  s.nx = g.nx;
  s.ny = g.ny;
  s.t = row.t;
  s.u.assign(s.m, Vec(static_cast<std::size_t>(g.nx) * g.ny, std::numeric_limits<double>::quiet_NaN()));
  for (int i = 0; i < s.m; ++i)
    for (int j = 0; j < g.ny; ++j)
      for (int q = 0; q < g.nx; ++q) {
        const int c = g.index(q, j);
        if (g.kind[c] == CellKind::fluid) s.u[i][c] = row.u[i][q];
      }
  return s;
}

Vec fluid_values(const StateGrid& s, const MaskedGrid& g) {
  Vec out;
  out.reserve(static_cast<std::size_t>(s.m) * g.fluid_count);
  for (int i = 0; i < s.m; ++i)
    for (std::size_t c = 0; c < g.kind.size(); ++c)
      if (g.kind[c] == CellKind::fluid) out.push_back(s.u[i][c]);
  return out;
}

double planar_gap(const StateGrid& s, const MaskedGrid& g, const FrontProfile& f, double shift,
                  double window) {
  Vec ph(static_cast<std::size_t>(s.m));
  double gap = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int q = 0; q < g.nx; ++q) {
      const int c = g.index(q, j);
      if (g.kind[c] != CellKind::fluid) continue;
      const double xi = g.center(q, j).x + f.c() * s.t + shift;
      if (std::abs(xi) > window) continue;
      f.eval(xi, ph.data());
      for (int i = 0; i < s.m; ++i) gap = std::max(gap, std::abs(s.u[i][c] - ph[i]));
    }
  return gap;
}

double row_gap(const StateGrid& s, const StateGrid& row, const MaskedGrid& g, double c,
               double shift, double window) {
  double gap = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int q = 0; q < g.nx; ++q) {
      const int cell = g.index(q, j);
      if (g.kind[cell] != CellKind::fluid) continue;
      if (std::abs(g.center(q, j).x + c * s.t + shift) > window) continue;
      for (int i = 0; i < s.m; ++i) gap = std::max(gap, std::abs(s.u[i][cell] - row.u[i][q]));
    }
  return gap;
}

double half_level_x(const StateGrid& row, const MaskedGrid& g) {
  const Vec& v = row.u[0];
  for (int q = 1; q < g.nx; ++q)
    if (v[q - 1] < 0.5 && v[q] >= 0.5)
      return g.center(q - 1, 0).x + g.h * (0.5 - v[q - 1]) / (v[q] - v[q - 1]);
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

EntireApprox approximate_entire_solution(const Scenario& base, const EntireOptions& opts) {
  if (!base.front) throw Error(ErrorCode::invalid_argument, kModule, "a planar front profile is required");
  const double c = base.front->c();
  if (!(c > 0.0)) {
    std::ostringstream os;
    os << "front speed " << c << " is not positive";
    throw Error(ErrorCode::front_speed_nonpositive, kModule, os.str());
  }
  std::vector<double> ns = opts.n_list;
  if (ns.empty()) ns = {20.0 / c, 30.0 / c, 40.0 / c};
  std::sort(ns.begin(), ns.end());
  const double Lambda = base.Lambda > 0.0 ? base.Lambda : sample_Lambda(base.system);
  const double dt = base.dt > 0.0 ? base.dt : auto_dt(base.system, base.grid.h, Lambda);
  for (double& n : ns) n = std::round(n / dt) * dt;
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  if (ns.size() < 2)
    throw Error(ErrorCode::insufficient_overlap, kModule, "need at least two distinct start offsets");
  if (opts.init == EntireOptions::InitMode::supersolution && !opts.supersolution)
    throw Error(ErrorCode::invalid_argument, kModule, "supersolution init needs a field");

  const MaskedGrid& g = base.grid;
  const double s0 = base.front_shift;
  Vec ph(static_cast<std::size_t>(base.system.m()));
  for (double n : ns) {
    const double pos = c * n - s0;
    if (pos > g.x_hi() - 2.0) {
      std::ostringstream os;
      os << "front at t = " << -n << " sits at x1 = " << pos << ", outside the grid";
      throw Error(ErrorCode::invalid_argument, kModule, os.str());
    }
    for (const auto& gs : g.ghosts) {
      base.front->eval(g.center(gs.cell).x - c * n + s0, ph.data());
      if (ph[0] > opts.overlap_tol) {
        std::ostringstream os;
        os << "front already reaches the obstacle at t = " << -n << " (u_1 = " << ph[0] << ")";
        throw Error(ErrorCode::front_overlaps_obstacle, kModule, os.str());
      }
    }
  }

  // Obstacle-free run of the same scheme on one row provides the initial data.
  const double n_max = ns.back();
  std::map<double, StateGrid> seeds;
  if (opts.init == EntireOptions::InitMode::front) {
    Scenario ms(base.system);
    ms.grid = row_grid(g);
    ms.front = base.front;
    ms.front_shift = s0;
    ms.far_field = base.far_field;
    ms.dt = dt;
    ms.Lambda = Lambda;
    ms.t_start = -n_max;
    ms.t_end = -n_max;
    GridStepper mst(ms);
    mst.initialize();
    long done = 0;
    for (auto it = ns.rbegin(); it != ns.rend(); ++it) {
      const long target = std::lround((n_max - *it) / dt);
      mst.advance(target - done);
      done = target;
      StateGrid row = mst.state();
      row.t = -*it;
      seeds[*it] = broadcast_row(row, g);
    }
  }

  EntireApprox out;
  out.n_list = ns;
  out.dt = dt;
  const long kc = std::max(1L, std::lround(opts.compare_every / dt));
  const long km = std::max(1L, std::lround(opts.monotone_every / dt));
  std::map<long, Vec> prev_samples;
  for (std::size_t k = 0; k < ns.size(); ++k) {
    const double n = ns[k];
    const bool largest = k + 1 == ns.size();
    Scenario sc = base;
    sc.dt = dt;
    sc.Lambda = Lambda;
    sc.t_start = -n;
    sc.t_end = 0.0;
    GridStepper st(sc);
    if (opts.init == EntireOptions::InitMode::front) {
      st.load(seeds.at(n));
    } else {
      sc.init.kind = InitialCondition::Kind::custom;
      const SpaceTimeField f = opts.supersolution;
      sc.init.custom = [f, n](Point x, double* o) { f(-n, x, o); };
      st.load(initial_state(sc));
    }
    const long steps = std::lround(n / dt);
    const long g0 = std::lround((n_max - n) / dt);
    const long gap_step = std::lround(opts.gap_offset / c / dt);
    std::map<long, Vec> samples;
    double gap = 0.0, order = -std::numeric_limits<double>::infinity();
    double min_inc = std::numeric_limits<double>::infinity();
    long violations = 0;
    Vec last_check = fluid_values(st.state(), g);
    for (long s = 0; s <= steps; ++s) {
      if (s > 0) st.step();
      const long G = g0 + s;
      const bool sample = G % kc == 0 || s == steps;
      const bool check = s > 0 && (s % km == 0 || s == steps);
      if (!(sample || check || s == gap_step)) continue;
      StateGrid cur = st.state();
      if (s == steps) cur.t = 0.0;
      if (check) {
        Vec now = fluid_values(cur, g);
        for (std::size_t q = 0; q < now.size(); ++q) {
          const double d = now[q] - last_check[q];
          min_inc = std::min(min_inc, d);
          if (d < -opts.monotone_tol) ++violations;
        }
        last_check = std::move(now);
      }
      if (largest && s == gap_step) {
        out.front_gap = planar_gap(cur, g, *base.front, s0, std::numeric_limits<double>::infinity());
        out.front_gap_time = cur.t;
      }
      if (sample) {
        Vec vals = fluid_values(cur, g);
        auto it = prev_samples.find(G);
        if (it != prev_samples.end()) {
          for (std::size_t q = 0; q < vals.size(); ++q) {
            gap = std::max(gap, std::abs(vals[q] - it->second[q]));
            order = std::max(order, vals[q] - it->second[q]);
          }
        }
        if (largest) out.trajectory.records.push_back(summarize(cur, g));
        if (!largest) samples.emplace(G, std::move(vals));
      }
      if (s == steps && largest) out.final_state = std::move(cur);
    }
    if (k > 0) {
      out.gap.push_back(gap);
      out.n_order_violation.push_back(order);
    }
    out.min_time_increment.push_back(min_inc);
    out.monotone_violations.push_back(violations);
    prev_samples = std::move(samples);
  }
  out.trajectory.dt = dt;
  out.trajectory.steps = std::lround(n_max / dt);
  return out;
}

LimitState extract_u_infinity(const Scenario& scen, const StateGrid& start, const LimitOptions& opts) {
  Scenario sc = scen;
  sc.far_field = FarField::neumann;
  sc.t_start = sc.t_end = start.t;
  if (sc.init.kind == InitialCondition::Kind::front && !sc.front) sc.init.kind = InitialCondition::Kind::state;
  GridStepper st(sc);
  st.load(start);
  LimitState out;
  const double dt = st.dt();
  const long max_steps = std::lround(opts.relax_time / dt);
  long s = 0;
  for (; s < max_steps; ++s) {
    st.step();
    if (st.last_max_update() <= opts.tol * dt) {
      out.converged = true;
      ++s;
      break;
    }
  }
  out.relax_time_used = static_cast<double>(s) * dt;
  out.final_update_rate = st.last_max_update() / dt;
  out.u_inf = st.state();
  out.residual = residual_elliptic(out.u_inf, sc);
  const MaskedGrid& g = sc.grid;
  const double far = opts.far_radius > 0.0
                         ? opts.far_radius
                         : (g.obstacle && !g.obstacle->is_empty() ? g.obstacle->bound_radius() : 0.0) + 5.0;
  out.min_value = std::numeric_limits<double>::infinity();
  out.window_min = std::numeric_limits<double>::infinity();
  for (int j = 0; j < g.ny; ++j)
    for (int q = 0; q < g.nx; ++q) {
      const int c = g.index(q, j);
      if (g.kind[c] != CellKind::fluid) continue;
      const Point p = g.center(q, j);
      for (int i = 0; i < out.u_inf.m; ++i) {
        const double v = out.u_inf.u[i][c];
        if (v < out.min_value) {
          out.min_value = v;
          out.min_location = p;
        }
        if (std::abs(p.x) <= opts.window && std::abs(p.y) <= opts.window)
          out.window_min = std::min(out.window_min, v);
        if (std::hypot(p.x, p.y) >= far) out.far_field_deviation = std::max(out.far_field_deviation, std::abs(1.0 - v));
      }
    }
  if (!out.converged && !opts.allow_unconverged) {
    std::ostringstream os;
    os << "max |u_t| = " << out.final_update_rate << " after relaxing for " << out.relax_time_used
       << " (target " << opts.tol << ")";
    throw Error(ErrorCode::no_convergence, kModule, os.str());
  }
  return out;
}

MaskedGrid passage_grid(ObstaclePtr obs, double h, const PassageOptions& opts) {
  if (!obs) obs = make_no_obstacle();
  const double R = obs->is_empty() ? 0.0 : obs->bound_radius();
  const double x_release = -(R + opts.behind + 1.0);
  const double x_hi = opts.start_x + 2.0;
  const int ncols = static_cast<int>(std::lround((x_hi - (x_release - opts.ahead)) / h));
  return make_mask(obs, {x_hi - ncols * h, x_hi, -opts.half_height, opts.half_height}, h);
}

PassageResult run_passage(const SystemDef& sys, std::shared_ptr<const FrontProfile> front,
                          ObstaclePtr obs, double h, const PassageOptions& opts,
                          const Observer& observer, BoundaryMode mode, int workers) {
  if (!front) throw Error(ErrorCode::invalid_argument, kModule, "a planar front profile is required");
  const double c = front->c();
  if (!(c > 0.0)) throw Error(ErrorCode::front_speed_nonpositive, kModule, "front speed is not positive");
  if (!obs) obs = make_no_obstacle();
  const double R = obs->is_empty() ? 0.0 : obs->bound_radius();
  const double s0 = -opts.start_x;
  const double x_release = -(R + opts.behind + 1.0);

  Scenario fx(sys);
  fx.grid = passage_grid(obs, h, opts);
  const double x_lo = fx.grid.x_lo;
  fx.front = front;
  fx.front_shift = s0;
  fx.far_field = FarField::front_pinned;
  fx.boundary = mode;
  fx.workers = workers;
  fx.Lambda = sample_Lambda(sys);
  const double dt = auto_dt(sys, h, fx.Lambda);
  fx.dt = dt;
  const long release_steps = std::lround((opts.start_x - x_release) / c / dt);
  fx.t_start = 0.0;
  fx.t_end = static_cast<double>(release_steps) * dt;
  const long total_steps = std::max(release_steps, std::lround(opts.t_end / dt));
  const long ks = std::max(1L, std::lround(opts.snapshot_every / dt));

  Scenario rs = fx;
  rs.grid = row_grid(fx.grid);
  rs.boundary = BoundaryMode::mirror;
  rs.workers = 1;

  PassageResult out{fx, {}, {}, {}, 0.0, 0.0, 0.0, 0.0};
  GridStepper st(fx), vt(rs);
  st.initialize();
  vt.initialize();
  auto sample = [&](const StateGrid& u, const StateGrid& v, const MaskedGrid& g, bool comoving) {
    GapSample gs;
    gs.t = u.t;
    gs.front_x = -(c * u.t + s0);
    gs.gap_discrete = row_gap(u, v, g, c, s0, opts.gap_window);
    gs.gap_continuum = planar_gap(u, g, *front, s0, opts.gap_window);
    gs.comoving = comoving;
    out.gaps.push_back(gs);
  };
  const double v_start = half_level_x(vt.state(), rs.grid);
  for (long s = 0; s <= release_steps; ++s) {
    if (s > 0) {
      st.step();
      vt.step();
    }
    if (s % ks == 0 || s == release_steps) {
      StateGrid u = st.state();
      StateGrid v = vt.state();
      out.fixed_trajectory.records.push_back(summarize(u, fx.grid));
      if (observer) observer(u);
      sample(u, v, fx.grid, false);
      if (s == release_steps) {
        out.planar_speed_discrete = (v_start - half_level_x(v, rs.grid)) / u.t;
        out.release_state = std::move(u);
      }
    }
  }
  out.fixed_trajectory.dt = dt;
  out.fixed_trajectory.steps = release_steps;
  out.fixed_trajectory.max_preclamp_violation = st.max_preclamp_violation();
  out.release_time = static_cast<double>(release_steps) * dt;

  // Comoving obstacle-free window.
  const int wcols = static_cast<int>(std::lround((opts.ahead + opts.behind) / h));
  const int shift_cells = std::max(1, static_cast<int>(std::lround(opts.shift_length / h)));
  const long seg_steps = std::max(1L, std::lround(shift_cells * h / c / dt));
  double wx_lo = x_lo;
  StateGrid u = out.release_state;
  StateGrid v = vt.state();
  {
    // Restrict the fixed-phase fields to the first wcols columns.
    auto crop = [&](const StateGrid& s) {
      StateGrid o;
      o.m = s.m;
      o.nx = wcols;
      o.ny = s.ny;
      o.t = s.t;
      o.u.assign(s.m, Vec(static_cast<std::size_t>(wcols) * s.ny));
      for (int i = 0; i < s.m; ++i)
        for (int j = 0; j < s.ny; ++j)
          for (int q = 0; q < wcols; ++q) o.u[i][j * wcols + q] = s.u[i][j * s.nx + q];
      return o;
    };
    u = crop(u);
    v = crop(v);
  }
  long s = release_steps;
  Vec ph(static_cast<std::size_t>(sys.m()));
  while (s < total_steps) {
    Scenario ws = fx;
    ws.grid = make_mask(make_no_obstacle(), {wx_lo, wx_lo + wcols * h, -opts.half_height, opts.half_height}, h);
    ws.t_start = ws.t_end = u.t;
    Scenario wr = rs;
    wr.grid = row_grid(ws.grid);
    wr.t_start = wr.t_end = u.t;
    GridStepper a(ws), b(wr);
    a.load(u);
    b.load(v);
    const long end = std::min(total_steps, s + seg_steps);
    while (s < end) {
      a.step();
      b.step();
      ++s;
      if (s % ks == 0 || s == total_steps) sample(a.state(), b.state(), ws.grid, true);
    }
    u = a.state();
    v = b.state();
    if (s >= total_steps) break;
    // Shift the window left by shift_cells; new columns ahead of the front take Phi.
    wx_lo -= shift_cells * h;
    auto shift = [&](StateGrid& f) {
      for (int i = 0; i < f.m; ++i)
        for (int j = 0; j < f.ny; ++j) {
          double* row = f.u[i].data() + static_cast<std::size_t>(j) * f.nx;
          std::move_backward(row, row + f.nx - shift_cells, row + f.nx);
        }
      for (int q = 0; q < shift_cells; ++q) {
        front->eval(wx_lo + (q + 0.5) * h + c * f.t + s0, ph.data());
        for (int i = 0; i < f.m; ++i)
          for (int j = 0; j < f.ny; ++j) f.u[i][static_cast<std::size_t>(j) * f.nx + q] = ph[i];
      }
    };
    shift(u);
    shift(v);
  }
  if (!out.gaps.empty()) {
    out.final_gap_discrete = out.gaps.back().gap_discrete;
    out.final_gap_continuum = out.gaps.back().gap_continuum;
  }
  return out;
}

}  // namespace obsfront
