#include "obsfront/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

namespace obsfront {

namespace {

constexpr const char* kModule = "diagnostics";
constexpr double kInf = std::numeric_limits<double>::infinity();

std::ofstream open_csv(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::io_error, kModule, "cannot write " + path);
  f.precision(12);
  return f;
}

Point lerp(Point a, Point b, double th) { return {a.x + th * (b.x - a.x), a.y + th * (b.y - a.y)}; }

}  // namespace

Interface interface_set(const StateGrid& s, const MaskedGrid& g, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw Error(ErrorCode::invalid_argument, kModule, "level must lie in (0, 1)");
  if (s.nx != g.nx || s.ny != g.ny || s.m < 1)
    throw Error(ErrorCode::dimension_mismatch, kModule, "state and grid sizes differ");
  Interface out;
  out.t = s.t;
  out.level = level;
  const Vec& u = s.u[0];
  out.side.assign(u.size(), -1);
  for (std::size_t c = 0; c < u.size(); ++c)
    if (g.kind[c] == CellKind::fluid) out.side[c] = u[c] >= level ? 1 : 0;

  auto edge = [&](int a, int b) {
    if (out.side[a] < 0 || out.side[b] < 0 || out.side[a] == out.side[b]) return;
    const double th = (level - u[a]) / (u[b] - u[a]);
    out.crossings.push_back({a, b, th, lerp(g.center(a), g.center(b), th)});
  };
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const int c = g.index(i, j);
      if (i + 1 < g.nx) edge(c, c + 1);
      if (j + 1 < g.ny) edge(c, c + g.nx);
    }
  if (out.crossings.empty()) {
    std::ostringstream os;
    os << "no level-" << level << " crossing at t = " << s.t;
    throw Error(ErrorCode::empty_interface, kModule, os.str());
  }

  // Marching squares over blocks of four fluid cells.
  double wx = 0.0;
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i + 1 < g.nx; ++i) {
      const int c[4] = {g.index(i, j), g.index(i + 1, j), g.index(i + 1, j + 1), g.index(i, j + 1)};
      bool fluid = true;
      for (int k : c) fluid = fluid && out.side[k] >= 0;
      if (!fluid) continue;
      Point pts[4];
      int n = 0;
      for (int e = 0; e < 4; ++e) {
        const int a = c[e], b = c[(e + 1) % 4];
        if (out.side[a] == out.side[b]) continue;
        pts[n++] = lerp(g.center(a), g.center(b), (level - u[a]) / (u[b] - u[a]));
      }
      auto add = [&](Point p, Point q) {
        const double len = std::hypot(q.x - p.x, q.y - p.y);
        out.segments.emplace_back(p, q);
        out.length += len;
        wx += len * 0.5 * (p.x + q.x);
      };
      if (n == 2) {
        add(pts[0], pts[1]);
      } else if (n == 4) {
        // Saddle: the centre average decides which corners connect.
        const double mid = 0.25 * (u[c[0]] + u[c[1]] + u[c[2]] + u[c[3]]);
        if ((mid >= level) == (out.side[c[0]] == 1)) {
          add(pts[0], pts[1]);
          add(pts[2], pts[3]);
        } else {
          add(pts[3], pts[0]);
          add(pts[1], pts[2]);
        }
      }
    }
  if (out.length > 0.0) {
    out.mean_x = wx / out.length;
  } else {
    for (const auto& e : out.crossings) out.mean_x += e.p.x;
    out.mean_x /= static_cast<double>(out.crossings.size());
  }
  return out;
}

Vec geodesic_distance(const MaskedGrid& g, const std::vector<std::pair<int, double>>& sources) {
  Vec d(g.kind.size(), kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (const auto& [c, d0] : sources) {
    if (!g.is_fluid(c)) continue;
    if (d0 < d[c]) {
      d[c] = d0;
      pq.push({d0, c});
    }
  }
  const double h = g.h, hd = std::sqrt(2.0) * g.h;
  while (!pq.empty()) {
    const auto [dc, c] = pq.top();
    pq.pop();
    if (dc > d[c]) continue;
    const int i = c % g.nx, j = c / g.nx;
    auto fluid = [&](int a, int b) { return a >= 0 && b >= 0 && a < g.nx && b < g.ny && g.is_fluid(g.index(a, b)); };
    auto relax = [&](int a, int b, double w) {
      const int n = g.index(a, b);
      if (dc + w < d[n]) {
        d[n] = dc + w;
        pq.push({d[n], n});
      }
    };
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj) {
        if (di == 0 && dj == 0) continue;
        if (!fluid(i + di, j + dj)) continue;
        if (di != 0 && dj != 0) {
          if (!fluid(i + di, j) || !fluid(i, j + dj)) continue;
          relax(i + di, j + dj, hd);
        } else {
          relax(i + di, j + dj, h);
        }
      }
  }
  return d;
}

Vec signed_distance_to_interface(const Interface& gamma, const MaskedGrid& g) {
  std::vector<std::pair<int, double>> src;
  src.reserve(2 * gamma.crossings.size());
  for (const auto& e : gamma.crossings) {
    src.emplace_back(e.a, e.theta * g.h);
    src.emplace_back(e.b, (1.0 - e.theta) * g.h);
  }
  Vec d = geodesic_distance(g, src);
  for (std::size_t c = 0; c < d.size(); ++c)
    if (gamma.side[c] == 0) d[c] = -d[c];
  return d;
}

double interface_distance(const Interface& a, const Vec& sa, const Interface& b, const Vec& sb) {
  auto one_way = [](const Interface& from, const Vec& sd_to) {
    double worst = 0.0;
    for (const auto& e : from.crossings) {
      const double d = std::abs((1.0 - e.theta) * sd_to[e.a] + e.theta * sd_to[e.b]);
      worst = std::max(worst, d);
    }
    return worst;
  };
  return std::max(one_way(a, sb), one_way(b, sa));
}

double interface_distance(const Interface& a, const Interface& b, const MaskedGrid& g) {
  return interface_distance(a, signed_distance_to_interface(a, g), b, signed_distance_to_interface(b, g));
}

SpeedEstimate global_mean_speed(const std::vector<Interface>& gs, const MaskedGrid& g,
                                const SpeedOptions& opts) {
  if (static_cast<int>(gs.size()) < opts.min_interfaces) {
    std::ostringstream os;
    os << gs.size() << " interfaces, need " << opts.min_interfaces;
    throw Error(ErrorCode::insufficient_interfaces, kModule, os.str());
  }
  double t_lo = kInf, t_hi = -kInf;
  for (const auto& x : gs) {
    t_lo = std::min(t_lo, x.t);
    t_hi = std::max(t_hi, x.t);
  }
  const double min_sep = opts.min_fraction * (t_hi - t_lo);
  std::vector<Vec> sd(gs.size());
  for (std::size_t k = 0; k < gs.size(); ++k) sd[k] = signed_distance_to_interface(gs[k], g);

  SpeedEstimate est;
  for (std::size_t a = 0; a < gs.size(); ++a)
    for (std::size_t b = a + 1; b < gs.size(); ++b) {
      const double sep = std::abs(gs[b].t - gs[a].t);
      if (sep < min_sep || sep <= 0.0) continue;
      est.pairs.push_back({sep, interface_distance(gs[a], sd[a], gs[b], sd[b])});
      est.max_separation = std::max(est.max_separation, sep);
    }
  const std::size_t n = est.pairs.size();
  if (n < 2) throw Error(ErrorCode::insufficient_interfaces, kModule, "fewer than two admissible pairs");
  double mx = 0.0, my = 0.0;
  for (const auto& p : est.pairs) {
    mx += p.dt;
    my += p.distance;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : est.pairs) {
    sxx += (p.dt - mx) * (p.dt - mx);
    sxy += (p.dt - mx) * (p.distance - my);
  }
  if (sxx <= 0.0) {
    // All pairs share one separation: fall back to the ratio.
    est.slope = my / mx;
    est.intercept = 0.0;
  } else {
    est.slope = sxy / sxx;
    est.intercept = my - est.slope * mx;
    double rss = 0.0;
    for (const auto& p : est.pairs) {
      const double r = p.distance - est.intercept - est.slope * p.dt;
      rss += r * r;
    }
    if (n > 2) est.band = 2.0 * std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  est.gamma = std::max(0.0, est.slope);
  return est;
}

SpeedEstimate global_mean_speed(const Trajectory& traj, const MaskedGrid& g, double level,
                                const SpeedOptions& opts) {
  std::vector<Interface> gs;
  gs.reserve(traj.states.size());
  for (const auto& s : traj.states) gs.push_back(interface_set(s, g, level));
  return global_mean_speed(gs, g, opts);
}

WidthSample front_width(const StateGrid& s, const MaskedGrid& g, double eps, double level) {
  if (!(eps > 0.0 && eps < 0.5)) throw Error(ErrorCode::invalid_argument, kModule, "eps must lie in (0, 1/2)");
  const Interface gamma = interface_set(s, g, level);
  const Vec sd = signed_distance_to_interface(gamma, g);
  WidthSample out;
  out.t = s.t;
  double reach = 0.0;
  for (std::size_t c = 0; c < sd.size(); ++c) {
    if (gamma.side[c] < 0 || !std::isfinite(sd[c])) continue;
    const double d = std::abs(sd[c]);
    reach = std::max(reach, d);
    bool ok = true;
    for (int i = 0; i < s.m; ++i) {
      const double v = s.u[i][c];
      ok = ok && (gamma.side[c] == 1 ? v >= 1.0 - eps : v <= eps);
    }
    if (!ok && d >= out.M) {
      out.M = d;
      out.worst_cell = static_cast<int>(c);
    }
  }
  if (out.worst_cell >= 0 && out.M >= reach) {
    const Point p = g.center(out.worst_cell);
    std::ostringstream os;
    os << "eps-dichotomy fails at the farthest cell (" << p.x << ", " << p.y << "), distance " << out.M
       << " at t = " << s.t;
    throw Error(ErrorCode::never_satisfied, kModule, os.str());
  }
  // The certificate holds for cells strictly beyond the worst violator.
  if (out.worst_cell >= 0) out.M = std::nextafter(out.M, kInf);
  return out;
}

WidthEstimate transition_front_width(const std::vector<StateGrid>& states, const MaskedGrid& g,
                                     double eps, double level) {
  WidthEstimate est;
  for (const auto& s : states) {
    est.samples.push_back(front_width(s, g, eps, level));
    est.M = std::max(est.M, est.samples.back().M);
  }
  return est;
}

Classification classify_propagation(const LimitState& limit, const ClassifyThresholds& thr) {
  Classification c;
  c.min_value = limit.min_value;
  c.location = limit.min_location;
  const bool settled = limit.converged && limit.residual.worst() <= thr.residual_tol;
  if (!settled)
    c.kind = Propagation::undecided;
  else if (limit.min_value >= 1.0 - thr.hi)
    c.kind = Propagation::complete;
  else if (limit.min_value <= thr.lo)
    c.kind = Propagation::blocked;
  else
    c.kind = Propagation::undecided;
  return c;
}

const char* to_string(Propagation p) {
  switch (p) {
    case Propagation::complete: return "complete";
    case Propagation::blocked: return "blocked";
    case Propagation::undecided: return "undecided";
  }
  return "?";
}

void write_interface_csv(const std::string& path, const std::vector<Interface>& gs) {
  auto f = open_csv(path);
  f << "t,mean_x,length\n";
  for (const auto& x : gs) f << x.t << ',' << x.mean_x << ',' << x.length << '\n';
}

void write_speed_pairs_csv(const std::string& path, const SpeedEstimate& est) {
  auto f = open_csv(path);
  f << "separation,distance\n";
  for (const auto& p : est.pairs) f << p.dt << ',' << p.distance << '\n';
}

void write_width_csv(const std::string& path, const WidthEstimate& est) {
  auto f = open_csv(path);
  f << "t,M\n";
  for (const auto& s : est.samples) f << s.t << ',' << s.M << '\n';
}

}  // namespace obsfront
