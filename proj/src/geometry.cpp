#include "obsfront/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "obsfront/system.hpp"

namespace obsfront {

namespace {

constexpr const char* kModule = "geometry";

double norm(Point p) { return std::hypot(p.x, p.y); }
Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
double sgn(double v) { return v < 0.0 ? -1.0 : 1.0; }

class NoObstacle final : public Obstacle {
 public:
  double phi(Point) const override { return 1e30; }
  Point grad(Point) const override { return {0.0, 0.0}; }
  double bound_radius() const override { return 0.0; }
  std::string label() const override { return "none"; }
  bool is_empty() const override { return true; }
};

class Disk final : public Obstacle {
 public:
  Disk(double r, Point c) : r_(r), c_(c) {}
  double phi(Point p) const override { return norm(p - c_) - r_; }
  Point grad(Point p) const override {
    const Point d = p - c_;
    const double n = norm(d);
    return n > 0.0 ? (1.0 / n) * d : Point{1.0, 0.0};
  }
  void distance_derivs(Point p, double& g, Point& dg, double& lap) const override {
    const Point d = p - c_;
    const double n = norm(d);
    g = n - r_;
    dg = n > 0.0 ? (1.0 / n) * d : Point{1.0, 0.0};
    lap = n > 0.0 ? 1.0 / n : 0.0;
  }
  double bound_radius() const override { return norm(c_) + r_; }
  std::string label() const override { return "disk"; }

 private:
  double r_;
  Point c_;
};

class Ellipse final : public Obstacle {
 public:
  Ellipse(double a, double b, Point c) : a_(a), b_(b), c_(c), s_(std::min(a, b)) {}
  double phi(Point p) const override {
    const Point d = p - c_;
    return (std::hypot(d.x / a_, d.y / b_) - 1.0) * s_;
  }
  Point grad(Point p) const override {
    const Point d = p - c_;
    const double rho = std::hypot(d.x / a_, d.y / b_);
    if (rho == 0.0) return {0.0, 0.0};
    return {s_ * d.x / (a_ * a_ * rho), s_ * d.y / (b_ * b_ * rho)};
  }
  double bound_radius() const override { return norm(c_) + std::max(a_, b_); }
  std::string label() const override { return "ellipse"; }

 private:
  double a_, b_;
  Point c_;
  double s_;
};

class Rectangle final : public Obstacle {
 public:
  Rectangle(double w, double h, Point c) : hx_(0.5 * w), hy_(0.5 * h), c_(c) {}
  double phi(Point p) const override {
    const Point d = p - c_;
    const double qx = std::abs(d.x) - hx_, qy = std::abs(d.y) - hy_;
    const double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
    return outside + std::min(std::max(qx, qy), 0.0);
  }
  Point grad(Point p) const override {
    const Point d = p - c_;
    const double qx = std::abs(d.x) - hx_, qy = std::abs(d.y) - hy_;
    if (qx > 0.0 && qy > 0.0) {
      const double n = std::hypot(qx, qy);
      return {sgn(d.x) * qx / n, sgn(d.y) * qy / n};
    }
    if (qx > qy) return {sgn(d.x), 0.0};
    return {0.0, sgn(d.y)};
  }
  double bound_radius() const override { return norm(c_) + std::hypot(hx_, hy_); }
  std::string label() const override { return "rectangle"; }

 private:
  double hx_, hy_;
  Point c_;
};

class AnnulusChannel final : public Obstacle {
 public:
  AnnulusChannel(double r_in, double r_out, double slit) : ri_(r_in), ro_(r_out), s_(slit) {}
  double phi(Point p) const override {
    const double rho = norm(p);
    const double ring = std::max(ri_ - rho, rho - ro_);
    const double cut = std::min(s_ - std::abs(p.y), p.x);
    return std::max(ring, cut);
  }
  Point grad(Point p) const override {
    const double rho = norm(p);
    const double ring = std::max(ri_ - rho, rho - ro_);
    const double cut = std::min(s_ - std::abs(p.y), p.x);
    if (ring >= cut) {
      const Point r = rho > 0.0 ? (1.0 / rho) * p : Point{1.0, 0.0};
      return (rho - ro_ > ri_ - rho) ? r : -1.0 * r;
    }
    if (s_ - std::abs(p.y) < p.x) return {0.0, -sgn(p.y)};
    return {1.0, 0.0};
  }
  double bound_radius() const override { return ro_; }
  std::string label() const override { return "annulus_channel"; }

 private:
  double ri_, ro_, s_;
};

class Crescent final : public Obstacle {
 public:
  Crescent(double r, double offset) : r_(r), d_(offset) {}
  double phi(Point p) const override {
    return std::max(norm(p) - r_, r_ - norm(p - Point{d_, 0.0}));
  }
  Point grad(Point p) const override {
    const double a = norm(p) - r_;
    const Point q = p - Point{d_, 0.0};
    const double b = r_ - norm(q);
    if (a >= b) {
      const double n = norm(p);
      return n > 0.0 ? (1.0 / n) * p : Point{1.0, 0.0};
    }
    const double n = norm(q);
    return n > 0.0 ? (-1.0 / n) * q : Point{-1.0, 0.0};
  }
  double bound_radius() const override { return r_; }
  std::string label() const override { return "crescent"; }

 private:
  double r_, d_;
};

class PolynomialObstacle final : public Obstacle {
 public:
  PolynomialObstacle(std::vector<PolyTerm> terms, double bound)
      : terms_(std::move(terms)), bound_(bound) {}
  double phi(Point p) const override {
    double s = 0.0;
    for (const auto& t : terms_) s += t.coeff * std::pow(p.x, t.px) * std::pow(p.y, t.py);
    return s;
  }
  Point grad(Point p) const override {
    Point g{0.0, 0.0};
    for (const auto& t : terms_) {
      if (t.px > 0) g.x += t.coeff * t.px * std::pow(p.x, t.px - 1) * std::pow(p.y, t.py);
      if (t.py > 0) g.y += t.coeff * t.py * std::pow(p.x, t.px) * std::pow(p.y, t.py - 1);
    }
    return g;
  }
  double bound_radius() const override { return bound_; }
  std::string label() const override { return "polynomial"; }

 private:
  std::vector<PolyTerm> terms_;
  double bound_;
};

class Transformed final : public Obstacle {
 public:
  Transformed(ObstaclePtr base, double angle, Point shift)
      : base_(std::move(base)), c_(std::cos(angle)), s_(std::sin(angle)), t_(shift) {}
  double phi(Point p) const override { return base_->phi(local(p)); }
  Point grad(Point p) const override {
    const Point g = base_->grad(local(p));
    return {c_ * g.x - s_ * g.y, s_ * g.x + c_ * g.y};
  }
  double bound_radius() const override { return base_->bound_radius() + norm(t_); }
  std::string label() const override { return base_->label() + "(moved)"; }
  bool is_empty() const override { return base_->is_empty(); }

 private:
  Point local(Point p) const {
    const Point d = p - t_;
    return {c_ * d.x + s_ * d.y, -s_ * d.x + c_ * d.y};
  }
  ObstaclePtr base_;
  double c_, s_;
  Point t_;
};

// Parameters t in (0, t_max] where phi changes sign along origin + t*dir.
std::vector<double> crossings(const Obstacle& obs, Point origin, Point dir, double t_max,
                              double step) {
  std::vector<double> out;
  double t0 = 0.0;
  double f0 = obs.phi(origin);
  const int n = static_cast<int>(std::ceil(t_max / step));
  for (int k = 1; k <= n; ++k) {
    const double t1 = std::min(t_max, k * step);
    const double f1 = obs.phi(origin + t1 * dir);
    if ((f0 <= 0.0) != (f1 <= 0.0)) {
      double lo = t0, hi = t1, flo = f0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = obs.phi(origin + mid * dir);
        if ((fm <= 0.0) == (flo <= 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      out.push_back(0.5 * (lo + hi));
    }
    t0 = t1;
    f0 = f1;
  }
  return out;
}

}  // namespace

Point Obstacle::grad(Point p) const {
  const double s = 1e-6 * (1.0 + norm(p));
  return {(phi({p.x + s, p.y}) - phi({p.x - s, p.y})) / (2.0 * s),
          (phi({p.x, p.y + s}) - phi({p.x, p.y - s})) / (2.0 * s)};
}

Point Obstacle::normal(Point p) const {
  const Point g = grad(p);
  const double n = norm(g);
  return n > 0.0 ? (1.0 / n) * g : Point{1.0, 0.0};
}

double Obstacle::distance_like(Point p) const {
  const double n = norm(grad(p));
  return n > 0.0 ? phi(p) / n : phi(p);
}

void Obstacle::distance_derivs(Point p, double& g, Point& dg, double& lap) const {
  const double s = 1e-3;
  g = distance_like(p);
  const double e = distance_like({p.x + s, p.y}), w = distance_like({p.x - s, p.y});
  const double nn = distance_like({p.x, p.y + s}), so = distance_like({p.x, p.y - s});
  dg = {(e - w) / (2.0 * s), (nn - so) / (2.0 * s)};
  lap = (e + w + nn + so - 4.0 * g) / (s * s);
}

ObstaclePtr make_no_obstacle() { return std::make_shared<NoObstacle>(); }

ObstaclePtr make_disk(double r, Point center) {
  if (!(r > 0.0)) throw Error(ErrorCode::invalid_argument, kModule, "disk radius must be positive");
  return std::make_shared<Disk>(r, center);
}

ObstaclePtr make_ellipse(double a, double b, Point center) {
  if (!(a > 0.0 && b > 0.0))
    throw Error(ErrorCode::invalid_argument, kModule, "ellipse semi-axes must be positive");
  return std::make_shared<Ellipse>(a, b, center);
}

ObstaclePtr make_rectangle(double width, double height, Point center) {
  if (!(width > 0.0 && height > 0.0))
    throw Error(ErrorCode::invalid_argument, kModule, "rectangle sides must be positive");
  return std::make_shared<Rectangle>(width, height, center);
}

ObstaclePtr make_annulus_channel(double r_in, double r_out, double slit_half_width) {
  if (!(r_in > 0.0 && r_out > r_in && slit_half_width > 0.0 && slit_half_width < r_in))
    throw Error(ErrorCode::invalid_argument, kModule,
                "annulus needs 0 < r_in < r_out and 0 < slit < r_in");
  return std::make_shared<AnnulusChannel>(r_in, r_out, slit_half_width);
}

ObstaclePtr make_crescent(double r, double offset) {
  if (!(r > 0.0 && offset > 0.0 && offset < 2.0 * r))
    throw Error(ErrorCode::invalid_argument, kModule, "crescent needs 0 < offset < 2r");
  return std::make_shared<Crescent>(r, offset);
}

ObstaclePtr make_polynomial_obstacle(std::vector<PolyTerm> terms, double bound) {
  if (terms.empty() || !(bound > 0.0))
    throw Error(ErrorCode::invalid_argument, kModule, "polynomial obstacle needs terms and a bound");
  return std::make_shared<PolynomialObstacle>(std::move(terms), bound);
}

ObstaclePtr make_transformed(ObstaclePtr base, double angle, Point shift) {
  return std::make_shared<Transformed>(std::move(base), angle, shift);
}

ObstacleFrame analyze_obstacle(const Obstacle& obs) {
  ObstacleFrame fr;
  if (obs.is_empty()) return fr;
  const double R = obs.bound_radius();
  fr.bound_radius = R;
  constexpr int kRays = 720;
  for (int k = 0; k < kRays; ++k) {
    const double a = 2.0 * std::numbers::pi * k / kRays;
    const Point p{1.001 * R * std::cos(a) + 1e-9, 1.001 * R * std::sin(a)};
    if (!(obs.phi(p) > 0.0))
      throw Error(ErrorCode::invalid_argument, kModule,
                  "obstacle reaches beyond its declared bound radius");
  }
  Point c{0.0, 0.0};
  if (!(obs.phi(c) < 0.0)) {
    double best = 0.0;
    bool found = false;
    constexpr int kLat = 201;
    for (int j = 0; j < kLat; ++j)
      for (int i = 0; i < kLat; ++i) {
        const Point p{-R + 2.0 * R * i / (kLat - 1), -R + 2.0 * R * j / (kLat - 1)};
        if (!(obs.phi(p) < 0.0)) continue;
        const double depth = -obs.distance_like(p);
        if (!found || depth > best) {
          best = depth;
          c = p;
          found = true;
        }
      }
    if (!found)
      throw Error(ErrorCode::inner_radius_not_found, kModule,
                  "no interior point found on the sampling lattice");
    fr.recentered = true;
  }
  fr.center = c;
  double inner = std::numeric_limits<double>::infinity();
  const double t_max = 2.0 * R + norm(c);
  for (int k = 0; k < kRays; ++k) {
    const double a = 2.0 * std::numbers::pi * k / kRays;
    const auto roots = crossings(obs, c, {std::cos(a), std::sin(a)}, t_max, t_max / 4000.0);
    if (!roots.empty()) inner = std::min(inner, roots.front());
  }
  if (!std::isfinite(inner) || !(inner > 0.0))
    throw Error(ErrorCode::inner_radius_not_found, kModule, "inner ball radius is zero");
  fr.inner_radius = inner;
  return fr;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::yes:
      return "true";
    case Verdict::no:
      return "false";
    case Verdict::inconclusive:
      return "inconclusive";
  }
  return "unknown";
}

GeoVerdict is_star_shaped(const Obstacle& obs, Point center, int n_samples) {
  if (obs.is_empty()) return {Verdict::inconclusive, std::nullopt, "no obstacle"};
  if (!(obs.phi(center) < 0.0))
    throw Error(ErrorCode::center_outside, kModule, "center is not strictly inside the obstacle");
  if (n_samples < 3) throw Error(ErrorCode::invalid_argument, kModule, "need at least 3 rays");
  const double R = obs.bound_radius();
  const double tol = 1e-6 * R;
  const double t_max = R + norm(center) + 1e-3 * R;
  const double step = t_max / 4000.0;
  for (int k = 0; k < n_samples; ++k) {
    const double a = 2.0 * std::numbers::pi * k / n_samples;
    const Point dir{std::cos(a), std::sin(a)};
    const auto roots = crossings(obs, center, dir, t_max, step);
    if (roots.empty()) return {Verdict::inconclusive, std::nullopt, "ray found no boundary"};
    for (std::size_t q = 0; q < roots.size(); ++q) {
      const Point y = center + roots[q] * dir;
      const double d = dot(obs.normal(y), y - center);
      if (d < -tol || q > 0) {
        std::ostringstream os;
        if (d < -tol)
          os << "normal condition fails: nu.(y-x) = " << d;
        else
          os << "segment from the center leaves the obstacle before this boundary point";
        return {Verdict::no, y, os.str()};
      }
    }
  }
  return {Verdict::yes, std::nullopt, "all sampled boundary points visible"};
}

GeoVerdict is_directionally_convex(const Obstacle& obs, Point e, double l, int n_lines) {
  if (std::abs(norm(e) - 1.0) > 1e-9)
    throw Error(ErrorCode::invalid_argument, kModule, "direction must be a unit vector");
  if (obs.is_empty()) return {Verdict::inconclusive, std::nullopt, "no obstacle"};
  if (n_lines < 3) throw Error(ErrorCode::invalid_argument, kModule, "need at least 3 lines");
  const Point perp{-e.y, e.x};
  const double R = 1.05 * obs.bound_radius();
  const double span = R + std::abs(l);
  const double step = span / 1000.0;
  bool plane_hits = false;
  bool ambiguous_failure = false;
  std::optional<GeoVerdict> split, mismatch;
  for (int k = 0; k < n_lines; ++k) {
    const double s = -R + 2.0 * R * (k + 0.5) / n_lines;
    const Point base = s * perp;
    const Point origin = base + (-span) * e;
    const auto roots = crossings(obs, origin, e, 2.0 * span, step);
    std::vector<std::pair<double, double>> intervals;
    const bool start_inside = obs.phi(origin) <= 0.0;
    double open = start_inside ? 0.0 : -1.0;
    for (double r : roots) {
      if (open < 0.0) {
        open = r;
      } else {
        intervals.emplace_back(open, r);
        open = -1.0;
      }
    }
    if (open >= 0.0) intervals.emplace_back(open, 2.0 * span);
    bool thin = false;
    for (const auto& iv : intervals)
      if (iv.second - iv.first < 2.0 * step) thin = true;
    const Point on_plane = base + l * e;
    const bool inside_plane = obs.phi(on_plane) < 0.0;
    plane_hits = plane_hits || inside_plane;
    const bool hit = !intervals.empty();
    if (intervals.size() > 1 || hit != inside_plane) {
      if (thin) {
        ambiguous_failure = true;
        continue;
      }
      if (intervals.size() > 1 && !split) {
        const Point w = origin + intervals[1].first * e;
        split = GeoVerdict{Verdict::no, w, "line meets the obstacle in several segments"};
      } else if (intervals.size() <= 1 && !mismatch) {
        mismatch = GeoVerdict{Verdict::no, on_plane,
                              "section by the plane differs from the projection"};
      }
    }
  }
  if (split) return *split;
  if (!plane_hits)
    return {Verdict::inconclusive, std::nullopt, "the plane misses the obstacle"};
  if (mismatch) return *mismatch;
  if (ambiguous_failure)
    return {Verdict::inconclusive, std::nullopt, "only tangential lines disagree at this sampling"};
  return {Verdict::yes, std::nullopt, "every sampled line meets the obstacle in one segment"};
}

MaskedGrid make_mask(ObstaclePtr obs, const Rect& rect, double h) {
  if (!obs) throw Error(ErrorCode::invalid_argument, kModule, "null obstacle");
  if (!(h > 0.0)) throw Error(ErrorCode::invalid_argument, kModule, "h must be positive");
  if (!(rect.x_hi > rect.x_lo && rect.y_hi > rect.y_lo))
    throw Error(ErrorCode::invalid_argument, kModule, "empty rectangle");
  MaskedGrid g;
  g.h = h;
  g.x_lo = rect.x_lo;
  g.y_lo = rect.y_lo;
  g.nx = std::max(1, static_cast<int>(std::lround((rect.x_hi - rect.x_lo) / h)));
  g.ny = std::max(1, static_cast<int>(std::lround((rect.y_hi - rect.y_lo) / h)));
  g.obstacle = obs;
  if (!obs->is_empty()) {
    const double R = obs->bound_radius() + 2.0 * h;
    if (!(g.x_lo < -R && g.x_hi() > R && g.y_lo < -R && g.y_hi() > R)) {
      std::ostringstream os;
      os << "rectangle must contain the ball of radius " << R << " about the origin";
      throw Error(ErrorCode::obstacle_out_of_rect, kModule, os.str());
    }
  }
  const int n = g.nx * g.ny;
  g.kind.assign(static_cast<std::size_t>(n), CellKind::fluid);
  g.ghost_of.assign(static_cast<std::size_t>(n), -1);
  if (!obs->is_empty()) {
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        if (obs->phi(g.center(i, j)) <= 0.0) g.kind[g.index(i, j)] = CellKind::obstacle;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = g.index(i, j);
        if (g.kind[c] != CellKind::obstacle) continue;
        const bool touches = (i > 0 && g.kind[c - 1] == CellKind::fluid) ||
                             (i + 1 < g.nx && g.kind[c + 1] == CellKind::fluid) ||
                             (j > 0 && g.kind[c - g.nx] == CellKind::fluid) ||
                             (j + 1 < g.ny && g.kind[c + g.nx] == CellKind::fluid);
        if (touches) g.kind[c] = CellKind::ghost;
      }
  }
  g.fluid_count = static_cast<int>(std::count(g.kind.begin(), g.kind.end(), CellKind::fluid));
  if (g.fluid_count == 0) throw Error(ErrorCode::empty_fluid, kModule, "no fluid cells");

  // Edge connectivity of the fluid region.
  {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    int start = 0;
    while (g.kind[start] != CellKind::fluid) ++start;
    std::vector<int> stack{start};
    seen[start] = 1;
    int reached = 0;
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      ++reached;
      const int i = c % g.nx, j = c / g.nx;
      const int nb[4] = {i > 0 ? c - 1 : -1, i + 1 < g.nx ? c + 1 : -1, j > 0 ? c - g.nx : -1,
                         j + 1 < g.ny ? c + g.nx : -1};
      for (int q : nb)
        if (q >= 0 && !seen[q] && g.kind[q] == CellKind::fluid) {
          seen[q] = 1;
          stack.push_back(q);
        }
    }
    if (reached != g.fluid_count) {
      std::ostringstream os;
      os << "exterior splits: " << reached << " of " << g.fluid_count
         << " fluid cells reachable from the first one";
      throw Error(ErrorCode::disconnected_fluid, kModule, os.str());
    }
  }

  for (int c = 0; c < n; ++c) {
    if (g.kind[c] != CellKind::ghost) continue;
    GhostStencil gs;
    gs.cell = c;
    const Point xg = g.center(c);
    gs.normal = obs->normal(xg);
    const Point b = xg - obs->distance_like(xg) * gs.normal;
    for (int mult = 1; mult <= 3 && gs.count == 0; ++mult) {
      const Point m = b + (mult * h) * gs.normal;
      gs.mirror = m;
      const double fx = (m.x - g.x_lo) / h - 0.5, fy = (m.y - g.y_lo) / h - 0.5;
      const int i0 = static_cast<int>(std::floor(fx)), j0 = static_cast<int>(std::floor(fy));
      const double tx = fx - i0, ty = fy - j0;
      const int ii[4] = {i0, i0 + 1, i0, i0 + 1};
      const int jj[4] = {j0, j0, j0 + 1, j0 + 1};
      const double ww[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
      double total = 0.0;
      for (int q = 0; q < 4; ++q) {
        if (ii[q] < 0 || ii[q] >= g.nx || jj[q] < 0 || jj[q] >= g.ny) continue;
        const int cell = g.index(ii[q], jj[q]);
        if (g.kind[cell] != CellKind::fluid || ww[q] <= 0.0) continue;
        gs.nodes[gs.count] = cell;
        gs.weights[gs.count] = ww[q];
        total += ww[q];
        ++gs.count;
      }
      if (total < 1e-12) {
        gs.count = 0;
        continue;
      }
      for (int q = 0; q < gs.count; ++q) gs.weights[q] /= total;
    }
    if (gs.count == 0) {
      // Fall back to the nearest fluid 4-neighbor.
      const int i = c % g.nx, j = c / g.nx;
      const int nb[4] = {i > 0 ? c - 1 : -1, i + 1 < g.nx ? c + 1 : -1, j > 0 ? c - g.nx : -1,
                         j + 1 < g.ny ? c + g.nx : -1};
      for (int q : nb)
        if (q >= 0 && g.kind[q] == CellKind::fluid) {
          gs.nodes[0] = q;
          gs.weights[0] = 1.0;
          gs.count = 1;
          break;
        }
    }
    g.ghost_of[c] = static_cast<int>(g.ghosts.size());
    g.ghosts.push_back(gs);
  }
  return g;
}

std::string mask_to_rle(const MaskedGrid& grid) {
  std::ostringstream os;
  os << "mask nx=" << grid.nx << " ny=" << grid.ny << " h=" << grid.h << " x_lo=" << grid.x_lo
     << " y_lo=" << grid.y_lo << "\n";
  static const char code[3] = {'f', 'o', 'g'};
  for (int j = 0; j < grid.ny; ++j) {
    int i = 0;
    bool first = true;
    while (i < grid.nx) {
      const CellKind k = grid.kind[grid.index(i, j)];
      int run = 0;
      while (i < grid.nx && grid.kind[grid.index(i, j)] == k) {
        ++i;
        ++run;
      }
      os << (first ? "" : " ") << code[static_cast<int>(k)] << run;
      first = false;
    }
    os << "\n";
  }
  return os.str();
}

ZetaFunction::ZetaFunction(ObstaclePtr obs, double collar, double chat)
    : obs_(obs && !obs->is_empty() ? std::move(obs) : nullptr), w_(collar), chat_(chat) {}

void ZetaFunction::ramp(double g, double& G, double& G1, double& G2) const {
  if (g <= w_) {
    G = g;
    G1 = 1.0;
    G2 = 0.0;
    return;
  }
  const double s = g / w_;
  if (s >= 2.0) {
    G = G1 = G2 = 0.0;
    return;
  }
  const double psi = 1.0 - PQFunctions::chi(s - 1.0);
  const double dpsi = -PQFunctions::chi_d1(s - 1.0) / w_;
  const double d2psi = -PQFunctions::chi_d2(s - 1.0) / (w_ * w_);
  G = g * psi;
  G1 = psi + g * dpsi;
  G2 = 2.0 * dpsi + g * d2psi;
}

double ZetaFunction::value(Point p) const {
  if (!obs_) return 1.0;
  double G, G1, G2;
  ramp(obs_->distance_like(p), G, G1, G2);
  return chat_ - G;
}

void ZetaFunction::derivs(Point p, double& z, Point& grad, double& lap) const {
  if (!obs_) {
    z = 1.0;
    grad = {0.0, 0.0};
    lap = 0.0;
    return;
  }
  const double g0 = obs_->distance_like(p);
  if (g0 >= 2.0 * w_ * (1.0 + 1e-3)) {
    z = chat_;
    grad = {0.0, 0.0};
    lap = 0.0;
    return;
  }
  double g, lg;
  Point dg;
  obs_->distance_derivs(p, g, dg, lg);
  double G, G1, G2;
  ramp(g, G, G1, G2);
  z = chat_ - G;
  grad = (-G1) * dg;
  lap = -(G2 * dot(dg, dg) + G1 * lg);
}

ZetaField build_zeta(const MaskedGrid& grid, double eta, double Dbar, const ZetaOptions& opts) {
  if (!(eta > 0.0 && Dbar > 0.0))
    throw Error(ErrorCode::invalid_argument, kModule, "eta and Dbar must be positive");
  ZetaField zf;
  zf.target_ratio = eta / Dbar;
  const std::size_t n = grid.kind.size();
  zf.values.assign(n, std::numeric_limits<double>::quiet_NaN());
  if (!grid.obstacle || grid.obstacle->is_empty()) {
    for (std::size_t c = 0; c < n; ++c) zf.values[c] = 1.0;
    return zf;
  }
  const Obstacle& obs = *grid.obstacle;
  const ObstacleFrame frame = analyze_obstacle(obs);
  const double extent = std::max(grid.nx, grid.ny) * grid.h;

  struct Sample {
    double g, dg2, lg;
  };
  std::vector<Sample> cell_samples;
  for (std::size_t c = 0; c < n; ++c) {
    if (grid.kind[c] != CellKind::fluid) continue;
    Sample s;
    Point dg;
    obs.distance_derivs(grid.center(static_cast<int>(c)), s.g, dg, s.lg);
    s.dg2 = dot(dg, dg);
    cell_samples.push_back(s);
  }
  std::vector<std::pair<Point, Point>> feet;  // boundary foot point and normal
  for (const auto& gs : grid.ghosts) {
    const Point xg = grid.center(gs.cell);
    feet.emplace_back(xg - obs.distance_like(xg) * gs.normal, gs.normal);
  }
  auto line_samples = [&](double w) {
    std::vector<Sample> out;
    const int k = std::max(opts.normal_samples, 10);
    for (const auto& [b, nrm] : feet)
      for (int q = 0; q < k; ++q) {
        const double off = 2.2 * w * q / (k - 1);
        Sample s;
        Point dg;
        obs.distance_derivs(b + off * nrm, s.g, dg, s.lg);
        s.dg2 = dot(dg, dg);
        out.push_back(s);
      }
    return out;
  };

  auto required_chat = [&](double w, const std::vector<Sample>& extra) {
    ZetaFunction tmp(grid.obstacle, w, 0.0);
    double need = 0.0, gmax = 0.0;
    auto visit = [&](const Sample& s) {
      if (s.g >= 2.0 * w) return;
      double G, G1, G2;
      tmp.ramp(s.g, G, G1, G2);
      const double lap = std::abs(G2 * s.dg2 + G1 * s.lg);
      gmax = std::max(gmax, G);
      need = std::max(need, G + lap / zf.target_ratio);
    };
    for (const auto& s : cell_samples) visit(s);
    for (const auto& s : extra) visit(s);
    return std::max(1.0 + gmax, need) * (1.0 + opts.margin);
  };

  double best_w = 0.0, best_c = std::numeric_limits<double>::infinity();
  if (opts.collar > 0.0) {
    best_w = opts.collar;
    best_c = required_chat(best_w, line_samples(best_w));
  } else {
    double w = std::max(4.0 * grid.h, 0.2 * frame.inner_radius);
    for (int k = 0; k <= opts.scan_steps && 2.0 * w <= extent; ++k, w *= 1.25) {
      const double cc = required_chat(w, line_samples(w));
      if (cc < best_c) {
        best_c = cc;
        best_w = w;
      }
    }
  }
  if (!std::isfinite(best_c))
    throw Error(ErrorCode::zeta_infeasible, kModule,
                "no collar width within the domain gives a finite lift constant");

  const double hh = grid.h;
  for (int attempt = 0; attempt < 20; ++attempt) {
    zf.fn = ZetaFunction(grid.obstacle, best_w, best_c);
    zf.chat = best_c;
    zf.collar = best_w;
    zf.support_radius = frame.bound_radius + 2.0 * best_w;
    zf.min_value = std::numeric_limits<double>::infinity();
    zf.sup_value = 0.0;
    zf.sup_grad = 0.0;
    zf.sup_lap = 0.0;
    zf.max_ratio_grid = 0.0;
    zf.max_ratio_analytic = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (grid.kind[c] != CellKind::fluid) continue;
      const Point p = grid.center(static_cast<int>(c));
      double z, lap;
      Point gr;
      zf.fn.derivs(p, z, gr, lap);
      zf.values[c] = z;
      zf.min_value = std::min(zf.min_value, z);
      zf.sup_value = std::max(zf.sup_value, z);
      zf.sup_grad = std::max(zf.sup_grad, norm(gr));
      zf.sup_lap = std::max(zf.sup_lap, std::abs(lap));
      zf.max_ratio_analytic = std::max(zf.max_ratio_analytic, std::abs(lap) / z);
      if (obs.distance_like(p) < 2.2 * best_w) {
        const double st = (zf.fn.value({p.x + hh, p.y}) + zf.fn.value({p.x - hh, p.y}) +
                           zf.fn.value({p.x, p.y + hh}) + zf.fn.value({p.x, p.y - hh}) - 4.0 * z) /
                          (hh * hh);
        zf.max_ratio_grid = std::max(zf.max_ratio_grid, std::abs(st) / z);
      }
    }
    for (const auto& s : line_samples(best_w)) {
      double G, G1, G2;
      zf.fn.ramp(s.g, G, G1, G2);
      const double z = best_c - G;
      const double lap = std::abs(G2 * s.dg2 + G1 * s.lg);
      zf.min_value = std::min(zf.min_value, z);
      zf.sup_grad = std::max(zf.sup_grad, std::abs(G1) * std::sqrt(s.dg2));
      zf.sup_lap = std::max(zf.sup_lap, lap);
      zf.max_ratio_analytic = std::max(zf.max_ratio_analytic, lap / z);
    }
    zf.sup_value = std::max(zf.sup_value, best_c);
    if (zf.max_ratio_grid <= zf.target_ratio && zf.max_ratio_analytic <= zf.target_ratio) break;
    best_c *= 1.1;
  }
  zf.normal_deriv_min = std::numeric_limits<double>::infinity();
  zf.normal_deriv_max = -std::numeric_limits<double>::infinity();
  for (const auto& [b, nrm] : feet) {
    const double nd = (zf.fn.value(b - (0.5 * hh) * nrm) - zf.fn.value(b + (0.5 * hh) * nrm)) / hh;
    zf.normal_deriv_min = std::min(zf.normal_deriv_min, nd);
    zf.normal_deriv_max = std::max(zf.normal_deriv_max, nd);
  }
  std::ostringstream why;
  if (!(zf.min_value > 1.0)) why << "min zeta " << zf.min_value << " not above 1; ";
  if (zf.max_ratio_grid > zf.target_ratio || zf.max_ratio_analytic > zf.target_ratio)
    why << "ratio " << std::max(zf.max_ratio_grid, zf.max_ratio_analytic) << " exceeds "
        << zf.target_ratio << "; ";
  if (!feet.empty() && (std::abs(zf.normal_deriv_min - 1.0) > 0.05 ||
                        std::abs(zf.normal_deriv_max - 1.0) > 0.05))
    why << "normal derivative in [" << zf.normal_deriv_min << ", " << zf.normal_deriv_max
        << "]; ";
  if (!why.str().empty()) throw Error(ErrorCode::zeta_infeasible, kModule, why.str());
  return zf;
}

}  // namespace obsfront
