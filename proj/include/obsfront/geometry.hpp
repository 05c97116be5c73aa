#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "obsfront/error.hpp"

namespace obsfront {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Implicit compact obstacle K = {phi <= 0} in the plane.
class Obstacle {
 public:
  virtual ~Obstacle() = default;
  virtual double phi(Point p) const = 0;
  // Default: central differences of phi.
  virtual Point grad(Point p) const;
  // Radius of a ball about the origin containing K.
  virtual double bound_radius() const = 0;
  virtual std::string label() const = 0;
  virtual bool is_empty() const { return false; }

  // Outward unit normal of K (pointing into the exterior domain).
  Point normal(Point p) const;
  // First-order distance surrogate phi/|grad phi|; exact for signed-distance shapes.
  double distance_like(Point p) const;
  // Value, gradient and Laplacian of distance_like.
  virtual void distance_derivs(Point p, double& g, Point& dg, double& lap) const;
};

using ObstaclePtr = std::shared_ptr<const Obstacle>;

ObstaclePtr make_no_obstacle();
ObstaclePtr make_disk(double r, Point center = {});
ObstaclePtr make_ellipse(double a, double b, Point center = {});
ObstaclePtr make_rectangle(double width, double height, Point center = {});
ObstaclePtr make_annulus_channel(double r_in, double r_out, double slit_half_width);
// Disk of radius r minus the same disk shifted by `offset` along +x.
ObstaclePtr make_crescent(double r, double offset);
// phi(x,y) = sum c_k x^i y^j; K must be compact and inside `bound`.
struct PolyTerm {
  double coeff = 0.0;
  int px = 0;
  int py = 0;
};
ObstaclePtr make_polynomial_obstacle(std::vector<PolyTerm> terms, double bound);
// Rigid motion: rotate by `angle` about the origin, then translate.
ObstaclePtr make_transformed(ObstaclePtr base, double angle, Point shift);

struct ObstacleFrame {
  Point center;            // theta, possibly recentered
  double inner_radius = 0; // B(center, inner_radius) inside K
  double bound_radius = 0; // K inside B(origin, bound_radius)
  bool recentered = false;
};

// Inner/outer radii with the Chebyshev-center fallback when the origin is not interior.
ObstacleFrame analyze_obstacle(const Obstacle& obs);

enum class Verdict { yes, no, inconclusive };
const char* to_string(Verdict v);

struct GeoVerdict {
  Verdict verdict = Verdict::inconclusive;
  std::optional<Point> witness;
  std::string detail;
};

GeoVerdict is_star_shaped(const Obstacle& obs, Point center, int n_samples = 360);
GeoVerdict is_directionally_convex(const Obstacle& obs, Point e_tilde, double l,
                                   int n_lines = 201);

enum class CellKind : std::uint8_t { fluid = 0, obstacle = 1, ghost = 2 };

// Neumann ghost: value interpolated at the mirror point b + h*n, b the boundary foot point.
struct GhostStencil {
  int cell = 0;
  Point normal;
  Point mirror;
  int nodes[4] = {0, 0, 0, 0};
  double weights[4] = {0.0, 0.0, 0.0, 0.0};
  int count = 0;
};

struct Rect {
  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
};

class MaskedGrid {
 public:
  MaskedGrid() = default;

  int nx = 0, ny = 0;
  double h = 0.0;
  double x_lo = 0.0, y_lo = 0.0;
  std::vector<CellKind> kind;  // row-major, index j*nx + i
  std::vector<GhostStencil> ghosts;
  std::vector<int> ghost_of;   // cell -> index into ghosts or -1
  ObstaclePtr obstacle;
  int fluid_count = 0;

  int index(int i, int j) const { return j * nx + i; }
  Point center(int i, int j) const { return {x_lo + (i + 0.5) * h, y_lo + (j + 0.5) * h}; }
  Point center(int cell) const { return center(cell % nx, cell / nx); }
  bool is_fluid(int cell) const { return kind[cell] == CellKind::fluid; }
  double x_hi() const { return x_lo + nx * h; }
  double y_hi() const { return y_lo + ny * h; }
  double fluid_area() const { return fluid_count * h * h; }
};

MaskedGrid make_mask(ObstaclePtr obs, const Rect& rect, double h);

// Run-length encoded text: header line then per-row runs of "f", "o", "g".
std::string mask_to_rle(const MaskedGrid& grid);

struct ZetaOptions {
  double collar = 0.0;  // 0 scans widths starting at max(4h, 0.2*inner_radius)
  double margin = 0.02;
  int scan_steps = 24;
  int normal_samples = 200;
};

// Analytic lift of the truncated boundary ramp.
class ZetaFunction {
 public:
  ZetaFunction() = default;
  ZetaFunction(ObstaclePtr obs, double collar, double chat);
  bool trivial() const { return !obs_; }
  double collar() const { return w_; }
  double chat() const { return chat_; }
  double value(Point p) const;
  void derivs(Point p, double& z, Point& grad, double& lap) const;
  // Ramp G(g) = g*psi(g/w) and its first two derivatives in g.
  void ramp(double g, double& G, double& G1, double& G2) const;

 private:
  ObstaclePtr obs_;
  double w_ = 0.0;
  double chat_ = 1.0;
};

struct ZetaField {
  ZetaFunction fn;
  std::vector<double> values;  // per grid cell, NaN in the obstacle
  double chat = 1.0;
  double collar = 0.0;
  double support_radius = 0.0;
  double min_value = 1.0, sup_value = 1.0, sup_grad = 0.0, sup_lap = 0.0;
  double max_ratio_grid = 0.0;      // stencil |Lap zeta / zeta| over fluid cells
  double max_ratio_analytic = 0.0;  // analytic |Lap zeta / zeta| over samples
  double normal_deriv_min = 1.0, normal_deriv_max = 1.0;
  double target_ratio = 0.0;
};

ZetaField build_zeta(const MaskedGrid& grid, double eta, double Dbar, const ZetaOptions& opts = {});

}  // namespace obsfront
