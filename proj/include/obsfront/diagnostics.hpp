#pragma once

#include <string>
#include <vector>

#include "obsfront/entire.hpp"
#include "obsfront/grid_solver.hpp"

namespace obsfront {

// Level crossing on the edge between two 4-adjacent fluid cells: a + theta (b - a).
struct EdgeCrossing {
  int a = 0, b = 0;
  double theta = 0.0;
  Point p;
};

struct Interface {
  double t = 0.0;
  double level = 0.5;
  std::vector<std::pair<Point, Point>> segments;  // marching-squares polyline pieces
  std::vector<EdgeCrossing> crossings;
  std::vector<signed char> side;  // per cell: 1 if u_1 >= level, 0 below, -1 outside the fluid
  double mean_x = 0.0;   // length-weighted mean abscissa of the polyline
  double length = 0.0;
};

// Level set of component 1 over fluid cells.
Interface interface_set(const StateGrid& s, const MaskedGrid& grid, double level = 0.5);

// 8-connected Dijkstra over fluid cells, diagonal steps only when both orthogonal
// neighbours are fluid. Sources carry initial distances. Unreached cells get +inf.
Vec geodesic_distance(const MaskedGrid& grid, const std::vector<std::pair<int, double>>& sources);

// Geodesic distance from every fluid cell to the interface, negative below the level.
Vec signed_distance_to_interface(const Interface& gamma, const MaskedGrid& grid);

// Symmetric Hausdorff distance between two interfaces in the fluid metric.
double interface_distance(const Interface& a, const Interface& b, const MaskedGrid& grid);
double interface_distance(const Interface& a, const Vec& sdist_a, const Interface& b, const Vec& sdist_b);

struct SpeedPair {
  double dt = 0.0, distance = 0.0;
};

struct SpeedEstimate {
  double gamma = 0.0;      // slope, clipped at 0
  double slope = 0.0;      // raw least-squares slope
  double intercept = 0.0;
  double band = 0.0;       // two standard errors of the slope
  double max_separation = 0.0;
  std::vector<SpeedPair> pairs;
};

struct SpeedOptions {
  double min_fraction = 0.5;  // pairs need |t - s| >= min_fraction * span
  int min_interfaces = 10;
};

SpeedEstimate global_mean_speed(const std::vector<Interface>& interfaces, const MaskedGrid& grid,
                                const SpeedOptions& opts = {});
SpeedEstimate global_mean_speed(const Trajectory& traj, const MaskedGrid& grid, double level = 0.5,
                                const SpeedOptions& opts = {});

struct WidthSample {
  double t = 0.0;
  double M = 0.0;
  int worst_cell = -1;
};

struct WidthEstimate {
  double M = 0.0;  // max over snapshots
  std::vector<WidthSample> samples;
};

// Smallest M such that fluid cells at geodesic distance >= M from the interface satisfy
// u >= 1 - eps on the upper side and u <= eps on the lower side (side by u_1 vs level).
WidthSample front_width(const StateGrid& s, const MaskedGrid& grid, double eps, double level = 0.5);
WidthEstimate transition_front_width(const std::vector<StateGrid>& states, const MaskedGrid& grid,
                                     double eps, double level = 0.5);

enum class Propagation { complete, blocked, undecided };

struct Classification {
  Propagation kind = Propagation::undecided;
  double min_value = 1.0;
  Point location;
};

struct ClassifyThresholds {
  double hi = 1e-3;           // complete when min >= 1 - hi
  double lo = 0.5;            // blocked when min <= lo
  double residual_tol = 1e-4;
};

Classification classify_propagation(const LimitState& limit, const ClassifyThresholds& thr = {});
const char* to_string(Propagation p);

void write_interface_csv(const std::string& path, const std::vector<Interface>& interfaces);
void write_speed_pairs_csv(const std::string& path, const SpeedEstimate& est);
void write_width_csv(const std::string& path, const WidthEstimate& est);

}  // namespace obsfront
