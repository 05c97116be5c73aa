#pragma once

#include <Eigen/Sparse>

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "obsfront/front1d.hpp"
#include "obsfront/geometry.hpp"
#include "obsfront/system.hpp"

namespace obsfront {

// Component fields on the full nx*ny grid, row-major; obstacle cells hold NaN.
struct StateGrid {
  int m = 0, nx = 0, ny = 0;
  double t = 0.0;
  std::vector<Vec> u;

  double& at(int i, int cell) { return u[i][cell]; }
  double at(int i, int cell) const { return u[i][cell]; }
};

enum class FarField { front_pinned, neumann };
enum class BoundaryMode { mirror, staircase };

struct InitialCondition {
  enum class Kind { front, uniform, state, custom };
  Kind kind = Kind::front;
  Vec uniform;                                   // Kind::uniform
  StateGrid state;                               // Kind::state
  std::function<void(Point, double*)> custom;    // Kind::custom, writes m values
};

struct Scenario {
  explicit Scenario(SystemDef sys) : system(std::move(sys)) {}

  SystemDef system;
  MaskedGrid grid;
  double t_start = 0.0, t_end = 0.0;
  double dt = 0.0;       // 0 selects the auto rule
  double Lambda = 0.0;   // 0 samples the Jacobian row sums
  InitialCondition init;
  FarField far_field = FarField::front_pinned;
  BoundaryMode boundary = BoundaryMode::mirror;
  std::shared_ptr<const FrontProfile> front;  // needed for front init and pinning
  double front_shift = 0.0;                   // s0 in Phi(x1 + c t + s0)
  double snapshot_every = 0.0;                // time between snapshots, 0 = start and end only
  bool keep_states = false;                   // store full states in the trajectory
  int nan_check_every = 64;
  int workers = 1;
  bool imex = false;  // implicit diffusion; loses the comparison guarantee
};

// Sup of Jacobian absolute row sums over a lattice plus random samples of [0,1]^m.
double sample_Lambda(const SystemDef& sys, int lattice = 9, int random_samples = 2000);

// dt = 0.9 / (4 max D / h^2 + Lambda).
double auto_dt(const SystemDef& sys, double h, double Lambda);

struct Snapshot {
  double t = 0.0;
  Vec mins, maxs, interface_x;
};

struct Trajectory {
  std::vector<Snapshot> records;
  std::vector<StateGrid> states;  // filled when keep_states
  double dt = 0.0;
  long steps = 0;
  double max_preclamp_violation = 0.0;  // largest excursion outside [0,1] before clamping
};

using Observer = std::function<void(const StateGrid&)>;

// Explicit (or IMEX) stepping of u_t = D Lap u + F(u) on the fluid cells of the masked grid.
class GridStepper {
 public:
  explicit GridStepper(const Scenario& scen);
  ~GridStepper();
  GridStepper(const GridStepper&) = delete;
  GridStepper& operator=(const GridStepper&) = delete;

  void load(const StateGrid& s);
  StateGrid state() const;
  void initialize();  // from scen.init at scen.t_start

  void step();
  void advance(long n);
  double time() const { return t_origin_ + static_cast<double>(k_) * dt_; }
  void reset_clock(double t) {
    t_origin_ = t;
    k_ = 0;
  }
  double dt() const { return dt_; }
  double last_max_update() const { return last_update_; }
  double max_preclamp_violation() const { return max_violation_; }

  // D Lap u + F(u) evaluated on the current state.
  std::vector<Vec> rhs() const;

  struct Impl;  // opaque kernel state

 private:
  std::unique_ptr<Impl> impl_;
  Scenario scen_;
  double dt_ = 0.0;
  double t_origin_ = 0.0;
  long k_ = 0;
  double last_update_ = 0.0;
  double max_violation_ = 0.0;
};

StateGrid initial_state(const Scenario& scen);
StateGrid step(const StateGrid& s, const Scenario& scen);
Trajectory run(const Scenario& scen, const Observer& observer = {});

struct ResidualNorms {
  Vec max_norm, l2_norm;
  double worst() const;
};
ResidualNorms residual_elliptic(const StateGrid& s, const Scenario& scen);

// Per-component min/max over fluid cells and mean leftmost 1/2-crossing per row.
Snapshot summarize(const StateGrid& s, const MaskedGrid& grid);

// Neumann Laplacian over fluid cells (no far-field pinning), rows indexed by fluid ordinal.
Eigen::SparseMatrix<double> assemble_laplacian(const MaskedGrid& grid, BoundaryMode mode);
std::vector<int> fluid_ordinals(const MaskedGrid& grid);

void write_snapshot(const std::string& path, const StateGrid& s, double h);
StateGrid read_snapshot(const std::string& path, double* h = nullptr);
void write_event_log(const std::string& path, const Trajectory& traj);

}  // namespace obsfront
