#include "obsfront/grid_solver.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace obsfront {

namespace {

constexpr const char* kModule = "grid-solver";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Persistent workers splitting a row range into fixed contiguous chunks.
class RowPool {
 public:
  explicit RowPool(int workers) : n_(std::max(1, workers)) {
    for (int w = 1; w < n_; ++w) threads_.emplace_back([this, w] { loop(w); });
  }
  ~RowPool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
      ++gen_;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }
  int size() const { return n_; }

  // fn(worker, row_begin, row_end); returns after all chunks finish.
  void run(int rows, const std::function<void(int, int, int)>& fn) {
    if (n_ == 1) {
      fn(0, 0, rows);
      return;
    }
    {
      std::lock_guard<std::mutex> lk(mu_);
      job_ = &fn;
      rows_ = rows;
      pending_ = n_ - 1;
      ++gen_;
    }
    cv_.notify_all();
    chunk(0);
    std::unique_lock<std::mutex> lk(mu_);
    done_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

 private:
  void chunk(int w) {
    const int b = rows_ * w / n_, e = rows_ * (w + 1) / n_;
    (*job_)(w, b, e);
  }
  void loop(int w) {
    std::uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return gen_ != seen; });
        seen = gen_;
        if (stop_) return;
      }
      chunk(w);
      {
        std::lock_guard<std::mutex> lk(mu_);
        if (--pending_ == 0) done_.notify_one();
      }
    }
  }

  int n_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_, done_;
  std::uint64_t gen_ = 0;
  bool stop_ = false;
  int pending_ = 0;
  int rows_ = 0;
  const std::function<void(int, int, int)>* job_ = nullptr;
};

struct Assembly {
  Eigen::SparseMatrix<double> L;
  std::vector<int> left_rows, right_rows;  // fluid ordinals adjacent to the x halos
};

Assembly assemble(const MaskedGrid& g, BoundaryMode mode, bool pinned) {
  const std::vector<int> ord = fluid_ordinals(g);
  const double ih2 = 1.0 / (g.h * g.h);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(g.fluid_count) * 5);
  Assembly out;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const int c = g.index(i, j);
      if (g.kind[c] != CellKind::fluid) continue;
      const int row = ord[c];
      double diag = 0.0;
      const int ni[4] = {i - 1, i + 1, i, i};
      const int nj[4] = {j, j, j - 1, j + 1};
      for (int q = 0; q < 4; ++q) {
        if (ni[q] < 0 || ni[q] >= g.nx) {
          if (pinned) {
            diag -= ih2;
            (ni[q] < 0 ? out.left_rows : out.right_rows).push_back(row);
          }
          continue;
        }
        if (nj[q] < 0 || nj[q] >= g.ny) continue;
        const int n = g.index(ni[q], nj[q]);
        if (g.kind[n] == CellKind::fluid) {
          trip.emplace_back(row, ord[n], ih2);
          diag -= ih2;
        } else if (mode == BoundaryMode::mirror && g.kind[n] == CellKind::ghost) {
          const GhostStencil& gs = g.ghosts[g.ghost_of[n]];
          for (int k = 0; k < gs.count; ++k) trip.emplace_back(row, ord[gs.nodes[k]], ih2 * gs.weights[k]);
          diag -= ih2;
        }
      }
      trip.emplace_back(row, row, diag);
    }
  out.L.resize(g.fluid_count, g.fluid_count);
  out.L.setFromTriplets(trip.begin(), trip.end());
  out.L.makeCompressed();
  return out;
}

}  // namespace

std::vector<int> fluid_ordinals(const MaskedGrid& grid) {
  std::vector<int> ord(grid.kind.size(), -1);
  int k = 0;
  for (std::size_t c = 0; c < grid.kind.size(); ++c)
    if (grid.kind[c] == CellKind::fluid) ord[c] = k++;
  return ord;
}

Eigen::SparseMatrix<double> assemble_laplacian(const MaskedGrid& grid, BoundaryMode mode) {
  return assemble(grid, mode, false).L;
}

double sample_Lambda(const SystemDef& sys, int lattice, int random_samples) {
  const int m = sys.m();
  while (lattice > 2 && std::pow(static_cast<double>(lattice), m) > std::pow(17.0, 4)) --lattice;
  double best = 0.0;
  Vec u(static_cast<std::size_t>(m));
  auto visit = [&] {
    const Eigen::MatrixXd J = jacobian(sys, u);
    for (int i = 0; i < m; ++i) best = std::max(best, J.row(i).cwiseAbs().sum());
  };
  std::vector<int> idx(static_cast<std::size_t>(m), 0);
  for (;;) {
    for (int i = 0; i < m; ++i) u[i] = static_cast<double>(idx[i]) / (lattice - 1);
    visit();
    int k = 0;
    while (k < m && ++idx[k] == lattice) idx[k++] = 0;
    if (k == m) break;
  }
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int s = 0; s < random_samples; ++s) {
    for (int i = 0; i < m; ++i) u[i] = unif(rng);
    visit();
  }
  return best;
}

double auto_dt(const SystemDef& sys, double h, double Lambda) {
  return 0.9 / (4.0 * sys.Dbar() / (h * h) + Lambda);
}

double ResidualNorms::worst() const {
  double w = 0.0;
  for (double v : max_norm) w = std::max(w, v);
  return w;
}

struct GridStepper::Impl {
  struct Run {
    int a = 0, b = 0;
    std::vector<int> stair;  // offsets within the run of fluid cells touching K
  };
  struct PGhost {
    int cell = 0;
    int nodes[4] = {0, 0, 0, 0};
    double w[4] = {0, 0, 0, 0};
    int count = 0;
  };

  int m = 0, nx = 0, ny = 0, nxp = 0, nyp = 0;
  double h = 0.0;
  std::vector<Vec> cur, nxt;
  std::vector<std::vector<Run>> runs;
  std::vector<PGhost> ghosts;
  std::vector<std::uint8_t> blocked;  // padded: obstacle or ghost
  std::vector<std::vector<Vec>> lap, fval;
  std::vector<double> row_update, row_violation;
  std::unique_ptr<RowPool> pool;
  bool staircase = false;

  // IMEX state, built lazily.
  std::vector<std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>>> lu;
  std::vector<int> fluid_cells;
  Assembly asmb;

  int P(int i, int j) const { return (j + 1) * nxp + i + 1; }
};

GridStepper::GridStepper(const Scenario& scen) : impl_(std::make_unique<Impl>()), scen_(scen) {
  const MaskedGrid& g = scen_.grid;
  const SystemDef& sys = scen_.system;
  if (g.nx <= 0 || g.ny <= 0 || g.kind.empty())
    throw Error(ErrorCode::invalid_argument, kModule, "scenario grid is empty");
  if (sys.field().components() != sys.m())
    throw Error(ErrorCode::dimension_mismatch, kModule, "field and diffusion sizes differ");
  if (scen_.t_end < scen_.t_start)
    throw Error(ErrorCode::invalid_argument, kModule, "t_end precedes t_start");
  const bool needs_front = scen_.far_field == FarField::front_pinned ||
                           scen_.init.kind == InitialCondition::Kind::front;
  if (needs_front && !scen_.front)
    throw Error(ErrorCode::invalid_argument, kModule, "front profile required for pinning or front init");
  if (scen_.front && scen_.front->m() != sys.m())
    throw Error(ErrorCode::dimension_mismatch, kModule, "front profile has the wrong component count");

  const double Lambda = scen_.Lambda > 0.0 ? scen_.Lambda : sample_Lambda(sys);
  const double bound = 4.0 * sys.Dbar() / (g.h * g.h) + Lambda;
  const double span = scen_.t_end - scen_.t_start;
  if (scen_.dt > 0.0) {
    dt_ = scen_.dt;
    if (!scen_.imex && dt_ * bound > 1.0 + 1e-12) {
      std::ostringstream os;
      os << "dt = " << dt_ << " exceeds the monotonicity bound " << 1.0 / bound;
      throw Error(ErrorCode::cfl_violation, kModule, os.str());
    }
  } else {
    dt_ = scen_.imex ? 0.9 / std::max(Lambda, 1e-3) : 0.9 / bound;
    if (span > 0.0) dt_ = span / std::ceil(span / dt_ - 1e-9);
  }
  t_origin_ = scen_.t_start;

  Impl& I = *impl_;
  I.m = sys.m();
  I.nx = g.nx;
  I.ny = g.ny;
  I.nxp = g.nx + 2;
  I.nyp = g.ny + 2;
  I.h = g.h;
  I.staircase = scen_.boundary == BoundaryMode::staircase;
  const std::size_t np = static_cast<std::size_t>(I.nxp) * I.nyp;
  I.cur.assign(I.m, Vec(np, 0.0));
  I.nxt = I.cur;
  I.blocked.assign(np, 0);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (g.kind[g.index(i, j)] != CellKind::fluid) I.blocked[I.P(i, j)] = 1;
  I.runs.resize(g.ny);
  for (int j = 0; j < g.ny; ++j) {
    int i = 0;
    while (i < g.nx) {
      while (i < g.nx && g.kind[g.index(i, j)] != CellKind::fluid) ++i;
      if (i >= g.nx) break;
      Impl::Run r;
      r.a = i;
      while (i < g.nx && g.kind[g.index(i, j)] == CellKind::fluid) ++i;
      r.b = i;
      if (I.staircase)
        for (int q = r.a; q < r.b; ++q) {
          const int p = I.P(q, j);
          if (I.blocked[p - 1] || I.blocked[p + 1] || I.blocked[p - I.nxp] || I.blocked[p + I.nxp])
            r.stair.push_back(q - r.a);
        }
      I.runs[j].push_back(std::move(r));
    }
  }
  for (const auto& gs : g.ghosts) {
    Impl::PGhost pg;
    pg.cell = I.P(gs.cell % g.nx, gs.cell / g.nx);
    pg.count = gs.count;
    for (int k = 0; k < gs.count; ++k) {
      pg.nodes[k] = I.P(gs.nodes[k] % g.nx, gs.nodes[k] / g.nx);
      pg.w[k] = gs.weights[k];
    }
    I.ghosts.push_back(pg);
  }
  I.pool = std::make_unique<RowPool>(scen_.workers);
  I.lap.assign(I.pool->size(), std::vector<Vec>(I.m, Vec(g.nx)));
  I.fval = I.lap;
  I.row_update.assign(g.ny, 0.0);
  I.row_violation.assign(g.ny, 0.0);
}

GridStepper::~GridStepper() = default;

void GridStepper::load(const StateGrid& s) {
  Impl& I = *impl_;
  if (s.m != I.m || s.nx != I.nx || s.ny != I.ny)
    throw Error(ErrorCode::dimension_mismatch, kModule, "state does not match the scenario grid");
  for (int i = 0; i < I.m; ++i)
    for (int j = 0; j < I.ny; ++j)
      for (int q = 0; q < I.nx; ++q) {
        const int c = j * I.nx + q;
        I.cur[i][I.P(q, j)] = scen_.grid.kind[c] == CellKind::fluid ? s.u[i][c] : 0.0;
      }
  t_origin_ = s.t;
  k_ = 0;
}

StateGrid GridStepper::state() const {
  const Impl& I = *impl_;
  StateGrid s;
  s.m = I.m;
  s.nx = I.nx;
  s.ny = I.ny;
  s.t = time();
  s.u.assign(I.m, Vec(static_cast<std::size_t>(I.nx) * I.ny, kNaN));
  for (int i = 0; i < I.m; ++i)
    for (int j = 0; j < I.ny; ++j)
      for (const auto& r : I.runs[j])
        for (int q = r.a; q < r.b; ++q) s.u[i][j * I.nx + q] = I.cur[i][I.P(q, j)];
  return s;
}

StateGrid initial_state(const Scenario& scen) {
  const MaskedGrid& g = scen.grid;
  const int m = scen.system.m();
  StateGrid s;
  s.m = m;
  s.nx = g.nx;
  s.ny = g.ny;
  s.t = scen.t_start;
  s.u.assign(m, Vec(static_cast<std::size_t>(g.nx) * g.ny, kNaN));
  Vec buf(static_cast<std::size_t>(m));
  const auto& ic = scen.init;
  if (ic.kind == InitialCondition::Kind::state) {
    if (ic.state.m != m || ic.state.nx != g.nx || ic.state.ny != g.ny)
      throw Error(ErrorCode::dimension_mismatch, kModule, "initial state does not match the grid");
  }
  if (ic.kind == InitialCondition::Kind::uniform && static_cast<int>(ic.uniform.size()) != m)
    throw Error(ErrorCode::dimension_mismatch, kModule, "uniform initial value has the wrong size");
  if (ic.kind == InitialCondition::Kind::front && !scen.front)
    throw Error(ErrorCode::invalid_argument, kModule, "front init needs a front profile");
  if (ic.kind == InitialCondition::Kind::custom && !ic.custom)
    throw Error(ErrorCode::invalid_argument, kModule, "custom init needs a callback");
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const int c = g.index(i, j);
      if (g.kind[c] != CellKind::fluid) continue;
      switch (ic.kind) {
        case InitialCondition::Kind::front: {
          const double xi = g.center(i, j).x + scen.front->c() * scen.t_start + scen.front_shift;
          scen.front->eval(xi, buf.data());
          break;
        }
        case InitialCondition::Kind::uniform:
          buf = ic.uniform;
          break;
        case InitialCondition::Kind::state:
          for (int q = 0; q < m; ++q) buf[q] = ic.state.u[q][c];
          break;
        case InitialCondition::Kind::custom:
          ic.custom(g.center(i, j), buf.data());
          break;
      }
      for (int q = 0; q < m; ++q) s.u[q][c] = std::clamp(buf[q], 0.0, 1.0);
    }
  return s;
}

void GridStepper::initialize() {
  load(initial_state(scen_));
  t_origin_ = scen_.t_start;
}

namespace {

void fill_boundary(const Scenario& scen, GridStepper::Impl& I, std::vector<Vec>& arr, double t) {
  const MaskedGrid& g = scen.grid;
  if (scen.far_field == FarField::front_pinned) {
    const FrontProfile& f = *scen.front;
    Vec left(static_cast<std::size_t>(I.m)), right(static_cast<std::size_t>(I.m));
    f.eval(g.x_lo - 0.5 * g.h + f.c() * t + scen.front_shift, left.data());
    f.eval(g.x_hi() + 0.5 * g.h + f.c() * t + scen.front_shift, right.data());
    for (int i = 0; i < I.m; ++i)
      for (int j = 0; j < I.ny; ++j) {
        arr[i][I.P(-1, j)] = left[i];
        arr[i][I.P(I.nx, j)] = right[i];
      }
  } else {
    for (int i = 0; i < I.m; ++i)
      for (int j = 0; j < I.ny; ++j) {
        arr[i][I.P(-1, j)] = arr[i][I.P(0, j)];
        arr[i][I.P(I.nx, j)] = arr[i][I.P(I.nx - 1, j)];
      }
  }
  for (int i = 0; i < I.m; ++i) {
    std::memcpy(&arr[i][I.P(-1, -1)], &arr[i][I.P(-1, 0)], sizeof(double) * I.nxp);
    std::memcpy(&arr[i][I.P(-1, I.ny)], &arr[i][I.P(-1, I.ny - 1)], sizeof(double) * I.nxp);
  }
  if (!I.staircase)
    for (int i = 0; i < I.m; ++i) {
      double* a = arr[i].data();
      for (const auto& gh : I.ghosts) {
        double v = 0.0;
        for (int k = 0; k < gh.count; ++k) v += gh.w[k] * a[gh.nodes[k]];
        a[gh.cell] = v;
      }
    }
}

// Discrete Laplacian times h^2 over one run, staircase fix-ups included.
void run_laplacian(const GridStepper::Impl& I, const double* u, int p0, const GridStepper::Impl::Run& r,
                   double* out) {
  const int n = r.b - r.a;
  const int s = I.nxp;
  for (int k = 0; k < n; ++k) {
    const int p = p0 + k;
    out[k] = (u[p + 1] + u[p - 1]) + (u[p + s] + u[p - s]) - 4.0 * u[p];
  }
  for (int k : r.stair) {
    const int p = p0 + k;
    const double c = u[p];
    const double e = I.blocked[p + 1] ? c : u[p + 1];
    const double w = I.blocked[p - 1] ? c : u[p - 1];
    const double nn = I.blocked[p + s] ? c : u[p + s];
    const double so = I.blocked[p - s] ? c : u[p - s];
    out[k] = (e + w) + (nn + so) - 4.0 * c;
  }
}

}  // namespace

std::vector<Vec> GridStepper::rhs() const {
  Impl& I = *impl_;
  std::vector<Vec> arr = I.cur;
  fill_boundary(scen_, I, arr, time());
  const SystemDef& sys = scen_.system;
  std::vector<Vec> out(I.m, Vec(static_cast<std::size_t>(I.nx) * I.ny, kNaN));
  Vec lapbuf(static_cast<std::size_t>(I.nx));
  std::vector<Vec> fbuf(I.m, Vec(static_cast<std::size_t>(I.nx)));
  std::vector<const double*> up(I.m);
  std::vector<double*> fp(I.m);
  const double ih2 = 1.0 / (I.h * I.h);
  for (int j = 0; j < I.ny; ++j)
    for (const auto& r : I.runs[j]) {
      const int p0 = I.P(r.a, j);
      const int n = r.b - r.a;
      for (int i = 0; i < I.m; ++i) {
        up[i] = arr[i].data() + p0;
        fp[i] = fbuf[i].data();
      }
      sys.field().eval_soa(up.data(), fp.data(), static_cast<std::size_t>(n));
      for (int i = 0; i < I.m; ++i) {
        run_laplacian(I, arr[i].data(), p0, r, lapbuf.data());
        for (int k = 0; k < n; ++k)
          out[i][j * I.nx + r.a + k] = sys.D()[i] * ih2 * lapbuf[k] + fbuf[i][k];
      }
    }
  return out;
}

void GridStepper::step() {
  Impl& I = *impl_;
  const SystemDef& sys = scen_.system;
  const double t = time();
  fill_boundary(scen_, I, I.cur, t);
  const double dt = dt_;
  const double ih2 = 1.0 / (I.h * I.h);

  if (scen_.imex) {
    const MaskedGrid& g = scen_.grid;
    if (I.lu.empty()) {
      I.asmb = assemble(g, scen_.boundary, scen_.far_field == FarField::front_pinned);
      I.fluid_cells.clear();
      for (int j = 0; j < g.ny; ++j)
        for (const auto& r : I.runs[j])
          for (int q = r.a; q < r.b; ++q) I.fluid_cells.push_back(I.P(q, j));
      Eigen::SparseMatrix<double> id(g.fluid_count, g.fluid_count);
      id.setIdentity();
      for (int i = 0; i < I.m; ++i) {
        auto solver = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
        Eigen::SparseMatrix<double> A = id - (dt * sys.D()[i]) * I.asmb.L;
        solver->compute(A);
        if (solver->info() != Eigen::Success)
          throw Error(ErrorCode::no_convergence, kModule, "implicit diffusion factorization failed");
        I.lu.push_back(std::move(solver));
      }
    }
    const int nf = static_cast<int>(I.fluid_cells.size());
    std::vector<Eigen::VectorXd> rhs(I.m, Eigen::VectorXd(nf));
    Vec uu(static_cast<std::size_t>(I.m)), ff(static_cast<std::size_t>(I.m));
    for (int k = 0; k < nf; ++k) {
      const int p = I.fluid_cells[k];
      for (int i = 0; i < I.m; ++i) uu[i] = I.cur[i][p];
      sys.field().eval(uu.data(), ff.data());
      for (int i = 0; i < I.m; ++i) rhs[i][k] = uu[i] + dt * ff[i];
    }
    for (int i = 0; i < I.m; ++i) {
      const double coef = dt * sys.D()[i] * ih2;
      const double lval = I.cur[i][I.P(-1, 0)], rval = I.cur[i][I.P(I.nx, 0)];
      for (int row : I.asmb.left_rows) rhs[i][row] += coef * lval;
      for (int row : I.asmb.right_rows) rhs[i][row] += coef * rval;
      const Eigen::VectorXd sol = I.lu[i]->solve(rhs[i]);
      double upd = 0.0, viol = 0.0;
      for (int k = 0; k < nf; ++k) {
        const int p = I.fluid_cells[k];
        double v = sol[k];
        if (v < 0.0) {
          viol = std::max(viol, -v);
          v = 0.0;
        } else if (v > 1.0) {
          viol = std::max(viol, v - 1.0);
          v = 1.0;
        }
        upd = std::max(upd, std::abs(v - I.cur[i][p]));
        I.nxt[i][p] = v;
      }
      last_update_ = i == 0 ? upd : std::max(last_update_, upd);
      max_violation_ = std::max(max_violation_, viol);
    }
  } else {
    const Vec& D = sys.D();
    I.pool->run(I.ny, [&](int w, int jb, int je) {
      std::vector<const double*> up(I.m);
      std::vector<double*> fp(I.m);
      for (int j = jb; j < je; ++j) {
        double upd = 0.0, viol = 0.0;
        for (const auto& r : I.runs[j]) {
          const int p0 = I.P(r.a, j);
          const int n = r.b - r.a;
          for (int i = 0; i < I.m; ++i) {
            up[i] = I.cur[i].data() + p0;
            fp[i] = I.fval[w][i].data();
          }
          sys.field().eval_soa(up.data(), fp.data(), static_cast<std::size_t>(n));
          for (int i = 0; i < I.m; ++i) {
            double* lap = I.lap[w][i].data();
            run_laplacian(I, I.cur[i].data(), p0, r, lap);
            const double* u = I.cur[i].data() + p0;
            const double* f = I.fval[w][i].data();
            double* o = I.nxt[i].data() + p0;
            const double cd = dt * D[i] * ih2;
            for (int k = 0; k < n; ++k) o[k] = u[k] + cd * lap[k] + dt * f[k];
            double lo = 0.0, hi = 1.0, du = 0.0;
            for (int k = 0; k < n; ++k) {
              const double v = o[k];
              lo = v < lo ? v : lo;
              hi = v > hi ? v : hi;
              // NaN survives the clamp and is caught by the periodic scan.
              const double cl = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
              o[k] = cl;
              const double d = std::abs(cl - u[k]);
              du = d > du ? d : du;
            }
            viol = std::max(viol, std::max(-lo, hi - 1.0));
            upd = std::max(upd, du);
          }
        }
        I.row_update[j] = upd;
        I.row_violation[j] = viol;
      }
    });
    double upd = 0.0;
    for (int j = 0; j < I.ny; ++j) {
      upd = std::max(upd, I.row_update[j]);
      max_violation_ = std::max(max_violation_, I.row_violation[j]);
    }
    last_update_ = upd;
  }
  std::swap(I.cur, I.nxt);
  ++k_;

  if (scen_.nan_check_every > 0 && k_ % scen_.nan_check_every == 0) {
    for (int i = 0; i < I.m; ++i)
      for (int j = 0; j < I.ny; ++j)
        for (const auto& r : I.runs[j])
          for (int q = r.a; q < r.b; ++q)
            if (std::isnan(I.cur[i][I.P(q, j)])) {
              std::ostringstream os;
              os << "NaN in component " << i << " at cell (" << q << ", " << j << "), t = " << time();
              throw Error(ErrorCode::nan_detected, kModule, os.str());
            }
  }
}

void GridStepper::advance(long n) {
  for (long k = 0; k < n; ++k) step();
}

StateGrid step(const StateGrid& s, const Scenario& scen) {
  GridStepper st(scen);
  st.load(s);
  st.step();
  return st.state();
}

Snapshot summarize(const StateGrid& s, const MaskedGrid& grid) {
  Snapshot snap;
  snap.t = s.t;
  snap.mins.assign(s.m, std::numeric_limits<double>::infinity());
  snap.maxs.assign(s.m, -std::numeric_limits<double>::infinity());
  snap.interface_x.assign(s.m, kNaN);
  for (int i = 0; i < s.m; ++i) {
    double sum = 0.0;
    int rows = 0;
    for (int j = 0; j < grid.ny; ++j) {
      bool found = false;
      for (int q = 0; q < grid.nx; ++q) {
        const int c = grid.index(q, j);
        if (grid.kind[c] != CellKind::fluid) continue;
        const double v = s.u[i][c];
        snap.mins[i] = std::min(snap.mins[i], v);
        snap.maxs[i] = std::max(snap.maxs[i], v);
        if (!found && q > 0 && grid.kind[c - 1] == CellKind::fluid) {
          const double prev = s.u[i][c - 1];
          if (prev < 0.5 && v >= 0.5) {
            const double x0 = grid.center(q - 1, j).x;
            sum += x0 + grid.h * (0.5 - prev) / (v - prev);
            ++rows;
            found = true;
          }
        }
      }
    }
    if (rows > 0) snap.interface_x[i] = sum / rows;
  }
  return snap;
}

Trajectory run(const Scenario& scen, const Observer& observer) {
  GridStepper st(scen);
  st.initialize();
  Trajectory traj;
  traj.dt = st.dt();
  const double span = scen.t_end - scen.t_start;
  const long nsteps = span > 0.0 ? std::lround(span / st.dt()) : 0;
  const long every =
      scen.snapshot_every > 0.0 ? std::max(1L, std::lround(scen.snapshot_every / st.dt())) : std::max(nsteps, 1L);
  auto record = [&] {
    StateGrid s = st.state();
    traj.records.push_back(summarize(s, scen.grid));
    if (observer) observer(s);
    if (scen.keep_states) traj.states.push_back(std::move(s));
  };
  record();
  for (long k = 1; k <= nsteps; ++k) {
    st.step();
    if (k % every == 0 || k == nsteps) record();
  }
  traj.steps = nsteps;
  traj.max_preclamp_violation = st.max_preclamp_violation();
  return traj;
}

ResidualNorms residual_elliptic(const StateGrid& s, const Scenario& scen) {
  GridStepper st(scen);
  st.load(s);
  const auto r = st.rhs();
  ResidualNorms out;
  out.max_norm.assign(s.m, 0.0);
  out.l2_norm.assign(s.m, 0.0);
  const double area = scen.grid.h * scen.grid.h;
  for (int i = 0; i < s.m; ++i) {
    double sq = 0.0;
    for (std::size_t c = 0; c < r[i].size(); ++c) {
      if (scen.grid.kind[c] != CellKind::fluid) continue;
      out.max_norm[i] = std::max(out.max_norm[i], std::abs(r[i][c]));
      sq += r[i][c] * r[i][c] * area;
    }
    out.l2_norm[i] = std::sqrt(sq);
  }
  return out;
}

void write_snapshot(const std::string& path, const StateGrid& s, double h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, kModule, "cannot open " + path);
  const char magic[4] = {'O', 'B', 'S', 'F'};
  out.write(magic, 4);
  const std::int32_t dims[3] = {s.m, s.nx, s.ny};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  const double hd[2] = {h, s.t};
  out.write(reinterpret_cast<const char*>(hd), sizeof(hd));
  for (std::int32_t i = 0; i < s.m; ++i) out.write(reinterpret_cast<const char*>(&i), sizeof(i));
  for (const auto& comp : s.u)
    out.write(reinterpret_cast<const char*>(comp.data()), static_cast<std::streamsize>(sizeof(double) * comp.size()));
  if (!out) throw Error(ErrorCode::io_error, kModule, "write failed for " + path);
}

StateGrid read_snapshot(const std::string& path, double* h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, kModule, "cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "OBSF", 4) != 0)
    throw Error(ErrorCode::io_error, kModule, path + " is not a snapshot file");
  std::int32_t dims[3];
  double hd[2];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  in.read(reinterpret_cast<char*>(hd), sizeof(hd));
  if (!in || dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0)
    throw Error(ErrorCode::io_error, kModule, "corrupt snapshot header in " + path);
  StateGrid s;
  s.m = dims[0];
  s.nx = dims[1];
  s.ny = dims[2];
  s.t = hd[1];
  if (h) *h = hd[0];
  std::vector<std::int32_t> order(static_cast<std::size_t>(s.m));
  in.read(reinterpret_cast<char*>(order.data()), static_cast<std::streamsize>(sizeof(std::int32_t) * s.m));
  s.u.assign(s.m, Vec(static_cast<std::size_t>(s.nx) * s.ny));
  for (int i = 0; i < s.m; ++i) {
    if (order[i] < 0 || order[i] >= s.m)
      throw Error(ErrorCode::io_error, kModule, "bad component order in " + path);
    auto& comp = s.u[order[i]];
    in.read(reinterpret_cast<char*>(comp.data()), static_cast<std::streamsize>(sizeof(double) * comp.size()));
  }
  if (!in) throw Error(ErrorCode::io_error, kModule, "truncated snapshot " + path);
  return s;
}

void write_event_log(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, kModule, "cannot open " + path);
  const std::size_t m = traj.records.empty() ? 0 : traj.records.front().mins.size();
  out << "t";
  for (std::size_t i = 1; i <= m; ++i) out << ",min_" << i;
  for (std::size_t i = 1; i <= m; ++i) out << ",max_" << i;
  for (std::size_t i = 1; i <= m; ++i) out << ",interface_x_" << i;
  out << "\n" << std::setprecision(12);
  for (const auto& r : traj.records) {
    out << r.t;
    for (double v : r.mins) out << "," << v;
    for (double v : r.maxs) out << "," << v;
    for (double v : r.interface_x) out << "," << v;
    out << "\n";
  }
}

}  // namespace obsfront
