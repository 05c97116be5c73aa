// Acceptance checks, one PASS/FAIL line per criterion. Arguments select criteria by
// number (e.g. `acceptance 5 6`); no arguments runs all of them.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "obsfront/scenario.hpp"
#include "obsfront/verifier.hpp"

using namespace obsfront;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::string source_path(const std::string& rel) { return std::string(OBSFRONT_SOURCE_DIR) + "/" + rel; }

fs::path out_root() {
  const fs::path p = fs::current_path() / "acceptance_out";
  fs::create_directories(p);
  return p;
}

std::shared_ptr<const FrontProfile> cubic_front() {
  static auto f = std::make_shared<const FrontProfile>(solve_planar_front(cubic_pair(0.25)));
  return f;
}

// 1: planar front speed of the cubic pair against (1 - 2a)/sqrt 2.
Outcome c01() {
  const auto t0 = Clock::now();
  FrontOptions o;
  o.h = 0.05;
  o.half_width = 30.0;
  const auto f = solve_planar_front(cubic_pair(0.25), o);
  const double exact = (1.0 - 2.0 * 0.25) / std::sqrt(2.0);
  const double rel = std::fabs(f.c() - exact) / exact;
  const double secs = seconds_since(t0);
  return {rel <= 0.01 && secs <= 30.0, fmt("c=%.7f exact=%.7f rel=%.2e time=%.2fs", f.c(), exact, rel, secs)};
}

// 2: symmetric LV competition has zero speed.
Outcome c02() {
  const auto t0 = Clock::now();
  const auto f = solve_planar_front(lv_system({2.0, 2.0, 1.0, 1.0}));
  const double secs = seconds_since(t0);
  return {std::fabs(f.c()) <= 1e-3 && secs <= 60.0, fmt("c=%.3e time=%.2fs", f.c(), secs)};
}

// Conditions evaluated inline from the printed inequalities, independent of the library.
struct Conds {
  bool P1, P2, P3, P4;
};

Conds direct_conditions(double k1, double k2, double r, double d) {
  Conds c{};
  const double den = d - r * (k2 - 1.0);
  c.P1 = den > 0.0 && 1.0 < d * k1 / den && d * k1 / den < 2.0 * (k2 - 1.0) / k2;
  c.P2 = (r + d * (k1 - 1.0)) / (k2 * r) < 3.0 - 2.0 * k1;
  c.P3 = false;
  if (k2 > 2.0)
    for (int n = 2; n <= 64 && !c.P3; ++n) {
      const double nn = n;
      if (!(1.0 < k1 && k1 < 1.0 + nn / ((nn - 1.0) * (2.0 * nn - 1.0)))) continue;
      const double s = d * (k1 - 1.0) * (nn - 1.0) * (nn - 1.0) / (nn * nn);
      c.P3 = (2.0 * s / k2 < r && r < s) || (s / k2 < r && r < 2.0 * s);
    }
  c.P4 = (2.0 * r + 4.0 * d * (k1 - 1.0)) / (r * k2) < 3.0 - k1;
  return c;
}

// 3: sign consistency of the LV speed with the positive-speed conditions.
Outcome c03() {
  const auto t0 = Clock::now();
  struct Point4 {
    LVParams p;
    const char* target;
  };
  const std::vector<Point4> pts{{{1.1, 2.0, 1.0, 1.0}, "P2"},
                                {{1.5, 3.0, 0.1, 1.0}, "P3"},
                                {{1.02, 4.0, 0.1, 1.0}, "P1"},
                                {{1.2, 2.0, 1.0, 1.0}, "P2"},
                                {{1.5, 3.0, 1.0, 1.0}, "P4"}};
  bool ok = true;
  std::ostringstream os;
  for (const auto& q : pts) {
    const Conds d = direct_conditions(q.p.k1, q.p.k2, q.p.r, q.p.d);
    const auto lib = lv_speed_conditions(q.p);
    const bool agree = d.P1 == lib.P1 && d.P2 == lib.P2 && d.P3 == lib.P3 && d.P4 == lib.P4;
    const std::string t = q.target;
    const bool holds = t == "P1" ? d.P1 : t == "P2" ? d.P2 : t == "P3" ? d.P3 : d.P4;
    const double c = solve_planar_front(lv_system(q.p)).c();
    ok = ok && agree && holds && c > 1e-3;
    os << fmt("(%g,%g,%g,%g) %s=%d c=%.4f; ", q.p.k1, q.p.k2, q.p.r, q.p.d, q.target, holds, c);
  }
  const LVParams sym{2.0, 2.0, 1.0, 1.0};
  const Conds ds = direct_conditions(sym.k1, sym.k2, sym.r, sym.d);
  const bool none = !(ds.P1 || ds.P2 || ds.P3 || ds.P4) && !lv_speed_conditions(sym).any();
  const double cs = solve_planar_front(lv_system(sym)).c();
  ok = ok && none && std::fabs(cs) <= 1e-3;
  const double secs = seconds_since(t0);
  os << fmt("symmetric: none=%d c=%.2e; time=%.1fs", none, cs, secs);
  return {ok && secs <= 300.0, os.str()};
}

// 4: ordered random pairs stay ordered under the explicit scheme.
Outcome c04() {
  struct Class {
    const char* name;
    SystemDef sys;
    ObstaclePtr obs;
    BoundaryMode mode;
  };
  const std::vector<Class> classes{
      {"cubic/plane", cubic_pair(0.3, 2, {1.0, 0.5}), make_no_obstacle(), BoundaryMode::mirror},
      {"cubic/disk", cubic_pair(0.3, 2, {1.0, 0.5}), make_disk(0.7), BoundaryMode::mirror},
      {"cubic/rect-staircase", cubic_pair(0.3, 2, {1.0, 0.5}), make_rectangle(1.2, 0.8), BoundaryMode::staircase},
      {"lv/disk", lv_system({1.1, 2.0, 1.0, 1.0}), make_disk(0.7), BoundaryMode::mirror}};
  bool ok = true;
  std::ostringstream os;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (const auto& cl : classes) {
    Scenario s(cl.sys);
    s.grid = make_mask(cl.obs, {-2, 2, -2, 2}, 0.1);
    s.boundary = cl.mode;
    s.far_field = FarField::neumann;
    s.init.kind = InitialCondition::Kind::uniform;
    s.init.uniform.assign(static_cast<std::size_t>(cl.sys.m()), 0.0);
    const int n = s.grid.nx * s.grid.ny, m = cl.sys.m();
    long violations = 0;
    double worst = -1.0;
    for (int pair = 0; pair < 100; ++pair) {
      StateGrid lo, hi;
      lo.m = hi.m = m;
      lo.nx = hi.nx = s.grid.nx;
      lo.ny = hi.ny = s.grid.ny;
      lo.u.assign(m, Vec(n));
      hi.u.assign(m, Vec(n));
      for (int i = 0; i < m; ++i)
        for (int c = 0; c < n; ++c) {
          lo.u[i][c] = U(rng);
          hi.u[i][c] = lo.u[i][c] + (1.0 - lo.u[i][c]) * U(rng);
        }
      GridStepper a(s), b(s);
      a.load(lo);
      b.load(hi);
      a.advance(1000);
      b.advance(1000);
      const auto ua = a.state(), ub = b.state();
      for (int i = 0; i < m; ++i)
        for (int c = 0; c < n; ++c)
          if (s.grid.is_fluid(c)) {
            const double d = ua.at(i, c) - ub.at(i, c);
            worst = std::max(worst, d);
            if (d > 1e-12) ++violations;
          }
    }
    ok = ok && violations == 0;
    os << fmt("%s: violations=%ld max(lo-hi)=%.1e; ", cl.name, violations, worst);
  }
  return {ok, os.str()};
}

const EntireApprox& entire_run() {
  static std::optional<EntireApprox> ea;
  if (!ea) {
    Scenario s(cubic_pair(0.25));
    s.grid = make_mask(make_disk(1.0), {-12, 52, -5, 5}, 0.1);
    s.front = cubic_front();
    EntireOptions o;
    o.gap_offset = 5.0;
    ea = approximate_entire_solution(s, o);
  }
  return *ea;
}

// 5: time monotonicity of the largest-n run and decreasing gaps over n.
Outcome c05() {
  const auto t0 = Clock::now();
  const auto& ea = entire_run();
  bool decreasing = true;
  std::ostringstream gaps;
  for (std::size_t k = 0; k < ea.gap.size(); ++k) {
    gaps << (k ? "," : "") << fmt("%.2e", ea.gap[k]);
    if (k > 0 && !(ea.gap[k] < ea.gap[k - 1])) decreasing = false;
  }
  const long viol = ea.monotone_violations.back();
  const double minc = ea.min_time_increment.back();
  return {viol == 0 && decreasing,
          fmt("u_t violations=%ld min increment=%.2e g(n)=[%s] time=%.1fs", viol, minc, gaps.str().c_str(),
              seconds_since(t0))};
}

// 6: largest-n run against the planar front at t = -n + 5/c.
Outcome c06() {
  const auto& ea = entire_run();
  return {ea.front_gap <= 5e-3, fmt("gap=%.3e at t=%.2f", ea.front_gap, ea.front_gap_time)};
}

std::map<std::string, PipelineResult>& passage_cache() {
  static std::map<std::string, PipelineResult> cache;
  return cache;
}

const PipelineResult& passage(const std::string& cfg) {
  auto& cache = passage_cache();
  auto it = cache.find(cfg);
  if (it == cache.end()) {
    const auto dir = out_root() / fs::path(cfg).stem();
    it = cache.emplace(cfg, run_pipeline_file(source_path(cfg), "passage", {}, dir.string())).first;
  }
  return it->second;
}

double num(const Json& j) { return j.is_object() ? j.at("value").get<double>() : j.get<double>(); }

// 7: complete propagation and post-passage gap for disk and rectangle.
Outcome c07() {
  bool ok = true;
  std::ostringstream os;
  for (const char* cfg : {"configs/passage_disk.yaml", "configs/passage_rectangle.yaml"}) {
    const auto t0 = Clock::now();
    const auto& r = passage(cfg);
    const double secs = seconds_since(t0);
    const double min_u = num(r.summary["limit"]["min_u_inf"]);
    const double gap = num(r.summary["final_gap_discrete"]);
    const std::string prop = r.summary["propagation"];
    const bool pass = prop == "complete" && min_u >= 0.999 && gap < 1e-2 && secs <= 900.0;
    ok = ok && pass;
    os << fmt("%s: %s min u_inf=%.6f gap=%.3e time=%.0fs; ", fs::path(cfg).stem().c_str(), prop.c_str(), min_u,
              gap, secs);
  }
  return {ok, os.str()};
}

// 8: global mean speed regression on the disk passage.
Outcome c08() {
  const auto& r = passage("configs/passage_disk.yaml");
  if (!r.summary.contains("gamma_hat")) return {false, "no speed estimate: " + r.summary.value("gamma_error", "")};
  const double g = num(r.summary["gamma_hat"]);
  const double c = cubic_front()->c();
  const double rel = std::fabs(g - c) / c;
  return {rel <= 0.05, fmt("gamma=%.5f c=%.5f rel=%.2e", g, c, rel)};
}

// 9: geometry predicates.
Outcome c09() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  bool ok = true;
  std::ostringstream os;
  const std::vector<std::pair<const char*, ObstaclePtr>> convex{
      {"disk", make_disk(1.0)}, {"ellipse", make_ellipse(2.0, 1.0)}, {"rectangle", make_rectangle(4.0, 2.0)}};
  for (const auto& [name, obs] : convex) {
    int yes = 0;
    for (int k = 0; k < 10;) {
      const Point c{2.0 * U(rng), U(rng)};
      if (!(obs->phi(c) < -1e-3)) continue;
      ++k;
      yes += is_star_shaped(*obs, c).verdict == Verdict::yes;
    }
    ok = ok && yes == 10;
    os << fmt("%s star %d/10; ", name, yes);
  }
  const auto ann = make_annulus_channel(2.0, 3.0, 0.1);
  const auto star = is_star_shaped(*ann, {0.0, 2.5});
  const bool ann_ok = star.verdict == Verdict::no && star.witness;
  ok = ok && ann_ok;
  os << fmt("annulus star=%s witness=%s; ", to_string(star.verdict),
            star.witness ? fmt("(%.2f,%.2f) |w|=%.2f", star.witness->x, star.witness->y,
                               std::hypot(star.witness->x, star.witness->y))
                               .c_str()
                         : "none");
  struct DC {
    const char* name;
    ObstaclePtr obs;
    Point e;
    Verdict want;
  };
  const std::vector<DC> dcs{{"ellipse e1", make_ellipse(2.0, 1.0), {1, 0}, Verdict::yes},
                            {"crescent axis", make_crescent(1.0, 1.6), {1, 0}, Verdict::yes},
                            {"crescent perp", make_crescent(1.0, 1.6), {0, 1}, Verdict::no},
                            {"annulus e1", ann, {1, 0}, Verdict::no}};
  for (const auto& d : dcs) {
    const auto v = is_directionally_convex(*d.obs, d.e, 0.0);
    ok = ok && v.verdict == d.want;
    os << fmt("%s=%s; ", d.name, to_string(v.verdict));
  }
  const double secs = seconds_since(t0);
  os << fmt("time=%.2fs", secs);
  return {ok && secs <= 10.0, os.str()};
}

// 10: zeta around the unit disk with eta/Dbar = 0.1.
Outcome c10() {
  const auto grid = make_mask(make_disk(1.0), {-8, 8, -8, 8}, 0.05);
  const auto z = build_zeta(grid, 0.1, 1.0);
  const bool ok = z.min_value > 1.0 && z.normal_deriv_min >= 0.95 && z.normal_deriv_max <= 1.05 &&
                  z.max_ratio_analytic <= 0.1 && z.max_ratio_grid <= 0.1;
  return {ok, fmt("min zeta=%.4f normal derivative in [%.4f, %.4f] max|Lap/zeta| analytic=%.4f grid=%.4f "
                  "collar=%.2f",
                  z.min_value, z.normal_deriv_min, z.normal_deriv_max, z.max_ratio_analytic, z.max_ratio_grid,
                  z.collar)};
}

// 11: sign checks of the entire-solution pair and the radial subsolution.
Outcome c11() {
  const auto sys = cubic_pair(0.25);
  const auto fp = cubic_front();
  const auto rep = audit_assumptions(sys);
  const auto dec = front_diagnostics(*fp, sys);
  ConstantsLedger L = rep.ledger;
  L.set_front(fp->c(), dec.a, dec.b);
  auto pq = std::make_shared<const PQFunctions>(build_pq(rep.pf));
  const auto disk = make_disk(1.0);
  const auto z = build_zeta(make_mask(disk, {-8, 8, -8, 8}, 0.05), L.eta.value, L.Dbar.value);
  auto in = make_inputs(L, pq, fp, z, disk, sys.D());
  in.safety = 2.0;
  const long N = 100000;
  bool ok = true;
  std::ostringstream os;
  auto check = [&](const char* name, const CandidateFunction& cand, SampleRegion reg) {
    reg.tol_factor = 1e-3;
    const auto rr = operator_residual(cand, sys, reg);
    const bool pass = rr.ok() && rr.samples >= N;
    ok = ok && pass;
    os << fmt("%s: samples=%ld violations=%ld worst excess=%.2e; ", name, rr.samples, rr.violation_count,
              rr.worst_excess);
  };
  const auto pair = build_entire_pair(in);
  check("pair lower", pair.lower, entire_pair_region(in, pair, Expect::subsolution, N));
  check("pair upper", pair.upper, entire_pair_region(in, pair, Expect::supersolution, N));
  const auto key = build_key_subsolution(in);
  check("radial lower", key.lower, key_region(in, key, N));
  return {ok, os.str()};
}

// 12: half-line ground state of the cubic pair.
Outcome c12() {
  const auto sys = cubic_pair(0.25);
  const auto U = solve_halfline_ground_state(sys, *cubic_front());
  double u0 = 0.0, uend = 1.0;
  for (const auto& comp : U.values) {
    u0 = std::max(u0, std::fabs(comp.front()));
    uend = std::min(uend, comp.back());
  }
  const bool ok = u0 == 0.0 && uend >= 0.999 && U.increasing && U.residual <= 1e-6 && U.min_time_increment >= -1e-12;
  return {ok, fmt("U(0)=%.1e U(Xi)>=%.6f increasing=%d residual=%.2e min snapshot increment=%.1e", u0, uend,
                  U.increasing, U.residual, U.min_time_increment)};
}

// 13: exploratory slit-width sweep of the annulus with a channel.
Outcome c13() {
  const auto dir = out_root() / "annulus_sweep";
  fs::create_directories(dir);
  std::ofstream rep(dir / "report.csv");
  rep << "slit,propagation,min_u_inf,window_min,converged,elliptic_residual\n";
  std::vector<double> mins;
  std::ostringstream os;
  for (double slit : {0.1, 0.2, 0.3, 0.4}) {
    const std::string tag = fmt("slit_%.1f", slit);
    const auto r = run_pipeline_file(source_path("configs/limit_annulus.yaml"), "limit",
                                     {fmt("obstacle.slit=%g", slit)}, (dir / tag).string());
    const auto& lim = r.summary["limit"];
    const double mu = num(lim["min_u_inf"]);
    mins.push_back(mu);
    rep << slit << ',' << lim["propagation"].get<std::string>() << ',' << mu << ',' << num(lim["window_min"])
        << ',' << lim["converged"].get<bool>() << ',' << num(lim["elliptic_residual"]) << '\n';
    os << fmt("slit %.1f: %s min=%.4f; ", slit, lim["propagation"].get<std::string>().c_str(), mu);
  }
  // Converged states only agree to about the relaxation tolerance.
  bool mono = true;
  for (std::size_t k = 1; k < mins.size(); ++k) mono = mono && mins[k] >= mins[k - 1] - 1e-4;
  os << "min u_inf non-decreasing in slit (to 1e-4): " << (mono ? "yes" : "no") << "; report " << (dir / "report.csv").string();
  return {true, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> all{
      {1, c01}, {2, c02}, {3, c03}, {4, c04},  {5, c05},  {6, c06}, {7, c07},
      {8, c08}, {9, c09}, {10, c10}, {11, c11}, {12, c12}, {13, c13}};
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& [id, fn] : all) {
    if (!pick.empty() && !pick.count(id)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %02d %s: %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
