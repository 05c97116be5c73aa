#include "obsfront/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "obsfront/error.hpp"
#include "obsfront/verifier.hpp"

namespace obsfront {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "scenario";

[[noreturn]] void config_fail(const std::string& msg) {
  throw Error(ErrorCode::config_error, kModule, msg);
}

Json scalar_to_json(const YAML::Node& n) {
  const std::string& s = n.Scalar();
  if (n.Tag() == "!") return s;  // quoted
  if (s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "False" || s == "FALSE") return false;
  if (s == "null" || s == "~" || s.empty()) return nullptr;
  {
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end && *end == '\0' && errno == 0) return v;
  }
  {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end && *end == '\0' && end != s.c_str()) return v;
  }
  return s;
}

Json to_json(const YAML::Node& n, const std::string& path, ConfigDoc& doc) {
  switch (n.Type()) {
    case YAML::NodeType::Map: {
      Json obj = Json::object();
      for (const auto& kv : n) {
        const std::string key = kv.first.as<std::string>();
        const std::string sub = path.empty() ? key : path + "." + key;
        doc.lines[sub] = kv.first.Mark().line + 1;
        obj[key] = to_json(kv.second, sub, doc);
      }
      return obj;
    }
    case YAML::NodeType::Sequence: {
      Json arr = Json::array();
      int i = 0;
      for (const auto& item : n) {
        const std::string sub = path + "[" + std::to_string(i++) + "]";
        doc.lines[sub] = item.Mark().line + 1;
        arr.push_back(to_json(item, sub, doc));
      }
      return arr;
    }
    case YAML::NodeType::Scalar:
      return scalar_to_json(n);
    default:
      return nullptr;
  }
}

// Reads one section of the tree, remembering which keys were consumed.
class Section {
 public:
  Section(const ConfigDoc& doc, const Json* node, std::string path)
      : doc_(doc), node_(node), path_(std::move(path)) {
    if (node_ && !node_->is_null() && !node_->is_object())
      config_fail(doc_.where(path_) + ": expected a table");
    if (node_ && node_->is_null()) node_ = nullptr;
  }

  bool present() const { return node_ != nullptr; }
  bool has(const std::string& key) const { return node_ && node_->contains(key) && !(*node_)[key].is_null(); }
  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json* raw(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return nullptr;
    return &(*node_)[key];
  }

  double num(const std::string& key, double def) {
    const Json* v = raw(key);
    if (!v) return def;
    if (!v->is_number()) config_fail(doc_.where(path(key)) + ": expected a number");
    return v->get<double>();
  }
  long integer(const std::string& key, long def) {
    const Json* v = raw(key);
    if (!v) return def;
    if (!v->is_number_integer()) config_fail(doc_.where(path(key)) + ": expected an integer");
    return v->get<long>();
  }
  bool boolean(const std::string& key, bool def) {
    const Json* v = raw(key);
    if (!v) return def;
    if (!v->is_boolean()) config_fail(doc_.where(path(key)) + ": expected true or false");
    return v->get<bool>();
  }
  std::string str(const std::string& key, const std::string& def) {
    const Json* v = raw(key);
    if (!v) return def;
    if (!v->is_string()) config_fail(doc_.where(path(key)) + ": expected a string");
    return v->get<std::string>();
  }
  // A number or a list of numbers.
  Vec nums(const std::string& key, const Vec& def) {
    const Json* v = raw(key);
    if (!v) return def;
    if (v->is_number()) return {v->get<double>()};
    if (!v->is_array()) config_fail(doc_.where(path(key)) + ": expected a list of numbers");
    Vec out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number())
        config_fail(doc_.where(path(key) + "[" + std::to_string(i) + "]") + ": expected a number");
      out.push_back((*v)[i].get<double>());
    }
    return out;
  }
  Section sub(const std::string& key) { return Section(doc_, raw(key), path(key)); }

  void finish() const {
    if (!node_) return;
    for (const auto& [k, v] : node_->items())
      if (!used_.count(k)) config_fail(doc_.where(path(k)) + ": unknown field");
  }

  const ConfigDoc& doc() const { return doc_; }

 private:
  const ConfigDoc& doc_;
  const Json* node_;
  std::string path_;
  std::set<std::string> used_;
};

std::string require_kind(Section& s, const std::set<std::string>& allowed) {
  if (!s.has("kind")) config_fail(s.doc().where(s.path("kind")) + ": missing field");
  const std::string k = s.str("kind", "");
  if (!allowed.count(k)) {
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    config_fail(s.doc().where(s.path("kind")) + ": unknown kind '" + k + "' (expected one of " + list + ")");
  }
  return k;
}

void parse_system(Section s, SystemConfig& c) {
  c.kind = require_kind(s, {"cubic_pair", "lv", "polynomial"});
  c.diffusion = s.nums("diffusion", {});
  if (c.kind == "cubic_pair") {
    c.a = s.num("a", c.a);
    c.m = static_cast<int>(s.integer("m", c.m));
  } else if (c.kind == "lv") {
    c.lv.k1 = s.num("k1", c.lv.k1);
    c.lv.k2 = s.num("k2", c.lv.k2);
    c.lv.r = s.num("r", c.lv.r);
    c.lv.d = s.num("d", c.lv.d);
    const std::string frame = s.str("frame", "cooperative");
    if (frame != "original" && frame != "cooperative")
      config_fail(s.doc().where(s.path("frame")) + ": expected original or cooperative");
    c.original_frame = frame == "original";
  } else {
    if (c.diffusion.empty()) config_fail(s.doc().where(s.path("diffusion")) + ": missing field");
    const Json* t = s.raw("terms");
    if (!t || !t->is_array()) config_fail(s.doc().where(s.path("terms")) + ": expected a list per component");
    for (std::size_t i = 0; i < t->size(); ++i) {
      const std::string pi = s.path("terms") + "[" + std::to_string(i) + "]";
      const Json& comp = (*t)[i];
      if (!comp.is_array()) config_fail(s.doc().where(pi) + ": expected a list of monomials");
      std::vector<Monomial> mons;
      for (std::size_t k = 0; k < comp.size(); ++k) {
        Section ms(s.doc(), &comp[k], pi + "[" + std::to_string(k) + "]");
        Monomial mo;
        mo.coeff = ms.num("coeff", 0.0);
        for (double e : ms.nums("exponents", {})) mo.exponents.push_back(static_cast<int>(e));
        ms.finish();
        mons.push_back(std::move(mo));
      }
      c.terms.push_back(std::move(mons));
    }
  }
  s.finish();
}

void parse_obstacle(Section s, ObstacleConfig& c) {
  if (!s.present()) return;
  c.kind = require_kind(s, {"none", "disk", "ellipse", "rectangle", "annulus_channel", "polynomial"});
  c.r = s.num("r", c.r);
  c.a = s.num("a", c.a);
  c.b = s.num("b", c.b);
  c.w = s.num("w", c.w);
  c.h = s.num("h", c.h);
  c.r_in = s.num("r_in", c.r_in);
  c.r_out = s.num("r_out", c.r_out);
  c.slit = s.num("slit", c.slit);
  c.angle = s.num("angle", 0.0);
  const Vec shift = s.nums("shift", {0.0, 0.0});
  if (shift.size() != 2) config_fail(s.doc().where(s.path("shift")) + ": expected [x, y]");
  c.shift = {shift[0], shift[1]};
  c.bound = s.num("bound", 0.0);
  if (c.kind == "polynomial") {
    const Json* t = s.raw("terms");
    if (!t || !t->is_array()) config_fail(s.doc().where(s.path("terms")) + ": expected a list of terms");
    for (std::size_t k = 0; k < t->size(); ++k) {
      Section ts(s.doc(), &(*t)[k], s.path("terms") + "[" + std::to_string(k) + "]");
      PolyTerm pt;
      pt.coeff = ts.num("coeff", 0.0);
      pt.px = static_cast<int>(ts.integer("px", 0));
      pt.py = static_cast<int>(ts.integer("py", 0));
      ts.finish();
      c.terms.push_back(pt);
    }
  }
  s.finish();
}

}  // namespace

std::string ConfigDoc::where(const std::string& path) const {
  auto it = lines.find(path);
  if (it != lines.end() && it->second > 0) return origin + ":" + std::to_string(it->second) + ": " + path;
  return origin + ": " + path;
}

ConfigDoc parse_config_text(const std::string& text, const std::string& origin) {
  ConfigDoc doc;
  doc.origin = origin;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    config_fail(origin + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) config_fail(origin + ": top level must be a table");
  doc.tree = to_json(root, "", doc);
  return doc;
}

ConfigDoc load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, kModule, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

void apply_override(ConfigDoc& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) config_fail("override '" + assignment + "': expected key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string val = assignment.substr(eq + 1);
  Json value;
  try {
    ConfigDoc scratch;
    value = to_json(YAML::Load(val), key, scratch);
  } catch (const YAML::Exception& e) {
    config_fail("override '" + assignment + "': " + e.msg);
  }
  Json* node = &doc.tree;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) config_fail("override '" + assignment + "': empty key segment");
    if (!node->is_object()) config_fail("override '" + assignment + "': " + key.substr(0, start) + " is not a table");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
  doc.lines.erase(key);
  doc.overrides.push_back(assignment);
}

ScenarioConfig parse_scenario(const ConfigDoc& doc) {
  ScenarioConfig c;
  Section top(doc, &doc.tree, "");
  if (!top.has("system")) config_fail(doc.origin + ": system: missing field");
  parse_system(top.sub("system"), c.system);
  parse_obstacle(top.sub("obstacle"), c.obstacle);
  top.str("name", "");
  top.str("description", "");

  {
    Section s = top.sub("front");
    c.front.h = s.num("h", c.front.h);
    c.front.half_width = s.num("half_width", c.front.half_width);
    c.front.tol = s.num("tol", c.front.tol);
    c.front.tol_res = s.num("tol_res", c.front.tol_res);
    c.halfline = s.boolean("halfline", false);
    c.halfline_opts.half_width = s.num("halfline_width", c.halfline_opts.half_width);
    c.halfline_opts.tol = s.num("halfline_tol", c.halfline_opts.tol);
    s.finish();
  }
  {
    Section s = top.sub("grid");
    c.h = s.num("h", c.h);
    c.entire_grid.x_lo = s.num("x_lo", c.entire_grid.x_lo);
    c.entire_grid.x_hi = s.num("x_hi", c.entire_grid.x_hi);
    c.entire_grid.y_lo = s.num("y_lo", c.entire_grid.y_lo);
    c.entire_grid.y_hi = s.num("y_hi", c.entire_grid.y_hi);
    const std::string mode = s.str("boundary", "mirror");
    if (mode != "mirror" && mode != "staircase")
      config_fail(doc.where(s.path("boundary")) + ": expected mirror or staircase");
    c.boundary = mode == "mirror" ? BoundaryMode::mirror : BoundaryMode::staircase;
    c.workers = static_cast<int>(s.integer("workers", 1));
    s.finish();
    if (!(c.h > 0.0)) config_fail(doc.where("grid.h") + ": must be positive");
  }
  {
    Section s = top.sub("passage");
    auto& p = c.passage;
    p.start_x = s.num("start_x", p.start_x);
    p.ahead = s.num("ahead", p.ahead);
    p.behind = s.num("behind", p.behind);
    p.half_height = s.num("half_height", p.half_height);
    p.t_end = s.num("t_end", p.t_end);
    p.shift_length = s.num("shift_length", p.shift_length);
    p.snapshot_every = s.num("snapshot_every", p.snapshot_every);
    p.gap_window = s.num("gap_window", p.gap_window);
    s.finish();
  }
  {
    Section s = top.sub("entire");
    auto& e = c.entire;
    e.n_list = s.nums("n_list", {});
    e.compare_every = s.num("compare_every", e.compare_every);
    e.monotone_every = s.num("monotone_every", e.monotone_every);
    e.gap_offset = s.num("gap_offset", e.gap_offset);
    e.overlap_tol = s.num("overlap_tol", e.overlap_tol);
    e.monotone_tol = s.num("monotone_tol", e.monotone_tol);
    s.finish();
  }
  {
    Section s = top.sub("limit");
    auto& l = c.limit;
    l.relax_time = s.num("relax_time", l.relax_time);
    l.tol = s.num("tol", l.tol);
    l.window = s.num("window", l.window);
    l.far_radius = s.num("far_radius", l.far_radius);
    l.allow_unconverged = s.boolean("allow_unconverged", l.allow_unconverged);
    s.finish();
  }
  {
    Section s = top.sub("verify");
    auto& v = c.verify;
    v.samples = s.integer("samples", v.samples);
    v.boundary_samples = s.integer("boundary_samples", v.boundary_samples);
    v.safety = s.num("safety", v.safety);
    v.seed = static_cast<std::uint64_t>(s.integer("seed", static_cast<long>(v.seed)));
    v.tol_factor = s.num("tol_factor", v.tol_factor);
    v.zeta_h = s.num("zeta_h", v.zeta_h);
    v.zeta_margin = s.num("zeta_margin", v.zeta_margin);
    s.finish();
  }
  {
    Section s = top.sub("diagnostics");
    auto& d = c.diagnostics;
    d.eps = s.num("eps", d.eps);
    d.level = s.num("level", d.level);
    d.min_fraction = s.num("min_fraction", d.min_fraction);
    d.min_interfaces = static_cast<int>(s.integer("min_interfaces", d.min_interfaces));
    s.finish();
  }
  {
    Section s = top.sub("lv_sweep");
    c.sweep.k1 = s.nums("k1", {});
    c.sweep.k2 = s.nums("k2", {});
    c.sweep.r = s.nums("r", {});
    c.sweep.d = s.nums("d", {});
    c.sweep.c_tol = s.num("c_tol", c.sweep.c_tol);
    s.finish();
  }
  {
    Section s = top.sub("expect");
    c.expect_propagation = s.str("propagation", c.expect_propagation);
    if (c.expect_propagation != "complete" && c.expect_propagation != "blocked" &&
        c.expect_propagation != "undecided")
      config_fail(doc.where("expect.propagation") + ": expected complete, blocked or undecided");
    s.finish();
  }
  top.finish();
  return c;
}

SystemDef make_system(const SystemConfig& c) {
  if (c.kind == "cubic_pair") return cubic_pair(c.a, c.m, c.diffusion);
  if (c.kind == "lv") {
    LVParams p = c.lv;
    return lv_system(p);
  }
  if (c.kind == "polynomial") return polynomial_system("polynomial", c.diffusion, c.terms);
  config_fail("system.kind: unknown kind '" + c.kind + "'");
}

ObstaclePtr make_obstacle(const ObstacleConfig& c) {
  ObstaclePtr o;
  if (c.kind == "none") return make_no_obstacle();
  if (c.kind == "disk") o = make_disk(c.r);
  else if (c.kind == "ellipse") o = make_ellipse(c.a, c.b);
  else if (c.kind == "rectangle") o = make_rectangle(c.w, c.h);
  else if (c.kind == "annulus_channel") o = make_annulus_channel(c.r_in, c.r_out, c.slit);
  else if (c.kind == "polynomial") o = make_polynomial_obstacle(c.terms, c.bound);
  else config_fail("obstacle.kind: unknown kind '" + c.kind + "'");
  if (c.angle != 0.0 || c.shift.x != 0.0 || c.shift.y != 0.0) o = make_transformed(o, c.angle, c.shift);
  return o;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const std::vector<std::string>& pipeline_names() {
  static const std::vector<std::string> names{"front", "passage", "entire", "limit", "verify", "lv-sweep"};
  return names;
}

// ---------------------------------------------------------------------------
// Pipelines

namespace {

Json tagged(double v, const char* provenance) {
  Json j;
  j["value"] = std::isfinite(v) ? Json(v) : Json(nullptr);
  j["provenance"] = provenance;
  return j;
}
Json est(double v) { return tagged(v, "estimated"); }
Json cfgv(double v) { return tagged(v, "config"); }

Json ledger_json(const ConstantsLedger& L) {
  Json j = Json::object();
  for (const auto& [name, v] : L.entries()) {
    if (!v.known()) continue;
    j[name] = {{"value", v.value}, {"provenance", to_string(v.provenance)}, {"origin", v.origin}};
  }
  return j;
}

struct Run {
  const ScenarioConfig& cfg;
  SystemDef sys;
  ObstaclePtr obs;
  fs::path out;
  Json summary = Json::object();
  Json verdicts = Json::object();
  Json outputs = Json::array();
  Json ledger = Json::object();
  long steps = 0;

  std::string file(const std::string& name) {
    outputs.push_back(name);
    return (out / name).string();
  }
  bool lv() const { return cfg.system.kind == "lv"; }

  // Snapshots in the requested frame.
  StateGrid framed(const StateGrid& s) const {
    if (!(lv() && cfg.system.original_frame)) return s;
    StateGrid o = s;
    for (double& v : o.u[1])
      if (v == v) v = 1.0 - v;
    return o;
  }
};

std::shared_ptr<FrontProfile> solve_front(Run& r) {
  auto fp = std::make_shared<FrontProfile>(solve_planar_front(r.sys, r.cfg.front));
  r.summary["c"] = est(fp->c());
  return fp;
}

AssumptionReport audit(Run& r, bool& ok) {
  try {
    auto rep = audit_assumptions(r.sys);
    ok = rep.ok();
    return rep;
  } catch (const AssumptionError& e) {
    ok = false;
    r.summary["audit_error"] = e.what();
    return e.report();
  }
}

void write_gaps_csv(const std::string& path, const PassageResult& res) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::io_error, kModule, "cannot write " + path);
  os.precision(17);
  os << "t,front_x,gap_discrete,gap_continuum,comoving\n";
  for (const auto& g : res.gaps)
    os << g.t << ',' << g.front_x << ',' << g.gap_discrete << ',' << g.gap_continuum << ','
       << (g.comoving ? 1 : 0) << '\n';
}

Json limit_json(const LimitState& lim, const Classification& cls) {
  return {{"propagation", to_string(cls.kind)},
          {"min_u_inf", est(lim.min_value)},
          {"min_location", {lim.min_location.x, lim.min_location.y}},
          {"window_min", est(lim.window_min)},
          {"converged", lim.converged},
          {"relax_time_used", est(lim.relax_time_used)},
          {"final_update_rate", est(lim.final_update_rate)},
          {"elliptic_residual", est(lim.residual.worst())},
          {"far_field_deviation", est(lim.far_field_deviation)}};
}

void pipeline_front(Run& r) {
  auto fp = solve_front(r);
  DecayReport dec;
  try {
    dec = front_diagnostics(*fp, r.sys);
    r.verdicts["decay_fit_ok"] = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::fit_degenerate) throw;
    r.summary["decay_error"] = e.what();
    r.verdicts["decay_fit_ok"] = false;
  }
  bool audit_ok = false;
  auto rep = audit(r, audit_ok);
  ConstantsLedger L = rep.ledger;
  L.set_front(fp->c(), dec.a, dec.b);
  r.ledger = ledger_json(L);
  r.summary["front"] = {{"residual", est(fp->residual)},
                        {"strictly_increasing", fp->strictly_increasing},
                        {"decay_a", est(dec.a)},
                        {"decay_b", est(dec.b)},
                        {"Kbar1", est(dec.Kbar1)},
                        {"concavity_cut", est(dec.Cconc)},
                        {"envelope_ok", dec.envelope_ok},
                        {"h", cfgv(fp->h())},
                        {"xi_min", cfgv(fp->xi_min())},
                        {"xi_max", cfgv(fp->xi_max())}};
  r.summary["audit"] = {{"A1", rep.a1_ok}, {"A2", rep.a2_ok}, {"A3", rep.a3_ok}, {"A4", rep.a4_ok}};
  write_front_profile(r.file("front_profile.txt"), *fp, dec);
  if (r.lv()) {
    const auto cond = lv_speed_conditions(r.cfg.system.lv);
    r.summary["lv_conditions"] = {{"P1", cond.P1}, {"P2", cond.P2}, {"P3", cond.P3}, {"P4", cond.P4},
                                  {"any", cond.any()}};
    r.summary["frame"] = r.cfg.system.original_frame ? "original" : "cooperative";
    if (r.cfg.system.original_frame) {
      std::ofstream os(r.file("front_profile_original.csv"));
      os.precision(17);
      os << "xi,u1,u2\n";
      for (int j = 0; j < fp->size(); ++j) {
        const auto o = lv_inverse_transform({fp->values(0)[j], fp->values(1)[j]});
        os << fp->xi(j) << ',' << o[0] << ',' << o[1] << '\n';
      }
    }
  }
  if (r.cfg.halfline) {
    const auto hl = solve_halfline_ground_state(r.sys, *fp, r.cfg.halfline_opts);
    double tail = 1.0;
    for (const auto& v : hl.values) tail = std::min(tail, v.back());
    r.summary["halfline"] = {{"residual", est(hl.residual)},
                             {"increasing", hl.increasing},
                             {"U_at_Xi_min", est(tail)},
                             {"min_time_increment", est(hl.min_time_increment)}};
    std::ofstream os(r.file("halfline.csv"));
    os.precision(17);
    os << "xi";
    for (std::size_t i = 0; i < hl.values.size(); ++i) os << ",U" << i + 1;
    os << '\n';
    for (std::size_t j = 0; j < hl.values[0].size(); ++j) {
      os << hl.h * static_cast<double>(j);
      for (const auto& v : hl.values) os << ',' << v[j];
      os << '\n';
    }
    r.verdicts["halfline_ok"] = hl.increasing && hl.residual <= 1e-6 && tail >= 0.999;
  }
  r.verdicts["audit_ok"] = audit_ok;
  r.verdicts["front_increasing"] = fp->strictly_increasing;
  r.verdicts["front_residual_ok"] = fp->residual <= 1e-6;
}

void pipeline_passage(Run& r, bool full) {
  auto fp = solve_front(r);
  PassageOptions po = r.cfg.passage;
  if (!full) po.t_end = 0.0;
  const MaskedGrid grid = passage_grid(r.obs, r.cfg.h, po);
  const auto& dc = r.cfg.diagnostics;
  std::vector<Interface> interfaces;
  WidthEstimate width;
  long width_unresolved = 0;
  Observer obs_fn;
  if (full) {
    obs_fn = [&](const StateGrid& u) {
      try {
        interfaces.push_back(interface_set(u, grid, dc.level));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::empty_interface) throw;
      }
      try {
        auto w = front_width(u, grid, dc.eps, dc.level);
        width.M = std::max(width.M, w.M);
        width.samples.push_back(w);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::never_satisfied && e.code() != ErrorCode::empty_interface) throw;
        ++width_unresolved;
      }
    };
  }
  PassageResult res = run_passage(r.sys, fp, r.obs, r.cfg.h, po, obs_fn, r.cfg.boundary, r.cfg.workers);
  r.steps += res.fixed_trajectory.steps;
  write_snapshot(r.file("release.bin"), r.framed(res.release_state), r.cfg.h);
  write_event_log(r.file("events.csv"), res.fixed_trajectory);
  r.summary["release_time"] = est(res.release_time);
  r.summary["planar_speed_discrete"] = est(res.planar_speed_discrete);

  LimitState lim = extract_u_infinity(res.fixed, res.release_state, r.cfg.limit);
  const Classification cls = classify_propagation(lim);
  write_snapshot(r.file("u_inf.bin"), r.framed(lim.u_inf), r.cfg.h);
  r.summary["limit"] = limit_json(lim, cls);
  r.summary["propagation"] = to_string(cls.kind);
  r.verdicts["propagation_matches"] = r.cfg.expect_propagation == to_string(cls.kind);
  if (!full) return;

  write_gaps_csv(r.file("gaps.csv"), res);
  r.summary["final_gap_discrete"] = est(res.final_gap_discrete);
  r.summary["final_gap_continuum"] = est(res.final_gap_continuum);
  r.summary["t_end"] = cfgv(std::max(res.release_time, po.t_end));
  write_interface_csv(r.file("interfaces.csv"), interfaces);
  try {
    SpeedOptions so;
    so.min_fraction = dc.min_fraction;
    so.min_interfaces = dc.min_interfaces;
    const auto sp = global_mean_speed(interfaces, grid, so);
    write_speed_pairs_csv(r.file("speed_pairs.csv"), sp);
    const double c = fp->c();
    r.summary["gamma_hat"] = est(sp.gamma);
    r.summary["gamma_band"] = est(sp.band);
    r.summary["gamma_relative_error"] = est(std::fabs(sp.gamma - c) / c);
    r.verdicts["speed_within_5pct"] = std::fabs(sp.gamma - c) <= 0.05 * c;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::insufficient_interfaces) throw;
    r.summary["gamma_error"] = e.what();
    r.verdicts["speed_within_5pct"] = false;
  }
  write_width_csv(r.file("width.csv"), width);
  r.summary["front_width"] = {{"eps", cfgv(dc.eps)}, {"M", est(width.M)}, {"unresolved_snapshots", width_unresolved}};
  if (r.cfg.expect_propagation == "complete")
    r.verdicts["gap_below_1e-2"] = res.final_gap_discrete <= 1e-2;
}

void pipeline_entire(Run& r) {
  auto fp = solve_front(r);
  Scenario base(r.sys);
  base.grid = make_mask(r.obs, r.cfg.entire_grid, r.cfg.h);
  base.front = fp;
  base.boundary = r.cfg.boundary;
  base.workers = r.cfg.workers;
  const EntireApprox ea = approximate_entire_solution(base, r.cfg.entire);
  bool decreasing = true;
  for (std::size_t k = 1; k < ea.gap.size(); ++k) decreasing = decreasing && ea.gap[k] < ea.gap[k - 1];
  Json report = {{"n_list", ea.n_list},
                 {"gap", ea.gap},
                 {"n_order_violation", ea.n_order_violation},
                 {"min_time_increment", ea.min_time_increment},
                 {"monotone_violations", ea.monotone_violations},
                 {"front_gap", ea.front_gap},
                 {"front_gap_time", ea.front_gap_time},
                 {"dt", ea.dt}};
  {
    std::ofstream os(r.file("entire.json"));
    os << report.dump(2) << '\n';
  }
  write_snapshot(r.file("entire_final.bin"), r.framed(ea.final_state), r.cfg.h);
  write_event_log(r.file("events.csv"), ea.trajectory);
  r.steps += ea.trajectory.steps;
  Json gaps = Json::array();
  for (double g : ea.gap) gaps.push_back(est(g));
  r.summary["entire"] = {{"n_list", ea.n_list},
                         {"gap", gaps},
                         {"gap_strictly_decreasing", decreasing},
                         {"min_time_increment_largest_n", est(ea.min_time_increment.back())},
                         {"monotone_violations_largest_n", ea.monotone_violations.back()},
                         {"front_gap", est(ea.front_gap)},
                         {"front_gap_time", est(ea.front_gap_time)}};
  r.verdicts["gap_strictly_decreasing"] = decreasing;
  r.verdicts["monotone_in_time"] = ea.monotone_violations.back() == 0;
  r.verdicts["front_gap_below_5e-3"] = ea.front_gap <= 5e-3;
}

Json report_json(const ResidualReport& rep) {
  return {{"ok", rep.ok()},
          {"samples", rep.samples},
          {"active", rep.active},
          {"boundary_samples", rep.boundary_samples},
          {"violations", rep.violation_count},
          {"worst_excess", est(rep.worst_excess)},
          {"min_margin", est(rep.min_margin)},
          {"min_L", rep.min_L},
          {"max_L", rep.max_L},
          {"max_fd_mismatch", est(rep.max_fd_mismatch)},
          {"fd_nonsmooth", rep.fd_nonsmooth}};
}

Json audit_json(const AuditTrail& t) {
  Json j = Json::array();
  for (const auto& e : t) j.push_back({{"name", e.name}, {"value", e.value}, {"provenance", "formula"}, {"rule", e.rule}});
  return j;
}

void pipeline_verify(Run& r) {
  auto fp = solve_front(r);
  bool audit_ok = false;
  const auto rep = audit(r, audit_ok);
  if (!audit_ok) throw Error(ErrorCode::config_error, kModule, "assumption audit failed; constructions need A1-A4");
  const DecayReport dec = front_diagnostics(*fp, r.sys);
  ConstantsLedger L = rep.ledger;
  L.set_front(fp->c(), dec.a, dec.b);
  auto pq = std::make_shared<PQFunctions>(build_pq(rep.pf));
  const auto& vc = r.cfg.verify;
  ConstructionInputs in;
  if (r.obs->is_empty()) {
    in.ledger = L;
    in.pq = pq;
    in.front = fp;
    in.obstacle = r.obs;
    in.D = r.sys.D();
  } else {
    const double R = r.obs->bound_radius() + vc.zeta_margin;
    const MaskedGrid zg = make_mask(r.obs, {-R, R, -R, R}, vc.zeta_h);
    const ZetaField z = build_zeta(zg, L.eta.value, L.Dbar.value);
    in = make_inputs(L, pq, fp, z, r.obs, r.sys.D());
    r.summary["zeta"] = {{"chat", est(z.chat)}, {"sup", est(z.sup_value)}, {"sup_grad", est(z.sup_grad)},
                         {"sup_lap", est(z.sup_lap)}};
  }
  in.safety = vc.safety;
  r.ledger = ledger_json(L);

  std::ofstream os(r.file("verifier_report.txt"));
  Json checks = Json::object();
  bool all_ok = true;
  auto check = [&](const std::string& name, const CandidateFunction& cand, SampleRegion reg, const AuditTrail& trail) {
    reg.seed = vc.seed;
    reg.tol_factor = vc.tol_factor;
    const ResidualReport rr = operator_residual(cand, r.sys, reg);
    os << "== " << name << '\n' << audit_text(trail) << rr.to_text() << "\n\n";
    Json j = report_json(rr);
    j["audit"] = audit_json(trail);
    checks[name] = j;
    all_ok = all_ok && rr.ok();
    r.verdicts[name + "_ok"] = rr.ok();
  };
  const auto pair = build_entire_pair(in);
  check("entire_lower", pair.lower, entire_pair_region(in, pair, Expect::subsolution, vc.samples), pair.audit);
  check("entire_upper", pair.upper, entire_pair_region(in, pair, Expect::supersolution, vc.samples), pair.audit);
  const auto key = build_key_subsolution(in);
  check("key_subsolution", key.lower, key_region(in, key, vc.samples), key.audit);
  const auto lt = build_large_time_pair(in);
  check("large_time_lower", lt.lower, large_time_region(in, lt, Expect::subsolution, vc.samples), lt.audit);
  check("large_time_upper", lt.upper, large_time_region(in, lt, Expect::supersolution, vc.samples), lt.audit);
  r.summary["verify"] = checks;
  r.summary["safety"] = cfgv(vc.safety);
  r.summary["tol_factor"] = cfgv(vc.tol_factor);
}

void pipeline_sweep(Run& r) {
  SweepConfig sc = r.cfg.sweep;
  const LVParams base = r.cfg.system.lv;
  if (sc.k1.empty()) sc.k1 = {base.k1};
  if (sc.k2.empty()) sc.k2 = {base.k2};
  if (sc.r.empty()) sc.r = {base.r};
  if (sc.d.empty()) sc.d = {base.d};
  const auto rows = lv_sweep(sc, r.cfg.front);
  write_sweep_csv(r.file("lv_sweep.csv"), rows);
  long failures = 0, disagreements = 0, positive = 0;
  for (const auto& row : rows) {
    failures += row.solved ? 0 : 1;
    disagreements += row.disagreement ? 1 : 0;
    positive += row.solved && row.c > sc.c_tol ? 1 : 0;
  }
  r.summary["lv_sweep"] = {{"points", rows.size()}, {"solver_failures", failures},
                           {"disagreements", disagreements}, {"positive_speed", positive},
                           {"c_tol", cfgv(sc.c_tol)}};
  r.verdicts["no_disagreements"] = disagreements == 0;
}

}  // namespace

std::vector<SweepRow> lv_sweep(const SweepConfig& cfg, const FrontOptions& front) {
  std::vector<SweepRow> rows;
  for (double k1 : cfg.k1)
    for (double k2 : cfg.k2)
      for (double r : cfg.r)
        for (double d : cfg.d) {
          SweepRow row;
          row.p = {k1, k2, r, d};
          try {
            validate(row.p);
            row.cond = lv_speed_conditions(row.p);
            row.c = solve_planar_front(lv_system(row.p), front).c();
            row.solved = true;
            row.disagreement = row.cond.any() && !(row.c > cfg.c_tol);
          } catch (const std::exception& e) {
            row.error = e.what();
          }
          rows.push_back(std::move(row));
        }
  return rows;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::io_error, kModule, "cannot write " + path);
  os.precision(17);
  os << "k1,k2,r,d,P1,P2,P3,P4,any,c,solved,sign_agreement,error\n";
  for (const auto& row : rows) {
    std::string err = row.error;
    for (char& ch : err)
      if (ch == ',' || ch == '\n') ch = ';';
    os << row.p.k1 << ',' << row.p.k2 << ',' << row.p.r << ',' << row.p.d << ',' << row.cond.P1 << ','
       << row.cond.P2 << ',' << row.cond.P3 << ',' << row.cond.P4 << ',' << row.cond.any() << ',';
    if (row.solved) os << row.c;
    os << ',' << row.solved << ',' << (row.solved ? !row.disagreement : 0) << ',' << err << '\n';
  }
}

PipelineResult run_pipeline(const ConfigDoc& doc, const std::string& pipeline, const std::string& out_dir,
                            bool assert_verdicts) {
  const auto& names = pipeline_names();
  if (std::find(names.begin(), names.end(), pipeline) == names.end())
    config_fail("unknown pipeline '" + pipeline + "'");
  const ScenarioConfig cfg = parse_scenario(doc);
  const auto t0 = std::chrono::steady_clock::now();
  Run r{cfg, make_system(cfg.system), make_obstacle(cfg.obstacle), fs::path(out_dir)};
  std::error_code ec;
  fs::create_directories(r.out, ec);
  if (ec) throw Error(ErrorCode::io_error, kModule, "cannot create " + out_dir + ": " + ec.message());

  if (pipeline == "front") pipeline_front(r);
  else if (pipeline == "passage") pipeline_passage(r, true);
  else if (pipeline == "limit") pipeline_passage(r, false);
  else if (pipeline == "entire") pipeline_entire(r);
  else if (pipeline == "verify") pipeline_verify(r);
  else pipeline_sweep(r);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string canonical = doc.tree.dump();
  const std::string hash = hex64(fnv1a64(canonical));
  PipelineResult res;
  res.verdicts_ok = true;
  for (const auto& [k, v] : r.verdicts.items()) res.verdicts_ok = res.verdicts_ok && v.get<bool>();
  r.summary["pipeline"] = pipeline;
  r.summary["system"] = r.sys.name();
  r.summary["obstacle"] = cfg.obstacle.kind;
  r.summary["scenario_hash"] = hash;
  r.summary["verdicts"] = r.verdicts;
  r.summary["verdicts_ok"] = res.verdicts_ok;
  if (!r.ledger.empty()) r.summary["ledger"] = r.ledger;
  res.summary = r.summary;

  Json versions = Json::object();
  for (const char* m : {"systems", "front1d", "geometry", "grid-solver", "entire-limits", "diagnostics",
                        "verifier", "lotka-app", "scenario-cli"})
    versions[m] = kVersion;
  std::vector<std::string> outs;
  for (const auto& o : r.outputs) outs.push_back((r.out / o.get<std::string>()).string());
  outs.push_back((r.out / "summary.json").string());
  res.manifest = {{"scenario_hash", hash},
                  {"pipeline", pipeline},
                  {"config", doc.origin},
                  {"overrides", doc.overrides},
                  {"config_resolved", doc.tree},
                  {"module_versions", versions},
                  {"ledger", r.ledger},
                  {"outputs", outs},
                  {"wall_clock_seconds", wall},
                  {"steps", r.steps}};
  {
    std::ofstream os(r.out / "summary.json");
    if (!os) throw Error(ErrorCode::io_error, kModule, "cannot write summary.json");
    os << res.summary.dump(2) << '\n';
  }
  {
    std::ofstream os(r.out / "manifest.json");
    if (!os) throw Error(ErrorCode::io_error, kModule, "cannot write manifest.json");
    os << res.manifest.dump(2) << '\n';
  }
  res.exit_code = assert_verdicts && !res.verdicts_ok ? 1 : 0;
  return res;
}

PipelineResult run_pipeline_file(const std::string& config_path, const std::string& pipeline,
                                 const std::vector<std::string>& overrides, const std::string& out_dir,
                                 bool assert_verdicts) {
  ConfigDoc doc = load_config_file(config_path);
  for (const auto& o : overrides) apply_override(doc, o);
  return run_pipeline(doc, pipeline, out_dir, assert_verdicts);
}

}  // namespace obsfront
