#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "obsfront/diagnostics.hpp"
#include "obsfront/entire.hpp"
#include "obsfront/front1d.hpp"
#include "obsfront/geometry.hpp"
#include "obsfront/lotka.hpp"
#include "obsfront/system.hpp"

namespace obsfront {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

// Parsed configuration tree plus the source line of every key.
struct ConfigDoc {
  Json tree = Json::object();
  std::string origin = "<config>";
  std::map<std::string, int> lines;  // dotted path -> 1-based line
  std::vector<std::string> overrides;
  // "origin:line: path" when the line is known, else "origin: path".
  std::string where(const std::string& path) const;
};

// YAML text; JSON is accepted since it parses as the same schema.
ConfigDoc parse_config_text(const std::string& text, const std::string& origin = "<config>");
ConfigDoc load_config_file(const std::string& path);
// "a.b.c=value"; the value is read as a YAML scalar or flow collection.
void apply_override(ConfigDoc& doc, const std::string& assignment);

struct SystemConfig {
  std::string kind = "cubic_pair";
  double a = 0.25;
  int m = 2;
  Vec diffusion;
  LVParams lv;
  bool original_frame = false;  // LV outputs in the competitive frame
  std::vector<std::vector<Monomial>> terms;
};

struct ObstacleConfig {
  std::string kind = "none";
  double r = 1.0, a = 1.0, b = 1.0, w = 1.0, h = 1.0;
  double r_in = 2.0, r_out = 3.0, slit = 0.1;  // slit is the channel half-width
  double angle = 0.0;
  Point shift;
  std::vector<PolyTerm> terms;
  double bound = 0.0;
};

struct VerifyConfig {
  long samples = 100000;
  long boundary_samples = 10000;
  double safety = 2.0;
  std::uint64_t seed = 7;
  double tol_factor = 1e-3;
  double zeta_h = 0.05;
  double zeta_margin = 7.0;  // zeta grid half-width beyond the obstacle radius
};

struct DiagnosticsConfig {
  double eps = 0.01;
  double level = 0.5;
  double min_fraction = 0.5;
  int min_interfaces = 10;
};

struct SweepConfig {
  Vec k1, k2, r, d;
  double c_tol = 1e-3;
};

struct ScenarioConfig {
  SystemConfig system;
  ObstacleConfig obstacle;
  FrontOptions front;
  bool halfline = false;
  HalflineOptions halfline_opts;
  double h = 0.1;
  Rect entire_grid{-12.0, 52.0, -5.0, 5.0};
  PassageOptions passage;
  EntireOptions entire;
  LimitOptions limit;
  VerifyConfig verify;
  DiagnosticsConfig diagnostics;
  SweepConfig sweep;
  BoundaryMode boundary = BoundaryMode::mirror;
  int workers = 1;
  std::string expect_propagation = "complete";
};

// Typed view of the tree; errors name the field and its line.
ScenarioConfig parse_scenario(const ConfigDoc& doc);

SystemDef make_system(const SystemConfig& c);
ObstaclePtr make_obstacle(const ObstacleConfig& c);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

struct PipelineResult {
  Json summary;
  Json manifest;
  bool verdicts_ok = true;
  int exit_code = 0;
};

const std::vector<std::string>& pipeline_names();

// Runs one pipeline and writes its outputs under out_dir (created when missing).
// With assert_verdicts the exit code is nonzero when any verdict fails.
PipelineResult run_pipeline(const ConfigDoc& doc, const std::string& pipeline,
                            const std::string& out_dir, bool assert_verdicts = false);
PipelineResult run_pipeline_file(const std::string& config_path, const std::string& pipeline,
                                 const std::vector<std::string>& overrides,
                                 const std::string& out_dir, bool assert_verdicts = false);

struct SweepRow {
  LVParams p;
  LVSpeedConditions cond;
  double c = 0.0;
  bool solved = false;
  std::string error;
  bool disagreement = false;  // a condition holds but c <= c_tol
};

std::vector<SweepRow> lv_sweep(const SweepConfig& cfg, const FrontOptions& front = {});
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

}  // namespace obsfront
