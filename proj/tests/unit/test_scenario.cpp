#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "obsfront/scenario.hpp"

using namespace obsfront;
namespace fs = std::filesystem;

namespace {
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("obsfront_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string error_of(const std::string& text) {
  try {
    parse_scenario(parse_config_text(text, "cfg.yaml"));
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}
}  // namespace

TEST_CASE("fnv-1a reference vectors") {
  CHECK(hex64(fnv1a64("")) == "cbf29ce484222325");
  CHECK(hex64(fnv1a64("a")) == "af63dc4c8601ec8c");
}

TEST_CASE("config parsing: typed fields, JSON input and defaults") {
  const auto doc = parse_config_text("system:\n  kind: cubic_pair\n  a: 0.3\nobstacle:\n  kind: disk\n  r: 2\n");
  const auto cfg = parse_scenario(doc);
  CHECK(cfg.system.a == 0.3);
  CHECK(cfg.obstacle.kind == "disk");
  CHECK(cfg.obstacle.r == 2.0);
  CHECK(cfg.h == 0.1);
  CHECK(doc.lines.at("obstacle.r") == 6);
  const auto js = parse_scenario(parse_config_text(R"({"system": {"kind": "lv", "k1": 1.5, "k2": 3}})"));
  CHECK(js.system.kind == "lv");
  CHECK(js.system.lv.k2 == 3.0);
}

TEST_CASE("config errors name the field and its line") {
  const auto missing = error_of("obstacle:\n  kind: disk\n");
  CHECK(missing.find("system") != std::string::npos);
  CHECK(missing.find("missing") != std::string::npos);
  const auto unknown = error_of("system:\n  kind: cubic_pair\n  colour: blue\n");
  CHECK(unknown.find("cfg.yaml:3") != std::string::npos);
  CHECK(unknown.find("colour") != std::string::npos);
  CHECK_FALSE(error_of("system:\n  kind: cubic_pair\n  a: fast\n").empty());
  CHECK_FALSE(error_of("system:\n  kind: cubic_pair\nobstacle:\n  kind: blob\n").empty());
  CHECK_THROWS_AS(parse_config_text("system: [unclosed\n"), Error);
  CHECK_THROWS_AS(load_config_file("/nonexistent/obsfront.yaml"), Error);
}

TEST_CASE("overrides replace nested values and are recorded") {
  auto doc = parse_config_text("system:\n  kind: cubic_pair\n  a: 0.25\n");
  apply_override(doc, "system.a=0.3");
  apply_override(doc, "obstacle.kind=disk");
  apply_override(doc, "lv_sweep.k1=[1.1, 1.2]");
  const auto cfg = parse_scenario(doc);
  CHECK(cfg.system.a == 0.3);
  CHECK(cfg.obstacle.kind == "disk");
  CHECK(cfg.sweep.k1.size() == 2);
  CHECK(doc.overrides.size() == 3);
  CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), Error);
}

TEST_CASE("front pipeline writes a deterministic summary") {
  const std::string cfg = std::string(OBSFRONT_SOURCE_DIR) + "/configs/front_cubic.yaml";
  const auto d1 = scratch("front1"), d2 = scratch("front2");
  const auto r1 = run_pipeline_file(cfg, "front", {}, d1.string(), true);
  const auto r2 = run_pipeline_file(cfg, "front", {}, d2.string(), true);
  CHECK(r1.exit_code == 0);
  CHECK(r1.verdicts_ok);
  const double c = r1.summary["c"]["value"].get<double>();
  CHECK(c == doctest::Approx(std::sqrt(2.0) * 0.25).epsilon(1e-3));
  CHECK(r1.summary["c"]["provenance"] == "estimated");
  CHECK(r1.manifest["scenario_hash"] == r2.manifest["scenario_hash"]);
  CHECK(fs::exists(d1 / "manifest.json"));
  CHECK(slurp(d1 / "summary.json") == slurp(d2 / "summary.json"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("unknown pipeline") {
  const auto doc = parse_config_text("system:\n  kind: cubic_pair\n");
  CHECK_THROWS_AS(run_pipeline(doc, "nonsense", scratch("bad").string()), Error);
}

TEST_CASE("lv sweep isolates failing points") {
  SweepConfig sc;
  sc.k1 = {0.5, 1.5};
  sc.k2 = {3.0};
  sc.r = {1.0};
  sc.d = {1.0};
  const auto rows = lv_sweep(sc);
  REQUIRE(rows.size() == 2);
  CHECK_FALSE(rows[0].solved);
  CHECK_FALSE(rows[0].error.empty());
  CHECK(rows[1].solved);
  CHECK(rows[1].c > 0.0);
  CHECK_FALSE(rows[1].disagreement);
  const auto p = scratch("sweep.csv");
  write_sweep_csv(p.string(), rows);
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  CHECK(n == 3);
  fs::remove(p);
}
