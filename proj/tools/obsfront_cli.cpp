#include <CLI11.hpp>

#include <iostream>

#include "obsfront/error.hpp"
#include "obsfront/scenario.hpp"

namespace {

// One line per headline number; nested objects are flattened with dots.
void print_headlines(const obsfront::Json& j, const std::string& prefix) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (k == "ledger" || k == "audit" || k == "min_L" || k == "max_L") continue;
    if (v.is_object() && v.contains("value") && v.contains("provenance")) {
      std::cout << key << " = " << v["value"].dump() << "  [" << v["provenance"].get<std::string>() << "]\n";
    } else if (v.is_object()) {
      print_headlines(v, key);
    } else {
      std::cout << key << " = " << v.dump() << '\n';
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bistable front propagation around obstacles"};
  std::string pipeline, config, out = "out";
  std::vector<std::string> overrides;
  bool assert_verdicts = false;
  bool quiet = false;
  app.add_option("pipeline", pipeline, "front, passage, entire, limit, verify or lv-sweep")
      ->required()
      ->check(CLI::IsMember(obsfront::pipeline_names()));
  app.add_option("--config,-c", config, "Scenario file (YAML or JSON)")->required();
  app.add_option("--override,-O", overrides, "key.path=value, repeatable");
  app.add_flag("--assert", assert_verdicts, "Exit nonzero when a verdict fails");
  app.add_option("--out,-o", out, "Output directory");
  app.add_flag("--quiet,-q", quiet, "Do not print the summary");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto res = obsfront::run_pipeline_file(config, pipeline, overrides, out, assert_verdicts);
    if (!quiet) print_headlines(res.summary, "");
    if (res.exit_code != 0) std::cerr << "verdict failure (see " << out << "/summary.json)\n";
    return res.exit_code;
  } catch (const obsfront::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
