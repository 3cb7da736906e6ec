// Command-line front end: run, scan, compare, replay.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vibrolab/harness/experiments.hpp"
#include "vibrolab/models.hpp"

using namespace vibro;
using harness::json;

namespace {

int report_invalid(const std::vector<std::string>& errors) {
  std::cout << harness::dump_json(json{{"status", "invalid"}, {"errors", errors}});
  return harness::kExitInvalid;
}

int report_outcome(const harness::RunOutcome& o) {
  for (const auto& m : o.messages) std::cerr << "vibrolab: " << m << "\n";
  std::cout << harness::dump_json(
      json{{"status", o.exit_code == 0 ? "ok" : "gate-failed"}, {"exit_code", o.exit_code}, {"dir", o.dir.string()}});
  return o.exit_code;
}

void list_models() {
  for (const auto& m : models::registry()) {
    std::cout << m.name << "  " << m.description << "\n";
    for (const auto& [k, v] : m.defaults) std::printf("    %s = %.10g\n", k.c_str(), v);
  }
}

void list_experiments() {
  for (const auto& e : harness::experiment_catalog()) std::cout << e.kind << "  " << e.description << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vibronic branching and decoherence laboratory"};
  app.require_subcommand(0, 1);
  bool want_models = false, want_experiments = false;
  app.add_flag("--list-models", want_models, "list model families and their default parameters");
  app.add_flag("--list-experiments", want_experiments, "list experiment kinds");

  std::string config_path, manifest_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> artifacts;
  std::string kind = "channels";
  double angle = 0.0;

  auto* run = app.add_subcommand("run", "run the experiment named in a config file");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--seed", seed, "override the configured seed");
  run->add_option("--out", out_dir, "output directory (default: <root>/<name>)");

  auto* scan = app.add_subcommand("scan", "run a parameter sweep config");
  scan->add_option("config", config_path, "config file with a [scan] section")->required();
  scan->add_option("--seed", seed, "override the configured seed");
  scan->add_option("--out", out_dir, "output directory");

  auto* cmp = app.add_subcommand("compare", "compare two or more run directories");
  cmp->add_option("artifacts", artifacts, "run directories or summary files")->required()->expected(2, -1);
  cmp->add_option("--kind", kind, "channels | diagonal | bimodality | curves");
  cmp->add_option("--angle", angle, "electronic frame rotation for --kind diagonal");
  cmp->add_option("--out", out_dir, "write the report to this file as well");

  auto* rep = app.add_subcommand("replay", "re-run from a manifest and check the summary digest");
  rep->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();
  rep->add_option("--out", out_dir, "output directory for the replay");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return harness::kExitInvalid;
  }

  if (want_models || want_experiments) {
    if (want_models) list_models();
    if (want_experiments) list_experiments();
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return harness::kExitInvalid;
  }

  const std::optional<std::filesystem::path> dir =
      out_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(out_dir);
  try {
    if (run->parsed() || scan->parsed()) {
      harness::RunConfig cfg = harness::load_config(config_path);
      if (seed) cfg.seed = *seed;
      if (scan->parsed() && cfg.experiment != "scan")
        return report_invalid({"run.experiment: scan needs experiment = scan, got '" + cfg.experiment + "'"});
      return report_outcome(harness::run(cfg, dir));
    }
    if (cmp->parsed()) {
      std::vector<std::filesystem::path> paths(artifacts.begin(), artifacts.end());
      const json report = harness::compare(paths, {kind, angle});
      if (dir) harness::write_text(*dir, harness::dump_json(report));
      std::cout << harness::dump_json(report);
      return 0;
    }
    const auto r = harness::replay(manifest_path, dir);
    std::cout << harness::dump_json(json{{"identical", r.identical},
                                         {"recorded_digest", r.recorded_digest},
                                         {"replay_digest", r.replay_digest},
                                         {"exit_code", r.exit_code},
                                         {"dir", r.dir.string()}});
    return r.identical ? r.exit_code : harness::kExitFailure;
  } catch (const harness::ConfigError& e) {
    return report_invalid(e.errors());
  } catch (const std::exception& e) {
    std::cerr << "vibrolab: " << e.what() << "\n";
    return harness::kExitFailure;
  }
}
