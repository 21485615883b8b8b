// Copyright 2026 The pdlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// pdlearn experiment runner.
//
//   pdlearn bandwidth-ccdf --trials 20 --out runs/ccdf --check
//   pdlearn joint-curve --scale paper --out runs/joint
//   pdlearn convergence --config my.toml
//   pdlearn water-filling
//   pdlearn smoke --out runs/smoke
//   pdlearn rerun runs/ccdf/manifest.json --out runs/ccdf2
//
// Exit status: 0 success, 1 failed check (with --check) or failed run,
// 2 configuration error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "pdlearn/config.hpp"
#include "pdlearn/errors.hpp"
#include "pdlearn/experiments.hpp"

namespace {

using namespace pdlearn;

struct CommonFlags {
  std::string config_path;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::string scale = "desk";
  std::string out;
  bool check = false;
  bool quiet = false;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_path, "System configuration overrides (key = value file)")
      ->check(CLI::ExistingFile);
  sub->add_option("--trials", f.trials, "Number of trials")->check(CLI::PositiveNumber);
  sub->add_option("--seed", f.seed, "Base seed");
  sub->add_option("--scale", f.scale, "desk | paper")
      ->check(CLI::IsMember({"desk", "paper", "smoke"}));
  sub->add_option("--out", f.out, "Output directory for CSV, report and manifest");
  sub->add_flag("--check", f.check, "Exit with status 1 unless every check passes");
  sub->add_flag("-q,--quiet", f.quiet, "Only print the check summary");
}

ExperimentSpec make_spec(Scenario scenario, const CommonFlags& f) {
  ExperimentSpec spec = ExperimentSpec::defaults(scenario, scale_from_string(f.scale));
  if (!f.config_path.empty()) spec.config = load_config(f.config_path);
  if (f.trials) spec.trials = *f.trials;
  if (f.seed) spec.seed = *f.seed;
  spec.output_dir = f.out;
  spec.validate();
  return spec;
}

ProgressSink progress(bool quiet) {
  if (quiet) return {};
  return [](const std::string& msg) { std::fprintf(stderr, "  %s\n", msg.c_str()); };
}

bool print_checks(const std::string& title, const std::vector<Check>& checks) {
  std::printf("%s\n", title.c_str());
  for (const auto& c : checks)
    std::printf("  %s %-44s %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
  return all_passed(checks);
}

bool run_one(const ExperimentSpec& spec, bool quiet) {
  if (!quiet)
    std::fprintf(stderr, "%s (%s scale, %zu trials, seed %llu)\n", to_string(spec.scenario).c_str(),
                 to_string(spec.scale).c_str(), spec.trials,
                 static_cast<unsigned long long>(spec.seed));
  const auto checks = run_experiment(spec, progress(quiet));
  return print_checks(to_string(spec.scenario), checks);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pdlearn: primal-dual learning experiments for URLLC resource allocation"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    Scenario scenario;
    const char* help;
  };
  const Sub subs[] = {
      {"bandwidth-ccdf", Scenario::BandwidthCcdf,
       "Error CCDFs of the unsupervised and supervised single-user learners"},
      {"joint-curve", Scenario::JointBandwidthCurve,
       "Total bandwidth against user count for the learned, optimal and equal-power policies"},
      {"convergence", Scenario::ConvergenceTable,
       "Convergence slots with and without a pre-trained checkpoint"},
      {"water-filling", Scenario::WaterFillingCheck,
       "Learned power control against bisection water-filling"},
  };
  CommonFlags flags;
  std::vector<std::pair<CLI::App*, Scenario>> scenario_cmds;
  for (const auto& s : subs) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, flags);
    scenario_cmds.emplace_back(cmd, s.scenario);
  }
  auto* smoke = app.add_subcommand("smoke", "Tiny run of every scenario (plumbing check)");
  add_common(smoke, flags);
  std::string manifest_path;
  auto* rerun = app.add_subcommand("rerun", "Repeat a run from its manifest.json");
  rerun->add_option("manifest", manifest_path, "manifest.json of an earlier run")
      ->required()
      ->check(CLI::ExistingFile);
  rerun->add_option("--out", flags.out, "Output directory (default: the manifest's)");
  rerun->add_flag("--check", flags.check, "Exit with status 1 unless every check passes");
  rerun->add_flag("-q,--quiet", flags.quiet, "Only print the check summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    bool ok = true;
    if (smoke->parsed()) {
      for (const auto& [cmd, scenario] : scenario_cmds) {
        (void)cmd;
        CommonFlags f = flags;
        f.scale = "smoke";
        ExperimentSpec spec = make_spec(scenario, f);
        if (!flags.out.empty())
          spec.output_dir = (std::filesystem::path(flags.out) / to_string(scenario)).string();
        ok = run_one(spec, flags.quiet) && ok;
      }
    } else if (rerun->parsed()) {
      std::ifstream in(manifest_path);
      nlohmann::json m;
      try {
        m = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
      }
      if (m.value("format", "") != "pdlearn.manifest")
        throw ConfigError("not a pdlearn manifest: " + manifest_path);
      ExperimentSpec spec = ExperimentSpec::from_json(m.at("spec"));
      if (!flags.out.empty()) spec.output_dir = flags.out;
      spec.validate();
      ok = run_one(spec, flags.quiet);
    } else {
      for (const auto& [cmd, scenario] : scenario_cmds)
        if (cmd->parsed()) ok = run_one(make_spec(scenario, flags), flags.quiet);
    }
    return flags.check && !ok ? 1 : 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const ContractViolation& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "run failed: %s\n", e.what());
    return 1;
  }
}
