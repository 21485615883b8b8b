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


// Acceptance runner: one PASS/FAIL line per criterion.
//
//   pdlearn_acceptance               all criteria at desk scale
//   pdlearn_acceptance --only 1,2,3  a subset
//   pdlearn_acceptance --out DIR     also keep the experiment outputs

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracle_values.hpp"
#include "pdlearn/baselines.hpp"
#include "pdlearn/channel.hpp"
#include "pdlearn/experiments.hpp"
#include "pdlearn/qos.hpp"
#include "symmetric_reference.hpp"

namespace {

using namespace pdlearn;
namespace fs = std::filesystem;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string num(double v, const char* f = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Named checks of an experiment report; missing names count as failures.
Outcome require_checks(const std::vector<Check>& checks, const std::vector<std::string>& names) {
  Outcome o{true, ""};
  for (const auto& n : names) {
    const Check* found = nullptr;
    for (const auto& c : checks)
      if (c.name == n) found = &c;
    if (!o.detail.empty()) o.detail += "; ";
    if (!found) {
      o.passed = false;
      o.detail += n + " missing";
      continue;
    }
    o.passed = o.passed && found->passed;
    o.detail += (found->passed ? "" : "FAILED ") + n + " " + found->detail;
  }
  return o;
}

std::string out_dir(const std::string& root, const std::string& name) {
  if (root.empty()) return {};
  return (fs::path(root) / name).string();
}

Outcome gradient_check() {
  struct Arch {
    std::vector<std::size_t> widths;
    Activation hidden, output;
  };
  const Arch archs[] = {
      {{1, 16, 16, 16, 16, 16, 16, 1}, Activation::Tanh, Activation::Softplus},
      {{5, 5, 5, 5}, Activation::Tanh, Activation::ScaledSoftmax},
      {{10, 10, 10, 10}, Activation::Tanh, Activation::ScaledSoftmax},
      {{8, 16, 16, 4}, Activation::Tanh, Activation::ScaledSoftmax},
      {{8, 16, 16, 4}, Activation::Tanh, Activation::Softplus},
      {{1, 16, 16, 1}, Activation::Tanh, Activation::Softplus},
      {{3, 7, 2}, Activation::Tanh, Activation::Identity},
      {{2, 9, 3}, Activation::Softplus, Activation::Softplus},
      {{4, 8, 8, 1}, Activation::Relu, Activation::Softplus},
      {{6, 12, 6}, Activation::Tanh, Activation::Identity},
  };
  std::size_t probes = 0;
  double worst = 0.0;
  std::uint64_t seed = 1000;
  for (const auto& a : archs) {
    const auto r = testing::probe_mlp(a.widths, a.hidden, a.output, 12, seed++);
    probes += r.probes;
    worst = std::max(worst, r.worst);
  }
  return {worst <= 1e-5 && probes >= 100,
          std::to_string(probes) + " probes over 10 architectures, worst relative error " +
              num(worst, "%.3g")};
}

Outcome oracle_check() {
  const double q = inv_gaussian_q(5e-6);
  const double th = qos_exponent(0.2, 8, 1e-5);
  const double eb = effective_bandwidth(0.2, 8, 1e-5);
  const bool stated = std::abs(q - 4.4172) <= 1e-3 && std::abs(th - 2.1552) <= 1e-4 &&
                      std::abs(eb - 0.7080) <= 1e-4;
  const bool precise = std::abs(q - oracle::kInvQ_5em6) <= 1e-12 &&
                       std::abs(th - oracle::kTheta_a02_d8_e1em5) <= 1e-12 &&
                       std::abs(eb - oracle::kEb_a02_d8_e1em5) <= 1e-12;
  return {stated && precise, "Qinv(5e-6) = " + num(q, "%.10f") + ", theta = " +
                                 num(th, "%.10f") + ", B^E = " + num(eb, "%.10f") +
                                 (precise ? " (match reference script to 1e-12)"
                                          : " (reference script mismatch)")};
}

Outcome symmetric_alloc_check() {
  const SystemConfig cfg;
  const double theta = make_qos_target(cfg).theta;
  Rng rng = make_rng(2026, 3);
  std::uniform_int_distribution<int> users(1, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::exponential_distribution<double> fade(1.0);
  double worst_budget = 0.0, worst_kkt = 0.0, worst_pg = 0.0;
  bool complementary = true;
  int partial = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> g(static_cast<std::size_t>(users(rng)));
    for (double& x : g) x = fade(rng) + 1e-6;
    const double W = std::pow(10.0, 4.0 + 3.0 * u(rng));
    const double alpha = std::pow(10.0, -16.0 + 4.0 * u(rng));
    const auto r = symmetric_power_alloc(g, W, alpha, theta, cfg);
    const double total = std::accumulate(r.powers.begin(), r.powers.end(), 0.0);
    worst_budget = std::max(worst_budget, std::abs(total - cfg.P_max) / cfg.P_max);
    const double eta = power_exponent_eta(W, theta, cfg);
    const double unit = cfg.N0 * W / alpha;
    double ref = -1.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool on = r.powers[i] > 0.0;
      complementary = complementary && on == (g[i] > r.g_threshold);
      if (!on) continue;
      const double kkt = g[i] * std::pow(1.0 + g[i] * r.powers[i] / unit, -1.0 / eta);
      if (ref < 0.0) ref = kkt;
      worst_kkt = std::max(worst_kkt, std::abs(kkt / ref - 1.0));
    }
    partial += r.active.size() < g.size();
    const auto p = testing::projected_gradient_powers(g, W, alpha, theta, cfg);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double scale = std::max(r.powers[i], p[i]);
      if (scale > 1e-9 * cfg.P_max)
        worst_pg = std::max(worst_pg, std::abs(r.powers[i] - p[i]) / scale);
    }
  }
  const bool ok = worst_budget <= 1e-9 && complementary && worst_kkt <= 1e-6 && worst_pg <= 1e-4;
  return {ok, "1000 vectors (" + std::to_string(partial) + " with inactive users): budget " +
                  num(worst_budget, "%.2g") + ", KKT spread " + num(worst_kkt, "%.2g") +
                  ", vs projected gradient " + num(worst_pg, "%.2g") +
                  (complementary ? ", threshold complementarity holds"
                                 : ", threshold complementarity VIOLATED")};
}

bool same_csvs(const fs::path& a, const fs::path& b, std::size_t& count) {
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  bool same = true;
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().extension() != ".csv") continue;
    ++count;
    same = same && fs::exists(b / e.path().filename()) &&
           slurp(e.path()) == slurp(b / e.path().filename());
  }
  return same;
}

Outcome determinism_check(const std::string& root) {
  const fs::path base = root.empty() ? fs::temp_directory_path() / "pdlearn_acceptance_smoke"
                                     : fs::path(root) / "smoke";
  fs::remove_all(base);
  bool same = true;
  std::size_t files = 0;
  for (Scenario sc : {Scenario::BandwidthCcdf, Scenario::JointBandwidthCurve,
                      Scenario::ConvergenceTable, Scenario::WaterFillingCheck}) {
    ExperimentSpec spec = ExperimentSpec::defaults(sc, Scale::Smoke);
    spec.output_dir = (base / (to_string(sc) + "_first")).string();
    run_experiment(spec);
    std::ifstream in(fs::path(spec.output_dir) / "manifest.json");
    ExperimentSpec again = ExperimentSpec::from_json(nlohmann::json::parse(in).at("spec"));
    again.output_dir = (base / (to_string(sc) + "_rerun")).string();
    run_experiment(again);
    same = same_csvs(spec.output_dir, again.output_dir, files) && same;
  }
  return {same && files > 0, std::to_string(files) + " CSV files from 4 smoke scenarios " +
                                 (same ? "identical" : "DIFFER") + " on manifest rerun"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pdlearn acceptance criteria"};
  std::vector<int> only;
  std::string root;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--out", root, "Keep experiment outputs under this directory");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> wanted(only.begin(), only.end());
  auto want = [&](int c) { return wanted.empty() || wanted.count(c) > 0; };
  if (!root.empty()) fs::create_directories(root);

  int failures = 0;
  auto report = [&](int id, const char* title, double limit_s, const std::function<Outcome()>& f) {
    if (!want(id)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = limit_s <= 0.0 || secs <= limit_s;
    const bool pass = o.passed && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s criterion %2d %s: %s [%.1f s%s]\n", pass ? "PASS" : "FAIL", id, title,
                o.detail.c_str(), secs,
                limit_s <= 0.0 ? "" : (in_time ? (" of " + num(limit_s, "%.0f")).c_str()
                                               : (" OVER " + num(limit_s, "%.0f")).c_str()));
    std::fflush(stdout);
  };

  report(1, "gradient correctness", 10, gradient_check);
  report(2, "QoS math oracles", 1, oracle_check);
  report(3, "symmetric power allocation", 30, symmetric_alloc_check);

  // Criteria 4 and 9 share one single-user run; 5 and 6 share one joint run.
  BandwidthCcdfReport ccdf;
  bool have_ccdf = false;
  if (want(4) || want(9)) {
    report(4, "single-user learner CCDFs", 600, [&] {
      ExperimentSpec spec = ExperimentSpec::defaults(Scenario::BandwidthCcdf, Scale::Desk);
      spec.output_dir = out_dir(root, "bandwidth_ccdf");
      ccdf = run_bandwidth_ccdf(spec);
      have_ccdf = true;
      return require_checks(ccdf.checks,
                            {"unsupervised_median_sigma_le_1pct", "unsupervised_p99_nu_le_2pct",
                             "sigma_ccdf_unsupervised_le_supervised_at_1pct",
                             "nu_ccdf_unsupervised_le_supervised_at_1pct",
                             "sigma_ccdf_unsupervised_le_supervised_at_2pct",
                             "nu_ccdf_unsupervised_le_supervised_at_2pct", "no_failed_trials"});
    });
  }
  JointCurveReport joint;
  if (want(5) || want(6)) {
    report(5, "joint learner vs optimum", 600, [&] {
      ExperimentSpec spec = ExperimentSpec::defaults(Scenario::JointBandwidthCurve, Scale::Desk);
      spec.output_dir = out_dir(root, "joint_curve");
      joint = run_joint_bandwidth_curve(spec);
      return require_checks(joint.checks,
                            {"learned_within_3pct_of_optimal", "learned_validation_gap_le_1e-3"});
    });
    report(6, "equal power needs more bandwidth", 0,
           [&] { return require_checks(joint.checks, {"equal_power_ge_learned"}); });
  }
  report(7, "pre-training speedup", 600, [&] {
    ExperimentSpec spec = ExperimentSpec::defaults(Scenario::ConvergenceTable, Scale::Desk);
    spec.output_dir = out_dir(root, "convergence");
    const auto rep = run_convergence_table(spec);
    return require_checks(rep.checks,
                          {"pretrained_faster_in_95pct_of_pairs", "median_speedup_ge_10x"});
  });
  report(8, "water-filling check", 120, [&] {
    ExperimentSpec spec = ExperimentSpec::defaults(Scenario::WaterFillingCheck, Scale::Desk);
    spec.output_dir = out_dir(root, "water_filling");
    const auto rep = run_water_filling_check(spec);
    return require_checks(rep.checks, {"capacity_within_1pct", "power_residual_le_1pct"});
  });
  report(9, "trained bandwidth matches the per-alpha optimizer", 0, [&] {
    if (!have_ccdf) return Outcome{false, "needs criterion 4's run"};
    const auto& s = ccdf.unsupervised.sigma;
    const double med = quantile(s, 0.5);
    return Outcome{med <= 0.01, "median sigma " + num(100.0 * med, "%.4f") + "%, p99 sigma " +
                                    num(100.0 * quantile(s, 0.99), "%.4f") + "% over " +
                                    std::to_string(s.size()) + " fresh alphas"};
  });
  report(10, "manifest reruns are bit-identical", 60, [&] { return determinism_check(root); });

  std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTED" : "NOT ACCEPTED", failures);
  return failures == 0 ? 0 : 1;
}
