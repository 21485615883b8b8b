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

#include "pdlearn/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "pdlearn/baselines.hpp"
#include "pdlearn/channel.hpp"
#include "pdlearn/errors.hpp"
#include "pdlearn/kernels.hpp"
#include "pdlearn/qos.hpp"
#include "pdlearn/trainer.hpp"

#ifndef PDLEARN_VERSION
#define PDLEARN_VERSION "0.0.0"
#endif
#ifndef PDLEARN_BUILD_TYPE
#define PDLEARN_BUILD_TYPE "unknown"
#endif

namespace pdlearn {

namespace {

// Seed streams, one per randomized ingredient of a run.
constexpr std::uint64_t kStreamLabels = 1;
constexpr std::uint64_t kStreamUnsupervised = 100;
constexpr std::uint64_t kStreamSupervised = 200;
constexpr std::uint64_t kStreamTestAlphas = 300;
constexpr std::uint64_t kStreamWaterFilling = 400;
constexpr std::uint64_t kStreamJoint = 500;
constexpr std::uint64_t kStreamDrop = 600;
constexpr std::uint64_t kStreamConvergence = 700;

const char* const kScenarioNames[] = {"bandwidth_ccdf", "joint_bandwidth_curve",
                                      "convergence_table", "water_filling_check"};
const char* const kScaleNames[] = {"desk", "paper", "smoke"};

std::uint64_t trial_seed(std::uint64_t base, std::uint64_t stream, std::size_t trial) {
  return derive_seed(derive_seed(base, stream), trial);
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f%%", 100.0 * v);
  return buf;
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

class Logger {
 public:
  explicit Logger(const ProgressSink& sink) : sink_(sink) {}
  void operator()(const std::string& msg) const {
    if (!sink_) return;
    std::lock_guard<std::mutex> lock(mu_);
    sink_(msg);
  }

 private:
  const ProgressSink& sink_;
  mutable std::mutex mu_;
};

std::filesystem::path out_path(const ExperimentSpec& spec, const std::string& file) {
  return std::filesystem::path(spec.output_dir) / file;
}

std::string join(const std::vector<std::string>& cols) {
  std::string s;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) s += ',';
    s += cols[i];
  }
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvSchema make_schema(std::string name, std::vector<std::string> columns,
                      std::vector<bool> numeric) {
  return CsvSchema{std::move(name), 1, std::move(columns), std::move(numeric)};
}

nlohmann::json checks_json(const std::vector<Check>& checks) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& c : checks) a.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return a;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Scenario s) { return kScenarioNames[static_cast<int>(s)]; }
std::string to_string(Scale s) { return kScaleNames[static_cast<int>(s)]; }

Scenario scenario_from_string(const std::string& s) {
  for (int i = 0; i < 4; ++i)
    if (s == kScenarioNames[i]) return static_cast<Scenario>(i);
  throw ConfigError("unknown scenario '" + s + "'");
}

Scale scale_from_string(const std::string& s) {
  for (int i = 0; i < 3; ++i)
    if (s == kScaleNames[i]) return static_cast<Scale>(i);
  throw ConfigError("unknown scale '" + s + "' (expected desk, paper or smoke)");
}

ExperimentSpec ExperimentSpec::defaults(Scenario scenario, Scale scale) {
  ExperimentSpec s;
  s.scenario = scenario;
  s.scale = scale;
  switch (scale) {
    case Scale::Desk:
      switch (scenario) {
        case Scenario::BandwidthCcdf: s.trials = 20; break;
        case Scenario::JointBandwidthCurve: s.trials = 3; break;
        case Scenario::ConvergenceTable: s.trials = 20; break;
        case Scenario::WaterFillingCheck: s.trials = 3; break;
      }
      break;
    case Scale::Paper:
      s.test_points = 1000;
      s.label_count = 10000;
      s.users = {5, 10, 15, 20, 25, 30, 35, 40};
      s.asymmetric = true;
      s.convergence_users = 40;
      s.pretrain_slots = 1000;
      s.max_slots = 10000;
      s.wf_iterations = 50000;
      switch (scenario) {
        case Scenario::BandwidthCcdf: s.trials = 100; break;
        case Scenario::JointBandwidthCurve: s.trials = 10; break;
        case Scenario::ConvergenceTable: s.trials = 100; break;
        case Scenario::WaterFillingCheck: s.trials = 10; break;
      }
      break;
    case Scale::Smoke:
      s.trials = scenario == Scenario::ConvergenceTable ? 2 : 1;
      s.iterations = 10;
      s.test_points = 5;
      s.label_count = 5;
      s.label_min_iters = 200;
      s.users = {2, 3};
      s.convergence_users = 3;
      s.pretrain_slots = 3;
      s.joint_min_slots = 3;
      s.max_slots = 5;
      s.diagnostic_draws = 1000;
      s.validation_draws = 2000;
      s.wf_iterations = 200;
      break;
  }
  return s;
}

void ExperimentSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("experiment spec: " + m); };
  if (trials < 1) fail("trials must be >= 1");
  if (iterations < 1) fail("iterations must be >= 1");
  if (test_points < 1) fail("test_points must be >= 1");
  if (label_count < 2) fail("label_count must be >= 2");
  if (label_min_iters < 1) fail("label_min_iters must be >= 1");
  if (users.empty()) fail("users must not be empty");
  for (std::size_t k : users)
    if (k < 1) fail("every user count must be >= 1");
  if (convergence_users < 1) fail("convergence_users must be >= 1");
  if (pretrain_slots < 1 || max_slots < 1) fail("slot budgets must be >= 1");
  if (joint_min_slots < 0) fail("joint_min_slots must be >= 0");
  if (diagnostic_draws < 1 || validation_draws < 1) fail("draw counts must be >= 1");
  if (!(symmetric_distance >= config.cell_min_dist && symmetric_distance <= config.cell_max_dist))
    fail("symmetric_distance outside the cell");
  if (!(wf_distance > 0.0) || !(wf_bandwidth > 0.0) || !std::isfinite(wf_snr_db))
    fail("water-filling problem must have positive distance and bandwidth");
  if (wf_iterations < 1) fail("wf_iterations must be >= 1");
  config.validate();
}

nlohmann::json ExperimentSpec::to_json() const {
  nlohmann::json j;
  j["scenario"] = to_string(scenario);
  j["scale"] = to_string(scale);
  j["trials"] = trials;
  j["seed"] = seed;
  j["config"] = config.to_text();
  j["output_dir"] = output_dir;
  j["iterations"] = iterations;
  j["test_points"] = test_points;
  j["label_count"] = label_count;
  j["label_min_iters"] = label_min_iters;
  j["users"] = users;
  j["asymmetric"] = asymmetric;
  j["symmetric_distance"] = symmetric_distance;
  j["joint_min_slots"] = joint_min_slots;
  j["convergence_users"] = convergence_users;
  j["pretrain_slots"] = pretrain_slots;
  j["max_slots"] = max_slots;
  j["diagnostic_draws"] = diagnostic_draws;
  j["validation_draws"] = validation_draws;
  j["wf_snr_db"] = wf_snr_db;
  j["wf_distance"] = wf_distance;
  j["wf_bandwidth"] = wf_bandwidth;
  j["wf_iterations"] = wf_iterations;
  return j;
}

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& j) {
  try {
    ExperimentSpec s = defaults(scenario_from_string(j.at("scenario").get<std::string>()),
                                scale_from_string(j.at("scale").get<std::string>()));
    s.trials = j.value("trials", s.trials);
    s.seed = j.value("seed", s.seed);
    if (j.contains("config")) s.config = parse_config(j.at("config").get<std::string>());
    s.output_dir = j.value("output_dir", s.output_dir);
    s.iterations = j.value("iterations", s.iterations);
    s.test_points = j.value("test_points", s.test_points);
    s.label_count = j.value("label_count", s.label_count);
    s.label_min_iters = j.value("label_min_iters", s.label_min_iters);
    s.users = j.value("users", s.users);
    s.asymmetric = j.value("asymmetric", s.asymmetric);
    s.symmetric_distance = j.value("symmetric_distance", s.symmetric_distance);
    s.joint_min_slots = j.value("joint_min_slots", s.joint_min_slots);
    s.convergence_users = j.value("convergence_users", s.convergence_users);
    s.pretrain_slots = j.value("pretrain_slots", s.pretrain_slots);
    s.max_slots = j.value("max_slots", s.max_slots);
    s.diagnostic_draws = j.value("diagnostic_draws", s.diagnostic_draws);
    s.validation_draws = j.value("validation_draws", s.validation_draws);
    s.wf_snr_db = j.value("wf_snr_db", s.wf_snr_db);
    s.wf_distance = j.value("wf_distance", s.wf_distance);
    s.wf_bandwidth = j.value("wf_bandwidth", s.wf_bandwidth);
    s.wf_iterations = j.value("wf_iterations", s.wf_iterations);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment spec: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

CcdfTable CcdfTable::from_samples(std::span<const double> samples,
                                  std::span<const double> thresholds) {
  require(std::is_sorted(thresholds.begin(), thresholds.end()),
          "CcdfTable: thresholds must be sorted");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  CcdfTable t;
  t.thresholds.assign(thresholds.begin(), thresholds.end());
  t.n_samples = sorted.size();
  t.exceed_prob.reserve(thresholds.size());
  for (double x : thresholds) {
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), x);
    t.exceed_prob.push_back(sorted.empty() ? 0.0 : double(above) / double(sorted.size()));
  }
  return t;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  require(lo > 0.0 && hi > lo && n >= 2, "log_grid: need 0 < lo < hi and n >= 2");
  std::vector<double> g(n);
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = std::pow(10.0, a + (b - a) * double(i) / double(n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

std::vector<double> ccdf_thresholds() { return log_grid(1e-5, 1.0, 200); }

double exceed_fraction(std::span<const double> samples, double x) {
  if (samples.empty()) return 0.0;
  const auto n = std::count_if(samples.begin(), samples.end(), [x](double v) { return v > x; });
  return double(n) / double(samples.size());
}

double quantile(std::vector<double> samples, double q) {
  require(!samples.empty(), "quantile: no samples");
  require(q >= 0.0 && q <= 1.0, "quantile: q must be in [0, 1]");
  std::sort(samples.begin(), samples.end());
  const double pos = q * double(samples.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= samples.size()) return samples.back();
  const double f = pos - double(i);
  return samples[i] + f * (samples[i + 1] - samples[i]);
}

bool all_passed(std::span<const Check> checks) {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

// ---------------------------------------------------------------------------
// CSV plumbing.

const CsvSchema& ccdf_schema() {
  static const CsvSchema s = make_schema("pdlearn.ccdf",
                                         {"arm", "metric", "threshold", "exceed_prob", "n_samples"},
                                         {false, false, true, true, true});
  return s;
}

const CsvSchema& bandwidth_samples_schema() {
  static const CsvSchema s = make_schema(
      "pdlearn.bandwidth_samples",
      {"trial", "alpha_dB", "w_star_Hz", "w_unsupervised_Hz", "w_supervised_Hz",
       "sigma_unsupervised", "sigma_supervised", "nu_unsupervised", "nu_supervised"},
      {true, true, true, true, true, true, true, true, true});
  return s;
}

const CsvSchema& joint_curve_schema() {
  static const CsvSchema s = make_schema(
      "pdlearn.joint_curve",
      {"scenario", "K", "trial", "policy", "sumW_Hz", "feasible", "converged", "max_gap", "slots"},
      {false, true, true, false, true, true, true, true, true});
  return s;
}

const CsvSchema& convergence_pairs_schema() {
  static const CsvSchema s = make_schema(
      "pdlearn.convergence_pairs",
      {"pair", "random_slots", "random_censored", "pretrained_slots", "pretrained_censored"},
      {true, true, true, true, true});
  return s;
}

const CsvSchema& convergence_quantiles_schema() {
  static const CsvSchema s = make_schema("pdlearn.convergence_quantiles",
                                         {"arm", "quantile", "slots", "censored"},
                                         {false, true, true, true});
  return s;
}

const CsvSchema& water_filling_schema() {
  static const CsvSchema s = make_schema(
      "pdlearn.water_filling",
      {"trial", "capacity_optimal_bps", "capacity_learned_bps", "capacity_constant_bps",
       "capacity_gap", "power_residual", "lambda", "diverged"},
      {true, true, true, true, true, true, true, true});
  return s;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string check_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) return "cannot open " + path;
  std::string line;
  if (!std::getline(in, line)) return "missing header";
  if (line != join(schema.columns)) return "header mismatch: '" + line + "'";
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto cells = split(line);
    if (cells.size() != schema.columns.size())
      return "row " + std::to_string(row) + ": expected " + std::to_string(schema.columns.size()) +
             " cells, got " + std::to_string(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (cells[c].empty()) return "row " + std::to_string(row) + ": empty " + schema.columns[c];
      if (!schema.numeric[c]) continue;
      char* end = nullptr;
      std::strtod(cells[c].c_str(), &end);
      if (end != cells[c].c_str() + cells[c].size())
        return "row " + std::to_string(row) + ": non-numeric " + schema.columns[c];
    }
  }
  return {};
}

void write_csv(const std::string& path, const CsvSchema& schema,
               const std::vector<std::vector<std::string>>& rows) {
  {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << join(schema.columns) << '\n';
    for (const auto& r : rows) out << join(r) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
  }
  const std::string problem = check_csv(path, schema);
  if (!problem.empty())
    throw std::runtime_error(path + " violates " + schema.name + " v" +
                             std::to_string(schema.version) + ": " + problem);
}

std::string build_id() {
  std::string id = std::string("pdlearn ") + PDLEARN_VERSION + " (" + PDLEARN_BUILD_TYPE;
#ifdef __VERSION__
  id += ", gcc-compatible " + std::string(__VERSION__);
#endif
#ifdef PDLEARN_HAVE_OPENMP
  id += ", openmp";
#else
  id += ", serial";
#endif
  return id + ")";
}

// ---------------------------------------------------------------------------
// Single-user bandwidth: error CCDFs of both arms.

BandwidthCcdfReport run_bandwidth_ccdf(const ExperimentSpec& spec, const ProgressSink& sink) {
  spec.validate();
  const Logger log(sink);
  const SystemConfig& cfg = spec.config;
  const QosTarget target = make_qos_target(cfg);
  const FadingLaw law = FadingLaw::from_config(cfg);
  const double p0 = cfg.power_density();
  BandwidthCcdfReport rep;

  StochasticSolveOptions solve;
  solve.min_iters = spec.label_min_iters;
  solve.validation_draws = spec.validation_draws;
  const LabelSet labels =
      make_bandwidth_labels(cfg, spec.label_count, derive_seed(spec.seed, kStreamLabels), solve);
  rep.labels = labels.alphas.size();
  rep.unconverged_labels = labels.unconverged;
  log("labels: " + std::to_string(rep.labels) + " (" + std::to_string(labels.unconverged) +
      " unconverged)");

  struct TrialOut {
    std::vector<BandwidthSample> samples;
    bool unsup_ok = true;
    bool sup_ok = true;
  };
  std::vector<TrialOut> out(spec.trials);
  kernels::parallel_for(spec.trials, [&](std::size_t t) {
    SingleUserOptions uo;
    uo.iterations = spec.iterations;
    uo.seed = trial_seed(spec.seed, kStreamUnsupervised, t);
    const auto unsup = train_single_user_bandwidth(cfg, uo);
    SupervisedOptions so;
    so.iterations = spec.iterations;
    so.seed = trial_seed(spec.seed, kStreamSupervised, t);
    const auto sup = train_supervised_bandwidth(cfg, labels, so);

    TrialOut& o = out[t];
    o.unsup_ok = unsup.status == TrainStatus::Ok;
    o.sup_ok = sup.status == TrainStatus::Ok;
    const auto test = sample_users(spec.test_points, Placement::UniformRoad, cfg,
                                   trial_seed(spec.seed, kStreamTestAlphas, t));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (double a : test.alphas) {
      BandwidthSample s;
      s.trial = t;
      s.alpha = a;
      s.w_star = quadrature_bandwidth_solve(a, cfg, target, law,
                                            [p0](double w) { return p0 * w; }, 1e-8);
      s.w_unsupervised = o.unsup_ok ? unsup.policy.bandwidth(a) : nan;
      s.w_supervised = o.sup_ok ? sup.policy.bandwidth(a) : nan;
      o.samples.push_back(s);
    }
    log("trial " + std::to_string(t) + ": unsupervised " + to_string(unsup.status) +
        ", supervised " + to_string(sup.status));
  });

  auto score = [&](double w_hat, double a, double w_star, ArmErrors& arm) {
    arm.sigma.push_back(std::abs(w_hat / w_star - 1.0));
    arm.nu.push_back(w_hat > 0.0 ? expected_violation(a, w_hat, cfg, target, law)
                                 : std::numeric_limits<double>::infinity());
  };
  for (const auto& o : out) {
    if (!o.unsup_ok) ++rep.unsupervised.failed_trials;
    if (!o.sup_ok) ++rep.supervised.failed_trials;
    for (const auto& s : o.samples) {
      rep.samples.push_back(s);
      if (o.unsup_ok) score(s.w_unsupervised, s.alpha, s.w_star, rep.unsupervised);
      if (o.sup_ok) score(s.w_supervised, s.alpha, s.w_star, rep.supervised);
    }
  }

  const auto grid = ccdf_thresholds();
  const CcdfTable tables[4] = {
      CcdfTable::from_samples(rep.unsupervised.sigma, grid),
      CcdfTable::from_samples(rep.unsupervised.nu, grid),
      CcdfTable::from_samples(rep.supervised.sigma, grid),
      CcdfTable::from_samples(rep.supervised.nu, grid)};

  auto& checks = rep.checks;
  bool monotone = true;
  for (const auto& t : tables)
    for (std::size_t i = 0; i < t.exceed_prob.size(); ++i) {
      monotone = monotone && t.exceed_prob[i] >= 0.0 && t.exceed_prob[i] <= 1.0;
      if (i) monotone = monotone && t.exceed_prob[i] <= t.exceed_prob[i - 1];
    }
  checks.push_back({"ccdf_monotone", monotone, "all four tables nonincreasing in [0, 1]"});
  const bool have_samples = !rep.unsupervised.sigma.empty() && !rep.supervised.sigma.empty();
  checks.push_back({"samples_present", have_samples,
                    std::to_string(rep.unsupervised.sigma.size()) + " unsupervised, " +
                        std::to_string(rep.supervised.sigma.size()) + " supervised"});
  if (spec.scale != Scale::Smoke && have_samples) {
    const auto& u = rep.unsupervised;
    const auto& s = rep.supervised;
    const double med_sigma = quantile(u.sigma, 0.5);
    const double p99_nu = quantile(u.nu, 0.99);
    checks.push_back({"unsupervised_median_sigma_le_1pct", med_sigma <= 0.01, percent(med_sigma)});
    checks.push_back({"unsupervised_p99_nu_le_2pct", p99_nu <= 0.02, percent(p99_nu)});
    for (double x : {0.01, 0.02}) {
      const std::string tag = x == 0.01 ? "1pct" : "2pct";
      const double us = exceed_fraction(u.sigma, x), ss = exceed_fraction(s.sigma, x);
      const double un = exceed_fraction(u.nu, x), sn = exceed_fraction(s.nu, x);
      checks.push_back({"sigma_ccdf_unsupervised_le_supervised_at_" + tag, us <= ss,
                        "P(sigma > x): " + percent(us) + " vs " + percent(ss)});
      checks.push_back({"nu_ccdf_unsupervised_le_supervised_at_" + tag, un <= sn,
                        "P(nu > x): " + percent(un) + " vs " + percent(sn)});
    }
    checks.push_back({"no_failed_trials", u.failed_trials == 0 && s.failed_trials == 0,
                      std::to_string(u.failed_trials) + " unsupervised, " +
                          std::to_string(s.failed_trials) + " supervised"});
  }

  if (!spec.output_dir.empty()) {
    std::vector<std::vector<std::string>> rows;
    const char* arms[4] = {"unsupervised", "unsupervised", "supervised", "supervised"};
    const char* metrics[4] = {"sigma", "nu", "sigma", "nu"};
    for (int k = 0; k < 4; ++k)
      for (std::size_t i = 0; i < grid.size(); ++i)
        rows.push_back({arms[k], metrics[k], fmt(grid[i]), fmt(tables[k].exceed_prob[i]),
                        std::to_string(tables[k].n_samples)});
    write_csv(out_path(spec, "bandwidth_ccdf.csv"), ccdf_schema(), rows);

    rows.clear();
    for (const auto& s : rep.samples) {
      auto sig = [&](double w) { return std::abs(w / s.w_star - 1.0); };
      auto nu = [&](double w) {
        return w > 0.0 ? expected_violation(s.alpha, w, cfg, target, law)
                       : std::numeric_limits<double>::infinity();
      };
      rows.push_back({std::to_string(s.trial), fmt(10.0 * std::log10(s.alpha)), fmt(s.w_star),
                      fmt(s.w_unsupervised), fmt(s.w_supervised), fmt(sig(s.w_unsupervised)),
                      fmt(sig(s.w_supervised)), fmt(nu(s.w_unsupervised)),
                      fmt(nu(s.w_supervised))});
    }
    write_csv(out_path(spec, "bandwidth_samples.csv"), bandwidth_samples_schema(), rows);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Total bandwidth against the number of users.

JointCurveReport run_joint_bandwidth_curve(const ExperimentSpec& spec, const ProgressSink& sink) {
  spec.validate();
  const Logger log(sink);
  const SystemConfig& cfg = spec.config;
  const QosTarget target = make_qos_target(cfg);
  JointCurveReport rep;

  struct Job {
    std::string scenario;
    std::size_t users;
    std::size_t trial;
  };
  std::vector<Job> jobs;
  for (std::size_t k : spec.users)
    for (std::size_t t = 0; t < spec.trials; ++t) {
      jobs.push_back({"symmetric", k, t});
      if (spec.asymmetric) jobs.push_back({"asymmetric", k, t});
    }

  std::vector<std::vector<JointCurveRow>> out(jobs.size());
  kernels::parallel_for(jobs.size(), [&](std::size_t j) {
    const Job& job = jobs[j];
    const std::size_t k = job.users;
    // Paired seeds: every policy at (K, trial) shares them.
    const std::uint64_t seed = trial_seed(derive_seed(spec.seed, kStreamJoint + k), 0, job.trial);
    const bool symmetric = job.scenario == "symmetric";
    const double alpha_sym = pathloss_gain(spec.symmetric_distance, cfg);
    const std::vector<double> alphas =
        symmetric ? std::vector<double>(k, alpha_sym)
                  : sample_users(k, Placement::UniformRoad, cfg,
                                 trial_seed(spec.seed, kStreamDrop + k, job.trial))
                        .alphas;

    JointOptions jo;
    jo.max_slots = spec.max_slots;
    jo.min_slots = spec.joint_min_slots;
    jo.diagnostic_draws = spec.diagnostic_draws;
    jo.seed = seed;
    const auto run = train_joint_bw_power(cfg, init_joint_state(cfg, alphas, jo, seed), jo);
    const auto val = sample_fading(k, spec.validation_draws, cfg, derive_seed(seed, 99));
    JointCurveRow learned{job.scenario, k, job.trial, "learned", run.state.sum_bandwidth_hz(),
                          run.feasible, run.converged && run.status == TrainStatus::Ok,
                          0.0, run.slots_used};
    if (run.status == TrainStatus::Ok) {
      const auto gaps = joint_validation_gaps(run.state, cfg, target, val);
      learned.max_gap = *std::max_element(gaps.begin(), gaps.end());
    } else {
      learned.max_gap = std::numeric_limits<double>::infinity();
    }
    out[j].push_back(learned);

    StochasticSolveOptions so;
    so.validation_draws = spec.validation_draws;
    so.seed = seed;
    if (symmetric) {
      const auto opt = joint_optimal_solve(cfg, k, alpha_sym, target, so);
      out[j].push_back({job.scenario, k, job.trial, "optimal", opt.sum_bandwidth,
                        opt.sum_bandwidth <= cfg.W_max, opt.converged,
                        *std::max_element(opt.validation_gaps.begin(), opt.validation_gaps.end()),
                        opt.iterations});
    }
    const auto eq = equal_power_baseline(cfg, alphas, target, so);
    out[j].push_back({job.scenario, k, job.trial, "equal_power", eq.sum_bandwidth, eq.feasible,
                      eq.converged, 0.0, 0});
    log(job.scenario + " K=" + std::to_string(k) + " trial " + std::to_string(job.trial) +
        ": learned " + number(learned.sum_bandwidth) + " Hz after " +
        std::to_string(learned.slots) + " slots" + (learned.converged ? "" : " (not converged)"));
  });
  for (auto& v : out)
    for (auto& r : v) rep.rows.push_back(std::move(r));

  auto find = [&](const std::string& sc, std::size_t k, std::size_t t,
                  const std::string& policy) -> const JointCurveRow* {
    for (const auto& r : rep.rows)
      if (r.scenario == sc && r.users == k && r.trial == t && r.policy == policy) return &r;
    return nullptr;
  };

  auto& checks = rep.checks;
  bool finite = true;
  for (const auto& r : rep.rows) finite = finite && std::isfinite(r.sum_bandwidth);
  checks.push_back({"rows_finite", finite, std::to_string(rep.rows.size()) + " rows"});
  if (spec.scale != Scale::Smoke) {
    double worst_rel = 0.0, worst_gap = -1.0;
    bool within = true, gaps_ok = true, ordered = true;
    std::string ordered_detail;
    for (std::size_t k : spec.users)
      for (std::size_t t = 0; t < spec.trials; ++t) {
        const auto* l = find("symmetric", k, t, "learned");
        const auto* o = find("symmetric", k, t, "optimal");
        const double rel = std::abs(l->sum_bandwidth / o->sum_bandwidth - 1.0);
        worst_rel = std::max(worst_rel, rel);
        within = within && rel <= 0.03;
        worst_gap = std::max(worst_gap, l->max_gap);
        gaps_ok = gaps_ok && l->max_gap <= 1e-3;
        for (const char* sc : {"symmetric", "asymmetric"}) {
          const auto* ll = find(sc, k, t, "learned");
          const auto* e = find(sc, k, t, "equal_power");
          if (!ll || !e) continue;
          if (e->sum_bandwidth < ll->sum_bandwidth) {
            ordered = false;
            ordered_detail += std::string(sc) + " K=" + std::to_string(k) + " ";
          }
        }
      }
    checks.push_back({"learned_within_3pct_of_optimal", within,
                      "worst |learned/optimal - 1| = " + percent(worst_rel)});
    checks.push_back({"learned_validation_gap_le_1e-3", gaps_ok,
                      "worst per-user gap " + number(worst_gap)});
    checks.push_back({"equal_power_ge_learned", ordered,
                      ordered ? "every K and trial" : "violated at " + ordered_detail});

    // Trial means must not decrease with K.
    bool monotone = true;
    std::string mono_detail;
    std::vector<std::size_t> ks = spec.users;
    std::sort(ks.begin(), ks.end());
    for (const char* sc : {"symmetric", "asymmetric"})
      for (const char* policy : {"learned", "optimal", "equal_power"}) {
        double prev = -1.0;
        for (std::size_t k : ks) {
          double sum = 0.0;
          std::size_t n = 0;
          for (std::size_t t = 0; t < spec.trials; ++t)
            if (const auto* r = find(sc, k, t, policy)) {
              sum += r->sum_bandwidth;
              ++n;
            }
          if (n == 0) continue;
          const double mean = sum / double(n);
          if (mean < prev) {
            monotone = false;
            mono_detail += std::string(sc) + "/" + policy + " at K=" + std::to_string(k) + " ";
          }
          prev = mean;
        }
      }
    checks.push_back({"sum_bandwidth_nondecreasing_in_K", monotone,
                      monotone ? "all policies" : mono_detail});
  }

  if (!spec.output_dir.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : rep.rows)
      rows.push_back({r.scenario, std::to_string(r.users), std::to_string(r.trial), r.policy,
                      fmt(r.sum_bandwidth), r.feasible ? "1" : "0", r.converged ? "1" : "0",
                      fmt(r.max_gap), std::to_string(r.slots)});
    write_csv(out_path(spec, "joint_curve.csv"), joint_curve_schema(), rows);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Convergence slots with and without a checkpoint.

ConvergenceReport run_convergence_table(const ExperimentSpec& spec, const ProgressSink& sink) {
  spec.validate();
  const Logger log(sink);
  const SystemConfig& cfg = spec.config;
  ConvergenceReport rep;

  FinetuneOptions fo;
  fo.joint.max_slots = spec.max_slots;
  fo.joint.diagnostic_draws = spec.diagnostic_draws;
  fo.pretrain_slots = spec.pretrain_slots;
  fo.epochs = spec.trials;
  const std::uint64_t seed = derive_seed(spec.seed, kStreamConvergence);
  const auto drop = sample_users(spec.convergence_users, Placement::UniformRoad, cfg,
                                 derive_seed(seed, 1));
  const auto run = pretrain_finetune_run(cfg, drop.distances, fo, seed);
  rep.pretrain_slots = run.pretrain_slots;
  rep.pretrain_converged = run.pretrain_converged;
  log("pretrained for " + std::to_string(run.pretrain_slots) + " slots" +
      (run.pretrain_converged ? "" : " (not converged)"));

  std::vector<double> ratios;
  std::size_t ordered = 0;
  for (const auto& p : run.pairs) {
    rep.random_slots.push_back(p.random_slots);
    rep.pretrained_slots.push_back(p.pretrained_slots);
    rep.random_censored.push_back(p.random_censored);
    rep.pretrained_censored.push_back(p.pretrained_censored);
    if (p.pretrained_slots < p.random_slots) ++ordered;
    ratios.push_back(double(p.random_slots) / double(std::max<std::int64_t>(1, p.pretrained_slots)));
  }
  const std::size_t n = run.pairs.size();
  rep.ordered_fraction = n ? double(ordered) / double(n) : 0.0;
  rep.median_speedup = n ? quantile(ratios, 0.5) : 0.0;

  auto as_double = [](const std::vector<std::int64_t>& v) {
    return std::vector<double>(v.begin(), v.end());
  };
  auto& checks = rep.checks;
  bool positive = n > 0;
  for (std::size_t i = 0; i < n; ++i)
    positive = positive && rep.random_slots[i] >= 1 && rep.pretrained_slots[i] >= 1;
  checks.push_back({"slot_counts_positive", positive, std::to_string(n) + " pairs"});
  if (spec.scale != Scale::Smoke && n > 0) {
    const double med_r = quantile(as_double(rep.random_slots), 0.5);
    const double med_p = quantile(as_double(rep.pretrained_slots), 0.5);
    const auto censored = std::count(rep.random_censored.begin(), rep.random_censored.end(), true) +
                          std::count(rep.pretrained_censored.begin(),
                                     rep.pretrained_censored.end(), true);
    checks.push_back({"pretrained_median_lt_random_median", med_p < med_r,
                      number(med_p) + " vs " + number(med_r) + " slots"});
    checks.push_back({"pretrained_faster_in_95pct_of_pairs", rep.ordered_fraction >= 0.95,
                      percent(rep.ordered_fraction)});
    checks.push_back({"median_speedup_ge_10x", rep.median_speedup >= 10.0,
                      number(rep.median_speedup) + "x"});
    checks.push_back({"no_censored_runs", censored == 0,
                      std::to_string(censored) + " runs hit the slot budget"});
  }

  if (!spec.output_dir.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < n; ++i)
      rows.push_back({std::to_string(i), std::to_string(rep.random_slots[i]),
                      rep.random_censored[i] ? "1" : "0", std::to_string(rep.pretrained_slots[i]),
                      rep.pretrained_censored[i] ? "1" : "0"});
    write_csv(out_path(spec, "convergence_pairs.csv"), convergence_pairs_schema(), rows);
    rows.clear();
    if (n > 0) {
      for (const char* arm : {"random", "pretrained"}) {
        const bool random = std::string(arm) == "random";
        const auto& slots = random ? rep.random_slots : rep.pretrained_slots;
        const auto& cens = random ? rep.random_censored : rep.pretrained_censored;
        const auto c = std::count(cens.begin(), cens.end(), true);
        for (double q : {0.5, 0.9, 0.99})
          rows.push_back({arm, fmt(q), fmt(quantile(as_double(slots), q)), std::to_string(c)});
      }
    }
    write_csv(out_path(spec, "convergence_quantiles.csv"), convergence_quantiles_schema(), rows);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Water-filling through the learning machinery.

WaterFillingReport run_water_filling_check(const ExperimentSpec& spec, const ProgressSink& sink) {
  spec.validate();
  const Logger log(sink);
  SystemConfig cfg = spec.config;
  cfg.fading_kind = FadingKind::Exponential;
  const FadingLaw law = FadingLaw::from_config(cfg);
  const double alpha = pathloss_gain(spec.wf_distance, cfg);
  const double W = spec.wf_bandwidth;
  const double P = std::pow(10.0, spec.wf_snr_db / 10.0) * cfg.N0 * W / alpha;
  const WaterFillingProblem problem{alpha, W, P};
  const double rho = problem.snr_unit(cfg) / P;
  const auto opt = water_filling_solve(alpha, W, P, law, cfg);
  const double constant = constant_power_capacity(alpha, W, P, law, cfg);

  WaterFillingReport rep;
  rep.trials.resize(spec.trials);
  kernels::parallel_for(spec.trials, [&](std::size_t t) {
    WaterFillingOptions o;
    o.iterations = spec.wf_iterations;
    o.seed = trial_seed(spec.seed, kStreamWaterFilling, t);
    const auto r = train_water_filling(cfg, problem, o);
    WaterFillingTrial& out = rep.trials[t];
    out.capacity_optimal = opt.capacity_bps;
    out.capacity_constant = constant;
    out.lambda = r.lambda;
    out.diverged = r.status != TrainStatus::Ok;
    if (!out.diverged) {
      out.capacity_learned =
          W * law.expect([&](double g) { return std::log2(1.0 + rho * g * r.policy.power(g)); });
      out.power_residual = law.expect([&](double g) { return r.policy.power(g); }) / P - 1.0;
    } else {
      out.capacity_learned = std::numeric_limits<double>::quiet_NaN();
      out.power_residual = std::numeric_limits<double>::quiet_NaN();
    }
    out.capacity_gap = out.capacity_learned / out.capacity_optimal - 1.0;
    log("trial " + std::to_string(t) + ": capacity gap " + percent(out.capacity_gap) +
        ", power residual " + percent(out.power_residual));
  });

  auto& checks = rep.checks;
  bool finite = true;
  for (const auto& t : rep.trials)
    finite = finite && !t.diverged && std::isfinite(t.capacity_learned);
  checks.push_back({"trials_finite", finite, std::to_string(rep.trials.size()) + " trials"});
  if (spec.scale != Scale::Smoke) {
    double worst_gap = 0.0, worst_res = 0.0;
    for (const auto& t : rep.trials) {
      worst_gap = std::max(worst_gap, std::abs(t.capacity_gap));
      worst_res = std::max(worst_res, std::abs(t.power_residual));
    }
    checks.push_back({"capacity_within_1pct", finite && worst_gap <= 0.01, percent(worst_gap)});
    checks.push_back({"power_residual_le_1pct", finite && worst_res <= 0.01, percent(worst_res)});
  }

  if (!spec.output_dir.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < rep.trials.size(); ++i) {
      const auto& t = rep.trials[i];
      rows.push_back({std::to_string(i), fmt(t.capacity_optimal), fmt(t.capacity_learned),
                      fmt(t.capacity_constant), fmt(t.capacity_gap), fmt(t.power_residual),
                      fmt(t.lambda), t.diverged ? "1" : "0"});
    }
    write_csv(out_path(spec, "water_filling.csv"), water_filling_schema(), rows);
  }
  return rep;
}

// ---------------------------------------------------------------------------

std::vector<Check> run_experiment(const ExperimentSpec& spec, const ProgressSink& log) {
  spec.validate();
  if (!spec.output_dir.empty()) std::filesystem::create_directories(spec.output_dir);
  const auto start = std::chrono::steady_clock::now();

  std::vector<Check> checks;
  nlohmann::json outputs = nlohmann::json::array();
  auto output = [&](const char* file, const CsvSchema& s) {
    outputs.push_back({{"file", file}, {"schema", s.name}, {"version", s.version}});
  };
  nlohmann::json summary;
  switch (spec.scenario) {
    case Scenario::BandwidthCcdf: {
      const auto r = run_bandwidth_ccdf(spec, log);
      checks = r.checks;
      output("bandwidth_ccdf.csv", ccdf_schema());
      output("bandwidth_samples.csv", bandwidth_samples_schema());
      summary = {{"labels", r.labels},
                 {"unconverged_labels", r.unconverged_labels},
                 {"failed_trials_unsupervised", r.unsupervised.failed_trials},
                 {"failed_trials_supervised", r.supervised.failed_trials}};
      break;
    }
    case Scenario::JointBandwidthCurve: {
      const auto r = run_joint_bandwidth_curve(spec, log);
      checks = r.checks;
      output("joint_curve.csv", joint_curve_schema());
      summary = {{"rows", r.rows.size()},
                 {"omitted_policies",
                  "external multi-user-diversity and frequency-diversity baselines"}};
      break;
    }
    case Scenario::ConvergenceTable: {
      const auto r = run_convergence_table(spec, log);
      checks = r.checks;
      output("convergence_pairs.csv", convergence_pairs_schema());
      output("convergence_quantiles.csv", convergence_quantiles_schema());
      summary = {{"pretrain_slots", r.pretrain_slots},
                 {"pretrain_converged", r.pretrain_converged},
                 {"ordered_fraction", r.ordered_fraction},
                 {"median_speedup", r.median_speedup}};
      break;
    }
    case Scenario::WaterFillingCheck: {
      const auto r = run_water_filling_check(spec, log);
      checks = r.checks;
      output("water_filling.csv", water_filling_schema());
      summary = {{"trials", r.trials.size()}};
      break;
    }
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!spec.output_dir.empty()) {
    nlohmann::json report = {{"format", "pdlearn.report"},
                             {"version", 1},
                             {"scenario", to_string(spec.scenario)},
                             {"checks", checks_json(checks)},
                             {"passed", all_passed(checks)},
                             {"summary", summary}};
    std::ofstream(out_path(spec, "report.json")) << report.dump(2) << '\n';

    nlohmann::json manifest = {
        {"format", "pdlearn.manifest"},
        {"version", 1},
        {"spec", spec.to_json()},
        {"config_hash", [&] {
           char buf[20];
           std::snprintf(buf, sizeof buf, "%016llx",
                         static_cast<unsigned long long>(spec.config.hash()));
           return std::string(buf);
         }()},
        {"build", build_id()},
        {"threads", kernels::max_threads()},
        {"wall_seconds", wall},
        {"outputs", outputs},
        {"notes",
         "desk scale checks medians and 99th percentiles; the 99.999% tail statements need "
         "about 1e7 pooled samples"}};
    std::ofstream(out_path(spec, "manifest.json")) << manifest.dump(2) << '\n';
  }
  return checks;
}

}  // namespace pdlearn
