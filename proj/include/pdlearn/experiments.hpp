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

// Experiment drivers: error CCDFs of the single-user learners, total
// bandwidth against user count, convergence slots with and without a
// checkpoint, and the water-filling check. Each driver returns a report with
// named checks and, when given an output directory, writes schema-checked CSV
// files and a manifest from which the run can be repeated.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdlearn/config.hpp"

namespace pdlearn {

enum class Scenario { BandwidthCcdf, JointBandwidthCurve, ConvergenceTable, WaterFillingCheck };
enum class Scale { Desk, Paper, Smoke };

std::string to_string(Scenario s);
std::string to_string(Scale s);
Scenario scenario_from_string(const std::string& s);  // throws ConfigError
Scale scale_from_string(const std::string& s);        // throws ConfigError

struct ExperimentSpec {
  Scenario scenario = Scenario::BandwidthCcdf;
  Scale scale = Scale::Desk;
  std::size_t trials = 20;
  std::uint64_t seed = 1;
  SystemConfig config;
  std::string output_dir;  // empty: nothing is written

  // bandwidth_ccdf
  std::int64_t iterations = 10000;
  std::size_t test_points = 200;
  std::size_t label_count = 2000;
  std::int64_t label_min_iters = 5000;
  // joint_bandwidth_curve
  std::vector<std::size_t> users{5, 10, 20};
  bool asymmetric = false;  // also run random drops (no optimum available)
  double symmetric_distance = 250.0;  // m
  std::int64_t joint_min_slots = 300;  // no convergence stop before this slot
  // convergence_table
  std::size_t convergence_users = 10;
  std::int64_t pretrain_slots = 300;
  // joint and convergence
  std::int64_t max_slots = 2000;
  std::size_t diagnostic_draws = 10000;
  // validation batches for gaps and labels
  std::size_t validation_draws = 100000;
  // water_filling_check
  double wf_snr_db = 0.0;
  double wf_distance = 150.0;   // m
  double wf_bandwidth = 1e6;    // Hz
  std::int64_t wf_iterations = 20000;

  /// Scenario defaults at the given scale.
  static ExperimentSpec defaults(Scenario scenario, Scale scale);
  void validate() const;  // throws ConfigError

  nlohmann::json to_json() const;
  static ExperimentSpec from_json(const nlohmann::json& j);
};

/// Empirical P(X > threshold) on a threshold grid.
struct CcdfTable {
  std::vector<double> thresholds;
  std::vector<double> exceed_prob;
  std::size_t n_samples = 0;

  static CcdfTable from_samples(std::span<const double> samples,
                                std::span<const double> thresholds);
};

/// n log-spaced points from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t n);
/// The CCDF grid: 200 points from 1e-5 to 1.
std::vector<double> ccdf_thresholds();
/// Fraction of samples strictly above x.
double exceed_fraction(std::span<const double> samples, double x);
/// Linear-interpolated empirical quantile, q in [0, 1].
double quantile(std::vector<double> samples, double q);

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

bool all_passed(std::span<const Check> checks);

struct ArmErrors {
  std::vector<double> sigma;  // |W_hat / W* - 1|
  std::vector<double> nu;     // (E{exp(theta (B^E - s))} - 1)^+
  std::size_t failed_trials = 0;
};

struct BandwidthSample {
  std::size_t trial = 0;
  double alpha = 0.0;
  double w_star = 0.0;        // Hz
  double w_unsupervised = 0.0;  // Hz, NaN when the trial's arm failed
  double w_supervised = 0.0;
};

struct BandwidthCcdfReport {
  std::vector<BandwidthSample> samples;
  ArmErrors unsupervised;
  ArmErrors supervised;
  std::size_t labels = 0;
  std::size_t unconverged_labels = 0;
  std::vector<Check> checks;
};

struct JointCurveRow {
  std::string scenario;  // symmetric | asymmetric
  std::size_t users = 0;
  std::size_t trial = 0;
  std::string policy;  // learned | optimal | equal_power
  double sum_bandwidth = 0.0;  // Hz
  bool feasible = true;
  bool converged = true;
  double max_gap = 0.0;  // largest per-user validation qos_gap
  std::int64_t slots = 0;
};

struct JointCurveReport {
  std::vector<JointCurveRow> rows;
  std::vector<Check> checks;
};

struct ConvergenceReport {
  std::vector<std::int64_t> random_slots;
  std::vector<std::int64_t> pretrained_slots;
  std::vector<bool> random_censored;
  std::vector<bool> pretrained_censored;
  std::int64_t pretrain_slots = 0;
  bool pretrain_converged = false;
  double ordered_fraction = 0.0;  // pairs with pretrained < random
  double median_speedup = 0.0;    // median over pairs of random / pretrained
  std::vector<Check> checks;
};

struct WaterFillingTrial {
  double capacity_optimal = 0.0;  // bit/s
  double capacity_learned = 0.0;
  double capacity_constant = 0.0;
  double capacity_gap = 0.0;      // learned / optimal - 1
  double power_residual = 0.0;    // E{P_hat} / P_ave - 1
  double lambda = 0.0;
  bool diverged = false;
};

struct WaterFillingReport {
  std::vector<WaterFillingTrial> trials;
  std::vector<Check> checks;
};

using ProgressSink = std::function<void(const std::string&)>;

BandwidthCcdfReport run_bandwidth_ccdf(const ExperimentSpec& spec, const ProgressSink& log = {});
JointCurveReport run_joint_bandwidth_curve(const ExperimentSpec& spec,
                                           const ProgressSink& log = {});
ConvergenceReport run_convergence_table(const ExperimentSpec& spec, const ProgressSink& log = {});
WaterFillingReport run_water_filling_check(const ExperimentSpec& spec,
                                           const ProgressSink& log = {});

/// Runs the spec's scenario, writing outputs and the manifest when
/// spec.output_dir is set. Returns the checks.
std::vector<Check> run_experiment(const ExperimentSpec& spec, const ProgressSink& log = {});

// ---------------------------------------------------------------------------
// Output plumbing.

struct CsvSchema {
  std::string name;
  int version = 1;
  std::vector<std::string> columns;
  std::vector<bool> numeric;  // per column
};

const CsvSchema& ccdf_schema();
const CsvSchema& bandwidth_samples_schema();
const CsvSchema& joint_curve_schema();
const CsvSchema& convergence_pairs_schema();
const CsvSchema& convergence_quantiles_schema();
const CsvSchema& water_filling_schema();

/// Writes header plus rows, then re-reads the file and validates it against
/// the schema. Throws std::runtime_error on I/O or schema failure.
void write_csv(const std::string& path, const CsvSchema& schema,
               const std::vector<std::vector<std::string>>& rows);
/// Empty string when the file conforms; otherwise the first problem found.
std::string check_csv(const std::string& path, const CsvSchema& schema);

/// Round-trip formatting for doubles in CSV cells.
std::string fmt(double v);

/// Identifies the library build (version, compiler, build type, OpenMP).
std::string build_id();

}  // namespace pdlearn
