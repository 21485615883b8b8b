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

// Primal-dual training loops. Primal parameters (policy nets, per-user
// bandwidths) take gradient descent steps on the sampled Lagrangian, dual
// parameters (multiplier net, scalar multipliers) take projected ascent steps.
// Bandwidths are handled internally in units of bandwidth_scale Hz so that
// gradients and multipliers are O(1).

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdlearn/baselines.hpp"
#include "pdlearn/channel.hpp"
#include "pdlearn/config.hpp"
#include "pdlearn/mlp.hpp"
#include "pdlearn/qos.hpp"

namespace pdlearn {

enum class TrainStatus { Ok, Diverged };

std::string to_string(TrainStatus s);

/// Maps alpha (in dB) affinely onto [-1, 1] over the configured distance range.
struct AlphaFeature {
  double db_near = 0.0;  // 10 log10(alpha) at cell_min_dist -> +1
  double db_far = 0.0;   // at cell_max_dist -> -1

  static AlphaFeature from_config(const SystemConfig& cfg);
  double operator()(double alpha) const;
};

/// Bandwidth policy alpha -> W, optionally with the multiplier net alpha -> v.
struct BandwidthPolicy {
  Mlp w_net;
  std::optional<Mlp> v_net;
  AlphaFeature feature;
  double bandwidth_scale = 2.5e5;  // Hz per unit of net output

  double bandwidth(double alpha) const;   // Hz
  double multiplier(double alpha) const;  // requires v_net
  std::vector<double> bandwidths(std::span<const double> alphas) const;

  nlohmann::json to_json() const;
  static BandwidthPolicy from_json(const nlohmann::json& j);
};

struct TracePoint {
  std::int64_t iteration = 0;
  double loss = 0.0;
  double mean_gap = 0.0;        // batch mean of exp(-theta s) - exp(-theta B^E)
  double mean_bandwidth = 0.0;  // Hz
};

// ---------------------------------------------------------------------------
// Single-user bandwidth with a multiplier network for the per-alpha constraint.

struct SingleUserOptions {
  std::size_t hidden_layers = 6;
  std::size_t hidden_width = 16;
  std::size_t batch = 100;
  std::int64_t iterations = 10000;
  LrSchedule primal_lr{0.5, 1e-4};
  LrSchedule dual_lr{0.5, 1e-4};
  double bandwidth_scale = 2.5e5;
  double dual_scale = 1.0;
  /// Both nets are returned as the parameter mean over this final fraction
  /// of iterations; 0 returns the last iterate.
  double average_tail = 0.2;
  Placement placement = Placement::UniformRoad;
  std::int64_t trace_every = 100;
  std::uint64_t seed = 1;
};

struct SingleUserResult {
  BandwidthPolicy policy;
  TrainStatus status = TrainStatus::Ok;
  std::int64_t iterations = 0;
  std::vector<TracePoint> trace;
};

SingleUserResult train_single_user_bandwidth(const SystemConfig& cfg,
                                             const SingleUserOptions& options);

// ---------------------------------------------------------------------------
// Supervised comparison arm.

struct LabelSet {
  std::vector<double> alphas;
  std::vector<double> bandwidths;  // Hz
  std::size_t unconverged = 0;
};

/// Labels from stochastic_bandwidth_solve at alphas drawn from the placement law.
LabelSet make_bandwidth_labels(const SystemConfig& cfg, std::size_t count, std::uint64_t seed,
                               const StochasticSolveOptions& solve = {},
                               Placement placement = Placement::UniformRoad);

struct SupervisedOptions {
  std::size_t hidden_layers = 6;
  std::size_t hidden_width = 16;
  std::size_t batch = 100;
  std::int64_t iterations = 10000;
  LrSchedule lr{0.5, 1e-4};
  double bandwidth_scale = 2.5e5;
  double average_tail = 0.2;  // as SingleUserOptions::average_tail
  std::int64_t trace_every = 100;
  std::uint64_t seed = 1;
};

struct SupervisedResult {
  BandwidthPolicy policy;
  TrainStatus status = TrainStatus::Ok;
  std::vector<TracePoint> trace;  // loss is the full-label-set MSE in scaled units
};

/// Minimizes the mean squared error between the net output and W* / bandwidth_scale.
SupervisedResult train_supervised_bandwidth(const SystemConfig& cfg, const LabelSet& labels,
                                            const SupervisedOptions& options);

// ---------------------------------------------------------------------------
// Water-filling through the same primal-dual machinery.

struct WaterFillingOptions {
  std::size_t hidden_layers = 3;
  std::size_t hidden_width = 16;
  std::size_t batch = 100;
  std::int64_t iterations = 20000;
  LrSchedule primal_lr{0.5, 1e-2};
  LrSchedule dual_lr{0.5, 1e-2};
  std::uint64_t seed = 1;
};

struct WaterFillingProblem {
  double alpha = 0.0;
  double bandwidth = 0.0;  // Hz
  double P_ave = 0.0;      // W
  double snr_unit(const SystemConfig& cfg) const;  // alpha P_ave / (N0 W)
};

struct WaterFillingPolicy {
  Mlp p_net;      // g / mean(g) -> P / P_ave
  double P_ave = 0.0;
  double gain_mean = 1.0;
  double power(double g) const;  // W
};

struct WaterFillingTrainResult {
  WaterFillingPolicy policy;
  double lambda = 0.0;
  TrainStatus status = TrainStatus::Ok;
};

WaterFillingTrainResult train_water_filling(const SystemConfig& cfg,
                                            const WaterFillingProblem& problem,
                                            const WaterFillingOptions& options);

// ---------------------------------------------------------------------------
// Joint bandwidth and power allocation with scalar multipliers.

struct JointOptions {
  std::size_t hidden_layers = 2;  // each as wide as the number of users
  std::size_t batch = 100;
  int passes_per_slot = 10;
  LrSchedule policy_lr{1.0, 0.1};
  /// Policy steps shrink by min(1, policy_reference_users / K); the summed
  /// Lagrangian gradient grows with K and larger cells diverge at the base rate.
  double policy_reference_users = 5.0;
  LrSchedule bandwidth_lr{1.0, 0.1};
  LrSchedule dual_lr{1.0, 0.1};
  // The schedules advance once per slot (true) or once per gradient step.
  bool schedule_by_slot = true;
  double bandwidth_scale = 2e5;
  std::int64_t max_slots = 2000;
  std::size_t diagnostic_draws = 10000;
  double zeta_tol = 0.01;
  double xi_tol = 0.01;
  bool stop_at_convergence = true;
  // The convergence rule may stop a run only from this slot on.
  std::int64_t min_slots = 0;
  std::uint64_t seed = 1;
};

struct JointState {
  Mlp p_net;                        // g / mean(g) -> P (W), sums to P_max
  std::vector<double> alphas;
  std::vector<double> bandwidth;    // per user, in units of bandwidth_scale
  std::vector<double> lambda;
  double bandwidth_scale = 2e5;
  std::int64_t t = 0;               // gradient steps taken
  std::int64_t slot = 0;            // slots consumed
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;

  std::size_t users() const { return alphas.size(); }
  double bandwidth_hz(std::size_t k) const { return bandwidth[k] * bandwidth_scale; }
  double sum_bandwidth_hz() const;

  nlohmann::json to_json() const;
  static JointState from_json(const nlohmann::json& j);
};

/// Random policy net, lambda = 1, bandwidths at the Shannon guess with an
/// equal power split.
JointState init_joint_state(const SystemConfig& cfg, std::vector<double> alphas,
                            const JointOptions& options, std::uint64_t seed);

/// Per-user qos_gap of the clamped rate under the current policy over an
/// n x K batch; the training surrogate is not involved.
std::vector<double> joint_validation_gaps(const JointState& state, const SystemConfig& cfg,
                                          const QosTarget& target, std::span<const double> gains);

struct Diagnostics {
  std::int64_t slot = 0;
  double zeta = 0.0;
  double xi = 0.0;
  double sum_bandwidth = 0.0;  // Hz
  std::vector<double> gaps;    // per-user mean exp(-theta s) - exp(-theta B^E)

  bool converged(double zeta_tol, double xi_tol) const { return zeta < zeta_tol && xi < xi_tol; }
};

/// zeta = (|mean grad_policy L|_1 + sum_k |mean dL/dW_k| + sum_k |mean dL/dlambda_k|) / K,
/// the absolute mean gradients of the per-user Lagrangian L / K, and
/// xi = mean_k (mean exp(theta (B^E - s_k)) - 1)^+, both over the given
/// n x K batch of small-scale gains.
Diagnostics compute_diagnostics(const JointState& state, const SystemConfig& cfg,
                                const QosTarget& target, std::span<const double> gains);

/// Lagrangian pieces on one batch, shared by the trainer and compute_diagnostics.
struct JointBatchGradients {
  Gradients policy;
  std::vector<double> d_bandwidth;  // dL/dW_k in scaled units
  std::vector<double> gap;          // dL/dlambda_k
  std::vector<double> violation;    // mean exp(theta (B^E - s_k))
  double loss = 0.0;
};

JointBatchGradients joint_batch_gradients(const JointState& state, const SystemConfig& cfg,
                                          const QosTarget& target,
                                          std::span<const double> gains);

struct JointRunResult {
  JointState state;
  TrainStatus status = TrainStatus::Ok;
  std::vector<Diagnostics> trace;
  bool converged = false;
  std::int64_t slots_used = 0;  // slots consumed by this run
  bool feasible = true;         // sum of bandwidths <= W_max
};

using DiagnosticsSink = std::function<void(const Diagnostics&)>;

/// Runs slots until the convergence rule fires at or after min_slots (if
/// stop_at_convergence) or max_slots is reached. Each slot draws a fresh batch and takes
/// passes_per_slot steps on it.
JointRunResult train_joint_bw_power(const SystemConfig& cfg, JointState state,
                                    const JointOptions& options,
                                    const DiagnosticsSink& sink = {});

// ---------------------------------------------------------------------------
// Pre-training versus random initialization after users move.

struct FinetuneOptions {
  JointOptions joint;
  double velocity_mps = 20.0;
  double epoch_seconds = 0.1;
  std::size_t epochs = 1;
  // The checkpoint keeps training past its first convergence up to this slot.
  std::int64_t pretrain_slots = 300;
  // Schedule clock the fine-tuned state restarts from; negative continues the checkpoint's.
  std::int64_t finetune_clock = 20;
};

struct FinetunePair {
  std::int64_t random_slots = 0;
  std::int64_t pretrained_slots = 0;
  bool random_censored = false;
  bool pretrained_censored = false;
};

struct FinetuneResult {
  std::int64_t pretrain_slots = 0;
  bool pretrain_converged = false;
  std::vector<FinetunePair> pairs;  // one per epoch
};

/// Pre-trains at the initial drop, then for every epoch moves the users and
/// counts slots to convergence from a random init and from the last checkpoint.
FinetuneResult pretrain_finetune_run(const SystemConfig& cfg, std::vector<double> distances,
                                     const FinetuneOptions& options, std::uint64_t seed);

}  // namespace pdlearn
