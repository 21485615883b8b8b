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

#include "pdlearn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "pdlearn/errors.hpp"
#include "pdlearn/kernels.hpp"

namespace pdlearn {

namespace {

constexpr std::uint64_t kStreamPrimalInit = 1;
constexpr std::uint64_t kStreamDualInit = 2;
constexpr std::uint64_t kStreamSamples = 3;
constexpr std::uint64_t kStreamDiagnostics = 4;

// Bandwidths are evaluated no lower than this so rate derivatives stay finite.
constexpr double kMinBandwidthHz = 1.0;

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

std::vector<std::size_t> layer_widths(std::size_t in, std::size_t hidden_layers,
                                      std::size_t width, std::size_t out) {
  std::vector<std::size_t> w{in};
  for (std::size_t i = 0; i < hidden_layers; ++i) w.push_back(width);
  w.push_back(out);
  return w;
}

double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

// Running mean of a network's parameters over the iterations from `start` on.
class TailAverage {
 public:
  TailAverage(std::int64_t iterations, double fraction)
      : start_(iterations - static_cast<std::int64_t>(fraction * double(iterations))) {}

  void add(std::int64_t t, const Mlp& net) {
    if (t < start_) return;
    const auto p = net.params();
    if (sum_.empty()) sum_.assign(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) sum_[i] += p[i];
    ++count_;
  }
  void apply(Mlp& net) const {
    if (count_ == 0) return;
    auto p = net.params();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = sum_[i] / double(count_);
  }

 private:
  std::int64_t start_;
  std::vector<double> sum_;
  std::int64_t count_ = 0;
};

std::string hex64(std::uint64_t x) {
  std::ostringstream os;
  os << std::hex << x;
  return os.str();
}

}  // namespace

std::string to_string(TrainStatus s) { return s == TrainStatus::Ok ? "ok" : "diverged"; }

AlphaFeature AlphaFeature::from_config(const SystemConfig& cfg) {
  return {pathloss_db(cfg.cell_min_dist, cfg), pathloss_db(cfg.cell_max_dist, cfg)};
}

double AlphaFeature::operator()(double alpha) const {
  const double db = 10.0 * std::log10(alpha);
  return 2.0 * (db - db_far) / (db_near - db_far) - 1.0;
}

double BandwidthPolicy::bandwidth(double alpha) const {
  const double x = feature(alpha);
  return w_net.forward(std::span<const double>(&x, 1))[0] * bandwidth_scale;
}

double BandwidthPolicy::multiplier(double alpha) const {
  require(v_net.has_value(), "BandwidthPolicy: no multiplier net");
  const double x = feature(alpha);
  return v_net->forward(std::span<const double>(&x, 1))[0];
}

std::vector<double> BandwidthPolicy::bandwidths(std::span<const double> alphas) const {
  std::vector<double> out(alphas.size());
  for (std::size_t i = 0; i < alphas.size(); ++i) out[i] = bandwidth(alphas[i]);
  return out;
}

nlohmann::json BandwidthPolicy::to_json() const {
  nlohmann::json j;
  j["format"] = "pdlearn.bandwidth_policy";
  j["version"] = 1;
  j["w_net"] = w_net.to_json();
  if (v_net) j["v_net"] = v_net->to_json();
  j["feature"] = {{"db_near", feature.db_near}, {"db_far", feature.db_far}};
  j["bandwidth_scale"] = bandwidth_scale;
  return j;
}

BandwidthPolicy BandwidthPolicy::from_json(const nlohmann::json& j) {
  require(j.value("format", "") == "pdlearn.bandwidth_policy", "not a bandwidth policy document");
  BandwidthPolicy p;
  p.w_net = Mlp::from_json(j.at("w_net"));
  if (j.contains("v_net")) p.v_net = Mlp::from_json(j.at("v_net"));
  p.feature = {j.at("feature").at("db_near").get<double>(),
               j.at("feature").at("db_far").get<double>()};
  p.bandwidth_scale = j.at("bandwidth_scale").get<double>();
  return p;
}

// ---------------------------------------------------------------------------

SingleUserResult train_single_user_bandwidth(const SystemConfig& cfg,
                                             const SingleUserOptions& options) {
  require(options.batch >= 1 && options.iterations >= 0, "train_single_user_bandwidth: options");
  const QosTarget target = make_qos_target(cfg);
  const double target_exp = target.target_exp();
  const RateModel model(cfg);
  const double p0 = cfg.power_density();
  const double scale = options.bandwidth_scale;

  SingleUserResult res;
  BandwidthPolicy& policy = res.policy;
  policy.feature = AlphaFeature::from_config(cfg);
  policy.bandwidth_scale = scale;
  const auto widths = layer_widths(1, options.hidden_layers, options.hidden_width, 1);
  policy.w_net = Mlp::glorot(widths, Activation::Tanh, Activation::Softplus, 1.0,
                             derive_seed(options.seed, kStreamPrimalInit));
  policy.v_net = Mlp::glorot(widths, Activation::Tanh, Activation::Softplus, options.dual_scale,
                             derive_seed(options.seed, kStreamDualInit));
  Mlp& w_net = policy.w_net;
  Mlp& v_net = *policy.v_net;
  // Start the bandwidth output at the Shannon guess for a mid-cell user and the
  // multiplier where dL/dW vanishes there, taking s proportional to W.
  const double mid_alpha =
      std::sqrt(pathloss_gain(cfg.cell_min_dist, cfg) * pathloss_gain(cfg.cell_max_dist, cfg));
  const double w0 = shannon_bandwidth_guess(mid_alpha, p0, cfg, target);
  const double v0 = w0 / (target.theta * target_exp * target.eb * scale);
  w_net.bias(w_net.num_layers() - 1, 0) = inverse_softplus(w0 / scale);
  v_net.bias(v_net.num_layers() - 1, 0) = inverse_softplus(v0 / options.dual_scale);

  Rng rng = make_rng(options.seed, kStreamSamples);
  std::uniform_real_distribution<double> dist(cfg.cell_min_dist, cfg.cell_max_dist);
  const std::size_t nb = options.batch;
  std::vector<double> fading(nb), alpha(nb), x(nb), cot_w(nb), cot_v(nb);
  Gradients gw = w_net.zero_gradients();
  Gradients gv = v_net.zero_gradients();
  Mlp::BatchTape tw, tv;
  const double inv_n = 1.0 / double(nb);
  TailAverage avg_w(options.iterations, options.average_tail);
  TailAverage avg_v(options.iterations, options.average_tail);

  for (std::int64_t t = 0; t < options.iterations; ++t) {
    gw.zero();
    gv.zero();
    sample_fading_into(fading, cfg, rng);
    for (std::size_t n = 0; n < nb; ++n) {
      const double d = options.placement == Placement::CellEdge ? cfg.cell_max_dist : dist(rng);
      alpha[n] = pathloss_gain(d, cfg);
      x[n] = policy.feature(alpha[n]);
    }
    const auto& w_out = w_net.forward_batch(x, nb, tw);
    const auto& v_out = v_net.forward_batch(x, nb, tv);
    double loss = 0.0, gap = 0.0, mean_w = 0.0;
    for (std::size_t n = 0; n < nb; ++n) {
      const double w = w_out[n];
      const double v = v_out[n];
      const double bw = w * scale;
      const double gain = alpha[n] * fading[n];
      // The unclamped rate keeps a restoring gradient when W is far too small.
      const double bw_eval = std::max(bw, kMinBandwidthHz);
      const double e = std::exp(-target.theta * model.raw_density(bw_eval, p0, gain));
      const double ds_dw = model.d_dW_density(bw_eval, p0, gain) * scale;
      // L = w + v (e - T): dL/dw = 1 - v theta e ds/dw, dL/dv = e - T
      cot_w[n] = 1.0 - v * target.theta * e * ds_dw;
      cot_v[n] = e - target_exp;
      loss += w + v * cot_v[n];
      gap += cot_v[n];
      mean_w += bw;
    }
    w_net.backward_batch(tw, cot_w, gw, inv_n);
    v_net.backward_batch(tv, cot_v, gv, inv_n);
    loss *= inv_n;
    if (!std::isfinite(loss) || !all_finite(gw.values) || !all_finite(gv.values)) {
      res.status = TrainStatus::Diverged;
      break;
    }
    w_net.sgd_step(gw, options.primal_lr, t, Direction::Descent);
    v_net.sgd_step(gv, options.dual_lr, t, Direction::Ascent);
    avg_w.add(t, w_net);
    avg_v.add(t, v_net);
    res.iterations = t + 1;
    if (options.trace_every > 0 && (t % options.trace_every == 0 || t + 1 == options.iterations))
      res.trace.push_back({t, loss, gap * inv_n, mean_w * inv_n});
  }
  if (res.status == TrainStatus::Ok) {
    avg_w.apply(w_net);
    avg_v.apply(v_net);
  }
  return res;
}

// ---------------------------------------------------------------------------

LabelSet make_bandwidth_labels(const SystemConfig& cfg, std::size_t count, std::uint64_t seed,
                               const StochasticSolveOptions& solve, Placement placement) {
  const QosTarget target = make_qos_target(cfg);
  const UserDrop drop = sample_users(count, placement, cfg, seed);
  LabelSet labels;
  labels.alphas = drop.alphas;
  labels.bandwidths.assign(count, 0.0);
  std::vector<char> ok(count, 0);
  kernels::parallel_for(count, [&](std::size_t i) {
    StochasticSolveOptions o = solve;
    o.seed = derive_seed(seed, 0x1abe1000 + i);
    const auto r = stochastic_bandwidth_solve(labels.alphas[i], cfg, target, o);
    labels.bandwidths[i] = r.bandwidth;
    ok[i] = r.converged ? 1 : 0;
  });
  labels.unconverged = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 0));
  return labels;
}

SupervisedResult train_supervised_bandwidth(const SystemConfig& cfg, const LabelSet& labels,
                                            const SupervisedOptions& options) {
  require(!labels.alphas.empty() && labels.alphas.size() == labels.bandwidths.size(),
          "train_supervised_bandwidth: empty or ragged label set");
  SupervisedResult res;
  BandwidthPolicy& policy = res.policy;
  policy.feature = AlphaFeature::from_config(cfg);
  policy.bandwidth_scale = options.bandwidth_scale;
  policy.w_net = Mlp::glorot(layer_widths(1, options.hidden_layers, options.hidden_width, 1),
                             Activation::Tanh, Activation::Softplus, 1.0,
                             derive_seed(options.seed, kStreamPrimalInit));
  Mlp& net = policy.w_net;

  const std::size_t m = labels.alphas.size();
  std::vector<double> xs(m), ys(m);
  for (std::size_t i = 0; i < m; ++i) {
    xs[i] = policy.feature(labels.alphas[i]);
    ys[i] = labels.bandwidths[i] / options.bandwidth_scale;
  }
  // Same starting point as the unsupervised arm: output at the label mean.
  net.bias(net.num_layers() - 1, 0) =
      inverse_softplus(std::accumulate(ys.begin(), ys.end(), 0.0) / double(m));
  auto full_mse = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = net.forward(std::span<const double>(&xs[i], 1))[0] - ys[i];
      s += r * r;
    }
    return s / double(m);
  };

  Rng rng = make_rng(options.seed, kStreamSamples);
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  const std::size_t nb = options.batch;
  std::vector<std::size_t> idx(nb);
  std::vector<double> bx(nb), cot(nb);
  Gradients g = net.zero_gradients();
  Mlp::BatchTape tape;
  const double inv_n = 1.0 / double(nb);
  TailAverage avg(options.iterations, options.average_tail);
  for (std::int64_t t = 0; t < options.iterations; ++t) {
    g.zero();
    for (std::size_t n = 0; n < nb; ++n) {
      idx[n] = pick(rng);
      bx[n] = xs[idx[n]];
    }
    const auto& out = net.forward_batch(bx, nb, tape);
    for (std::size_t n = 0; n < nb; ++n) cot[n] = out[n] - ys[idx[n]];
    net.backward_batch(tape, cot, g, inv_n);
    if (!all_finite(g.values)) {
      res.status = TrainStatus::Diverged;
      break;
    }
    net.sgd_step(g, options.lr, t, Direction::Descent);
    avg.add(t, net);
    if (options.trace_every > 0 && (t % options.trace_every == 0 || t + 1 == options.iterations))
      res.trace.push_back({t, full_mse(), 0.0, 0.0});
  }
  if (res.status == TrainStatus::Ok) avg.apply(net);
  return res;
}

// ---------------------------------------------------------------------------

double WaterFillingProblem::snr_unit(const SystemConfig& cfg) const {
  return alpha * P_ave / (cfg.N0 * bandwidth);
}

double WaterFillingPolicy::power(double g) const {
  const double x = g / gain_mean;
  return p_net.forward(std::span<const double>(&x, 1))[0] * P_ave;
}

WaterFillingTrainResult train_water_filling(const SystemConfig& cfg,
                                            const WaterFillingProblem& problem,
                                            const WaterFillingOptions& options) {
  require(problem.alpha > 0.0 && problem.bandwidth > 0.0 && problem.P_ave > 0.0,
          "train_water_filling: alpha, bandwidth, P_ave > 0");
  const double rho = problem.snr_unit(cfg);
  WaterFillingTrainResult res;
  WaterFillingPolicy& policy = res.policy;
  policy.P_ave = problem.P_ave;
  policy.gain_mean = cfg.fading_mean();
  policy.p_net = Mlp::glorot(layer_widths(1, options.hidden_layers, options.hidden_width, 1),
                             Activation::Tanh, Activation::Softplus, 1.0,
                             derive_seed(options.seed, kStreamPrimalInit));
  Mlp& net = policy.p_net;
  // Start from constant power and the multiplier that makes it stationary on average.
  net.bias(net.num_layers() - 1, 0) = inverse_softplus(1.0);
  double lambda = FadingLaw::from_config(cfg).expect(
      [rho](double g) { return rho * g / ((1.0 + rho * g) * std::numbers::ln2); });

  Rng rng = make_rng(options.seed, kStreamSamples);
  const std::size_t nb = options.batch;
  std::vector<double> fading(nb), x(nb), cot(nb);
  Gradients g = net.zero_gradients();
  Mlp::BatchTape tape;
  const double inv_n = 1.0 / double(nb);
  for (std::int64_t t = 0; t < options.iterations; ++t) {
    g.zero();
    sample_fading_into(fading, cfg, rng);
    for (std::size_t n = 0; n < nb; ++n) x[n] = fading[n] / policy.gain_mean;
    const auto& p = net.forward_batch(x, nb, tape);
    double mean_p = 0.0;
    for (std::size_t n = 0; n < nb; ++n) {
      // L = -log2(1 + rho g p) + lambda (p - 1)
      cot[n] = -rho * fading[n] / ((1.0 + rho * fading[n] * p[n]) * std::numbers::ln2) + lambda;
      mean_p += p[n];
    }
    net.backward_batch(tape, cot, g, inv_n);
    mean_p *= inv_n;
    if (!all_finite(g.values) || !std::isfinite(mean_p)) {
      res.status = TrainStatus::Diverged;
      break;
    }
    net.sgd_step(g, options.primal_lr, t, Direction::Descent);
    lambda = std::max(0.0, lambda + options.dual_lr(t) * (mean_p - 1.0));
  }
  res.lambda = lambda;
  return res;
}

// ---------------------------------------------------------------------------

double JointState::sum_bandwidth_hz() const {
  return std::accumulate(bandwidth.begin(), bandwidth.end(), 0.0) * bandwidth_scale;
}

nlohmann::json JointState::to_json() const {
  nlohmann::json j;
  j["format"] = "pdlearn.joint_state";
  j["version"] = 1;
  j["p_net"] = p_net.to_json();
  j["alphas"] = alphas;
  j["bandwidth_hz"] = nlohmann::json::array();
  for (std::size_t k = 0; k < users(); ++k) j["bandwidth_hz"].push_back(bandwidth_hz(k));
  j["lambda"] = lambda;
  j["bandwidth_scale"] = bandwidth_scale;
  j["t"] = t;
  j["slot"] = slot;
  j["seed"] = seed;
  j["config_hash"] = hex64(config_hash);
  return j;
}

JointState JointState::from_json(const nlohmann::json& j) {
  require(j.value("format", "") == "pdlearn.joint_state", "not a joint state document");
  JointState s;
  s.p_net = Mlp::from_json(j.at("p_net"));
  s.alphas = j.at("alphas").get<std::vector<double>>();
  s.bandwidth_scale = j.at("bandwidth_scale").get<double>();
  for (double hz : j.at("bandwidth_hz").get<std::vector<double>>())
    s.bandwidth.push_back(hz / s.bandwidth_scale);
  s.lambda = j.at("lambda").get<std::vector<double>>();
  s.t = j.at("t").get<std::int64_t>();
  s.slot = j.at("slot").get<std::int64_t>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
  require(s.bandwidth.size() == s.alphas.size() && s.lambda.size() == s.alphas.size() &&
              s.p_net.input_dim() == s.alphas.size() && s.p_net.output_dim() == s.alphas.size(),
          "joint state: inconsistent user count");
  return s;
}

JointState init_joint_state(const SystemConfig& cfg, std::vector<double> alphas,
                            const JointOptions& options, std::uint64_t seed) {
  const std::size_t k = alphas.size();
  require(k >= 1, "init_joint_state: need at least one user");
  const QosTarget target = make_qos_target(cfg);
  JointState s;
  s.p_net = Mlp::glorot(layer_widths(k, options.hidden_layers, k, k), Activation::Tanh,
                        Activation::ScaledSoftmax, cfg.P_max,
                        derive_seed(seed, kStreamPrimalInit));
  s.bandwidth_scale = options.bandwidth_scale;
  for (double a : alphas)
    s.bandwidth.push_back(equal_split_bandwidth_guess(a, k, cfg, target) / s.bandwidth_scale);
  s.lambda.assign(k, 1.0);
  s.alphas = std::move(alphas);
  s.seed = seed;
  s.config_hash = cfg.hash();
  return s;
}

namespace {

void accumulate_rows(const JointState& state, const SystemConfig& cfg, const RateModel& model,
                     const QosTarget& target, std::span<const double> gains, std::size_t lo,
                     std::size_t hi, JointBatchGradients& acc) {
  const std::size_t k = state.users();
  const double target_exp = target.target_exp();
  const double mean_g = cfg.fading_mean();
  std::vector<double> x(k), cot(k);
  Mlp::Tape tape;
  for (std::size_t n = lo; n < hi; ++n) {
    const double* g = gains.data() + n * k;
    for (std::size_t i = 0; i < k; ++i) x[i] = g[i] / mean_g;
    const auto p = state.p_net.forward(x, tape);
    for (std::size_t i = 0; i < k; ++i) {
      const double bw = state.bandwidth_hz(i);
      const double gain = state.alphas[i] * g[i];
      const double bw_eval = std::max(bw, kMinBandwidthHz);
      const double raw = model.raw(bw_eval, p[i], gain);
      const double e = std::exp(-target.theta * raw);
      const double le = state.lambda[i] * target.theta * e;
      cot[i] = -le * model.d_dP(bw_eval, p[i], gain);
      acc.d_bandwidth[i] += 1.0 - le * model.d_dW(bw_eval, p[i], gain) * state.bandwidth_scale;
      acc.gap[i] += e - target_exp;
      // Constraint bookkeeping uses the physical (clamped) rate.
      const double e_phys = raw > 0.0 ? e : 1.0;
      acc.violation[i] += e_phys / target_exp;
      acc.loss += state.bandwidth[i] + state.lambda[i] * (e - target_exp);
    }
    state.p_net.backward_into(tape, cot, acc.policy);
  }
}

JointBatchGradients empty_gradients(const JointState& state) {
  const std::size_t k = state.users();
  JointBatchGradients g;
  g.policy = state.p_net.zero_gradients();
  g.d_bandwidth.assign(k, 0.0);
  g.gap.assign(k, 0.0);
  g.violation.assign(k, 0.0);
  return g;
}

}  // namespace

std::vector<double> joint_validation_gaps(const JointState& state, const SystemConfig& cfg,
                                          const QosTarget& target,
                                          std::span<const double> gains) {
  const std::size_t k = state.users();
  require(k >= 1 && gains.size() % k == 0 && !gains.empty(),
          "joint_validation_gaps: gains must be n x K");
  const std::size_t n = gains.size() / k;
  const RateModel model(cfg);
  const double mean_g = cfg.fading_mean();
  const auto sums = kernels::chunked_sum_vec(n, k, [&](std::size_t row, std::span<double> out) {
    thread_local std::vector<double> x;
    thread_local Mlp::Tape tape;
    x.resize(k);
    const double* g = gains.data() + row * k;
    for (std::size_t i = 0; i < k; ++i) x[i] = g[i] / mean_g;
    const auto p = state.p_net.forward(x, tape);
    for (std::size_t i = 0; i < k; ++i)
      out[i] += std::exp(-target.theta * model.rate(state.bandwidth_hz(i), p[i],
                                                    state.alphas[i] * g[i]));
  });
  std::vector<double> gaps(k);
  for (std::size_t i = 0; i < k; ++i) gaps[i] = sums[i] / double(n) - target.target_exp();
  return gaps;
}

JointBatchGradients joint_batch_gradients(const JointState& state, const SystemConfig& cfg,
                                          const QosTarget& target,
                                          std::span<const double> gains) {
  const std::size_t k = state.users();
  require(k >= 1 && gains.size() % k == 0 && !gains.empty(),
          "joint_batch_gradients: gains must be n x K");
  const std::size_t n = gains.size() / k;
  const RateModel model(cfg);
  const std::size_t chunks = (n + kernels::kChunk - 1) / kernels::kChunk;
  std::vector<JointBatchGradients> part(chunks, empty_gradients(state));
  kernels::parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * kernels::kChunk;
    accumulate_rows(state, cfg, model, target, gains, lo, std::min(n, lo + kernels::kChunk),
                    part[c]);
  });
  JointBatchGradients total = std::move(part[0]);
  for (std::size_t c = 1; c < chunks; ++c) {
    total.policy += part[c].policy;
    for (std::size_t i = 0; i < k; ++i) {
      total.d_bandwidth[i] += part[c].d_bandwidth[i];
      total.gap[i] += part[c].gap[i];
      total.violation[i] += part[c].violation[i];
    }
    total.loss += part[c].loss;
  }
  const double inv_n = 1.0 / double(n);
  total.policy *= inv_n;
  for (std::size_t i = 0; i < k; ++i) {
    total.d_bandwidth[i] *= inv_n;
    total.gap[i] *= inv_n;
    total.violation[i] *= inv_n;
  }
  total.loss *= inv_n;
  return total;
}

Diagnostics compute_diagnostics(const JointState& state, const SystemConfig& cfg,
                                const QosTarget& target, std::span<const double> gains) {
  const auto g = joint_batch_gradients(state, cfg, target, gains);
  Diagnostics d;
  d.slot = state.slot;
  d.zeta = g.policy.l1_norm();
  for (std::size_t i = 0; i < state.users(); ++i) {
    d.zeta += std::abs(g.d_bandwidth[i]) + std::abs(g.gap[i]);
    d.xi += std::max(0.0, g.violation[i] - 1.0);
  }
  // Normalized to the per-user Lagrangian L / K so one threshold serves every K.
  d.zeta /= double(state.users());
  d.xi /= double(state.users());
  d.sum_bandwidth = state.sum_bandwidth_hz();
  d.gaps = g.gap;
  return d;
}

JointRunResult train_joint_bw_power(const SystemConfig& cfg, JointState state,
                                    const JointOptions& options, const DiagnosticsSink& sink) {
  const std::size_t k = state.users();
  require(k >= 1 && options.batch >= 1 && options.passes_per_slot >= 1,
          "train_joint_bw_power: options");
  const QosTarget target = make_qos_target(cfg);
  const auto diag_gains =
      options.diagnostic_draws > 0
          ? sample_fading(k, options.diagnostic_draws, cfg,
                          derive_seed(options.seed, kStreamDiagnostics))
          : std::vector<double>{};
  std::vector<double> batch(options.batch * k);
  LrSchedule policy_lr = options.policy_lr;
  policy_lr.base *= std::min(1.0, options.policy_reference_users / static_cast<double>(k));

  JointRunResult res;
  for (std::int64_t slot = 0; slot < options.max_slots; ++slot) {
    Rng rng = make_rng(derive_seed(options.seed, kStreamSamples), static_cast<std::uint64_t>(slot));
    sample_fading_into(batch, cfg, rng);
    for (int pass = 0; pass < options.passes_per_slot; ++pass) {
      const auto g = joint_batch_gradients(state, cfg, target, batch);
      if (!std::isfinite(g.loss) || !all_finite(g.policy.values) || !all_finite(g.d_bandwidth)) {
        res.status = TrainStatus::Diverged;
        break;
      }
      const std::int64_t clock = options.schedule_by_slot ? state.slot : state.t;
      state.p_net.sgd_step(g.policy, policy_lr, clock, Direction::Descent);
      const double lr_w = options.bandwidth_lr(clock);
      const double lr_l = options.dual_lr(clock);
      for (std::size_t i = 0; i < k; ++i) {
        state.bandwidth[i] = std::max(0.0, state.bandwidth[i] - lr_w * g.d_bandwidth[i]);
        state.lambda[i] = std::max(0.0, state.lambda[i] + lr_l * g.gap[i]);
      }
      ++state.t;
    }
    if (res.status != TrainStatus::Ok) break;
    ++state.slot;
    res.slots_used = slot + 1;
    if (options.diagnostic_draws == 0) continue;
    const Diagnostics d = compute_diagnostics(state, cfg, target, diag_gains);
    res.trace.push_back(d);
    if (sink) sink(d);
    if (d.converged(options.zeta_tol, options.xi_tol)) {
      res.converged = true;
      if (options.stop_at_convergence && res.slots_used >= options.min_slots) break;
    }
  }
  res.feasible = state.sum_bandwidth_hz() <= cfg.W_max;
  res.state = std::move(state);
  return res;
}

// ---------------------------------------------------------------------------

FinetuneResult pretrain_finetune_run(const SystemConfig& cfg, std::vector<double> distances,
                                     const FinetuneOptions& options, std::uint64_t seed) {
  require(!distances.empty(), "pretrain_finetune_run: no users");
  const std::size_t k = distances.size();
  JointOptions opts = options.joint;
  opts.stop_at_convergence = true;
  opts.seed = derive_seed(seed, 0);

  FinetuneResult res;
  auto alphas_of = [&](const std::vector<double>& d) { return users_at(d, cfg).alphas; };
  JointOptions pre_opts = opts;
  pre_opts.stop_at_convergence = false;
  pre_opts.max_slots = options.pretrain_slots;
  auto pre = train_joint_bw_power(cfg, init_joint_state(cfg, alphas_of(distances), opts, seed),
                                  pre_opts);
  res.pretrain_slots = pre.slots_used;
  res.pretrain_converged = !pre.trace.empty() && pre.trace.back().converged(opts.zeta_tol, opts.xi_tol);
  JointState checkpoint = std::move(pre.state);

  // All users travel the same way along the road, turning back at the cell ends.
  std::vector<double> direction(k, 1.0);
  const double step = options.velocity_mps * options.epoch_seconds;

  for (std::size_t e = 0; e < options.epochs; ++e) {
    for (std::size_t i = 0; i < k; ++i) {
      double d = distances[i] + direction[i] * step;
      if (d > cfg.cell_max_dist || d < cfg.cell_min_dist) {
        direction[i] = -direction[i];
        d = distances[i] + direction[i] * step;
      }
      distances[i] = d;
    }
    const auto alphas = alphas_of(distances);
    JointOptions epoch_opts = opts;
    epoch_opts.seed = derive_seed(seed, 1 + e);

    const auto fresh = train_joint_bw_power(
        cfg, init_joint_state(cfg, alphas, epoch_opts, derive_seed(seed, 1000 + e)), epoch_opts);
    JointState warm = checkpoint;
    warm.alphas = alphas;
    if (options.finetune_clock >= 0) {
      warm.slot = options.finetune_clock;
      warm.t = options.finetune_clock * opts.passes_per_slot;
    }
    auto tuned = train_joint_bw_power(cfg, std::move(warm), epoch_opts);

    res.pairs.push_back({fresh.slots_used, tuned.slots_used, !fresh.converged, !tuned.converged});
    checkpoint = std::move(tuned.state);
  }
  return res;
}

}  // namespace pdlearn
