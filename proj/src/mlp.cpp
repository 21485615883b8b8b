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

#include "pdlearn/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pdlearn/errors.hpp"

namespace pdlearn {

double softplus(double x) {
  // log1p(exp(x)) with the linear branch for large x.
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double fast_tanh(double x) {
  // 1 - 2 / (exp(2x) + 1); absolute error near one ulp, cheaper than std::tanh.
  if (x > 20.0) return 1.0;
  if (x < -20.0) return -1.0;
  return 1.0 - 2.0 / (std::exp(2.0 * x) + 1.0);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Softplus: return "softplus";
    case Activation::Relu: return "relu";
    case Activation::ScaledSoftmax: return "scaled_softmax";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "softplus") return Activation::Softplus;
  if (name == "relu") return Activation::Relu;
  if (name == "scaled_softmax") return Activation::ScaledSoftmax;
  throw ContractViolation("unknown activation: " + name);
}

double LrSchedule::operator()(std::int64_t t) const {
  return base / (1.0 + decay_rate * static_cast<double>(t));
}

void Gradients::zero() { std::fill(values.begin(), values.end(), 0.0); }

double Gradients::l1_norm() const {
  double s = 0.0;
  for (double v : values) s += std::abs(v);
  return s;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  require(other.values.size() == values.size(), "gradient shape mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
  return *this;
}

Gradients& Gradients::operator*=(double s) {
  for (double& v : values) v *= s;
  return *this;
}

Mlp::Mlp(std::vector<std::size_t> widths, Activation hidden, Activation output, double output_scale)
    : widths_(std::move(widths)), hidden_(hidden), output_(output), output_scale_(output_scale) {
  require(widths_.size() >= 2, "an Mlp needs at least an input and an output width");
  for (std::size_t w : widths_) require(w > 0, "layer widths must be positive");
  require(hidden_ != Activation::ScaledSoftmax, "ScaledSoftmax is an output-only activation");
  require(output_scale_ > 0.0 && std::isfinite(output_scale_), "output scale must be positive");
  layout();
}

void Mlp::layout() {
  offsets_.clear();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(n);
    n += widths_[l + 1] * widths_[l] + widths_[l + 1];
  }
  params_.assign(n, 0.0);
}

Mlp Mlp::glorot(std::vector<std::size_t> widths, Activation hidden, Activation output,
                double output_scale, std::uint64_t seed) {
  Mlp net(std::move(widths), hidden, output, output_scale);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double fan_in = static_cast<double>(net.widths_[l]);
    const double fan_out = static_cast<double>(net.widths_[l + 1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t r = 0; r < net.widths_[l + 1]; ++r)
      for (std::size_t c = 0; c < net.widths_[l]; ++c) net.weight(l, r, c) = dist(rng);
  }
  return net;
}

std::size_t Mlp::weight_index(std::size_t layer, std::size_t row, std::size_t col) const {
  return offsets_[layer] + row * widths_[layer] + col;
}

std::size_t Mlp::bias_index(std::size_t layer, std::size_t row) const {
  return offsets_[layer] + widths_[layer + 1] * widths_[layer] + row;
}

double& Mlp::weight(std::size_t layer, std::size_t row, std::size_t col) {
  return params_[weight_index(layer, row, col)];
}
double Mlp::weight(std::size_t layer, std::size_t row, std::size_t col) const {
  return params_[weight_index(layer, row, col)];
}
double& Mlp::bias(std::size_t layer, std::size_t row) { return params_[bias_index(layer, row)]; }
double Mlp::bias(std::size_t layer, std::size_t row) const {
  return params_[bias_index(layer, row)];
}

Activation Mlp::activation_of(std::size_t layer) const {
  return layer + 1 == num_layers() ? output_ : hidden_;
}

namespace {

void apply_activation(Activation act, double scale, std::span<const double> z,
                      std::span<double> out) {
  switch (act) {
    case Activation::Identity:
      for (std::size_t i = 0; i < z.size(); ++i) out[i] = scale * z[i];
      break;
    case Activation::Tanh:
      for (std::size_t i = 0; i < z.size(); ++i) out[i] = scale * fast_tanh(z[i]);
      break;
    case Activation::Softplus:
      for (std::size_t i = 0; i < z.size(); ++i) out[i] = scale * softplus(z[i]);
      break;
    case Activation::Relu:
      for (std::size_t i = 0; i < z.size(); ++i) out[i] = scale * std::max(z[i], 0.0);
      break;
    case Activation::ScaledSoftmax: {
      const double zmax = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - zmax);
        sum += out[i];
      }
      for (std::size_t i = 0; i < z.size(); ++i) out[i] *= scale / sum;
      break;
    }
  }
}

// Overwrites delta (cotangent on the activation output) with the cotangent on z.
void activation_vjp(Activation act, double scale, std::span<const double> z,
                    std::span<const double> out, std::span<double> delta) {
  switch (act) {
    case Activation::Identity:
      for (double& d : delta) d *= scale;
      break;
    case Activation::Tanh:
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double t = scale != 0.0 ? out[i] / scale : 0.0;
        delta[i] *= scale * (1.0 - t * t);
      }
      break;
    case Activation::Softplus:
      for (std::size_t i = 0; i < z.size(); ++i) delta[i] *= scale * sigmoid(z[i]);
      break;
    case Activation::Relu:
      for (std::size_t i = 0; i < z.size(); ++i) delta[i] *= z[i] > 0.0 ? scale : 0.0;
      break;
    case Activation::ScaledSoftmax: {
      // out = scale * p; d out_i / d z_j = out_i (delta_ij - p_j)
      double dot = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) dot += out[i] * delta[i];
      dot /= scale;
      for (std::size_t i = 0; i < z.size(); ++i) delta[i] = out[i] * (delta[i] - dot);
      break;
    }
  }
}

}  // namespace

std::vector<double> Mlp::forward(std::span<const double> input) const {
  Tape tape;
  return forward(input, tape);
}

std::vector<double> Mlp::forward(std::span<const double> input, Tape& tape) const {
  if (input.size() != input_dim())
    throw ContractViolation("Mlp::forward: input has length " + std::to_string(input.size()) +
                            ", expected " + std::to_string(input_dim()));
  const std::size_t layers = num_layers();
  // inputs[l + 1] doubles as the activation output of layer l; buffers are
  // reused across calls with the same tape.
  tape.inputs.resize(layers + 1);
  tape.pre.resize(layers);
  tape.inputs[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t rows = widths_[l + 1];
    const std::size_t cols = widths_[l];
    std::vector<double>& z = tape.pre[l];
    z.resize(rows);
    const double* x = tape.inputs[l].data();
    const double* w = params_.data() + offsets_[l];
    const double* b = w + rows * cols;
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = b[r];
      const double* wr = w + r * cols;
      for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
      z[r] = acc;
    }
    std::vector<double>& out = tape.inputs[l + 1];
    out.resize(rows);
    const bool last = l + 1 == layers;
    apply_activation(activation_of(l), last ? output_scale_ : 1.0, z, out);
  }
  tape.output = tape.inputs[layers];
  return tape.output;
}

Gradients Mlp::zero_gradients() const { return Gradients{std::vector<double>(params_.size(), 0.0)}; }

Gradients Mlp::backward(const Tape& tape, std::span<const double> cotangent) const {
  Gradients g = zero_gradients();
  backward_into(tape, cotangent, g, 1.0);
  return g;
}

void Mlp::backward_into(const Tape& tape, std::span<const double> cotangent, Gradients& grads,
                        double weight) const {
  require(cotangent.size() == output_dim(), "Mlp::backward: cotangent length mismatch");
  require(grads.values.size() == params_.size(), "Mlp::backward: gradient buffer mismatch");
  require(tape.pre.size() == num_layers() && tape.inputs.size() == num_layers() + 1,
          "Mlp::backward: tape does not match this network");
  const std::size_t layers = num_layers();
  thread_local std::vector<double> delta, prev;
  delta.assign(cotangent.begin(), cotangent.end());
  for (double& d : delta) d *= weight;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t rows = widths_[l + 1];
    const std::size_t cols = widths_[l];
    const bool last = l + 1 == layers;
    activation_vjp(activation_of(l), last ? output_scale_ : 1.0, tape.pre[l], tape.inputs[l + 1],
                   delta);
    const double* w = params_.data() + offsets_[l];
    double* gw = grads.values.data() + offsets_[l];
    double* gb = gw + rows * cols;
    const double* x = tape.inputs[l].data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = delta[r];
      gb[r] += d;
      if (d == 0.0) continue;
      double* gwr = gw + r * cols;
      for (std::size_t c = 0; c < cols; ++c) gwr[c] += d * x[c];
    }
    if (l == 0) break;
    prev.assign(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const double* wr = w + r * cols;
      for (std::size_t c = 0; c < cols; ++c) prev[c] += wr[c] * d;
    }
    std::swap(delta, prev);
  }
}

namespace {

// Sum of a[i] * b[i] with four interleaved partial sums.
double dot4(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

double sum4(const double* a, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i];
    s1 += a[i + 1];
    s2 += a[i + 2];
    s3 += a[i + 3];
  }
  for (; i < n; ++i) s0 += a[i];
  return (s0 + s1) + (s2 + s3);
}

void apply_activation_batch(Activation act, double scale, std::size_t rows, std::size_t n,
                            const double* z, double* out) {
  if (act != Activation::ScaledSoftmax) {
    apply_activation(act, scale, std::span<const double>(z, rows * n),
                     std::span<double>(out, rows * n));
    return;
  }
  std::vector<double> col(rows), res(rows);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t r = 0; r < rows; ++r) col[r] = z[r * n + j];
    apply_activation(act, scale, col, res);
    for (std::size_t r = 0; r < rows; ++r) out[r * n + j] = res[r];
  }
}

void activation_vjp_batch(Activation act, double scale, std::size_t rows, std::size_t n,
                          const double* z, const double* out, double* delta) {
  if (act != Activation::ScaledSoftmax) {
    activation_vjp(act, scale, std::span<const double>(z, rows * n),
                   std::span<const double>(out, rows * n), std::span<double>(delta, rows * n));
    return;
  }
  for (std::size_t j = 0; j < n; ++j) {
    double dot = 0.0;
    for (std::size_t r = 0; r < rows; ++r) dot += out[r * n + j] * delta[r * n + j];
    dot /= scale;
    for (std::size_t r = 0; r < rows; ++r)
      delta[r * n + j] = out[r * n + j] * (delta[r * n + j] - dot);
  }
}

}  // namespace

const std::vector<double>& Mlp::forward_batch(std::span<const double> inputs, std::size_t n,
                                              BatchTape& tape) const {
  require(n > 0 && inputs.size() == input_dim() * n, "Mlp::forward_batch: input shape mismatch");
  const std::size_t layers = num_layers();
  tape.n = n;
  tape.act.resize(layers + 1);
  tape.pre.resize(layers);
  tape.act[0].assign(inputs.begin(), inputs.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t rows = widths_[l + 1];
    const std::size_t cols = widths_[l];
    const double* w = params_.data() + offsets_[l];
    const double* b = w + rows * cols;
    const double* x = tape.act[l].data();
    std::vector<double>& z = tape.pre[l];
    z.resize(rows * n);
    for (std::size_t r = 0; r < rows; ++r) {
      double* zr = z.data() + r * n;
      std::fill(zr, zr + n, b[r]);
      for (std::size_t c = 0; c < cols; ++c) {
        const double wrc = w[r * cols + c];
        const double* xc = x + c * n;
        for (std::size_t j = 0; j < n; ++j) zr[j] += wrc * xc[j];
      }
    }
    tape.act[l + 1].resize(rows * n);
    apply_activation_batch(activation_of(l), l + 1 == layers ? output_scale_ : 1.0, rows, n,
                           z.data(), tape.act[l + 1].data());
  }
  return tape.act[layers];
}

void Mlp::backward_batch(const BatchTape& tape, std::span<const double> cotangents,
                         Gradients& grads, double weight) const {
  const std::size_t n = tape.n;
  const std::size_t layers = num_layers();
  require(tape.act.size() == layers + 1 && tape.pre.size() == layers,
          "Mlp::backward_batch: tape does not match this network");
  require(cotangents.size() == output_dim() * n, "Mlp::backward_batch: cotangent shape mismatch");
  require(grads.values.size() == params_.size(), "Mlp::backward_batch: gradient buffer mismatch");
  thread_local std::vector<double> delta, prev;
  delta.assign(cotangents.begin(), cotangents.end());
  for (double& d : delta) d *= weight;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t rows = widths_[l + 1];
    const std::size_t cols = widths_[l];
    activation_vjp_batch(activation_of(l), l + 1 == layers ? output_scale_ : 1.0, rows, n,
                         tape.pre[l].data(), tape.act[l + 1].data(), delta.data());
    const double* w = params_.data() + offsets_[l];
    double* gw = grads.values.data() + offsets_[l];
    double* gb = gw + rows * cols;
    const double* x = tape.act[l].data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* dr = delta.data() + r * n;
      gb[r] += sum4(dr, n);
      for (std::size_t c = 0; c < cols; ++c) gw[r * cols + c] += dot4(dr, x + c * n, n);
    }
    if (l == 0) break;
    prev.assign(cols * n, 0.0);
    for (std::size_t c = 0; c < cols; ++c) {
      double* pc = prev.data() + c * n;
      for (std::size_t r = 0; r < rows; ++r) {
        const double wrc = w[r * cols + c];
        const double* dr = delta.data() + r * n;
        for (std::size_t j = 0; j < n; ++j) pc[j] += wrc * dr[j];
      }
    }
    std::swap(delta, prev);
  }
}

void Mlp::sgd_step(const Gradients& grads, const LrSchedule& schedule, std::int64_t t,
                   Direction direction) {
  require(grads.values.size() == params_.size(), "Mlp::sgd_step: gradient shape mismatch");
  const double step = direction == Direction::Descent ? -schedule(t) : schedule(t);
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i] += step * grads.values[i];
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json j;
  j["layer_widths"] = widths_;
  j["activations"] = {{"hidden", to_string(hidden_)}, {"output", to_string(output_)}};
  j["output_scale"] = output_scale_;
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (std::size_t l = 0; l < num_layers(); ++l) {
    nlohmann::json mat = nlohmann::json::array();
    for (std::size_t r = 0; r < widths_[l + 1]; ++r) {
      std::vector<double> row(widths_[l]);
      for (std::size_t c = 0; c < widths_[l]; ++c) row[c] = weight(l, r, c);
      mat.push_back(row);
    }
    weights.push_back(std::move(mat));
    std::vector<double> b(widths_[l + 1]);
    for (std::size_t r = 0; r < widths_[l + 1]; ++r) b[r] = bias(l, r);
    biases.push_back(b);
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  return j;
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  try {
    Mlp net(j.at("layer_widths").get<std::vector<std::size_t>>(),
            activation_from_string(j.at("activations").at("hidden").get<std::string>()),
            activation_from_string(j.at("activations").at("output").get<std::string>()),
            j.value("output_scale", 1.0));
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    require(weights.size() == net.num_layers() && biases.size() == net.num_layers(),
            "checkpoint layer count mismatch");
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      require(weights[l].size() == net.widths_[l + 1] && biases[l].size() == net.widths_[l + 1],
              "checkpoint row count mismatch");
      for (std::size_t r = 0; r < net.widths_[l + 1]; ++r) {
        require(weights[l][r].size() == net.widths_[l], "checkpoint column count mismatch");
        for (std::size_t c = 0; c < net.widths_[l]; ++c)
          net.weight(l, r, c) = weights[l][r][c].get<double>();
        net.bias(l, r) = biases[l][r].get<double>();
      }
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("malformed network checkpoint: ") + e.what());
  }
}

}  // namespace pdlearn
