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

// Fully-connected network with exact reverse-mode gradients.
//
// Parameters live in one flat vector so that optimizer steps, finite-difference
// probes and gradient norms are plain vector operations. Layer l owns a
// row-major weight block of shape (width[l+1] x width[l]) followed by its bias.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace pdlearn {

enum class Activation { Identity, Tanh, Softplus, Relu, ScaledSoftmax };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// phi(t) = base / (1 + decay_rate * t)
struct LrSchedule {
  double base = 0.5;
  double decay_rate = 1e-4;

  double operator()(std::int64_t t) const;
};

enum class Direction { Descent, Ascent };

/// Gradient buffer shaped like the parameters of one Mlp.
struct Gradients {
  std::vector<double> values;

  void zero();
  double l1_norm() const;
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double s);
};

class Mlp {
 public:
  /// Per-layer activations kept from a forward pass; backward() consumes them.
  struct Tape {
    std::vector<std::vector<double>> inputs;  // input to each layer, then the output
    std::vector<std::vector<double>> pre;     // pre-activation of each layer
    std::vector<double> output;
  };

  /// Batched tape. Activations are stored feature-major: act[l] holds
  /// width[l] rows of n values, act[0] being the inputs.
  struct BatchTape {
    std::size_t n = 0;
    std::vector<std::vector<double>> act;
    std::vector<std::vector<double>> pre;
  };

  Mlp() = default;
  /// Zero-initialized network. output_scale multiplies the output activation
  /// (for ScaledSoftmax it is the value the outputs sum to).
  Mlp(std::vector<std::size_t> widths, Activation hidden, Activation output,
      double output_scale = 1.0);

  /// Glorot-uniform weights, zero biases.
  static Mlp glorot(std::vector<std::size_t> widths, Activation hidden, Activation output,
                    double output_scale, std::uint64_t seed);

  std::vector<double> forward(std::span<const double> input) const;
  std::vector<double> forward(std::span<const double> input, Tape& tape) const;

  /// d(cotangent . output)/d(params) for the input recorded in tape.
  Gradients backward(const Tape& tape, std::span<const double> cotangent) const;
  /// Accumulating variant: grads += weight * d(cotangent . output)/d(params).
  void backward_into(const Tape& tape, std::span<const double> cotangent, Gradients& grads,
                     double weight = 1.0) const;

  /// Forward pass over n samples given feature-major (input_dim x n). Returns
  /// the feature-major outputs (output_dim x n), owned by the tape.
  const std::vector<double>& forward_batch(std::span<const double> inputs, std::size_t n,
                                           BatchTape& tape) const;
  /// grads += weight * sum over samples of d(cotangent_i . output_i)/d(params);
  /// cotangents are feature-major (output_dim x n).
  void backward_batch(const BatchTape& tape, std::span<const double> cotangents,
                      Gradients& grads, double weight = 1.0) const;

  /// params <- params -/+ phi(t) * grads.
  void sgd_step(const Gradients& grads, const LrSchedule& schedule, std::int64_t t,
                Direction direction);

  Gradients zero_gradients() const;

  std::size_t num_layers() const { return widths_.size() - 1; }
  std::size_t input_dim() const { return widths_.front(); }
  std::size_t output_dim() const { return widths_.back(); }
  const std::vector<std::size_t>& widths() const { return widths_; }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }
  double output_scale() const { return output_scale_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t num_params() const { return params_.size(); }

  double& weight(std::size_t layer, std::size_t row, std::size_t col);
  double weight(std::size_t layer, std::size_t row, std::size_t col) const;
  double& bias(std::size_t layer, std::size_t row);
  double bias(std::size_t layer, std::size_t row) const;
  /// Flat index of weight (layer,row,col) / bias (layer,row).
  std::size_t weight_index(std::size_t layer, std::size_t row, std::size_t col) const;
  std::size_t bias_index(std::size_t layer, std::size_t row) const;

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

  bool operator==(const Mlp&) const = default;

 private:
  void layout();
  Activation activation_of(std::size_t layer) const;

  std::vector<std::size_t> widths_;
  Activation hidden_ = Activation::Tanh;
  Activation output_ = Activation::Identity;
  double output_scale_ = 1.0;
  std::vector<std::size_t> offsets_;  // start of each layer's weight block
  std::vector<double> params_;
};

// Scalar activation helpers, shared with the trainers' analytic code paths.
double softplus(double x);
double sigmoid(double x);
double fast_tanh(double x);

}  // namespace pdlearn
