// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

// Dense MLPs with hand-written backpropagation and Adam. Batched calls use
// column-major batches: every column of an input matrix is one sample.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace promptac::nn {

enum class Activation { kRelu, kLinear, kTanh };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::kLinear;
};

/// Per-layer values kept by forward() so backward() is exact.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;       // input to layer i
  std::vector<Eigen::MatrixXd> activations;  // output of layer i
};

/// Parameter-shaped tensors; used for gradients and for Adam moments.
struct GradientBundle {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  double squared_norm() const;
  void scale(double factor);
  bool is_zero() const;
  GradientBundle& operator+=(const GradientBundle& other);
};

class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers);

  /// Uniform fan-in initialization U(-1/sqrt(in), 1/sqrt(in)), zero biases.
  /// Hidden layers use `hidden`; the last layer uses `output`.
  static DenseNet create(std::span<const int> sizes, Activation hidden, std::uint64_t seed,
                         Activation output = Activation::kLinear);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, ForwardCache* cache = nullptr) const;
  Eigen::VectorXd predict(const Eigen::VectorXd& input) const;

  /// Gradient of sum(output .* upstream) over the batch with respect to every
  /// parameter. When `input_grad` is given it receives d/d(input), per column.
  GradientBundle backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream,
                          Eigen::MatrixXd* input_grad = nullptr) const;

  GradientBundle zero_gradients() const;

  std::size_t input_size() const;
  std::size_t output_size() const;
  std::vector<int> signature() const;
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  bool operator==(const DenseNet& other) const;

 private:
  std::vector<DenseLayer> layers_;
};

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamState() = default;
  AdamState(const DenseNet& net, AdamConfig config);

  GradientBundle m;
  GradientBundle v;
  long step = 0;
  AdamConfig config;
};

/// One bias-corrected Adam step. Throws NumericError naming the first layer
/// with a non-finite gradient; nothing is modified in that case.
void adam_update(DenseNet& net, const GradientBundle& grads, AdamState& state);

/// Adam over a plain parameter vector (direct actor, log-temperature).
class VectorAdam {
 public:
  VectorAdam() = default;
  VectorAdam(Eigen::Index size, AdamConfig config);

  void update(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

  long step() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long step_ = 0;
  AdamConfig config_;
};

/// Rescales the bundle so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(GradientBundle& grads, double max_norm);

// Snapshot format: one JSON header line {"sizes":[...],"activations":[...]}
// followed by every layer's weights (row-major) then biases as little-endian
// float32.
void write_snapshot(std::ostream& out, const DenseNet& net);
DenseNet read_snapshot(std::istream& in);

}  // namespace promptac::nn
