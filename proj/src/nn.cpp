// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptac/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>

#include <json.hpp>

#include "promptac/errors.hpp"
#include "promptac/rng.hpp"

namespace promptac::nn {
namespace {

Eigen::MatrixXd apply(Activation a, const Eigen::MatrixXd& pre) {
  switch (a) {
    case Activation::kRelu: return pre.cwiseMax(0.0);
    case Activation::kTanh: return pre.array().tanh().matrix();
    case Activation::kLinear: return pre;
  }
  return pre;
}

// Derivative expressed through the activation output.
Eigen::MatrixXd derivative(Activation a, const Eigen::MatrixXd& out) {
  switch (a) {
    case Activation::kRelu: return (out.array() > 0.0).cast<double>().matrix();
    case Activation::kTanh: return (1.0 - out.array().square()).matrix();
    case Activation::kLinear: return Eigen::MatrixXd::Ones(out.rows(), out.cols());
  }
  return Eigen::MatrixXd::Ones(out.rows(), out.cols());
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <typename Param, typename Grad>
void adam_tensor(Param& p, const Grad& g, Param& m, Param& v, long t, const AdamConfig& c) {
  m = c.beta1 * m + (1.0 - c.beta1) * g;
  v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  p.array() -= c.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
}

void write_le_float(std::ostream& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  const unsigned char bytes[4] = {static_cast<unsigned char>(bits & 0xff),
                                  static_cast<unsigned char>((bits >> 8) & 0xff),
                                  static_cast<unsigned char>((bits >> 16) & 0xff),
                                  static_cast<unsigned char>((bits >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

double read_le_float(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw Error(ErrorCode::kShape, "snapshot truncated");
  }
  const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                             (static_cast<std::uint32_t>(bytes[1]) << 8) |
                             (static_cast<std::uint32_t>(bytes[2]) << 16) |
                             (static_cast<std::uint32_t>(bytes[3]) << 24);
  return static_cast<double>(std::bit_cast<float>(bits));
}

}  // namespace

const char* to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kLinear: return "linear";
    case Activation::kTanh: return "tanh";
  }
  return "linear";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "linear") return Activation::kLinear;
  if (s == "tanh") return Activation::kTanh;
  throw Error(ErrorCode::kInvalidConfiguration, "unknown activation '" + s + "'");
}

double GradientBundle::squared_norm() const {
  double total = 0.0;
  for (const auto& w : weight) total += w.squaredNorm();
  for (const auto& b : bias) total += b.squaredNorm();
  return total;
}

void GradientBundle::scale(double factor) {
  for (auto& w : weight) w *= factor;
  for (auto& b : bias) b *= factor;
}

bool GradientBundle::is_zero() const {
  for (const auto& w : weight) {
    if (!w.isZero(0.0)) return false;
  }
  for (const auto& b : bias) {
    if (!b.isZero(0.0)) return false;
  }
  return true;
}

GradientBundle& GradientBundle::operator+=(const GradientBundle& other) {
  if (other.weight.size() != weight.size()) {
    throw Error(ErrorCode::kShape, "gradient bundles have different depth");
  }
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weight[i] += other.weight[i];
    bias[i] += other.bias[i];
  }
  return *this;
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) {
    throw Error(ErrorCode::kInvalidConfiguration, "network needs at least one layer");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.weight.rows() != l.bias.size() || l.weight.rows() == 0 || l.weight.cols() == 0) {
      throw Error(ErrorCode::kShape, "layer " + std::to_string(i) + " has inconsistent shape");
    }
    if (i > 0 && layers_[i - 1].weight.rows() != l.weight.cols()) {
      throw Error(ErrorCode::kShape, "layer " + std::to_string(i) + " input does not match previous output");
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw NumericError(i, "layer " + std::to_string(i) + " has non-finite parameters");
    }
  }
}

DenseNet DenseNet::create(std::span<const int> sizes, Activation hidden, std::uint64_t seed,
                          Activation output) {
  if (sizes.size() < 2) {
    throw Error(ErrorCode::kInvalidConfiguration, "layer signature needs at least two sizes");
  }
  for (int s : sizes) {
    if (s <= 0) throw Error(ErrorCode::kInvalidConfiguration, "layer sizes must be positive");
  }
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  layers.reserve(sizes.size() - 1);
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const int in = sizes[i];
    const int out = sizes[i + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer;
    layer.weight.resize(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
    }
    layer.bias = Eigen::VectorXd::Zero(out);
    layer.activation = (i + 2 == sizes.size()) ? output : hidden;
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& input, ForwardCache* cache) const {
  if (layers_.empty()) throw Error(ErrorCode::kShape, "forward on an empty network");
  if (input.rows() != layers_.front().weight.cols()) {
    throw Error(ErrorCode::kShape, "input has " + std::to_string(input.rows()) + " rows, network expects " +
                                       std::to_string(layers_.front().weight.cols()));
  }
  if (!all_finite(input)) throw Error(ErrorCode::kNumeric, "non-finite network input");
  if (cache) {
    cache->inputs.clear();
    cache->activations.clear();
  }
  Eigen::MatrixXd x = input;
  for (const auto& l : layers_) {
    Eigen::MatrixXd pre = l.weight * x;
    pre.colwise() += l.bias;
    Eigen::MatrixXd out = apply(l.activation, pre);
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->activations.push_back(out);
    }
    x = std::move(out);
  }
  return x;
}

Eigen::VectorXd DenseNet::predict(const Eigen::VectorXd& input) const {
  return forward(Eigen::MatrixXd(input), nullptr).col(0);
}

GradientBundle DenseNet::backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream,
                                  Eigen::MatrixXd* input_grad) const {
  if (cache.inputs.size() != layers_.size() || cache.activations.size() != layers_.size()) {
    throw Error(ErrorCode::kShape, "forward cache does not match network depth");
  }
  const Eigen::Index batch = cache.inputs.front().cols();
  if (upstream.rows() != static_cast<Eigen::Index>(output_size()) || upstream.cols() != batch) {
    throw Error(ErrorCode::kShape, "upstream gradient shape does not match network output");
  }
  if (!all_finite(upstream)) throw Error(ErrorCode::kNumeric, "non-finite upstream gradient");
  GradientBundle g;
  g.weight.resize(layers_.size());
  g.bias.resize(layers_.size());
  Eigen::MatrixXd delta = upstream;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    if (cache.inputs[k].rows() != l.weight.cols() || cache.activations[k].rows() != l.weight.rows()) {
      throw Error(ErrorCode::kShape, "forward cache does not match layer " + std::to_string(k));
    }
    delta = delta.cwiseProduct(derivative(l.activation, cache.activations[k]));
    g.weight[k] = delta * cache.inputs[k].transpose();
    g.bias[k] = delta.rowwise().sum();
    if (k > 0 || input_grad) delta = l.weight.transpose() * delta;
  }
  if (input_grad) *input_grad = std::move(delta);
  return g;
}

GradientBundle DenseNet::zero_gradients() const {
  GradientBundle g;
  for (const auto& l : layers_) {
    g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

std::size_t DenseNet::input_size() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t DenseNet::output_size() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::vector<int> DenseNet::signature() const {
  std::vector<int> sizes;
  if (layers_.empty()) return sizes;
  sizes.push_back(static_cast<int>(layers_.front().weight.cols()));
  for (const auto& l : layers_) sizes.push_back(static_cast<int>(l.weight.rows()));
  return sizes;
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool DenseNet::operator==(const DenseNet& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& a = layers_[i];
    const auto& b = other.layers_[i];
    if (a.activation != b.activation || a.weight.rows() != b.weight.rows() ||
        a.weight.cols() != b.weight.cols() || a.weight != b.weight || a.bias != b.bias) {
      return false;
    }
  }
  return true;
}

AdamState::AdamState(const DenseNet& net, AdamConfig cfg)
    : m(net.zero_gradients()), v(net.zero_gradients()), config(cfg) {
  if (!(cfg.learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidConfiguration, "Adam learning rate must be positive");
  }
}

void adam_update(DenseNet& net, const GradientBundle& grads, AdamState& state) {
  auto& layers = net.mutable_layers();
  if (grads.weight.size() != layers.size() || state.m.weight.size() != layers.size()) {
    throw Error(ErrorCode::kShape, "gradient bundle depth does not match network");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (grads.weight[i].rows() != layers[i].weight.rows() || grads.weight[i].cols() != layers[i].weight.cols() ||
        grads.bias[i].size() != layers[i].bias.size()) {
      throw Error(ErrorCode::kShape, "gradient shape mismatch at layer " + std::to_string(i));
    }
    if (!grads.weight[i].allFinite() || !grads.bias[i].allFinite()) {
      throw NumericError(i, "non-finite gradient at layer " + std::to_string(i));
    }
  }
  ++state.step;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    adam_tensor(layers[i].weight, grads.weight[i], state.m.weight[i], state.v.weight[i], state.step, state.config);
    adam_tensor(layers[i].bias, grads.bias[i], state.m.bias[i], state.v.bias[i], state.step, state.config);
  }
}

VectorAdam::VectorAdam(Eigen::Index size, AdamConfig config)
    : m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)), config_(config) {
  if (!(config.learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidConfiguration, "Adam learning rate must be positive");
  }
}

void VectorAdam::update(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error(ErrorCode::kShape, "Adam vector size mismatch");
  }
  if (!grad.allFinite()) throw NumericError(0, "non-finite gradient");
  ++step_;
  adam_tensor(params, grad, m_, v_, step_, config_);
}

double clip_global_norm(GradientBundle& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (std::isfinite(norm) && norm > max_norm && max_norm > 0.0) grads.scale(max_norm / norm);
  return norm;
}

void write_snapshot(std::ostream& out, const DenseNet& net) {
  nlohmann::json header;
  header["sizes"] = net.signature();
  auto acts = nlohmann::json::array();
  for (const auto& l : net.layers()) acts.push_back(to_string(l.activation));
  header["activations"] = acts;
  out << header.dump() << '\n';
  for (const auto& l : net.layers()) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) write_le_float(out, l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) write_le_float(out, l.bias(r));
  }
}

DenseNet read_snapshot(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kShape, "snapshot header missing");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("header", std::string("snapshot header: ") + e.what());
  }
  const auto sizes = header.at("sizes").get<std::vector<int>>();
  const auto acts = header.at("activations").get<std::vector<std::string>>();
  if (sizes.size() < 2 || acts.size() + 1 != sizes.size()) {
    throw Error(ErrorCode::kShape, "snapshot header is inconsistent");
  }
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    DenseLayer l;
    l.activation = activation_from_string(acts[i]);
    l.weight.resize(sizes[i + 1], sizes[i]);
    l.bias.resize(sizes[i + 1]);
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = read_le_float(in);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = read_le_float(in);
    layers.push_back(std::move(l));
  }
  return DenseNet(std::move(layers));
}

}  // namespace promptac::nn
