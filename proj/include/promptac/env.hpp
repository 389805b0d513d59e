// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace promptac::env {

/// Fixed random matrix of shape d x d' with i.i.d. Uniform(-1, 1) entries.
class ProjectionMatrix {
 public:
  ProjectionMatrix(Eigen::Index soft_prompt_dim, Eigen::Index action_dim, std::uint64_t seed);

  /// z = P a
  Eigen::VectorXd project(const Eigen::VectorXd& action) const;

  const Eigen::MatrixXd& matrix() const { return p_; }
  std::uint64_t seed() const { return seed_; }
  Eigen::Index soft_prompt_dim() const { return p_.rows(); }
  Eigen::Index action_dim() const { return p_.cols(); }

 private:
  Eigen::MatrixXd p_;
  std::uint64_t seed_;
};

/// What one environment evaluation produced.
struct Outcome {
  double reward = 0.0;
  std::string instruction;  // empty for environments without text
};

/// Black-box reward oracle over the unit cube. Implementations must be safe to
/// call concurrently; `nonce` selects the per-call randomness (noise draw,
/// validation resample) so results are reproducible regardless of call order.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual Outcome evaluate(const Eigen::VectorXd& action, std::uint64_t nonce) const = 0;

  /// Re-scores an earlier outcome. The default re-evaluates the action; text
  /// environments re-score the instruction itself.
  virtual Outcome reevaluate(const Eigen::VectorXd& action, const Outcome& previous, std::uint64_t nonce) const {
    (void)previous;
    return evaluate(action, nonce);
  }

  virtual int action_dim() const = 0;
  virtual std::string name() const = 0;
};

enum class LandscapeKind { kGaussianBump, kMultiBump, kNoisyBump };

const char* to_string(LandscapeKind k);
LandscapeKind landscape_kind_from_string(const std::string& s);

struct Bump {
  Eigen::VectorXd center;
  double height = 1.0;
};

struct LandscapeConfig {
  LandscapeKind kind = LandscapeKind::kGaussianBump;
  std::vector<Bump> bumps;
  double width = 0.25;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

/// r(a) = max_k h_k exp(-|a - c_k|^2 / (2 w^2)) plus clamped N(0, noise^2).
class SyntheticLandscape final : public Environment {
 public:
  explicit SyntheticLandscape(LandscapeConfig config);

  static SyntheticLandscape gaussian_bump(Eigen::VectorXd center, double width, double noise = 0.0,
                                          std::uint64_t seed = 0);

  Outcome evaluate(const Eigen::VectorXd& action, std::uint64_t nonce) const override;
  double noiseless(const Eigen::VectorXd& action) const;

  int action_dim() const override { return static_cast<int>(config_.bumps.front().center.size()); }
  std::string name() const override;
  const LandscapeConfig& config() const { return config_; }

 private:
  LandscapeConfig config_;
};

struct SearchResult {
  Eigen::VectorXd action;
  double reward = 0.0;
  std::size_t index = 0;
};

/// `budget` i.i.d. uniform actions; argmax by reward, earliest on ties.
SearchResult random_search_baseline(const Environment& env, std::size_t budget, std::uint64_t seed);

}  // namespace promptac::env
