// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

// Stateless entropy-regularized actor-critic over actions in (0,1)^d.
//
// The policy is a diagonal Gaussian over a pre-squash variable u, mapped to
// the unit cube by a = (tanh(u) + 1) / 2. Critics regress observed rewards
// directly (there is no state and no bootstrapping), the actor minimizes
// E[alpha * log pi(a) - Q(a)] through the reparameterized sample, and alpha
// tracks a target entropy.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "promptac/nn.hpp"
#include "promptac/rng.hpp"

namespace promptac::agent {

enum class Variant { kTwoCritic, kOneCritic, kNoCritic, kDirectActor };
enum class ActorKind { kMlp, kDirect };
enum class CriticCount { kTwo, kOne, kNone };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct PolicyParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_std;
};

struct SampledAction {
  Eigen::VectorXd action;      // in (0,1)^d
  Eigen::VectorXd pre_squash;  // u
  double log_prob = 0.0;       // density of `action` under the policy
};

double squash(double u);
/// u = atanh(2a - 1), with a kept a hair inside (0,1).
double unsquash(double a);
/// log((1 - tanh(u)^2) / 2), computed without cancellation.
double log_squash_jacobian(double u);
/// log pi(a) for a = squash(u): Gaussian log-density of u minus the Jacobian term.
double log_prob_pre_squash(const PolicyParams& p, const Eigen::VectorXd& u);
/// Reparameterized draw u = mean + exp(log_std) * noise.
SampledAction sample_with_noise(const PolicyParams& p, const Eigen::VectorXd& noise);

class ActorPolicy {
 public:
  static ActorPolicy mlp(int action_dim, const std::vector<int>& hidden, std::uint64_t seed,
                         nn::AdamConfig adam);
  static ActorPolicy direct(int action_dim, nn::AdamConfig adam);

  ActorKind kind() const { return kind_; }
  int action_dim() const { return action_dim_; }

  /// Mean and clamped log-std. The MLP variant feeds the constant input 1.
  PolicyParams params() const;
  SampledAction act(Rng& rng) const;

  /// One Adam step given dLoss/dmean and dLoss/dlog_std (w.r.t. the clamped
  /// values; entries sitting on a clamp boundary receive no gradient).
  void apply_gradient(const Eigen::VectorXd& d_mean, const Eigen::VectorXd& d_log_std, double clip_norm);

  /// Gradient of the parameter vector given dLoss/d(mean, log_std); exposed so
  /// tests can check the chain through the network.
  nn::GradientBundle network_gradient(const Eigen::VectorXd& d_mean, const Eigen::VectorXd& d_log_std) const;

  const nn::DenseNet& network() const { return net_; }
  nn::DenseNet& mutable_network() { return net_; }
  Eigen::VectorXd& direct_mean() { return mean_; }
  Eigen::VectorXd& direct_log_std() { return log_std_; }

 private:
  ActorPolicy() = default;
  Eigen::VectorXd raw_output() const;

  ActorKind kind_ = ActorKind::kMlp;
  int action_dim_ = 0;
  nn::DenseNet net_;
  nn::AdamState net_adam_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd log_std_;
  nn::VectorAdam direct_adam_;
};

class CriticSet {
 public:
  CriticSet(CriticCount count, int action_dim, const std::vector<int>& hidden, std::uint64_t seed,
            nn::AdamConfig adam);

  CriticCount count() const { return count_; }
  std::size_t size() const { return nets_.size(); }

  /// Pointwise minimum over the present critics.
  double value(const Eigen::VectorXd& action) const;
  /// Minimum per column; when `grad` is set it receives d(min)/d(action) per
  /// column, taken through whichever critic attains the minimum.
  Eigen::VectorXd values(const Eigen::MatrixXd& actions, Eigen::MatrixXd* grad = nullptr) const;

  /// One Adam step per critic on mean 0.5 * (Q(a) - r)^2. Returns the losses
  /// measured before the step.
  std::vector<double> update(const Eigen::MatrixXd& actions, const Eigen::VectorXd& rewards, double clip_norm);

  const nn::DenseNet& network(std::size_t i) const { return nets_.at(i); }
  nn::DenseNet& mutable_network(std::size_t i) { return nets_.at(i); }

 private:
  CriticCount count_;
  std::vector<nn::DenseNet> nets_;
  std::vector<nn::AdamState> adam_;
};

/// Mean squared-error critic loss 0.5 * mean (Q(a) - r)^2 and its gradient.
double critic_loss(const nn::DenseNet& critic, const Eigen::MatrixXd& actions, const Eigen::VectorXd& rewards,
                   nn::GradientBundle* grad = nullptr);

struct ActorLoss {
  double loss = 0.0;
  Eigen::VectorXd d_mean;
  Eigen::VectorXd d_log_std;
  std::vector<double> log_probs;  // of the fresh reparameterized samples
};

/// mean_j [alpha * log pi(a_j) - Q(a_j)] with a_j = squash(mean + std * noise_j).
ActorLoss reparameterized_actor_loss(const PolicyParams& p, const Eigen::MatrixXd& noise, const CriticSet& critics,
                                     double alpha);

/// Critic-free surrogate: -mean_j (r_j - baseline) log pi(a_j) over observed
/// pairs plus alpha * mean_i log pi over fresh reparameterized samples.
ActorLoss policy_gradient_loss(const PolicyParams& p, const Eigen::MatrixXd& actions, const Eigen::VectorXd& rewards,
                               double baseline, const Eigen::MatrixXd& noise, double alpha);

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Eigen::VectorXd& action, double reward);
  std::size_t size() const { return rewards_.size(); }
  std::size_t capacity() const { return capacity_; }

  /// Uniform sample without replacement of min(n, size) indices.
  std::vector<std::size_t> sample(std::size_t n, Rng& rng) const;
  /// Indices of the most recent min(n, size) entries, oldest first.
  std::vector<std::size_t> recent(std::size_t n) const;

  const Eigen::VectorXd& action(std::size_t i) const { return actions_.at(i); }
  double reward(std::size_t i) const { return rewards_.at(i); }
  double mean_reward() const;

 private:
  std::size_t capacity_;
  std::vector<Eigen::VectorXd> actions_;
  std::vector<double> rewards_;
};

class EntropyTemperature {
 public:
  EntropyTemperature(double initial_alpha, double target_entropy, double learning_rate);

  double alpha() const;
  double log_alpha() const { return log_alpha_(0); }
  double target_entropy() const { return target_; }

  /// One Adam step on -E[alpha * (log pi + target)] w.r.t. log alpha.
  double update(const std::vector<double>& log_probs);
  double gradient(const std::vector<double>& log_probs) const;

 private:
  Eigen::VectorXd log_alpha_;
  double target_;
  nn::VectorAdam adam_;
};

struct AgentConfig {
  int action_dim = 10;
  Variant variant = Variant::kTwoCritic;
  std::vector<int> actor_hidden{1024, 256};
  std::vector<int> critic_hidden{128, 128};
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double alpha_lr = 9e-4;
  double initial_alpha = 0.01;
  std::optional<double> target_entropy;  // defaults to -action_dim
  int warmup = 10;
  int batch_size = 64;
  int updates_per_step = 1;
  double grad_clip = 10.0;
  std::size_t buffer_capacity = 165;
  std::uint64_t seed = 0;

  double resolved_target_entropy() const {
    return target_entropy ? *target_entropy : -static_cast<double>(action_dim);
  }
};

struct Diagnostics {
  std::size_t step = 0;
  double reward = 0.0;
  double best_reward = 0.0;
  std::optional<double> actor_loss;
  std::vector<double> critic_losses;
  double alpha = 0.0;
  std::optional<double> entropy_estimate;
  bool updated = false;

  nlohmann::json to_json() const;
};

class Agent {
 public:
  explicit Agent(AgentConfig config);

  /// Next action: uniform on the cube during warm-up, then the policy.
  SampledAction act();
  /// Records the observation and, after warm-up, updates critics, actor and
  /// temperature. Rewards outside [0,1] are rejected.
  Diagnostics train_step(const Eigen::VectorXd& action, double reward);

  double critic_value(const Eigen::VectorXd& action) const;

  const AgentConfig& config() const { return config_; }
  const ActorPolicy& policy() const { return policy_; }
  ActorPolicy& mutable_policy() { return policy_; }
  const CriticSet& critics() const { return critics_; }
  const EntropyTemperature& temperature() const { return temperature_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  std::size_t steps() const { return steps_; }

 private:
  AgentConfig config_;
  ActorPolicy policy_;
  CriticSet critics_;
  EntropyTemperature temperature_;
  ReplayBuffer buffer_;
  Rng policy_rng_;
  Rng replay_rng_;
  Rng warmup_rng_;
  std::size_t acted_ = 0;
  std::size_t steps_ = 0;
  double best_reward_ = 0.0;
};

}  // namespace promptac::agent
