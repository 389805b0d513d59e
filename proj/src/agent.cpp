// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptac/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "promptac/errors.hpp"

namespace promptac::agent {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

Eigen::MatrixXd standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
  }
  return m;
}

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw Error(ErrorCode::kNumeric, std::string("non-finite ") + what);
}

// Adds the gradient of alpha * mean_i log pi(squash(mean + std * noise_i))
// with respect to (mean, log_std); only the Jacobian term depends on u when
// the noise is frozen, and d/du [-log((1 - tanh^2 u)/2)] = 2 tanh u.
void add_entropy_term(const PolicyParams& p, const Eigen::MatrixXd& noise, double alpha, ActorLoss& out,
                      const Eigen::MatrixXd* dq_du) {
  const Eigen::Index n = noise.cols();
  const Eigen::VectorXd std_dev = p.log_std.array().exp();
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::VectorXd u = p.mean + std_dev.cwiseProduct(noise.col(j));
    Eigen::VectorXd g_u = alpha * 2.0 * u.array().tanh().matrix();
    if (dq_du) g_u -= dq_du->col(j);
    out.d_mean += g_u / static_cast<double>(n);
    out.d_log_std += g_u.cwiseProduct(std_dev).cwiseProduct(noise.col(j)) / static_cast<double>(n);
  }
  out.d_log_std.array() -= alpha;
}

}  // namespace

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kTwoCritic: return "two-critic";
    case Variant::kOneCritic: return "one-critic";
    case Variant::kNoCritic: return "no-critic";
    case Variant::kDirectActor: return "direct-actor";
  }
  return "two-critic";
}

Variant variant_from_string(const std::string& s) {
  if (s == "two-critic") return Variant::kTwoCritic;
  if (s == "one-critic") return Variant::kOneCritic;
  if (s == "no-critic") return Variant::kNoCritic;
  if (s == "direct-actor") return Variant::kDirectActor;
  throw Error(ErrorCode::kInvalidConfiguration, "unknown agent variant '" + s + "'");
}

double squash(double u) { return 0.5 * (std::tanh(u) + 1.0); }

double unsquash(double a) {
  const double x = std::clamp(2.0 * a - 1.0, -1.0 + 1e-12, 1.0 - 1e-12);
  return std::atanh(x);
}

double log_squash_jacobian(double u) {
  // 1 - tanh^2(u) = 4 / (e^u + e^-u)^2
  return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u)) - std::numbers::ln2;
}

double log_prob_pre_squash(const PolicyParams& p, const Eigen::VectorXd& u) {
  if (u.size() != p.mean.size()) throw Error(ErrorCode::kShape, "action dimension mismatch");
  double lp = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double z = (u(i) - p.mean(i)) * std::exp(-p.log_std(i));
    lp += -0.5 * z * z - p.log_std(i) - kHalfLog2Pi - log_squash_jacobian(u(i));
  }
  return lp;
}

SampledAction sample_with_noise(const PolicyParams& p, const Eigen::VectorXd& noise) {
  if (noise.size() != p.mean.size()) throw Error(ErrorCode::kShape, "noise dimension mismatch");
  SampledAction s;
  s.pre_squash = p.mean + p.log_std.array().exp().matrix().cwiseProduct(noise);
  s.action = s.pre_squash.unaryExpr([](double u) { return squash(u); });
  // Keep the open-interval contract even where tanh saturates in double precision.
  constexpr double kEdge = 1e-12;
  s.action = s.action.cwiseMax(kEdge).cwiseMin(1.0 - kEdge);
  s.log_prob = log_prob_pre_squash(p, s.pre_squash);
  if (!std::isfinite(s.log_prob)) throw Error(ErrorCode::kNumeric, "non-finite log-probability");
  return s;
}

// ---------------------------------------------------------------------------
// ActorPolicy

ActorPolicy ActorPolicy::mlp(int action_dim, const std::vector<int>& hidden, std::uint64_t seed,
                             nn::AdamConfig adam) {
  if (action_dim <= 0) throw Error(ErrorCode::kInvalidConfiguration, "action dimension must be positive");
  std::vector<int> sizes{1};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(2 * action_dim);
  ActorPolicy p;
  p.kind_ = ActorKind::kMlp;
  p.action_dim_ = action_dim;
  p.net_ = nn::DenseNet::create(sizes, nn::Activation::kRelu, seed);
  p.net_adam_ = nn::AdamState(p.net_, adam);
  return p;
}

ActorPolicy ActorPolicy::direct(int action_dim, nn::AdamConfig adam) {
  if (action_dim <= 0) throw Error(ErrorCode::kInvalidConfiguration, "action dimension must be positive");
  ActorPolicy p;
  p.kind_ = ActorKind::kDirect;
  p.action_dim_ = action_dim;
  p.mean_ = Eigen::VectorXd::Zero(action_dim);
  p.log_std_ = Eigen::VectorXd::Zero(action_dim);
  p.direct_adam_ = nn::VectorAdam(2 * action_dim, adam);
  return p;
}

Eigen::VectorXd ActorPolicy::raw_output() const {
  if (kind_ == ActorKind::kDirect) {
    Eigen::VectorXd out(2 * action_dim_);
    out << mean_, log_std_;
    return out;
  }
  return net_.predict(Eigen::VectorXd::Ones(1));
}

PolicyParams ActorPolicy::params() const {
  const Eigen::VectorXd raw = raw_output();
  require_finite(raw, "policy output");
  PolicyParams p;
  p.mean = raw.head(action_dim_);
  p.log_std = raw.tail(action_dim_).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  return p;
}

SampledAction ActorPolicy::act(Rng& rng) const {
  const Eigen::VectorXd noise = standard_normal(rng, action_dim_, 1).col(0);
  return sample_with_noise(params(), noise);
}

nn::GradientBundle ActorPolicy::network_gradient(const Eigen::VectorXd& d_mean,
                                                 const Eigen::VectorXd& d_log_std) const {
  if (kind_ != ActorKind::kMlp) throw Error(ErrorCode::kUnsupportedVariant, "direct actor has no network");
  nn::ForwardCache cache;
  const Eigen::MatrixXd raw = net_.forward(Eigen::MatrixXd::Ones(1, 1), &cache);
  Eigen::MatrixXd upstream(2 * action_dim_, 1);
  for (int i = 0; i < action_dim_; ++i) {
    upstream(i, 0) = d_mean(i);
    const double r = raw(action_dim_ + i, 0);
    upstream(action_dim_ + i, 0) = (r > kLogStdMin && r < kLogStdMax) ? d_log_std(i) : 0.0;
  }
  return net_.backward(cache, upstream);
}

void ActorPolicy::apply_gradient(const Eigen::VectorXd& d_mean, const Eigen::VectorXd& d_log_std,
                                 double clip_norm) {
  if (d_mean.size() != action_dim_ || d_log_std.size() != action_dim_) {
    throw Error(ErrorCode::kShape, "policy gradient dimension mismatch");
  }
  if (kind_ == ActorKind::kMlp) {
    nn::GradientBundle g = network_gradient(d_mean, d_log_std);
    nn::clip_global_norm(g, clip_norm);
    nn::adam_update(net_, g, net_adam_);
    return;
  }
  Eigen::VectorXd params(2 * action_dim_);
  params << mean_, log_std_;
  Eigen::VectorXd grad(2 * action_dim_);
  grad << d_mean, d_log_std;
  for (int i = 0; i < action_dim_; ++i) {
    const double r = log_std_(i);
    if (!(r > kLogStdMin && r < kLogStdMax)) {
      // On the boundary only a gradient pointing back inside may act.
      const bool inward = (r <= kLogStdMin && d_log_std(i) < 0.0) || (r >= kLogStdMax && d_log_std(i) > 0.0);
      if (!inward) grad(action_dim_ + i) = 0.0;
    }
  }
  const double norm = grad.norm();
  if (std::isfinite(norm) && norm > clip_norm) grad *= clip_norm / norm;
  direct_adam_.update(params, grad);
  mean_ = params.head(action_dim_);
  log_std_ = params.tail(action_dim_).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

// ---------------------------------------------------------------------------
// CriticSet

CriticSet::CriticSet(CriticCount count, int action_dim, const std::vector<int>& hidden, std::uint64_t seed,
                     nn::AdamConfig adam)
    : count_(count) {
  const int n = count == CriticCount::kTwo ? 2 : count == CriticCount::kOne ? 1 : 0;
  std::vector<int> sizes{action_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  for (int i = 0; i < n; ++i) {
    nets_.push_back(nn::DenseNet::create(sizes, nn::Activation::kRelu, derive_seed(seed, static_cast<std::uint64_t>(i))));
    adam_.emplace_back(nets_.back(), adam);
  }
}

double CriticSet::value(const Eigen::VectorXd& action) const {
  return values(Eigen::MatrixXd(action))(0);
}

Eigen::VectorXd CriticSet::values(const Eigen::MatrixXd& actions, Eigen::MatrixXd* grad) const {
  if (nets_.empty()) throw Error(ErrorCode::kUnsupportedVariant, "critic value requested from a critic-free agent");
  const Eigen::Index n = actions.cols();
  Eigen::VectorXd best = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  std::vector<int> argmin(static_cast<std::size_t>(n), 0);
  std::vector<nn::ForwardCache> caches(nets_.size());
  for (std::size_t k = 0; k < nets_.size(); ++k) {
    const Eigen::MatrixXd q = nets_[k].forward(actions, grad ? &caches[k] : nullptr);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (q(0, j) < best(j)) {
        best(j) = q(0, j);
        argmin[static_cast<std::size_t>(j)] = static_cast<int>(k);
      }
    }
  }
  if (grad) {
    grad->setZero(actions.rows(), n);
    for (std::size_t k = 0; k < nets_.size(); ++k) {
      Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(1, n);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (argmin[static_cast<std::size_t>(j)] == static_cast<int>(k)) upstream(0, j) = 1.0;
      }
      Eigen::MatrixXd input_grad;
      nets_[k].backward(caches[k], upstream, &input_grad);
      *grad += input_grad;
    }
  }
  return best;
}

double critic_loss(const nn::DenseNet& critic, const Eigen::MatrixXd& actions, const Eigen::VectorXd& rewards,
                   nn::GradientBundle* grad) {
  if (actions.cols() == 0) throw Error(ErrorCode::kInvalidArgument, "critic update needs a non-empty batch");
  if (rewards.size() != actions.cols()) throw Error(ErrorCode::kShape, "one reward per action expected");
  nn::ForwardCache cache;
  const Eigen::MatrixXd q = critic.forward(actions, grad ? &cache : nullptr);
  const double n = static_cast<double>(actions.cols());
  const Eigen::RowVectorXd err = q.row(0) - rewards.transpose();
  if (grad) *grad = critic.backward(cache, err / n);
  return 0.5 * err.squaredNorm() / n;
}

std::vector<double> CriticSet::update(const Eigen::MatrixXd& actions, const Eigen::VectorXd& rewards,
                                      double clip_norm) {
  if (actions.cols() == 0) throw Error(ErrorCode::kInvalidArgument, "critic update needs a non-empty batch");
  for (Eigen::Index j = 0; j < rewards.size(); ++j) {
    if (!(rewards(j) >= 0.0 && rewards(j) <= 1.0)) {
      throw Error(ErrorCode::kInvalidReward, "critic targets must lie in [0,1]");
    }
  }
  std::vector<double> losses;
  for (std::size_t k = 0; k < nets_.size(); ++k) {
    nn::GradientBundle g;
    losses.push_back(critic_loss(nets_[k], actions, rewards, &g));
    nn::clip_global_norm(g, clip_norm);
    nn::adam_update(nets_[k], g, adam_[k]);
  }
  return losses;
}

// ---------------------------------------------------------------------------
// Actor losses

ActorLoss reparameterized_actor_loss(const PolicyParams& p, const Eigen::MatrixXd& noise, const CriticSet& critics,
                                     double alpha) {
  const Eigen::Index d = p.mean.size();
  const Eigen::Index n = noise.cols();
  if (noise.rows() != d || n == 0) throw Error(ErrorCode::kShape, "noise must be d x n with n > 0");
  ActorLoss out;
  out.d_mean = Eigen::VectorXd::Zero(d);
  out.d_log_std = Eigen::VectorXd::Zero(d);

  Eigen::MatrixXd actions(d, n);
  Eigen::MatrixXd pre(d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    SampledAction s = sample_with_noise(p, noise.col(j));
    actions.col(j) = s.action;
    pre.col(j) = s.pre_squash;
    out.log_probs.push_back(s.log_prob);
  }
  Eigen::MatrixXd dq_da;
  const Eigen::VectorXd q = critics.values(actions, &dq_da);
  // da/du = (1 - tanh^2 u) / 2
  const Eigen::MatrixXd dq_du = dq_da.cwiseProduct((0.5 * (1.0 - pre.array().tanh().square())).matrix());
  add_entropy_term(p, noise, alpha, out, &dq_du);

  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) total += alpha * out.log_probs[static_cast<std::size_t>(j)] - q(j);
  out.loss = total / static_cast<double>(n);
  return out;
}

ActorLoss policy_gradient_loss(const PolicyParams& p, const Eigen::MatrixXd& actions, const Eigen::VectorXd& rewards,
                               double baseline, const Eigen::MatrixXd& noise, double alpha) {
  const Eigen::Index d = p.mean.size();
  if (actions.rows() != d || actions.cols() == 0 || rewards.size() != actions.cols()) {
    throw Error(ErrorCode::kShape, "observed batch shape mismatch");
  }
  if (noise.rows() != d || noise.cols() == 0) throw Error(ErrorCode::kShape, "noise must be d x n with n > 0");
  ActorLoss out;
  out.d_mean = Eigen::VectorXd::Zero(d);
  out.d_log_std = Eigen::VectorXd::Zero(d);

  const double m = static_cast<double>(actions.cols());
  const Eigen::VectorXd inv_std = (-p.log_std.array()).exp();
  double pg = 0.0;
  for (Eigen::Index j = 0; j < actions.cols(); ++j) {
    const Eigen::VectorXd u = actions.col(j).unaryExpr([](double a) { return unsquash(a); });
    const double adv = rewards(j) - baseline;
    pg -= adv * log_prob_pre_squash(p, u) / m;
    const Eigen::VectorXd z = (u - p.mean).cwiseProduct(inv_std);
    // d log pi / d mean = z / std, d log pi / d log_std = z^2 - 1
    out.d_mean -= adv * z.cwiseProduct(inv_std) / m;
    out.d_log_std -= adv * (z.array().square() - 1.0).matrix() / m;
  }

  double entropy_term = 0.0;
  for (Eigen::Index j = 0; j < noise.cols(); ++j) {
    const SampledAction s = sample_with_noise(p, noise.col(j));
    out.log_probs.push_back(s.log_prob);
    entropy_term += s.log_prob;
  }
  entropy_term /= static_cast<double>(noise.cols());
  add_entropy_term(p, noise, alpha, out, nullptr);
  out.loss = pg + alpha * entropy_term;
  return out;
}

// ---------------------------------------------------------------------------
// ReplayBuffer

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorCode::kInvalidConfiguration, "replay capacity must be positive");
}

void ReplayBuffer::push(const Eigen::VectorXd& action, double reward) {
  if (!(reward >= 0.0 && reward <= 1.0)) {
    throw Error(ErrorCode::kInvalidReward, "reward " + std::to_string(reward) + " outside [0,1]");
  }
  if (rewards_.size() == capacity_) {
    actions_.erase(actions_.begin());
    rewards_.erase(rewards_.begin());
  }
  actions_.push_back(action);
  rewards_.push_back(reward);
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  std::vector<std::size_t> idx(size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t take = std::min(n, idx.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(take);
  return idx;
}

std::vector<std::size_t> ReplayBuffer::recent(std::size_t n) const {
  const std::size_t take = std::min(n, size());
  std::vector<std::size_t> idx(take);
  std::iota(idx.begin(), idx.end(), size() - take);
  return idx;
}

double ReplayBuffer::mean_reward() const {
  if (rewards_.empty()) return 0.0;
  return std::accumulate(rewards_.begin(), rewards_.end(), 0.0) / static_cast<double>(rewards_.size());
}

// ---------------------------------------------------------------------------
// EntropyTemperature

EntropyTemperature::EntropyTemperature(double initial_alpha, double target_entropy, double learning_rate)
    : log_alpha_(Eigen::VectorXd::Constant(1, std::log(initial_alpha))),
      target_(target_entropy),
      adam_(1, nn::AdamConfig{.learning_rate = learning_rate}) {
  if (!(initial_alpha > 0.0) || !std::isfinite(initial_alpha)) {
    throw Error(ErrorCode::kInvalidConfiguration, "initial temperature must be positive");
  }
}

double EntropyTemperature::alpha() const { return std::exp(log_alpha_(0)); }

double EntropyTemperature::gradient(const std::vector<double>& log_probs) const {
  if (log_probs.empty()) throw Error(ErrorCode::kInvalidArgument, "temperature update needs samples");
  double mean = 0.0;
  for (double lp : log_probs) mean += lp + target_;
  mean /= static_cast<double>(log_probs.size());
  // J = -alpha * mean(log pi + H); dJ/dlog(alpha) = -alpha * mean(log pi + H)
  return -alpha() * mean;
}

double EntropyTemperature::update(const std::vector<double>& log_probs) {
  Eigen::VectorXd g(1);
  g(0) = gradient(log_probs);
  if (g(0) != 0.0) adam_.update(log_alpha_, g);
  return alpha();
}

// ---------------------------------------------------------------------------
// Agent

nlohmann::json Diagnostics::to_json() const {
  nlohmann::json j;
  j["step"] = step;
  j["reward"] = reward;
  j["best_reward"] = best_reward;
  j["actor_loss"] = actor_loss ? nlohmann::json(*actor_loss) : nlohmann::json(nullptr);
  j["critic_losses"] = critic_losses;
  j["alpha"] = alpha;
  j["entropy_estimate"] = entropy_estimate ? nlohmann::json(*entropy_estimate) : nlohmann::json(nullptr);
  return j;
}

namespace {

ActorPolicy make_policy(const AgentConfig& c) {
  nn::AdamConfig adam{.learning_rate = c.actor_lr};
  if (c.variant == Variant::kDirectActor) return ActorPolicy::direct(c.action_dim, adam);
  return ActorPolicy::mlp(c.action_dim, c.actor_hidden, derive_seed(c.seed, streams::kActorInit), adam);
}

CriticCount critic_count(Variant v) {
  switch (v) {
    case Variant::kOneCritic: return CriticCount::kOne;
    case Variant::kNoCritic: return CriticCount::kNone;
    case Variant::kTwoCritic:
    case Variant::kDirectActor: return CriticCount::kTwo;
  }
  return CriticCount::kTwo;
}

}  // namespace

Agent::Agent(AgentConfig config)
    : config_(std::move(config)),
      policy_(make_policy(config_)),
      critics_(critic_count(config_.variant), config_.action_dim, config_.critic_hidden,
               derive_seed(config_.seed, streams::kCriticInit), nn::AdamConfig{.learning_rate = config_.critic_lr}),
      temperature_(config_.initial_alpha, config_.resolved_target_entropy(), config_.alpha_lr),
      buffer_(config_.buffer_capacity),
      policy_rng_(derive_seed(config_.seed, streams::kPolicyNoise)),
      replay_rng_(derive_seed(config_.seed, streams::kReplaySampling)),
      warmup_rng_(derive_seed(config_.seed, streams::kWarmup)) {
  if (config_.batch_size <= 0 || config_.warmup < 0 || config_.updates_per_step < 1) {
    throw Error(ErrorCode::kInvalidConfiguration, "batch size, warm-up and update count must be sensible");
  }
}

SampledAction Agent::act() {
  const std::size_t index = acted_++;
  if (index < static_cast<std::size_t>(config_.warmup)) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    SampledAction s;
    s.action.resize(config_.action_dim);
    for (int i = 0; i < config_.action_dim; ++i) s.action(i) = std::clamp(unit(warmup_rng_), 1e-12, 1.0 - 1e-12);
    s.pre_squash = s.action.unaryExpr([](double a) { return unsquash(a); });
    s.log_prob = log_prob_pre_squash(policy_.params(), s.pre_squash);
    return s;
  }
  return policy_.act(policy_rng_);
}

double Agent::critic_value(const Eigen::VectorXd& action) const { return critics_.value(action); }

Diagnostics Agent::train_step(const Eigen::VectorXd& action, double reward) {
  if (action.size() != config_.action_dim) throw Error(ErrorCode::kShape, "action dimension mismatch");
  if (!(reward >= 0.0 && reward <= 1.0)) {
    throw Error(ErrorCode::kInvalidReward, "reward " + std::to_string(reward) + " outside [0,1]");
  }
  buffer_.push(action, reward);
  ++steps_;
  best_reward_ = steps_ == 1 ? reward : std::max(best_reward_, reward);

  Diagnostics diag;
  diag.step = steps_;
  diag.reward = reward;
  diag.best_reward = best_reward_;
  diag.alpha = temperature_.alpha();
  if (buffer_.size() <= static_cast<std::size_t>(config_.warmup)) return diag;

  const std::size_t batch = std::min(static_cast<std::size_t>(config_.batch_size), buffer_.size());
  const int d = config_.action_dim;
  for (int rep = 0; rep < config_.updates_per_step; ++rep) {
    const double alpha = temperature_.alpha();
    const PolicyParams params = policy_.params();
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd noise(d, static_cast<Eigen::Index>(batch));
    for (Eigen::Index c = 0; c < noise.cols(); ++c) {
      for (Eigen::Index r = 0; r < d; ++r) noise(r, c) = normal(policy_rng_);
    }

    ActorLoss actor;
    if (critics_.count() == CriticCount::kNone) {
      const auto idx = buffer_.recent(batch);
      Eigen::MatrixXd acts(d, static_cast<Eigen::Index>(idx.size()));
      Eigen::VectorXd rews(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t j = 0; j < idx.size(); ++j) {
        acts.col(static_cast<Eigen::Index>(j)) = buffer_.action(idx[j]);
        rews(static_cast<Eigen::Index>(j)) = buffer_.reward(idx[j]);
      }
      actor = policy_gradient_loss(params, acts, rews, buffer_.mean_reward(), noise, alpha);
      diag.critic_losses.clear();
    } else {
      const auto idx = buffer_.sample(batch, replay_rng_);
      Eigen::MatrixXd acts(d, static_cast<Eigen::Index>(idx.size()));
      Eigen::VectorXd rews(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t j = 0; j < idx.size(); ++j) {
        acts.col(static_cast<Eigen::Index>(j)) = buffer_.action(idx[j]);
        rews(static_cast<Eigen::Index>(j)) = buffer_.reward(idx[j]);
      }
      diag.critic_losses = critics_.update(acts, rews, config_.grad_clip);
      actor = reparameterized_actor_loss(params, noise, critics_, alpha);
    }
    policy_.apply_gradient(actor.d_mean, actor.d_log_std, config_.grad_clip);
    temperature_.update(actor.log_probs);

    double mean_lp = 0.0;
    for (double lp : actor.log_probs) mean_lp += lp;
    mean_lp /= static_cast<double>(actor.log_probs.size());
    diag.actor_loss = actor.loss;
    diag.entropy_estimate = -mean_lp;
  }
  diag.alpha = temperature_.alpha();
  diag.updated = true;
  return diag;
}

}  // namespace promptac::agent
