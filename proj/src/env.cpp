// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptac/env.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "promptac/errors.hpp"
#include "promptac/rng.hpp"

namespace promptac::env {

ProjectionMatrix::ProjectionMatrix(Eigen::Index soft_prompt_dim, Eigen::Index action_dim, std::uint64_t seed)
    : seed_(seed) {
  if (soft_prompt_dim <= 0 || action_dim <= 0) {
    throw Error(ErrorCode::kInvalidConfiguration, "projection dimensions must be positive");
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  p_.resize(soft_prompt_dim, action_dim);
  // Column-major fill so the matrix does not depend on Eigen's storage order.
  for (Eigen::Index c = 0; c < action_dim; ++c) {
    for (Eigen::Index r = 0; r < soft_prompt_dim; ++r) p_(r, c) = dist(rng);
  }
}

Eigen::VectorXd ProjectionMatrix::project(const Eigen::VectorXd& action) const {
  if (action.size() != p_.cols()) {
    throw Error(ErrorCode::kShape, "action has length " + std::to_string(action.size()) + ", projection expects " +
                                       std::to_string(p_.cols()));
  }
  return p_ * action;
}

const char* to_string(LandscapeKind k) {
  switch (k) {
    case LandscapeKind::kGaussianBump: return "gaussian-bump";
    case LandscapeKind::kMultiBump: return "multi-bump";
    case LandscapeKind::kNoisyBump: return "noisy-bump";
  }
  return "gaussian-bump";
}

LandscapeKind landscape_kind_from_string(const std::string& s) {
  if (s == "gaussian-bump") return LandscapeKind::kGaussianBump;
  if (s == "multi-bump") return LandscapeKind::kMultiBump;
  if (s == "noisy-bump") return LandscapeKind::kNoisyBump;
  throw Error(ErrorCode::kInvalidConfiguration, "unknown landscape kind '" + s + "'");
}

SyntheticLandscape::SyntheticLandscape(LandscapeConfig config) : config_(std::move(config)) {
  if (config_.bumps.empty()) throw Error(ErrorCode::kInvalidConfiguration, "landscape needs at least one bump");
  if (!(config_.width > 0.0)) throw Error(ErrorCode::kInvalidConfiguration, "bump width must be positive");
  if (!(config_.noise >= 0.0)) throw Error(ErrorCode::kInvalidConfiguration, "noise level must be non-negative");
  const auto dim = config_.bumps.front().center.size();
  if (dim == 0) throw Error(ErrorCode::kInvalidConfiguration, "bump center must be non-empty");
  double top = 0.0;
  for (const auto& b : config_.bumps) {
    if (b.center.size() != dim) throw Error(ErrorCode::kShape, "bump centers differ in dimension");
    if (!(b.height > 0.0 && b.height <= 1.0)) {
      throw Error(ErrorCode::kInvalidConfiguration, "bump heights must lie in (0,1]");
    }
    top = std::max(top, b.height);
  }
  if (top != 1.0) throw Error(ErrorCode::kInvalidConfiguration, "the tallest bump must have height 1");
}

SyntheticLandscape SyntheticLandscape::gaussian_bump(Eigen::VectorXd center, double width, double noise,
                                                     std::uint64_t seed) {
  LandscapeConfig c;
  c.kind = noise > 0.0 ? LandscapeKind::kNoisyBump : LandscapeKind::kGaussianBump;
  c.bumps.push_back(Bump{std::move(center), 1.0});
  c.width = width;
  c.noise = noise;
  c.seed = seed;
  return SyntheticLandscape(std::move(c));
}

double SyntheticLandscape::noiseless(const Eigen::VectorXd& action) const {
  if (action.size() != config_.bumps.front().center.size()) throw Error(ErrorCode::kShape, "action dimension mismatch");
  const double denom = 2.0 * config_.width * config_.width;
  double best = 0.0;
  for (const auto& b : config_.bumps) {
    best = std::max(best, b.height * std::exp(-(action - b.center).squaredNorm() / denom));
  }
  return best;
}

Outcome SyntheticLandscape::evaluate(const Eigen::VectorXd& action, std::uint64_t nonce) const {
  double r = noiseless(action);
  if (config_.noise > 0.0) {
    Rng rng(derive_seed(derive_seed(config_.seed, streams::kEnvironmentNoise), nonce));
    std::normal_distribution<double> normal(0.0, config_.noise);
    r = std::clamp(r + normal(rng), 0.0, 1.0);
  }
  return Outcome{r, {}};
}

std::string SyntheticLandscape::name() const {
  return std::string(to_string(config_.kind)) + "-d" + std::to_string(action_dim());
}

SearchResult random_search_baseline(const Environment& env, std::size_t budget, std::uint64_t seed) {
  if (budget == 0) throw Error(ErrorCode::kInvalidArgument, "random search needs a budget of at least 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SearchResult best;
  for (std::size_t i = 0; i < budget; ++i) {
    Eigen::VectorXd a(env.action_dim());
    for (Eigen::Index k = 0; k < a.size(); ++k) a(k) = unit(rng);
    const double r = env.evaluate(a, i).reward;
    if (i == 0 || r > best.reward) best = SearchResult{a, r, i};
  }
  return best;
}

}  // namespace promptac::env
