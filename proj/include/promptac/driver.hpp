// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "promptac/agent.hpp"
#include "promptac/env.hpp"
#include "promptac/llm_env.hpp"
#include "promptac/tasks.hpp"

namespace promptac::driver {

enum class EnvKind { kSynthetic, kLlm, kMockLlm };

const char* to_string(EnvKind k);
EnvKind env_kind_from_string(const std::string& s);

struct Split {
  int p = 5;
  int k = 3;
};

/// Parses "p:k".
Split parse_split(const std::string& s);

struct RunConfig {
  int budget = 165;
  int action_dim = 10;
  int soft_tokens = 5;
  int token_width = 5120;
  std::size_t exemplar_count = 5;
  std::size_t validation_size = 20;
  EnvKind environment = EnvKind::kSynthetic;
  agent::AgentConfig agent;  // action_dim, seed and capacity follow the run values
  std::optional<Split> split;
  std::uint64_t seed = 0;
  std::string label;  // method name used by `analyze`; defaults to the variant

  env::LandscapeConfig landscape;  // synthetic runs; empty bumps -> one bump at 0.7
  std::string task_path;            // llm and mock-llm runs

  llm::PromptTemplates templates;
  llm::HttpDecoderConfig decoder;
  llm::ChatConfig black_box;
  llm::MockKind mock_kind = llm::MockKind::kGatedLookup;
  std::vector<int> mock_best_cell;
  int fan_out = 1;
  bool resample_on_reevaluate = true;
  bool audit = false;

  std::filesystem::path out_dir = "out";

  /// Throws kInvalidConfiguration on inconsistent values.
  void validate() const;
  agent::AgentConfig resolved_agent() const;
  env::LandscapeConfig resolved_landscape() const;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

struct TraceRow {
  std::size_t step = 0;  // 1-based
  double reward = 0.0;
  double best_reward = 0.0;
  double alpha = 0.0;
  std::string instruction;
};

struct Candidate {
  std::size_t step = 0;
  Eigen::VectorXd action;
  double reward = 0.0;  // phase-1 reward
  std::string instruction;
  std::vector<double> reevaluations;  // split mode only
  double mean_reevaluation = 0.0;
};

struct RunResult {
  Candidate best;
  double best_reward = 0.0;  // trace maximum, or the re-ranked mean in split mode
  std::vector<TraceRow> trace;
  std::vector<Candidate> reranked;  // split mode: top-p in phase-1 order
  nlohmann::json final_diagnostics;
  std::size_t evaluations = 0;  // reward evaluations issued, both phases
  std::uint64_t completions = 0;
  std::size_t decodes = 0;
  std::optional<double> test_score;
};

/// Appends one CSV row per step and flushes, so an aborted run leaves a
/// readable prefix.
class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path);
  void write(const TraceRow& row);

 private:
  std::ofstream out_;
};

std::string format_double(double v);

/// Runs the act -> evaluate -> train loop for the configured budget. In split
/// mode the last p*k evaluations re-score the top-p phase-1 candidates. The
/// optional writer receives each row as it is produced. Environment failures
/// surface as RunAborted carrying the 1-based step.
RunResult optimize(const RunConfig& config, const env::Environment& env, TraceWriter* writer = nullptr);

using Reevaluate = std::function<double(const Candidate&, int repetition)>;

/// Re-scores `candidates` k times each and returns the index of the winner:
/// highest mean, then higher phase-1 reward, then earliest step.
std::size_t rerank(std::vector<Candidate>& candidates, int k, const Reevaluate& reevaluate);

/// Top-p distinct candidates by phase-1 reward (earliest step on ties).
std::vector<Candidate> top_candidates(const std::vector<Candidate>& all, int p);

/// Mean test-split metric of the best instruction.
double final_test(const RunResult& result, const tasks::TaskSpec& task, llm::BlackBox& black_box,
                  const llm::PromptTemplates& templates, int fan_out = 1);

nlohmann::json to_json(const RunResult& r, const RunConfig& config);
void write_result(const std::filesystem::path& path, const RunResult& r, const RunConfig& config);

/// Everything a configured run needs, owned in one place.
class Session {
 public:
  explicit Session(RunConfig config);
  ~Session();

  /// Runs and writes trace.csv and result.json into the output directory.
  RunResult run();

  const env::Environment& environment() const { return *env_; }
  const RunConfig& config() const { return config_; }
  const tasks::TaskSpec* task() const { return task_.get(); }
  llm::BlackBox* black_box() { return black_box_.get(); }
  const llm::MockDecoder* mock_decoder() const { return mock_decoder_; }

 private:
  RunConfig config_;
  std::unique_ptr<tasks::TaskSpec> task_;
  std::unique_ptr<env::ProjectionMatrix> projection_;
  std::shared_ptr<llm::AuditLog> audit_;
  std::unique_ptr<llm::Decoder> decoder_;
  const llm::MockDecoder* mock_decoder_ = nullptr;
  std::unique_ptr<llm::BlackBox> black_box_;
  std::unique_ptr<env::Environment> env_;
};

/// Builds the configured black box for `test` on a stored result.
std::unique_ptr<llm::BlackBox> make_black_box(const RunConfig& config, const tasks::TaskSpec& task,
                                              const llm::MockDecoder* mock_decoder,
                                              std::shared_ptr<llm::AuditLog> audit);

}  // namespace promptac::driver
