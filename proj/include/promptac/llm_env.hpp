// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "promptac/env.hpp"
#include "promptac/scoring.hpp"
#include "promptac/tasks.hpp"

namespace promptac::llm {

struct PromptTemplates {
  std::string exemplar_block = "Input: {input}\nOutput: {output}\n\n";
  std::string generation_cue = "The instruction was to";
  std::string evaluation = "Instruction: {instruction}\n\nInput: {input}\nOutput:";

  /// Throws kInvalidConfiguration unless the evaluation template has exactly
  /// one {instruction} and one {input} slot, instruction first.
  void validate() const;

  std::string render_generation(const std::vector<tasks::Example>& exemplars) const;
  std::string render_evaluation(const std::string& instruction, const std::string& input) const;

  /// Inverse of render_evaluation; nullopt when `prompt` does not fit.
  std::optional<std::pair<std::string, std::string>> parse_evaluation(const std::string& prompt) const;
};

/// First line, surrounding whitespace and one trailing period removed.
std::string clean_instruction(const std::string& raw);

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};
  std::chrono::milliseconds total_budget{60000};  // wall-clock cap over all attempts

  std::chrono::milliseconds backoff(int attempt) const;  // attempt is 0-based
};

/// Thread-safe JSONL sink for raw request/response pairs.
class AuditLog {
 public:
  explicit AuditLog(const std::filesystem::path& path);

  void write(const nlohmann::json& record);

 private:
  std::mutex mu_;
  std::ofstream out_;
};

class Decoder {
 public:
  virtual ~Decoder() = default;
  /// Maps a soft prompt to raw instruction text. Must be thread-safe.
  virtual std::string decode(const Eigen::VectorXd& z, const std::string& exemplar_prompt) const = 0;
};

class BlackBox {
 public:
  virtual ~BlackBox() = default;

  /// Counts the request, then delegates. Thread-safe.
  std::string complete(const std::string& prompt);

  std::uint64_t query_count() const { return queries_.load(); }

  /// Logs every prompt/completion pair when set.
  void set_audit(std::shared_ptr<AuditLog> audit) { completion_log_ = std::move(audit); }

 protected:
  virtual std::string do_complete(const std::string& prompt) = 0;

 private:
  std::atomic<std::uint64_t> queries_{0};
  std::shared_ptr<AuditLog> completion_log_;
};

// Mocks ---------------------------------------------------------------------

struct MockDecoderConfig {
  int action_dim = 10;
  double threshold = 0.5;
  std::vector<int> best_cell;  // one bit per action coordinate; empty means all ones
};

/// Recovers the action from z with the projection's pseudo-inverse, thresholds
/// it into a cell (one bit per coordinate), and spells the cell with a phrase
/// grammar that has one two-way slot per bit. The instruction does not depend
/// on the exemplars.
class MockDecoder final : public Decoder {
 public:
  MockDecoder(const env::ProjectionMatrix& projection, MockDecoderConfig config);

  std::string decode(const Eigen::VectorXd& z, const std::string& exemplar_prompt) const override;

  std::vector<int> cell_of(const Eigen::VectorXd& z) const;
  std::string instruction_for(const std::vector<int>& cell) const;
  /// Cell spelled by `instruction`, or nullopt when it is not in the grammar.
  std::optional<std::vector<int>> parse(const std::string& instruction) const;

  /// Fraction of bits that agree with the best cell; 1 only for the best cell.
  double quality(const std::string& instruction) const;
  std::string best_instruction() const { return instruction_for(config_.best_cell); }

 private:
  Eigen::MatrixXd pinv_;
  MockDecoderConfig config_;
};

enum class MockKind { kEcho, kLookup, kAntonym, kGatedLookup };

const char* to_string(MockKind k);
MockKind mock_kind_from_string(const std::string& s);

/// Built-in antonym pairs used by the antonym mock.
const std::map<std::string, std::string>& antonym_table();

/// Known answer for the lookup kinds. The gated kind answers correctly iff
/// gate < quality(instruction).
struct MockEntry {
  std::string input;
  std::string output;
  double gate = 0.0;
};

/// Entries for every split of `task`. Gates are (j + 0.5) / n over the
/// validation sample, the rest of the validation split, and the test split in
/// turn, so a quality of q answers close to a fraction q of each group.
std::vector<MockEntry> mock_table(const tasks::TaskSpec& task);

struct MockBlackBoxConfig {
  MockKind kind = MockKind::kEcho;
  PromptTemplates templates;
  std::vector<MockEntry> table;
  std::function<double(const std::string&)> quality;
  std::string miss = "unknown";
};

class MockBlackBox final : public BlackBox {
 public:
  explicit MockBlackBox(MockBlackBoxConfig config);

 protected:
  std::string do_complete(const std::string& prompt) override;

 private:
  MockBlackBoxConfig config_;
  std::map<std::string, std::size_t> index_;
};

// HTTP endpoints --------------------------------------------------------------

struct HttpDecoderConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string path = "/v1/decode";
  int soft_tokens = 5;
  int token_width = 5120;
  int max_tokens = 64;
  std::chrono::milliseconds timeout{30000};
  RetryPolicy retry;
};

class HttpDecoder final : public Decoder {
 public:
  explicit HttpDecoder(HttpDecoderConfig config, std::shared_ptr<AuditLog> audit = nullptr);

  std::string decode(const Eigen::VectorXd& z, const std::string& exemplar_prompt) const override;

  nlohmann::json request_body(const Eigen::VectorXd& z, const std::string& exemplar_prompt) const;

 private:
  HttpDecoderConfig config_;
  std::shared_ptr<AuditLog> audit_;
};

struct ChatConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_tokens = 128;
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds timeout{30000};
  RetryPolicy retry;
};

class ChatBlackBox final : public BlackBox {
 public:
  explicit ChatBlackBox(ChatConfig config, std::shared_ptr<AuditLog> audit = nullptr);

  nlohmann::json request_body(const std::string& prompt) const;

 protected:
  std::string do_complete(const std::string& prompt) override;

 private:
  ChatConfig config_;
  std::string api_key_;
  std::shared_ptr<AuditLog> audit_;
};

/// Parses a chat-completion response body; throws kProtocol when malformed.
std::string parse_chat_response(const std::string& body);
/// Parses a decode response body; throws kProtocol when malformed.
std::string parse_decode_response(const std::string& body);

// Reward --------------------------------------------------------------------

/// Mean metric over `examples`, completing up to `fan_out` prompts at once.
/// Any failed completion aborts the evaluation with kEvaluationAborted.
double evaluate_instruction(const std::string& instruction, const std::vector<tasks::Example>& examples,
                            scoring::MetricKind metric, BlackBox& black_box, const PromptTemplates& templates,
                            int fan_out = 1);

struct LlmEnvConfig {
  int fan_out = 1;
  /// Re-evaluations draw a fresh validation subsample when the split is larger
  /// than the per-evaluation size.
  bool resample_on_reevaluate = true;
  std::size_t validation_size = 20;
  std::uint64_t seed = 0;
};

/// act -> project -> decode -> evaluate, as an Environment.
class LlmEnvironment final : public env::Environment {
 public:
  LlmEnvironment(const env::ProjectionMatrix& projection, const Decoder& decoder, BlackBox& black_box,
                 const tasks::TaskSpec& task, PromptTemplates templates, LlmEnvConfig config);

  env::Outcome evaluate(const Eigen::VectorXd& action, std::uint64_t nonce) const override;
  env::Outcome reevaluate(const Eigen::VectorXd& action, const env::Outcome& previous,
                          std::uint64_t nonce) const override;
  int action_dim() const override { return static_cast<int>(projection_.action_dim()); }
  std::string name() const override { return "llm:" + task_.name; }

  std::string decode(const Eigen::VectorXd& action) const;
  const std::string& generation_prompt() const { return generation_prompt_; }

 private:
  const env::ProjectionMatrix& projection_;
  const Decoder& decoder_;
  BlackBox& black_box_;
  const tasks::TaskSpec& task_;
  PromptTemplates templates_;
  LlmEnvConfig config_;
  std::string generation_prompt_;
};

}  // namespace promptac::llm
