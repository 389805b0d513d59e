// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptac/llm_env.hpp"

#include <algorithm>
#include <cctype>
#include <exception>
#include <thread>

#include "promptac/errors.hpp"
#include "promptac/rng.hpp"

namespace promptac::llm {
namespace {

constexpr const char* kInstructionSlot = "{instruction}";
constexpr const char* kInputSlot = "{input}";
constexpr const char* kOutputSlot = "{output}";

std::size_t count_occurrences(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + needle.size())) ++n;
  return n;
}

std::string replace_once(std::string s, const std::string& slot, const std::string& value) {
  const auto pos = s.find(slot);
  if (pos != std::string::npos) s.replace(pos, slot.size(), value);
  return s;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Slot i spells bit i: variants[i][0] for 0, variants[i][1] for 1.
const std::vector<std::pair<std::string, std::string>>& grammar() {
  static const std::vector<std::pair<std::string, std::string>> g = {
      {"Read", "Take"},   {"the input", "a word"}, {"then", "and"},   {"rewrite", "change"},
      {"that word", "it"}, {"into", "to"},         {"the", "its"},    {"plural", "opposite"},
      {"form", "meaning"}, {"carefully", "exactly"},
  };
  return g;
}

std::pair<std::string, std::string> slot(int i) {
  if (i < static_cast<int>(grammar().size())) return grammar()[static_cast<std::size_t>(i)];
  return {"x" + std::to_string(i), "y" + std::to_string(i)};
}

}  // namespace

void PromptTemplates::validate() const {
  if (count_occurrences(evaluation, kInstructionSlot) != 1 || count_occurrences(evaluation, kInputSlot) != 1) {
    throw Error(ErrorCode::kInvalidConfiguration,
                "evaluation template needs exactly one {instruction} and one {input} slot");
  }
  if (evaluation.find(kInstructionSlot) > evaluation.find(kInputSlot)) {
    throw Error(ErrorCode::kInvalidConfiguration, "{instruction} must precede {input} in the evaluation template");
  }
  if (generation_cue.empty()) throw Error(ErrorCode::kInvalidConfiguration, "generation cue must not be empty");
}

std::string PromptTemplates::render_generation(const std::vector<tasks::Example>& exemplars) const {
  if (exemplars.empty()) throw Error(ErrorCode::kInvalidTask, "at least one exemplar is required");
  std::string out;
  for (const auto& e : exemplars) {
    out += replace_once(replace_once(exemplar_block, kInputSlot, e.input), kOutputSlot, e.outputs.front());
  }
  out += generation_cue;
  return out;
}

std::string PromptTemplates::render_evaluation(const std::string& instruction, const std::string& input) const {
  const auto ip = evaluation.find(kInstructionSlot);
  const auto xp = evaluation.find(kInputSlot);
  const std::string ins_slot = kInstructionSlot;
  const std::string in_slot = kInputSlot;
  return evaluation.substr(0, ip) + instruction + evaluation.substr(ip + ins_slot.size(), xp - ip - ins_slot.size()) +
         input + evaluation.substr(xp + in_slot.size());
}

std::optional<std::pair<std::string, std::string>> PromptTemplates::parse_evaluation(const std::string& prompt) const {
  const auto ip = evaluation.find(kInstructionSlot);
  const auto xp = evaluation.find(kInputSlot);
  if (ip == std::string::npos || xp == std::string::npos || ip > xp) return std::nullopt;
  const std::string ins_slot = kInstructionSlot;
  const std::string in_slot = kInputSlot;
  const std::string prefix = evaluation.substr(0, ip);
  const std::string middle = evaluation.substr(ip + ins_slot.size(), xp - ip - ins_slot.size());
  const std::string suffix = evaluation.substr(xp + in_slot.size());
  if (prompt.size() < prefix.size() + middle.size() + suffix.size()) return std::nullopt;
  if (prompt.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  if (prompt.compare(prompt.size() - suffix.size(), suffix.size(), suffix) != 0) return std::nullopt;
  const auto mid = prompt.find(middle, prefix.size());
  if (mid == std::string::npos || mid + middle.size() > prompt.size() - suffix.size()) return std::nullopt;
  return std::make_pair(prompt.substr(prefix.size(), mid - prefix.size()),
                        prompt.substr(mid + middle.size(), prompt.size() - suffix.size() - mid - middle.size()));
}

std::string clean_instruction(const std::string& raw) {
  std::size_t b = 0;
  while (b < raw.size() && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
  std::string s = raw.substr(b);
  const auto nl = s.find_first_of("\r\n");
  if (nl != std::string::npos) s.resize(nl);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

std::chrono::milliseconds RetryPolicy::backoff(int attempt) const {
  double ms = static_cast<double>(initial_backoff.count());
  for (int i = 0; i < attempt; ++i) ms *= multiplier;
  return std::chrono::milliseconds(static_cast<long long>(std::min(ms, static_cast<double>(max_backoff.count()))));
}

AuditLog::AuditLog(const std::filesystem::path& path) : out_(path, std::ios::app) {
  if (!out_) throw Error(ErrorCode::kInvalidConfiguration, "cannot open audit log " + path.string());
}

void AuditLog::write(const nlohmann::json& record) {
  std::lock_guard<std::mutex> lock(mu_);
  out_ << record.dump() << '\n';
  out_.flush();
}

std::string BlackBox::complete(const std::string& prompt) {
  if (prompt.empty()) throw Error(ErrorCode::kInvalidArgument, "completion prompt must not be empty");
  const std::uint64_t n = queries_.fetch_add(1) + 1;
  std::string out = do_complete(prompt);
  if (completion_log_) completion_log_->write({{"query", n}, {"prompt", prompt}, {"completion", out}});
  return out;
}

// MockDecoder -----------------------------------------------------------------

MockDecoder::MockDecoder(const env::ProjectionMatrix& projection, MockDecoderConfig config) : config_(std::move(config)) {
  if (projection.action_dim() != config_.action_dim) {
    throw Error(ErrorCode::kShape, "mock decoder action dimension does not match the projection");
  }
  if (config_.best_cell.empty()) config_.best_cell.assign(static_cast<std::size_t>(config_.action_dim), 1);
  if (static_cast<int>(config_.best_cell.size()) != config_.action_dim) {
    throw Error(ErrorCode::kShape, "best cell needs one bit per action coordinate");
  }
  const Eigen::MatrixXd& p = projection.matrix();
  pinv_ = (p.transpose() * p).ldlt().solve(p.transpose());
}

std::vector<int> MockDecoder::cell_of(const Eigen::VectorXd& z) const {
  if (z.size() != pinv_.cols()) throw Error(ErrorCode::kShape, "soft prompt length does not match the projection");
  const Eigen::VectorXd a = pinv_ * z;
  std::vector<int> cell(static_cast<std::size_t>(a.size()));
  for (Eigen::Index i = 0; i < a.size(); ++i) cell[static_cast<std::size_t>(i)] = a(i) > config_.threshold ? 1 : 0;
  return cell;
}

std::string MockDecoder::instruction_for(const std::vector<int>& cell) const {
  std::string out;
  for (std::size_t i = 0; i < cell.size(); ++i) {
    const auto [zero, one] = slot(static_cast<int>(i));
    if (!out.empty()) out += ' ';
    out += cell[i] ? one : zero;
  }
  return out;
}

std::optional<std::vector<int>> MockDecoder::parse(const std::string& instruction) const {
  std::vector<int> cell;
  std::size_t pos = 0;
  for (int i = 0; i < config_.action_dim; ++i) {
    if (i > 0) {
      if (pos >= instruction.size() || instruction[pos] != ' ') return std::nullopt;
      ++pos;
    }
    const auto [zero, one] = slot(i);
    auto matches = [&](const std::string& w) {
      if (instruction.compare(pos, w.size(), w) != 0) return false;
      const std::size_t end = pos + w.size();
      return end == instruction.size() || instruction[end] == ' ';
    };
    if (matches(zero)) {
      cell.push_back(0);
      pos += zero.size();
    } else if (matches(one)) {
      cell.push_back(1);
      pos += one.size();
    } else {
      return std::nullopt;
    }
  }
  if (pos != instruction.size()) return std::nullopt;
  return cell;
}

double MockDecoder::quality(const std::string& instruction) const {
  const auto cell = parse(instruction);
  if (!cell) return 0.0;
  int agree = 0;
  for (std::size_t i = 0; i < cell->size(); ++i) agree += (*cell)[i] == config_.best_cell[i] ? 1 : 0;
  return static_cast<double>(agree) / static_cast<double>(config_.action_dim);
}

std::string MockDecoder::decode(const Eigen::VectorXd& z, const std::string& exemplar_prompt) const {
  (void)exemplar_prompt;
  return instruction_for(cell_of(z));
}

// MockBlackBox ----------------------------------------------------------------

const char* to_string(MockKind k) {
  switch (k) {
    case MockKind::kEcho: return "echo";
    case MockKind::kLookup: return "lookup";
    case MockKind::kAntonym: return "antonym";
    case MockKind::kGatedLookup: return "gated-lookup";
  }
  return "echo";
}

MockKind mock_kind_from_string(const std::string& s) {
  for (auto k : {MockKind::kEcho, MockKind::kLookup, MockKind::kAntonym, MockKind::kGatedLookup}) {
    if (s == to_string(k)) return k;
  }
  throw Error(ErrorCode::kInvalidConfiguration, "unknown mock kind '" + s + "'");
}

const std::map<std::string, std::string>& antonym_table() {
  static const std::map<std::string, std::string> table = [] {
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"won", "lost"},    {"hot", "cold"},     {"up", "down"},      {"good", "bad"},   {"happy", "sad"},
        {"light", "dark"},  {"open", "closed"},  {"big", "small"},    {"fast", "slow"},  {"early", "late"},
        {"full", "empty"},  {"strong", "weak"},  {"rich", "poor"},    {"young", "old"},  {"win", "lose"},
        {"high", "low"},    {"begin", "end"},    {"accept", "reject"}, {"above", "below"}, {"true", "false"},
    };
    std::map<std::string, std::string> t;
    for (const auto& [a, b] : pairs) {
      t.emplace(a, b);
      t.emplace(b, a);
    }
    return t;
  }();
  return table;
}

MockBlackBox::MockBlackBox(MockBlackBoxConfig config) : config_(std::move(config)) {
  config_.templates.validate();
  for (std::size_t i = 0; i < config_.table.size(); ++i) index_.emplace(config_.table[i].input, i);
  if ((config_.kind == MockKind::kLookup || config_.kind == MockKind::kGatedLookup) && config_.table.empty()) {
    throw Error(ErrorCode::kInvalidConfiguration, "lookup mocks need a non-empty table");
  }
  if (config_.kind == MockKind::kGatedLookup && !config_.quality) {
    throw Error(ErrorCode::kInvalidConfiguration, "gated lookup mock needs a quality function");
  }
}

std::string MockBlackBox::do_complete(const std::string& prompt) {
  const auto parsed = config_.templates.parse_evaluation(prompt);
  if (!parsed) return config_.miss;
  const auto& [instruction, input] = *parsed;
  switch (config_.kind) {
    case MockKind::kEcho: return input;
    case MockKind::kAntonym: {
      if (lower(instruction).find("opposite") == std::string::npos) return input;
      const auto it = antonym_table().find(lower(input));
      return it == antonym_table().end() ? input : it->second;
    }
    case MockKind::kLookup: {
      const auto it = index_.find(input);
      return it == index_.end() ? config_.miss : config_.table[it->second].output;
    }
    case MockKind::kGatedLookup: {
      const auto it = index_.find(input);
      if (it == index_.end()) return config_.miss;
      const MockEntry& e = config_.table[it->second];
      return e.gate < config_.quality(instruction) ? e.output : config_.miss;
    }
  }
  return config_.miss;
}

std::vector<MockEntry> mock_table(const tasks::TaskSpec& task) {
  std::vector<MockEntry> table;
  std::map<std::string, bool> seen;
  auto add_group = [&](const std::vector<tasks::Example>& group) {
    std::vector<const tasks::Example*> fresh;
    for (const auto& e : group) {
      if (seen.emplace(e.input, true).second) fresh.push_back(&e);
    }
    for (std::size_t j = 0; j < fresh.size(); ++j) {
      table.push_back(MockEntry{fresh[j]->input, fresh[j]->outputs.front(),
                                (static_cast<double>(j) + 0.5) / static_cast<double>(fresh.size())});
    }
  };
  add_group(task.validation_sample.empty() ? task.validation : task.validation_sample);
  add_group(task.validation);
  add_group(task.test);
  add_group(task.exemplars);
  return table;
}

// Reward ----------------------------------------------------------------------

double evaluate_instruction(const std::string& instruction, const std::vector<tasks::Example>& examples,
                            scoring::MetricKind metric, BlackBox& black_box, const PromptTemplates& templates,
                            int fan_out) {
  if (examples.empty()) throw Error(ErrorCode::kInvalidTask, "validation split is empty");
  std::vector<double> scores(examples.size(), 0.0);
  std::vector<std::exception_ptr> failures(examples.size());
  auto work = [&](std::size_t j) {
    try {
      const std::string pred = black_box.complete(templates.render_evaluation(instruction, examples[j].input));
      scores[j] = scoring::score(metric, pred, examples[j].outputs);
    } catch (...) {
      failures[j] = std::current_exception();
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(fan_out, 1)), examples.size());
  if (workers <= 1) {
    for (std::size_t j = 0; j < examples.size(); ++j) {
      work(j);
      if (failures[j]) break;
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t j = next.fetch_add(1); j < examples.size(); j = next.fetch_add(1)) work(j);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (std::size_t j = 0; j < examples.size(); ++j) {
    if (!failures[j]) continue;
    try {
      std::rethrow_exception(failures[j]);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kEvaluationAborted,
                  "completion " + std::to_string(j) + " failed: " + e.what());
    }
  }
  double sum = 0.0;
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::kInvalidReward, "per-example score outside [0,1]");
    sum += s;
  }
  return sum / static_cast<double>(scores.size());
}

LlmEnvironment::LlmEnvironment(const env::ProjectionMatrix& projection, const Decoder& decoder, BlackBox& black_box,
                               const tasks::TaskSpec& task, PromptTemplates templates, LlmEnvConfig config)
    : projection_(projection),
      decoder_(decoder),
      black_box_(black_box),
      task_(task),
      templates_(std::move(templates)),
      config_(config) {
  templates_.validate();
  generation_prompt_ = templates_.render_generation(task_.exemplar_sample.empty() ? task_.exemplars
                                                                                  : task_.exemplar_sample);
}

std::string LlmEnvironment::decode(const Eigen::VectorXd& action) const {
  return clean_instruction(decoder_.decode(projection_.project(action), generation_prompt_));
}

env::Outcome LlmEnvironment::evaluate(const Eigen::VectorXd& action, std::uint64_t nonce) const {
  (void)nonce;
  env::Outcome out;
  out.instruction = decode(action);
  const auto& examples = task_.validation_sample.empty() ? task_.validation : task_.validation_sample;
  out.reward = evaluate_instruction(out.instruction, examples, task_.metric, black_box_, templates_, config_.fan_out);
  return out;
}

env::Outcome LlmEnvironment::reevaluate(const Eigen::VectorXd& action, const env::Outcome& previous,
                                        std::uint64_t nonce) const {
  (void)action;
  env::Outcome out;
  out.instruction = previous.instruction;
  std::vector<tasks::Example> examples = task_.validation_sample.empty() ? task_.validation : task_.validation_sample;
  if (config_.resample_on_reevaluate && task_.validation.size() > config_.validation_size) {
    examples = tasks::validation_subset(task_, config_.validation_size, derive_seed(config_.seed, nonce));
  }
  out.reward = evaluate_instruction(out.instruction, examples, task_.metric, black_box_, templates_, config_.fan_out);
  return out;
}

}  // namespace promptac::llm
