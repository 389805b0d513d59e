// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptac/driver.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "promptac/csv.hpp"
#include "promptac/errors.hpp"
#include "promptac/rng.hpp"

namespace promptac::driver {
namespace {

using nlohmann::json;

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& scope = "") {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    const std::string field = scope.empty() ? key : scope + "." + key;
    throw ParseError(field, "config field '" + field + "' has the wrong type");
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& scope) {
  if (!j.is_object()) throw ParseError(scope, "config section '" + scope + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) {
      const std::string field = scope.empty() ? k : scope + "." + k;
      throw ParseError(field, "unknown config field '" + field + "'");
    }
  }
}

void read_ms(const json& j, const char* key, std::chrono::milliseconds& out, const std::string& scope) {
  long long ms = out.count();
  read(j, key, ms, scope);
  out = std::chrono::milliseconds(ms);
}

Eigen::VectorXd read_center(const json& c, int dim, const std::string& field) {
  if (c.is_number()) return Eigen::VectorXd::Constant(dim, c.get<double>());
  if (c.is_array()) {
    std::vector<double> v;
    try {
      v = c.get<std::vector<double>>();
    } catch (const json::exception&) {
      throw ParseError(field, "bump center must be a number or a list of numbers");
    }
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  throw ParseError(field, "bump center must be a number or a list of numbers");
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json candidate_json(const Candidate& c) {
  json j = {{"step", c.step}, {"reward", c.reward}, {"instruction", c.instruction}, {"action", vector_json(c.action)}};
  if (!c.reevaluations.empty()) {
    j["reevaluations"] = c.reevaluations;
    j["mean_reevaluation"] = c.mean_reevaluation;
  }
  return j;
}

}  // namespace

const char* to_string(EnvKind k) {
  switch (k) {
    case EnvKind::kSynthetic: return "synthetic";
    case EnvKind::kLlm: return "llm";
    case EnvKind::kMockLlm: return "mock-llm";
  }
  return "synthetic";
}

EnvKind env_kind_from_string(const std::string& s) {
  for (auto k : {EnvKind::kSynthetic, EnvKind::kLlm, EnvKind::kMockLlm}) {
    if (s == to_string(k)) return k;
  }
  throw Error(ErrorCode::kInvalidConfiguration, "unknown environment '" + s + "'");
}

Split parse_split(const std::string& s) {
  const auto colon = s.find(':');
  Split out;
  try {
    if (colon == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    out.p = std::stoi(s.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument(s);
    const std::string rest = s.substr(colon + 1);
    out.k = std::stoi(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidConfiguration, "split must look like p:k, got '" + s + "'");
  }
  return out;
}

void RunConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfiguration, m); };
  if (budget < 1) bad("budget must be at least 1");
  if (action_dim < 1) bad("action dimension must be at least 1");
  if (soft_tokens < 1 || token_width < 1) bad("soft prompt shape must be positive");
  if (exemplar_count < 1) bad("exemplar count must be at least 1");
  if (fan_out < 1) bad("fan_out must be at least 1");
  if (split) {
    if (split->p < 1 || split->k < 1) bad("split needs p >= 1 and k >= 1");
    if (static_cast<long>(split->p) * split->k >= budget) bad("split needs p*k < budget");
  }
  if (environment != EnvKind::kSynthetic && task_path.empty()) bad("llm environments need a task file");
}

agent::AgentConfig RunConfig::resolved_agent() const {
  agent::AgentConfig a = agent;
  a.action_dim = action_dim;
  a.seed = seed;
  a.buffer_capacity = static_cast<std::size_t>(budget);
  return a;
}

env::LandscapeConfig RunConfig::resolved_landscape() const {
  env::LandscapeConfig l = landscape;
  if (l.bumps.empty()) l.bumps.push_back(env::Bump{Eigen::VectorXd::Constant(action_dim, 0.7), 1.0});
  l.seed = seed;
  return l;
}

RunConfig config_from_json(const json& j) {
  check_keys(j,
             {"budget", "dim", "soft_tokens", "token_width", "exemplars", "validation_size", "environment", "variant",
              "split", "seed", "label", "landscape", "task", "agent", "templates", "decoder", "black_box", "mock",
              "fan_out", "resample_on_reevaluate", "audit", "out"},
             "");
  RunConfig c;
  read(j, "budget", c.budget);
  read(j, "dim", c.action_dim);
  read(j, "soft_tokens", c.soft_tokens);
  read(j, "token_width", c.token_width);
  read(j, "exemplars", c.exemplar_count);
  read(j, "validation_size", c.validation_size);
  std::string s;
  if (j.contains("environment")) {
    read(j, "environment", s);
    c.environment = env_kind_from_string(s);
  }
  if (j.contains("variant")) {
    read(j, "variant", s);
    c.agent.variant = agent::variant_from_string(s);
  }
  if (j.contains("split") && !j.at("split").is_null()) {
    const json& sp = j.at("split");
    if (sp.is_string()) {
      c.split = parse_split(sp.get<std::string>());
    } else {
      check_keys(sp, {"p", "k"}, "split");
      Split v;
      read(sp, "p", v.p, "split");
      read(sp, "k", v.k, "split");
      c.split = v;
    }
  }
  read(j, "seed", c.seed);
  read(j, "label", c.label);
  read(j, "task", c.task_path);
  read(j, "fan_out", c.fan_out);
  read(j, "resample_on_reevaluate", c.resample_on_reevaluate);
  read(j, "audit", c.audit);
  if (j.contains("out")) {
    read(j, "out", s);
    c.out_dir = s;
  }

  if (j.contains("landscape")) {
    const json& l = j.at("landscape");
    check_keys(l, {"kind", "bumps", "width", "noise"}, "landscape");
    if (l.contains("kind")) {
      read(l, "kind", s, "landscape");
      c.landscape.kind = env::landscape_kind_from_string(s);
    }
    read(l, "width", c.landscape.width, "landscape");
    read(l, "noise", c.landscape.noise, "landscape");
    if (l.contains("bumps")) {
      if (!l.at("bumps").is_array()) throw ParseError("landscape.bumps", "landscape.bumps must be a list");
      for (const auto& b : l.at("bumps")) {
        check_keys(b, {"center", "height"}, "landscape.bumps");
        if (!b.contains("center")) throw ParseError("landscape.bumps.center", "bump needs a center");
        env::Bump bump{read_center(b.at("center"), c.action_dim, "landscape.bumps.center"), 1.0};
        read(b, "height", bump.height, "landscape.bumps");
        c.landscape.bumps.push_back(std::move(bump));
      }
    }
  }

  if (j.contains("agent")) {
    const json& a = j.at("agent");
    check_keys(a,
               {"actor_hidden", "critic_hidden", "actor_lr", "critic_lr", "alpha_lr", "initial_alpha",
                "target_entropy", "warmup", "batch_size", "updates_per_step", "grad_clip"},
               "agent");
    read(a, "actor_hidden", c.agent.actor_hidden, "agent");
    read(a, "critic_hidden", c.agent.critic_hidden, "agent");
    read(a, "actor_lr", c.agent.actor_lr, "agent");
    read(a, "critic_lr", c.agent.critic_lr, "agent");
    read(a, "alpha_lr", c.agent.alpha_lr, "agent");
    read(a, "initial_alpha", c.agent.initial_alpha, "agent");
    if (a.contains("target_entropy") && !a.at("target_entropy").is_null()) {
      double t = 0.0;
      read(a, "target_entropy", t, "agent");
      c.agent.target_entropy = t;
    }
    read(a, "warmup", c.agent.warmup, "agent");
    read(a, "batch_size", c.agent.batch_size, "agent");
    read(a, "updates_per_step", c.agent.updates_per_step, "agent");
    read(a, "grad_clip", c.agent.grad_clip, "agent");
  }

  if (j.contains("templates")) {
    const json& t = j.at("templates");
    check_keys(t, {"exemplar_block", "generation_cue", "evaluation"}, "templates");
    read(t, "exemplar_block", c.templates.exemplar_block, "templates");
    read(t, "generation_cue", c.templates.generation_cue, "templates");
    read(t, "evaluation", c.templates.evaluation, "templates");
  }
  auto read_retry = [&](const json& r, llm::RetryPolicy& p, const std::string& scope) {
    check_keys(r, {"max_attempts", "initial_backoff_ms", "multiplier", "max_backoff_ms", "total_budget_ms"}, scope);
    read(r, "max_attempts", p.max_attempts, scope);
    read_ms(r, "initial_backoff_ms", p.initial_backoff, scope);
    read(r, "multiplier", p.multiplier, scope);
    read_ms(r, "max_backoff_ms", p.max_backoff, scope);
    read_ms(r, "total_budget_ms", p.total_budget, scope);
  };
  if (j.contains("decoder")) {
    const json& d = j.at("decoder");
    check_keys(d, {"url", "path", "max_tokens", "timeout_ms", "retry"}, "decoder");
    read(d, "url", c.decoder.base_url, "decoder");
    read(d, "path", c.decoder.path, "decoder");
    read(d, "max_tokens", c.decoder.max_tokens, "decoder");
    read_ms(d, "timeout_ms", c.decoder.timeout, "decoder");
    if (d.contains("retry")) read_retry(d.at("retry"), c.decoder.retry, "decoder.retry");
  }
  if (j.contains("black_box")) {
    const json& b = j.at("black_box");
    check_keys(b, {"url", "path", "model", "temperature", "max_tokens", "api_key_env", "timeout_ms", "retry"},
               "black_box");
    read(b, "url", c.black_box.base_url, "black_box");
    read(b, "path", c.black_box.path, "black_box");
    read(b, "model", c.black_box.model, "black_box");
    read(b, "temperature", c.black_box.temperature, "black_box");
    read(b, "max_tokens", c.black_box.max_tokens, "black_box");
    read(b, "api_key_env", c.black_box.api_key_env, "black_box");
    read_ms(b, "timeout_ms", c.black_box.timeout, "black_box");
    if (b.contains("retry")) read_retry(b.at("retry"), c.black_box.retry, "black_box.retry");
  }
  if (j.contains("mock")) {
    const json& m = j.at("mock");
    check_keys(m, {"kind", "best_cell"}, "mock");
    if (m.contains("kind")) {
      read(m, "kind", s, "mock");
      c.mock_kind = llm::mock_kind_from_string(s);
    }
    read(m, "best_cell", c.mock_best_cell, "mock");
  }
  c.decoder.soft_tokens = c.soft_tokens;
  c.decoder.token_width = c.token_width;
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  const agent::AgentConfig a = c.resolved_agent();
  json j = {{"budget", c.budget},
            {"dim", c.action_dim},
            {"soft_tokens", c.soft_tokens},
            {"token_width", c.token_width},
            {"exemplars", c.exemplar_count},
            {"validation_size", c.validation_size},
            {"environment", to_string(c.environment)},
            {"variant", agent::to_string(a.variant)},
            {"seed", c.seed},
            {"label", c.label},
            {"fan_out", c.fan_out},
            {"resample_on_reevaluate", c.resample_on_reevaluate},
            {"audit", c.audit}};
  j["split"] = c.split ? json{{"p", c.split->p}, {"k", c.split->k}} : json(nullptr);
  j["agent"] = {{"actor_hidden", a.actor_hidden}, {"critic_hidden", a.critic_hidden}, {"actor_lr", a.actor_lr},
                {"critic_lr", a.critic_lr},       {"alpha_lr", a.alpha_lr},           {"initial_alpha", a.initial_alpha},
                {"target_entropy", a.resolved_target_entropy()},
                {"warmup", a.warmup},             {"batch_size", a.batch_size},
                {"updates_per_step", a.updates_per_step}, {"grad_clip", a.grad_clip}};
  if (c.environment == EnvKind::kSynthetic) {
    const env::LandscapeConfig l = c.resolved_landscape();
    json bumps = json::array();
    for (const auto& b : l.bumps) bumps.push_back({{"center", vector_json(b.center)}, {"height", b.height}});
    j["landscape"] = {{"kind", env::to_string(l.kind)}, {"width", l.width}, {"noise", l.noise}, {"bumps", bumps}};
  } else {
    j["task"] = c.task_path;
    j["templates"] = {{"exemplar_block", c.templates.exemplar_block},
                      {"generation_cue", c.templates.generation_cue},
                      {"evaluation", c.templates.evaluation}};
  }
  if (c.environment == EnvKind::kMockLlm) {
    j["mock"] = {{"kind", llm::to_string(c.mock_kind)}, {"best_cell", c.mock_best_cell}};
  }
  if (c.environment == EnvKind::kLlm) {
    j["decoder"] = {{"url", c.decoder.base_url}, {"path", c.decoder.path}, {"max_tokens", c.decoder.max_tokens},
                    {"timeout_ms", c.decoder.timeout.count()}};
    j["black_box"] = {{"url", c.black_box.base_url},          {"path", c.black_box.path},
                      {"model", c.black_box.model},           {"temperature", c.black_box.temperature},
                      {"max_tokens", c.black_box.max_tokens}, {"api_key_env", c.black_box.api_key_env},
                      {"timeout_ms", c.black_box.timeout.count()}};
  }
  return j;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidConfiguration, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("", "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

TraceWriter::TraceWriter(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
  if (!out_) throw Error(ErrorCode::kInvalidConfiguration, "cannot write trace " + path.string());
  out_ << "step,reward,best_reward,alpha,instruction\n";
  out_.flush();
}

void TraceWriter::write(const TraceRow& row) {
  out_ << row.step << ',' << format_double(row.reward) << ',' << format_double(row.best_reward) << ','
       << format_double(row.alpha) << ',' << csv::escape(row.instruction) << '\n';
  out_.flush();
}

std::vector<Candidate> top_candidates(const std::vector<Candidate>& all, int p) {
  std::vector<Candidate> sorted = all;
  std::stable_sort(sorted.begin(), sorted.end(), [](const Candidate& a, const Candidate& b) {
    return a.reward != b.reward ? a.reward > b.reward : a.step < b.step;
  });
  if (static_cast<int>(sorted.size()) > p) sorted.resize(static_cast<std::size_t>(p));
  return sorted;
}

std::size_t rerank(std::vector<Candidate>& candidates, int k, const Reevaluate& reevaluate) {
  if (candidates.empty()) throw Error(ErrorCode::kInvalidCandidate, "nothing to re-rank");
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "re-rank needs k >= 1");
  for (auto& c : candidates) {
    c.reevaluations.clear();
    for (int r = 0; r < k; ++r) c.reevaluations.push_back(reevaluate(c, r));
    double sum = 0.0;
    for (double v : c.reevaluations) sum += v;
    c.mean_reevaluation = sum / static_cast<double>(k);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const Candidate& a = candidates[i];
    const Candidate& b = candidates[best];
    if (a.mean_reevaluation != b.mean_reevaluation) {
      if (a.mean_reevaluation > b.mean_reevaluation) best = i;
    } else if (a.reward != b.reward) {
      if (a.reward > b.reward) best = i;
    } else if (a.step < b.step) {
      best = i;
    }
  }
  return best;
}

RunResult optimize(const RunConfig& config, const env::Environment& env, TraceWriter* writer) {
  config.validate();
  if (env.action_dim() != config.action_dim) {
    throw Error(ErrorCode::kShape, "environment dimension does not match the configured action dimension");
  }
  agent::Agent ag(config.resolved_agent());
  const int explore = config.split ? config.budget - config.split->p * config.split->k : config.budget;

  RunResult res;
  std::vector<Candidate> all;
  double running = 0.0;
  auto emit = [&](TraceRow row) {
    if (writer) writer->write(row);
    res.trace.push_back(std::move(row));
  };

  for (int t = 0; t < explore; ++t) {
    const std::size_t step = static_cast<std::size_t>(t) + 1;
    const agent::SampledAction sa = ag.act();
    env::Outcome out;
    agent::Diagnostics diag;
    try {
      out = env.evaluate(sa.action, static_cast<std::uint64_t>(t));
      ++res.evaluations;
      diag = ag.train_step(sa.action, out.reward);
    } catch (const std::exception& e) {
      throw RunAborted(step, "step " + std::to_string(step) + " failed: " + e.what());
    }
    Candidate c{step, sa.action, out.reward, out.instruction, {}, 0.0};
    if (all.empty() || c.reward > res.best.reward) res.best = c;
    running = all.empty() ? c.reward : std::max(running, c.reward);
    all.push_back(std::move(c));
    res.final_diagnostics = diag.to_json();
    emit(TraceRow{step, out.reward, running, diag.alpha, out.instruction});
  }
  res.best_reward = res.best.reward;

  if (config.split) {
    res.reranked = top_candidates(all, config.split->p);
    std::uint64_t nonce = static_cast<std::uint64_t>(explore);
    const double alpha = ag.temperature().alpha();
    const std::size_t winner = rerank(res.reranked, config.split->k, [&](const Candidate& c, int) {
      const std::size_t step = static_cast<std::size_t>(nonce) + 1;
      env::Outcome out;
      try {
        out = env.reevaluate(c.action, env::Outcome{c.reward, c.instruction}, nonce++);
      } catch (const std::exception& e) {
        throw RunAborted(step, "re-evaluation at step " + std::to_string(step) + " failed: " + e.what());
      }
      ++res.evaluations;
      emit(TraceRow{step, out.reward, running, alpha, out.instruction});
      return out.reward;
    });
    res.best = res.reranked[winner];
    res.best_reward = res.best.mean_reevaluation;
  }
  return res;
}

double final_test(const RunResult& result, const tasks::TaskSpec& task, llm::BlackBox& black_box,
                  const llm::PromptTemplates& templates, int fan_out) {
  const std::string& ins = result.best.instruction;
  if (std::all_of(ins.begin(), ins.end(), [](unsigned char ch) { return std::isspace(ch) != 0; })) {
    throw Error(ErrorCode::kInvalidCandidate, "best instruction is blank");
  }
  return llm::evaluate_instruction(ins, task.test, task.metric, black_box, templates, fan_out);
}

json to_json(const RunResult& r, const RunConfig& config) {
  json trace = json::array();
  for (const auto& row : r.trace) {
    trace.push_back({{"step", row.step},
                     {"reward", row.reward},
                     {"best_reward", row.best_reward},
                     {"alpha", row.alpha},
                     {"instruction", row.instruction}});
  }
  json j = {{"label", config.label.empty() ? agent::to_string(config.agent.variant) : config.label},
            {"best", candidate_json(r.best)},
            {"best_reward", r.best_reward},
            {"budget", config.budget},
            {"evaluations", r.evaluations},
            {"audit", {{"completions", r.completions}, {"decodes", r.decodes}}},
            {"final_diagnostics", r.final_diagnostics},
            {"trace", trace},
            {"config", to_json(config)}};
  if (r.test_score) j["test_score"] = *r.test_score;
  if (config.split) {
    json cands = json::array();
    for (const auto& c : r.reranked) cands.push_back(candidate_json(c));
    j["split"] = {{"p", config.split->p}, {"k", config.split->k}, {"candidates", cands}};
  }
  return j;
}

void write_result(const std::filesystem::path& path, const RunResult& r, const RunConfig& config) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kInvalidConfiguration, "cannot write result " + path.string());
  out << to_json(r, config).dump(2) << '\n';
}

std::unique_ptr<llm::BlackBox> make_black_box(const RunConfig& config, const tasks::TaskSpec& task,
                                              const llm::MockDecoder* mock_decoder,
                                              std::shared_ptr<llm::AuditLog> audit) {
  std::unique_ptr<llm::BlackBox> box;
  if (config.environment == EnvKind::kMockLlm) {
    llm::MockBlackBoxConfig mc;
    mc.kind = config.mock_kind;
    mc.templates = config.templates;
    mc.table = llm::mock_table(task);
    if (mock_decoder) {
      mc.quality = [mock_decoder](const std::string& ins) { return mock_decoder->quality(ins); };
    } else {
      mc.quality = [](const std::string&) { return 1.0; };
    }
    box = std::make_unique<llm::MockBlackBox>(std::move(mc));
  } else {
    box = std::make_unique<llm::ChatBlackBox>(config.black_box, audit);
  }
  if (audit) box->set_audit(audit);
  return box;
}

Session::Session(RunConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.audit) {
    std::filesystem::create_directories(config_.out_dir);
    const auto path = config_.out_dir / "audit.jsonl";
    std::ofstream(path, std::ios::trunc).close();
    audit_ = std::make_shared<llm::AuditLog>(path);
  }
  if (config_.environment == EnvKind::kSynthetic) {
    env_ = std::make_unique<env::SyntheticLandscape>(config_.resolved_landscape());
    return;
  }
  task_ = std::make_unique<tasks::TaskSpec>(
      tasks::load_task(config_.task_path, tasks::LoadOptions{config_.validation_size, config_.exemplar_count,
                                                             config_.seed}));
  projection_ = std::make_unique<env::ProjectionMatrix>(
      static_cast<Eigen::Index>(config_.soft_tokens) * config_.token_width, config_.action_dim,
      derive_seed(config_.seed, streams::kProjection));
  if (config_.environment == EnvKind::kMockLlm) {
    auto mock = std::make_unique<llm::MockDecoder>(
        *projection_, llm::MockDecoderConfig{config_.action_dim, 0.5, config_.mock_best_cell});
    mock_decoder_ = mock.get();
    decoder_ = std::move(mock);
  } else {
    llm::HttpDecoderConfig dc = config_.decoder;
    dc.soft_tokens = config_.soft_tokens;
    dc.token_width = config_.token_width;
    decoder_ = std::make_unique<llm::HttpDecoder>(dc, audit_);
  }
  black_box_ = make_black_box(config_, *task_, mock_decoder_, audit_);
  llm::LlmEnvConfig ec;
  ec.fan_out = config_.fan_out;
  ec.resample_on_reevaluate = config_.resample_on_reevaluate;
  ec.validation_size = config_.validation_size;
  ec.seed = config_.seed;
  env_ = std::make_unique<llm::LlmEnvironment>(*projection_, *decoder_, *black_box_, *task_, config_.templates, ec);
}

Session::~Session() = default;

RunResult Session::run() {
  std::filesystem::create_directories(config_.out_dir);
  TraceWriter writer(config_.out_dir / "trace.csv");
  RunResult r = optimize(config_, *env_, &writer);
  if (black_box_) {
    r.completions = black_box_->query_count();
    const int explore = config_.split ? config_.budget - config_.split->p * config_.split->k : config_.budget;
    r.decodes = static_cast<std::size_t>(explore);
  }
  write_result(config_.out_dir / "result.json", r, config_);
  return r;
}

}  // namespace promptac::driver
