// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "promptac/env.hpp"
#include "promptac/errors.hpp"
#include "promptac/rng.hpp"
#include "promptac/llm_env.hpp"
#include "promptac/tasks.hpp"

// After Eigen: <resolv.h> defines `_res`.
#include <httplib.h>

using namespace promptac;
using namespace promptac::llm;
using nlohmann::json;

namespace {

tasks::TaskSpec antonyms(std::size_t m = 20) {
  tasks::LoadOptions o;
  o.validation_size = m;
  return tasks::load_task(PROMPTAC_TEST_DATA "/antonyms.json", o);
}

class CountingBox final : public BlackBox {
 public:
  std::atomic<int> fail_on{-1};

 protected:
  std::string do_complete(const std::string& prompt) override {
    if (fail_on.load() >= 0 && static_cast<int>(query_count()) > fail_on.load()) {
      throw TransportError(false, 500, "down");
    }
    return prompt.substr(prompt.rfind("Input: ") + 7, prompt.rfind("\nOutput:") - prompt.rfind("Input: ") - 7);
  }
};

struct LocalServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
  ~LocalServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
};

RetryPolicy fast_retry(int attempts) {
  RetryPolicy r;
  r.max_attempts = attempts;
  r.initial_backoff = std::chrono::milliseconds(1);
  r.max_backoff = std::chrono::milliseconds(4);
  r.total_budget = std::chrono::milliseconds(5000);
  return r;
}

}  // namespace

TEST_CASE("generation prompt lists the exemplars in order") {
  const auto task = antonyms();
  const PromptTemplates t;
  const std::string p = t.render_generation(task.exemplars);
  std::size_t blocks = 0, pos = 0, last = 0;
  for (const auto& e : task.exemplars) {
    const auto at = p.find("Input: " + e.input + "\nOutput: " + e.outputs.front() + "\n\n", pos);
    REQUIRE(at != std::string::npos);
    CHECK(at >= last);
    last = at;
    pos = at + 1;
    ++blocks;
  }
  CHECK(blocks == 5);
  CHECK(p.ends_with("The instruction was to"));
  CHECK_THROWS_AS(t.render_generation({}), Error);
}

TEST_CASE("evaluation prompt renders and parses back") {
  const PromptTemplates t;
  const std::string p = t.render_evaluation("Take a word", "won");
  CHECK(p == "Instruction: Take a word\n\nInput: won\nOutput:");
  const auto back = t.parse_evaluation(p);
  REQUIRE(back.has_value());
  CHECK(back->first == "Take a word");
  CHECK(back->second == "won");
  CHECK_FALSE(t.parse_evaluation("something else").has_value());
  // Slot text inside the values is not re-expanded.
  CHECK(t.render_evaluation("{input}", "x") == "Instruction: {input}\n\nInput: x\nOutput:");
}

TEST_CASE("template validation") {
  PromptTemplates t;
  t.evaluation = "Input: {input} Instruction: {instruction}";
  CHECK_THROWS_AS(t.validate(), Error);
  t.evaluation = "{instruction} {instruction} {input}";
  CHECK_THROWS_AS(t.validate(), Error);
  CHECK_NOTHROW(PromptTemplates{}.validate());
}

TEST_CASE("decoded instructions are cleaned") {
  CHECK(clean_instruction("  give the opposite.\nInput: x") == "give the opposite");
  CHECK(clean_instruction("say it") == "say it");
  CHECK(clean_instruction("\n") == "");
}

TEST_CASE("antonym mock") {
  MockBlackBoxConfig c;
  c.kind = MockKind::kAntonym;
  MockBlackBox box(c);
  const PromptTemplates t;
  CHECK(box.complete(t.render_evaluation("Give the opposite", "won")) == "lost");
  CHECK(box.complete(t.render_evaluation("Write the opposite word", "lost")) == "won");
  CHECK(box.complete(t.render_evaluation("Repeat the word", "won")) == "won");
  CHECK(box.query_count() == 3);
  CHECK_THROWS_AS(box.complete(""), Error);
}

TEST_CASE("antonym mock score matches the table") {
  const auto task = antonyms();
  MockBlackBoxConfig c;
  c.kind = MockKind::kAntonym;
  MockBlackBox box(c);
  int hits = 0;
  for (const auto& e : task.validation_sample) {
    const auto it = antonym_table().find(e.input);
    hits += it != antonym_table().end() && it->second == e.outputs.front();
  }
  const double want = static_cast<double>(hits) / static_cast<double>(task.validation_sample.size());
  const double got = evaluate_instruction("Write the opposite", task.validation_sample, task.metric, box, {});
  CHECK(got == doctest::Approx(want).epsilon(1e-15));
  CHECK(got > 0.0);
  CHECK(got < 1.0);
}

TEST_CASE("one evaluation issues m completions") {
  const auto task = antonyms(20);
  CountingBox box;
  const env::ProjectionMatrix p(40, 4, 3);
  const MockDecoder dec(p, {.action_dim = 4});
  LlmEnvironment env(p, dec, box, task, {}, {});
  const auto out = env.evaluate(Eigen::VectorXd::Constant(4, 0.7), 0);
  CHECK(box.query_count() == 20);
  CHECK(out.reward == 0.0);  // echo never equals the antonym
  CHECK(out.instruction == dec.instruction_for({1, 1, 1, 1}));
}

TEST_CASE("fan-out keeps the serial result") {
  const auto task = antonyms(20);
  MockBlackBoxConfig c;
  c.kind = MockKind::kAntonym;
  MockBlackBox serial(c), parallel(c);
  const double a = evaluate_instruction("the opposite", task.validation_sample, task.metric, serial, {}, 1);
  const double b = evaluate_instruction("the opposite", task.validation_sample, task.metric, parallel, {}, 6);
  CHECK(a == b);
  CHECK(parallel.query_count() == 20);
}

TEST_CASE("a failed completion aborts the evaluation") {
  const auto task = antonyms(20);
  CountingBox box;
  box.fail_on = 3;
  try {
    evaluate_instruction("x", task.validation_sample, task.metric, box, {}, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEvaluationAborted);
  }
  CHECK_THROWS_AS(evaluate_instruction("x", {}, task.metric, box, {}), Error);
}

TEST_CASE("mock decoder recovers the cell of the action") {
  const env::ProjectionMatrix p(5 * 64, 10, 11);
  const MockDecoder dec(p, {});
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd a(10);
    for (int k = 0; k < 10; ++k) a(k) = u(rng);
    const auto cell = dec.cell_of(p.project(a));
    for (int k = 0; k < 10; ++k) {
      if (std::abs(a(k) - 0.5) > 1e-9) CHECK(cell[static_cast<std::size_t>(k)] == (a(k) > 0.5 ? 1 : 0));
    }
    const std::string ins = dec.decode(p.project(a), "");
    CHECK(dec.parse(ins) == cell);
  }
  CHECK(dec.best_instruction() == "Take a word and change it to its opposite meaning exactly");
  CHECK(dec.quality(dec.best_instruction()) == 1.0);
  CHECK(dec.quality("nonsense") == 0.0);
  std::vector<int> half{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  CHECK(dec.quality(dec.instruction_for(half)) == doctest::Approx(0.5));
}

TEST_CASE("gated lookup rewards grow with quality") {
  const auto task = antonyms(20);
  const env::ProjectionMatrix p(40, 10, 3);
  const MockDecoder dec(p, {});
  MockBlackBoxConfig c;
  c.kind = MockKind::kGatedLookup;
  c.table = mock_table(task);
  c.quality = [&dec](const std::string& s) { return dec.quality(s); };
  MockBlackBox box(c);
  for (int k = 0; k <= 10; ++k) {
    std::vector<int> cell(10, 0);
    for (int i = 0; i < k; ++i) cell[static_cast<std::size_t>(i)] = 1;
    const double r = evaluate_instruction(dec.instruction_for(cell), task.validation_sample, task.metric, box, {});
    CHECK(r == doctest::Approx(k / 10.0).epsilon(1e-12));
  }
}

TEST_CASE("mock table gates spread evenly per group") {
  const auto task = antonyms(20);
  const auto table = mock_table(task);
  CHECK(table.size() == task.validation.size() + task.test.size() + task.exemplars.size());
  CHECK(table.front().input == task.validation_sample.front().input);
  CHECK(table.front().gate == doctest::Approx(0.025));
  CHECK(table[19].gate == doctest::Approx(0.975));
}

TEST_CASE("reevaluation resamples the validation set by nonce") {
  const auto task = antonyms(5);
  MockBlackBoxConfig c;
  c.kind = MockKind::kAntonym;
  MockBlackBox box(c);
  const env::ProjectionMatrix p(40, 4, 3);
  const MockDecoder dec(p, {.action_dim = 4});
  LlmEnvConfig cfg;
  cfg.validation_size = 5;
  LlmEnvironment env(p, dec, box, task, {}, cfg);
  env::Outcome prev;
  prev.instruction = "the opposite";
  const auto a = env.reevaluate(Eigen::VectorXd::Zero(4), prev, 1);
  const auto b = env.reevaluate(Eigen::VectorXd::Zero(4), prev, 1);
  CHECK(a.reward == b.reward);
  CHECK(a.instruction == "the opposite");
  std::set<double> seen;
  for (std::uint64_t n = 0; n < 20; ++n) seen.insert(env.reevaluate(Eigen::VectorXd::Zero(4), prev, n).reward);
  CHECK(seen.size() > 1);
}

TEST_CASE("completion audit log records every query") {
  const auto path = std::filesystem::temp_directory_path() / "promptac_audit_test.jsonl";
  std::filesystem::remove(path);
  {
    MockBlackBoxConfig c;
    MockBlackBox box(c);
    box.set_audit(std::make_shared<AuditLog>(path));
    box.complete("Instruction: a\n\nInput: b\nOutput:");
    box.complete("Instruction: a\n\nInput: c\nOutput:");
  }
  std::ifstream in(path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = json::parse(line);
    CHECK(j.at("query") == n + 1);
    CHECK(j.contains("completion"));
    ++n;
  }
  CHECK(n == 2);
  std::filesystem::remove(path);
}

TEST_CASE("decoder request carries an N_z x width block") {
  HttpDecoderConfig cfg;
  const HttpDecoder dec(cfg);
  Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(5 * 5120, 0.0, 1.0);
  const json body = dec.request_body(z, "prompt");
  REQUIRE(body.at("soft_prompt").size() == 5);
  for (const auto& row : body.at("soft_prompt")) CHECK(row.size() == 5120);
  CHECK(body["soft_prompt"][1][0].get<double>() == z(5120));
  CHECK(body.at("max_tokens") == 64);
  CHECK(body.at("exemplar_prompt") == "prompt");
  CHECK_THROWS_AS(dec.request_body(Eigen::VectorXd::Zero(10), ""), Error);
}

TEST_CASE("chat request and response shapes") {
  ChatConfig cfg;
  cfg.api_key_env = "";
  const ChatBlackBox box(cfg);
  const json body = box.request_body("hi");
  CHECK(body.at("model") == "gpt-3.5-turbo");
  CHECK(body.at("temperature") == 0.0);
  CHECK(body.at("messages")[0].at("content") == "hi");
  CHECK(parse_chat_response(R"({"choices":[{"message":{"role":"assistant","content":"lost"}}]})") == "lost");
  for (const char* bad : {"nope", "{}", R"({"choices":[]})", R"({"choices":[{"message":{}}]})"}) {
    try {
      parse_chat_response(bad);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kProtocol);
    }
  }
  CHECK(parse_decode_response(R"({"instruction":"say it"})") == "say it");
  CHECK_THROWS_AS(parse_decode_response(R"({"text":"x"})"), Error);
}

TEST_CASE("backoff doubles up to the cap") {
  RetryPolicy r;
  CHECK(r.backoff(0).count() == 500);
  CHECK(r.backoff(1).count() == 1000);
  CHECK(r.backoff(3).count() == 4000);
  CHECK(r.backoff(10).count() == 8000);
}

TEST_CASE("chat client retries transient failures") {
  LocalServer s;
  std::atomic<int> calls{0};
  s.server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = ++calls;
    if (n == 1) {
      res.status = 503;
      return;
    }
    if (n == 2) {
      res.status = 429;
      return;
    }
    CHECK(req.get_header_value("Authorization") == "Bearer sk-test");
    res.set_content(R"({"choices":[{"message":{"content":"lost"}}]})", "application/json");
  });
  s.start();
  setenv("PROMPTAC_TEST_KEY", "sk-test", 1);
  ChatConfig cfg;
  cfg.base_url = s.url();
  cfg.api_key_env = "PROMPTAC_TEST_KEY";
  cfg.retry = fast_retry(4);
  ChatBlackBox box(cfg);
  CHECK(box.complete("Instruction: x\n\nInput: won\nOutput:") == "lost");
  CHECK(calls.load() == 3);
  CHECK(box.query_count() == 1);
}

TEST_CASE("client errors are not retried and exhausted retries surface") {
  LocalServer s;
  std::atomic<int> calls{0};
  s.server.Post("/bad", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 400;
  });
  s.server.Post("/down", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 500;
  });
  s.start();
  ChatConfig cfg;
  cfg.base_url = s.url();
  cfg.api_key_env = "";
  cfg.retry = fast_retry(3);
  cfg.path = "/bad";
  ChatBlackBox bad(cfg);
  try {
    bad.complete("p");
    FAIL("expected an error");
  } catch (const TransportError& e) {
    CHECK(e.status() == 400);
    CHECK_FALSE(e.retryable());
  }
  CHECK(calls.load() == 1);
  calls = 0;
  cfg.path = "/down";
  ChatBlackBox down(cfg);
  CHECK_THROWS_AS(down.complete("p"), TransportError);
  CHECK(calls.load() == 3);
}

TEST_CASE("http decoder round trip") {
  LocalServer s;
  s.server.Post("/v1/decode", [&](const httplib::Request& req, httplib::Response& res) {
    const auto j = json::parse(req.body);
    CHECK(j.at("soft_prompt").size() == 2);
    res.set_content(R"({"instruction":"change it to its opposite."})", "application/json");
  });
  s.start();
  HttpDecoderConfig cfg;
  cfg.base_url = s.url();
  cfg.soft_tokens = 2;
  cfg.token_width = 3;
  cfg.retry = fast_retry(2);
  const HttpDecoder dec(cfg);
  CHECK(clean_instruction(dec.decode(Eigen::VectorXd::Ones(6), "x")) == "change it to its opposite");
}
