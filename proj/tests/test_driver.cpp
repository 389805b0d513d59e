// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "promptac/analysis.hpp"
#include "promptac/driver.hpp"
#include "promptac/errors.hpp"

using namespace promptac;
using namespace promptac::driver;
using nlohmann::json;

namespace {

// Small networks keep the loop tests fast; the loop logic does not depend on width.
json small_agent() { return {{"actor_hidden", {32}}, {"critic_hidden", {32}}}; }

RunConfig synthetic(int budget, int dim, std::uint64_t seed) {
  return config_from_json({{"budget", budget}, {"dim", dim}, {"seed", seed}, {"agent", small_agent()}});
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("promptac_driver_" + name);
  std::filesystem::remove_all(p);
  return p;
}

// Reward is a fixed function of the step; re-evaluation is scripted per step.
class ScriptedEnv final : public env::Environment {
 public:
  std::map<std::uint64_t, double> rewards;
  std::map<std::size_t, std::vector<double>> replays;
  mutable std::map<std::size_t, std::size_t> replayed;
  std::uint64_t fail_at = ~0ULL;

  env::Outcome evaluate(const Eigen::VectorXd&, std::uint64_t nonce) const override {
    if (nonce == fail_at) throw Error(ErrorCode::kTransport, "scripted failure");
    const auto it = rewards.find(nonce);
    return {it == rewards.end() ? 0.1 : it->second, "ins" + std::to_string(nonce + 1)};
  }
  env::Outcome reevaluate(const Eigen::VectorXd&, const env::Outcome& previous, std::uint64_t) const override {
    const std::size_t step = std::stoul(previous.instruction.substr(3));
    const auto& r = replays.at(step);
    return {r.at(replayed[step]++ % r.size()), previous.instruction};
  }
  int action_dim() const override { return 2; }
  std::string name() const override { return "scripted"; }
};

}  // namespace

TEST_CASE("split strings") {
  const Split s = parse_split("5:3");
  CHECK(s.p == 5);
  CHECK(s.k == 3);
  CHECK_THROWS_AS(parse_split("5"), Error);
  CHECK_THROWS_AS(parse_split("5:x"), Error);
  CHECK_THROWS_AS(parse_split("5:3:1"), Error);
}

TEST_CASE("config defaults and strict keys") {
  const RunConfig c = config_from_json(json::object());
  CHECK(c.budget == 165);
  CHECK(c.action_dim == 10);
  CHECK(c.soft_tokens == 5);
  CHECK(c.token_width == 5120);
  CHECK(c.exemplar_count == 5);
  CHECK(c.validation_size == 20);
  CHECK_FALSE(c.split.has_value());
  CHECK(c.agent.actor_hidden == std::vector<int>{1024, 256});
  CHECK(c.agent.critic_hidden == std::vector<int>{128, 128});
  CHECK(c.agent.actor_lr == 3e-4);
  CHECK(c.resolved_landscape().bumps.front().center == Eigen::VectorXd::Constant(10, 0.7));
  CHECK_THROWS_AS(config_from_json({{"bugdet", 10}}), Error);
  CHECK_THROWS_AS(config_from_json({{"agent", {{"lr", 1}}}}), Error);
  CHECK_THROWS_AS(config_from_json({{"budget", 15}, {"split", "5:3"}}), Error);
  CHECK_THROWS_AS(config_from_json({{"environment", "mock-llm"}}), Error);
  CHECK(config_from_json({{"split", {{"p", 2}, {"k", 2}}}}).split->p == 2);
}

TEST_CASE("config round trip") {
  const RunConfig a = config_from_json({{"budget", 40},
                                        {"dim", 3},
                                        {"seed", 9},
                                        {"split", "2:2"},
                                        {"variant", "one-critic"},
                                        {"landscape", {{"kind", "multi-bump"},
                                                       {"width", 0.2},
                                                       {"bumps", {{{"center", 0.7}, {"height", 1.0}},
                                                                  {{"center", {0.1, 0.2, 0.3}}, {"height", 0.5}}}}}}});
  const RunConfig b = config_from_json(to_json(a));
  CHECK(to_json(a) == to_json(b));
  CHECK(b.landscape.bumps.size() == 2);
  CHECK(b.landscape.bumps[1].center(2) == 0.3);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.0, 1.0, 0.1, 1.0 / 3.0, 2.5e-7}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("default run issues the full budget") {
  const RunConfig c = synthetic(165, 4, 1);
  const auto env = env::SyntheticLandscape(c.resolved_landscape());
  const RunResult r = optimize(c, env);
  CHECK(r.evaluations == 165);
  REQUIRE(r.trace.size() == 165);
  double running = -1.0;
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    CHECK(r.trace[i].step == i + 1);
    running = std::max(running, r.trace[i].reward);
    CHECK(r.trace[i].best_reward == running);
  }
  CHECK(r.best_reward == running);
  CHECK(r.trace[r.best.step - 1].reward == r.best_reward);
}

TEST_CASE("ties keep the earliest step") {
  ScriptedEnv env;
  env.rewards = {{2, 0.8}, {5, 0.8}};
  RunConfig c = config_from_json({{"budget", 12}, {"dim", 2}, {"agent", small_agent()}});
  const RunResult r = optimize(c, env);
  CHECK(r.best.step == 3);
  CHECK(r.best.instruction == "ins3");
}

TEST_CASE("failures abort with the step number") {
  ScriptedEnv env;
  env.fail_at = 6;
  const RunConfig c = config_from_json({{"budget", 12}, {"dim", 2}, {"agent", small_agent()}});
  try {
    optimize(c, env);
    FAIL("expected RunAborted");
  } catch (const RunAborted& e) {
    CHECK(e.step() == 7);
  }
}

TEST_CASE("re-ranking prefers the higher re-evaluated mean") {
  Candidate a{1, Eigen::VectorXd::Zero(1), 0.9, "A", {}, 0.0};
  Candidate b{2, Eigen::VectorXd::Zero(1), 0.8, "B", {}, 0.0};
  std::vector<Candidate> cands{a, b};
  const std::size_t w = rerank(cands, 3, [](const Candidate& c, int rep) {
    if (c.instruction == "A") return rep == 0 ? 0.9 : (rep == 1 ? 0.3 : 0.3);
    return 0.8;
  });
  CHECK(cands[w].instruction == "B");
  CHECK(cands[0].mean_reevaluation == doctest::Approx(0.5));
  CHECK(cands[1].mean_reevaluation == doctest::Approx(0.8));

  // Equal means: phase-1 reward, then the earlier step.
  std::vector<Candidate> tie{b, a};
  CHECK(tie[rerank(tie, 2, [](const Candidate&, int) { return 0.5; })].instruction == "A");
  Candidate c = b;
  c.step = 7;
  std::vector<Candidate> same{c, b};
  CHECK(same[rerank(same, 1, [](const Candidate&, int) { return 0.5; })].step == 2);
}

TEST_CASE("top candidates order by reward then step") {
  std::vector<Candidate> all;
  const double r[] = {0.2, 0.9, 0.5, 0.9, 0.1};
  for (std::size_t i = 0; i < 5; ++i) all.push_back({i + 1, Eigen::VectorXd::Zero(1), r[i], "", {}, 0.0});
  const auto top = top_candidates(all, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].step == 2);
  CHECK(top[1].step == 4);
  CHECK(top[2].step == 3);
}

TEST_CASE("split mode explores then re-ranks") {
  ScriptedEnv env;
  env.rewards = {{3, 0.9}, {7, 0.8}};
  env.replays[4] = {0.9, 0.3, 0.3};  // A: lucky once
  env.replays[8] = {0.8};            // B: steady
  for (std::size_t s = 1; s <= 30; ++s) env.replays.try_emplace(s, std::vector<double>{0.1});
  const RunConfig c = config_from_json({{"budget", 30}, {"dim", 2}, {"split", "2:3"}, {"agent", small_agent()}});
  const RunResult r = optimize(c, env);
  CHECK(r.evaluations == 30);
  REQUIRE(r.trace.size() == 30);
  CHECK(r.reranked.size() == 2);
  CHECK(r.best.instruction == "ins8");
  CHECK(r.best_reward == doctest::Approx(0.8));
  for (std::size_t i = 24; i < 30; ++i) CHECK(r.trace[i].best_reward == 0.9);
  CHECK(r.trace[24].reward == 0.9);
  CHECK(r.trace[25].reward == 0.3);
}

TEST_CASE("final test rejects blank instructions") {
  RunResult r;
  r.best.instruction = "  ";
  tasks::TaskSpec t;
  llm::MockBlackBox box(llm::MockBlackBoxConfig{});
  try {
    final_test(r, t, box, {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidCandidate);
  }
}

TEST_CASE("mock session writes a trace, a result and an audit") {
  const auto out = scratch("session");
  const RunConfig c = config_from_json({{"environment", "mock-llm"},
                                        {"task", PROMPTAC_TEST_DATA "/antonyms.json"},
                                        {"budget", 20},
                                        {"token_width", 64},
                                        {"seed", 3},
                                        {"audit", true},
                                        {"agent", small_agent()},
                                        {"out", out.string()}});
  Session s(c);
  const RunResult r = s.run();
  CHECK(r.completions == 20u * 20u);
  CHECK(r.decodes == 20);
  const auto rows = analysis::read_best_rewards(out / "trace.csv");
  CHECK(rows.size() == 20);
  const json result = json::parse(slurp(out / "result.json"));
  CHECK(result.at("evaluations") == 20);
  CHECK(result.at("audit").at("completions") == 400);
  CHECK(result.at("best").at("instruction") == r.best.instruction);
  CHECK_FALSE(result.at("config").contains("out"));
  std::ifstream audit(out / "audit.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(audit, line)) ++lines;
  CHECK(lines == 400);
  std::filesystem::remove_all(out);
}

TEST_CASE("identical seeds give identical files") {
  auto run = [](const std::string& name) {
    const auto out = scratch(name);
    const RunConfig c = config_from_json({{"environment", "mock-llm"},
                                          {"task", PROMPTAC_TEST_DATA "/antonyms.json"},
                                          {"budget", 25},
                                          {"token_width", 64},
                                          {"seed", 11},
                                          {"split", "2:2"},
                                          {"agent", small_agent()},
                                          {"out", out.string()}});
    Session(c).run();
    auto files = std::make_pair(slurp(out / "trace.csv"), slurp(out / "result.json"));
    std::filesystem::remove_all(out);
    return files;
  };
  const auto a = run("det_a");
  const auto b = run("det_b");
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first.starts_with("step,reward,best_reward,alpha,instruction\n"));
}
