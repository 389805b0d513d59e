// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: run, split-run, test, analyze.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "promptac/analysis.hpp"
#include "promptac/csv.hpp"
#include "promptac/driver.hpp"
#include "promptac/errors.hpp"

using namespace promptac;

namespace {

struct RunFlags {
  std::string config;
  std::string task;
  std::optional<int> budget;
  std::optional<int> dim;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::string split;
  std::string out;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--task", f.task, "task file (llm and mock-llm environments)");
  cmd->add_option("--budget", f.budget, "number of reward evaluations");
  cmd->add_option("--dim", f.dim, "action dimension");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--variant", f.variant, "two-critic | one-critic | no-critic | direct-actor");
  cmd->add_option("--split", f.split, "budget split p:k");
  cmd->add_option("--out", f.out, "output directory");
}

driver::RunConfig resolve(const RunFlags& f) {
  nlohmann::json j = nlohmann::json::object();
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw Error(ErrorCode::kInvalidConfiguration, "cannot open config " + f.config);
    j = nlohmann::json::parse(in);
  }
  if (!f.task.empty()) j["task"] = f.task;
  if (f.budget) j["budget"] = *f.budget;
  if (f.dim) j["dim"] = *f.dim;
  if (f.seed) j["seed"] = *f.seed;
  if (!f.variant.empty()) j["variant"] = f.variant;
  if (!f.split.empty()) j["split"] = f.split;
  if (!f.out.empty()) j["out"] = f.out;
  return driver::config_from_json(j);
}

int do_run(driver::RunConfig config) {
  driver::Session session(std::move(config));
  const driver::RunResult r = session.run();
  std::cout << "best_reward " << driver::format_double(r.best_reward) << " step " << r.best.step << "\n";
  if (!r.best.instruction.empty()) std::cout << "instruction " << r.best.instruction << "\n";
  std::cout << "evaluations " << r.evaluations << " completions " << r.completions << "\n";
  std::cout << "wrote " << (session.config().out_dir / "result.json").string() << "\n";
  return 0;
}

int do_test(const RunFlags& f, const std::string& result_path) {
  driver::RunConfig config = resolve(f);
  if (config.environment == driver::EnvKind::kSynthetic) {
    throw Error(ErrorCode::kInvalidConfiguration, "test needs an llm or mock-llm configuration");
  }
  std::ifstream in(result_path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open result " + result_path);
  nlohmann::json stored = nlohmann::json::parse(in);
  driver::RunResult r;
  r.best.instruction = stored.at("best").at("instruction").get<std::string>();
  r.best.step = stored.at("best").at("step").get<std::size_t>();
  r.best.reward = stored.at("best").at("reward").get<double>();

  // The session rebuilds the task, projection and mocks exactly as the run did.
  config.audit = false;
  driver::Session session(config);
  auto box = driver::make_black_box(config, *session.task(), session.mock_decoder(), nullptr);
  const double score = driver::final_test(r, *session.task(), *box, config.templates, config.fan_out);
  stored["test_score"] = score;
  std::ofstream(result_path, std::ios::trunc) << stored.dump(2) << '\n';
  std::cout << "test_score " << driver::format_double(score) << " over " << session.task()->test.size()
            << " examples\n";
  return 0;
}

int do_analyze(const std::vector<std::string>& results, const std::vector<std::string>& traces,
               const std::string& table_path, const std::string& compare, const std::string& out) {
  std::filesystem::create_directories(out);
  analysis::ScoreTable table;
  if (!table_path.empty()) {
    table = analysis::read_score_table(table_path);
  } else if (!results.empty()) {
    // Average repeated (method, task) cells, e.g. several seeds.
    std::map<std::string, std::map<std::string, std::pair<double, int>>> cells;
    std::vector<std::string> task_order;
    for (const auto& path : results) {
      std::ifstream in(path);
      if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open result " + path);
      const auto j = nlohmann::json::parse(in);
      const std::string method = j.at("label").get<std::string>();
      const auto& cfg = j.at("config");
      const std::string task = cfg.contains("task") ? cfg.at("task").get<std::string>() : std::string("synthetic");
      const double score = j.contains("test_score") ? j.at("test_score").get<double>() : j.at("best_reward").get<double>();
      if (std::find(task_order.begin(), task_order.end(), task) == task_order.end()) task_order.push_back(task);
      auto& cell = cells[method][task];
      cell.first += score;
      cell.second += 1;
    }
    table.tasks = task_order;
    for (const auto& [method, per_task] : cells) {
      table.methods.push_back(method);
      std::vector<double> col;
      for (const auto& task : task_order) {
        const auto it = per_task.find(task);
        if (it == per_task.end()) throw Error(ErrorCode::kAlignment, method + " has no result for " + task);
        col.push_back(it->second.first / it->second.second);
      }
      table.scores.push_back(std::move(col));
    }
  }
  if (!table.methods.empty()) {
    std::ofstream s(std::filesystem::path(out) / "summary.csv");
    s << "method,median,best_count\n";
    for (const auto& m : analysis::summarize(table)) {
      s << csv::escape(m.method) << ',' << driver::format_double(m.median) << ',' << m.best_count << '\n';
      std::cout << m.method << " median " << driver::format_double(m.median) << " best " << m.best_count << "\n";
    }
  }
  if (!compare.empty()) {
    const auto colon = compare.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "--compare expects A:B");
    const auto w = analysis::wilcoxon_signed_rank(table.column(compare.substr(0, colon)),
                                                  table.column(compare.substr(colon + 1)));
    std::cout << "wilcoxon W " << driver::format_double(w.statistic) << " n " << w.n_effective << " p "
              << driver::format_double(w.p_value) << (w.exact ? " (exact)" : " (normal)") << " direction "
              << w.direction << "\n";
  }
  if (!traces.empty()) {
    std::vector<std::vector<double>> curves;
    for (const auto& t : traces) curves.push_back(analysis::read_best_rewards(t));
    std::ofstream q(std::filesystem::path(out) / "quantiles.csv");
    q << "step,min,median,max\n";
    for (const auto& row : analysis::aggregate_traces(curves)) {
      q << row.step << ',' << driver::format_double(row.min) << ',' << driver::format_double(row.median) << ','
        << driver::format_double(row.max) << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Actor-critic instruction search over a continuous soft-prompt space"};
  app.require_subcommand(1);

  RunFlags run_flags, split_flags, test_flags;
  auto* run = app.add_subcommand("run", "optimize for the full budget");
  add_run_flags(run, run_flags);
  auto* split = app.add_subcommand("split-run", "explore, then re-rank the top candidates (default split 5:3)");
  add_run_flags(split, split_flags);
  auto* test = app.add_subcommand("test", "score a stored result's best instruction on the test split");
  add_run_flags(test, test_flags);
  std::string result_path;
  test->add_option("--result", result_path, "result.json written by run")->required();

  auto* analyze = app.add_subcommand("analyze", "summaries, signed-rank comparison and trace quantiles");
  std::vector<std::string> results, traces;
  std::string table_path, compare, analyze_out = "analysis";
  analyze->add_option("--results", results, "result.json files");
  analyze->add_option("--traces", traces, "trace.csv files");
  analyze->add_option("--table", table_path, "score table CSV: task,<method>,...");
  analyze->add_option("--compare", compare, "signed-rank test between methods A:B");
  analyze->add_option("--out", analyze_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run) return do_run(resolve(run_flags));
    if (*split) {
      if (split_flags.split.empty()) split_flags.split = "5:3";
      return do_run(resolve(split_flags));
    }
    if (*test) return do_test(test_flags, result_path);
    if (*analyze) return do_analyze(results, traces, table_path, compare, analyze_out);
  } catch (const RunAborted& e) {
    std::cerr << "run aborted at step " << e.step() << ": " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
