// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptac/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include "promptac/errors.hpp"
#include "promptac/rng.hpp"

namespace promptac::tasks {
namespace {

using nlohmann::json;

std::vector<Example> parse_split(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ParseError(key, "task is missing '" + key + "'");
  const json& arr = j.at(key);
  if (!arr.is_array()) throw ParseError(key, "'" + key + "' must be a list");
  if (arr.empty()) throw ParseError(key, "'" + key + "' must not be empty");
  std::vector<Example> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = key + "[" + std::to_string(i) + "]";
    const json& e = arr[i];
    if (!e.is_object()) throw ParseError(where, where + " must be an object");
    if (!e.contains("input") || !e.at("input").is_string()) {
      throw ParseError(where + ".input", where + ".input must be a string");
    }
    Example ex;
    ex.input = e.at("input").get<std::string>();
    if (ex.input.empty()) throw ParseError(where + ".input", where + " has an empty input");
    if (!e.contains("output")) throw ParseError(where + ".output", where + " is missing 'output'");
    const json& o = e.at("output");
    if (o.is_string()) {
      ex.outputs.push_back(o.get<std::string>());
    } else if (o.is_array() && !o.empty()) {
      for (const auto& item : o) {
        if (!item.is_string()) throw ParseError(where + ".output", where + ".output items must be strings");
        ex.outputs.push_back(item.get<std::string>());
      }
    } else {
      throw ParseError(where + ".output", where + ".output must be a string or a non-empty list");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

json example_json(const Example& e) {
  json j;
  j["input"] = e.input;
  if (e.outputs.size() == 1) {
    j["output"] = e.outputs.front();
  } else {
    j["output"] = e.outputs;
  }
  return j;
}

std::vector<Example> sample(const std::vector<Example>& pool, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<Example> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(pool[idx[i]]);
  return out;
}

}  // namespace

TaskSpec parse_task(const json& j, const LoadOptions& options) {
  if (!j.is_object()) throw ParseError("", "task file must hold a JSON object");
  TaskSpec t;
  if (!j.contains("name") || !j.at("name").is_string()) throw ParseError("name", "task needs a string 'name'");
  t.name = j.at("name").get<std::string>();
  if (!j.contains("metric") || !j.at("metric").is_string()) {
    throw ParseError("metric", "task needs a string 'metric'");
  }
  t.metric = scoring::metric_from_string(j.at("metric").get<std::string>());
  t.exemplars = parse_split(j, "exemplars");
  t.validation = parse_split(j, "validation");
  t.test = parse_split(j, "test");
  if (j.contains("disjoint")) {
    if (!j.at("disjoint").is_boolean()) throw ParseError("disjoint", "'disjoint' must be a boolean");
    t.disjoint = j.at("disjoint").get<bool>();
  }
  if (t.disjoint) {
    std::set<std::string> seen;
    for (const auto& e : t.validation) seen.insert(e.input);
    for (const auto& e : t.test) {
      if (seen.count(e.input)) {
        throw Error(ErrorCode::kInvalidTask, "validation and test share the input '" + e.input + "'");
      }
    }
  }
  const std::size_t k = std::min(options.exemplar_count, t.exemplars.size());
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "exemplar count must be at least 1");
  t.exemplar_sample = exemplar_subset(t, k, options.seed);
  t.validation_sample = validation_subset(t, options.validation_size, options.seed);
  return t;
}

TaskSpec load_task(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidTask, "cannot open task file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("", "task file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_task(j, options);
}

json to_json(const TaskSpec& task) {
  json j;
  j["name"] = task.name;
  j["metric"] = scoring::to_string(task.metric);
  for (const char* key : {"exemplars", "validation", "test"}) j[key] = json::array();
  for (const auto& e : task.exemplars) j["exemplars"].push_back(example_json(e));
  for (const auto& e : task.validation) j["validation"].push_back(example_json(e));
  for (const auto& e : task.test) j["test"].push_back(example_json(e));
  if (task.disjoint) j["disjoint"] = true;
  return j;
}

std::vector<Example> exemplar_subset(const TaskSpec& task, std::size_t k, std::uint64_t seed) {
  if (k < 1 || k > task.exemplars.size()) {
    throw Error(ErrorCode::kInvalidArgument, "exemplar count " + std::to_string(k) + " outside [1, " +
                                                 std::to_string(task.exemplars.size()) + "]");
  }
  if (k == task.exemplars.size()) return task.exemplars;
  return sample(task.exemplars, k, derive_seed(seed, streams::kExemplarSubset));
}

std::vector<Example> validation_subset(const TaskSpec& task, std::size_t m, std::uint64_t seed) {
  if (m == 0 || m >= task.validation.size()) return task.validation;
  return sample(task.validation, m, derive_seed(seed, streams::kValidationSubsample));
}

}  // namespace promptac::tasks
