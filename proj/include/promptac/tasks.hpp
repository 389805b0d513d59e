// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "promptac/scoring.hpp"

namespace promptac::tasks {

/// One (input, output) pair. `outputs` holds every accepted reference.
struct Example {
  std::string input;
  std::vector<std::string> outputs;

  bool operator==(const Example&) const = default;
};

struct LoadOptions {
  std::size_t validation_size = 20;  // m; 0 keeps the whole split
  std::size_t exemplar_count = 5;
  std::uint64_t seed = 0;
};

struct TaskSpec {
  std::string name;
  scoring::MetricKind metric = scoring::MetricKind::kExactMatch;
  std::vector<Example> exemplars;
  std::vector<Example> validation;
  std::vector<Example> test;
  bool disjoint = false;

  // Seeded subsamples drawn at load time.
  std::vector<Example> exemplar_sample;
  std::vector<Example> validation_sample;
};

TaskSpec parse_task(const nlohmann::json& j, const LoadOptions& options = {});
TaskSpec load_task(const std::filesystem::path& path, const LoadOptions& options = {});

/// Writes the validated fields back in the file schema.
nlohmann::json to_json(const TaskSpec& task);

/// Seeded sample of `k` exemplars without replacement, in sampled order.
std::vector<Example> exemplar_subset(const TaskSpec& task, std::size_t k, std::uint64_t seed);

/// Seeded sample of `m` validation pairs (all of them when m covers the split).
std::vector<Example> validation_subset(const TaskSpec& task, std::size_t m, std::uint64_t seed);

}  // namespace promptac::tasks
