// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace promptac::analysis {

struct WilcoxonResult {
  double statistic = 0.0;  // W = min(W+, W-)
  double w_plus = 0.0;     // rank sum of positive differences (a > b)
  double w_minus = 0.0;
  double p_value = 1.0;    // two-sided
  double z = 0.0;          // normal approximation only
  std::size_t n_effective = 0;
  bool exact = false;
  /// +1 when the first column tends to be larger, -1 when smaller, 0 if even.
  int direction = 0;
};

/// Two-sided signed-rank test on paired columns a and b. Zero differences are
/// dropped and tied magnitudes share their average rank. Fewer than 10
/// non-zero differences use exact enumeration of all sign patterns; otherwise
/// the normal approximation with tie correction (no continuity correction).
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

/// Scores per method (rows) and task (columns).
struct ScoreTable {
  std::vector<std::string> methods;
  std::vector<std::string> tasks;
  std::vector<std::vector<double>> scores;  // scores[method][task]

  const std::vector<double>& column(const std::string& method) const;
};

/// Reads "task,<method>,<method>,..." CSV with one task per row.
ScoreTable read_score_table(const std::filesystem::path& path);

struct MethodSummary {
  std::string method;
  double median = 0.0;
  std::size_t best_count = 0;  // ties credit every tied leader
};

std::vector<MethodSummary> summarize(const ScoreTable& table);

double median(std::vector<double> values);

struct QuantileRow {
  std::size_t step = 0;
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

/// Per-step min/median/max of best-reward curves; every curve must have the
/// same length.
std::vector<QuantileRow> aggregate_traces(const std::vector<std::vector<double>>& best_rewards);

/// The best_reward column of a trace.csv file.
std::vector<double> read_best_rewards(const std::filesystem::path& trace_csv);

}  // namespace promptac::analysis
