// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptac/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "promptac/csv.hpp"
#include "promptac/errors.hpp"

namespace promptac::analysis {
namespace {

constexpr std::size_t kExactBelow = 10;
constexpr double kTieTolerance = 1e-12;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Exact two-sided p: 2 * P(T <= w) under random signs, capped at 1. Ranks are
// doubled so tied half-ranks become integers and a subset-sum count works.
double exact_p(const std::vector<double>& ranks, double w) {
  std::vector<long> twice(ranks.size());
  long total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    twice[i] = std::lround(2.0 * ranks[i]);
    total += twice[i];
  }
  std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
  ways[0] = 1.0;
  for (long r : twice) {
    for (long s = total; s >= r; --s) ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - r)];
  }
  const long limit = std::lround(2.0 * w);
  double below = 0.0;
  for (long s = 0; s <= limit; ++s) below += ways[static_cast<std::size_t>(s)];
  const double p = 2.0 * below / std::ldexp(1.0, static_cast<int>(ranks.size()));
  return std::min(1.0, p);
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kAlignment, "paired columns differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    if (diff != 0.0) d.push_back(diff);
  }
  if (d.size() < 5) {
    throw Error(ErrorCode::kInsufficientData,
                "signed-rank test needs at least 5 non-zero differences, got " + std::to_string(d.size()));
  }
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });

  std::vector<double> rank(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(std::abs(d[order[j + 1]]) - std::abs(d[order[i]])) <= kTieTolerance) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }

  WilcoxonResult r;
  r.n_effective = n;
  for (std::size_t i = 0; i < n; ++i) (d[i] > 0 ? r.w_plus : r.w_minus) += rank[i];
  r.statistic = std::min(r.w_plus, r.w_minus);
  r.direction = r.w_plus > r.w_minus ? 1 : (r.w_plus < r.w_minus ? -1 : 0);

  if (n < kExactBelow) {
    r.exact = true;
    r.p_value = exact_p(rank, r.statistic);
    return r;
  }
  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  r.z = (r.statistic - mean) / std::sqrt(var);
  r.p_value = std::min(1.0, 2.0 * normal_cdf(r.z));
  return r;
}

const std::vector<double>& ScoreTable::column(const std::string& method) const {
  const auto it = std::find(methods.begin(), methods.end(), method);
  if (it == methods.end()) throw Error(ErrorCode::kInvalidArgument, "no method named '" + method + "'");
  return scores[static_cast<std::size_t>(it - methods.begin())];
}

ScoreTable read_score_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open score table " + path.string());
  ScoreTable t;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("header", "score table is empty");
  const auto header = csv::split_line(line);
  if (header.size() < 2) throw ParseError("header", "score table needs a task column and at least one method");
  t.methods.assign(header.begin() + 1, header.end());
  t.scores.assign(t.methods.size(), {});
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = csv::split_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(row), "row " + std::to_string(row) + " has the wrong column count");
    }
    t.tasks.push_back(cells[0]);
    for (std::size_t m = 0; m < t.methods.size(); ++m) {
      try {
        t.scores[m].push_back(std::stod(cells[m + 1]));
      } catch (const std::exception&) {
        throw ParseError("row " + std::to_string(row), "non-numeric score '" + cells[m + 1] + "'");
      }
    }
  }
  return t;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::kInsufficientData, "median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<MethodSummary> summarize(const ScoreTable& table) {
  if (table.methods.empty() || table.tasks.empty()) {
    throw Error(ErrorCode::kInsufficientData, "summary needs at least one method and one task");
  }
  std::vector<MethodSummary> out;
  for (std::size_t m = 0; m < table.methods.size(); ++m) {
    out.push_back(MethodSummary{table.methods[m], median(table.scores[m]), 0});
  }
  for (std::size_t t = 0; t < table.tasks.size(); ++t) {
    double best = table.scores[0][t];
    for (std::size_t m = 1; m < table.methods.size(); ++m) best = std::max(best, table.scores[m][t]);
    for (std::size_t m = 0; m < table.methods.size(); ++m) {
      if (table.scores[m][t] >= best - kTieTolerance) ++out[m].best_count;
    }
  }
  return out;
}

std::vector<QuantileRow> aggregate_traces(const std::vector<std::vector<double>>& best_rewards) {
  if (best_rewards.empty()) throw Error(ErrorCode::kInsufficientData, "no traces to aggregate");
  const std::size_t steps = best_rewards.front().size();
  for (const auto& t : best_rewards) {
    if (t.size() != steps) {
      throw Error(ErrorCode::kAlignment, "traces have different step counts (" + std::to_string(steps) + " vs " +
                                             std::to_string(t.size()) + ")");
    }
  }
  std::vector<QuantileRow> rows;
  std::vector<double> col(best_rewards.size());
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < best_rewards.size(); ++i) col[i] = best_rewards[i][s];
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    rows.push_back(QuantileRow{s + 1, *lo, median(col), *hi});
  }
  return rows;
}

std::vector<double> read_best_rewards(const std::filesystem::path& trace_csv) {
  std::ifstream in(trace_csv);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open trace " + trace_csv.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("header", "trace " + trace_csv.string() + " is empty");
  const auto header = csv::split_line(line);
  const auto it = std::find(header.begin(), header.end(), "best_reward");
  if (it == header.end()) throw ParseError("best_reward", "trace has no best_reward column");
  const auto col = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  for (const auto& row : csv::read_records(in)) {
    if (row.size() <= col) throw ParseError("best_reward", "short trace row");
    out.push_back(std::stod(row[col]));
  }
  return out;
}

}  // namespace promptac::analysis
