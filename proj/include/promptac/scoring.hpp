// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

// Per-example scoring functions and readability indices. Every function here
// is pure.

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace promptac::scoring {

enum class MetricKind {
  kExactMatch,
  kF1Token,
  kSetMatch,
  kInList,
  kRouge1,
  kRouge2,
  kRougeL,
  kContainsAnswer,
};

const char* to_string(MetricKind m);
MetricKind metric_from_string(const std::string& s);  // throws kInvalidMetric

struct TextNormalization {
  bool lowercase = true;
  bool strip_punctuation = true;  // leading/trailing punctuation of every token
  bool collapse_whitespace = true;

  static TextNormalization strict() { return {false, false, false}; }
};

std::string normalize(std::string_view text, const TextNormalization& norm = {});
std::vector<std::string> tokenize(std::string_view text, const TextNormalization& norm = {});

enum class SetDelimiter { kComma, kWhitespace };

double em_score(std::string_view pred, std::string_view gold, const TextNormalization& norm = {});
double f1_token(std::string_view pred, std::string_view gold, const TextNormalization& norm = {});
double set_match(std::string_view pred, std::string_view gold, SetDelimiter delim = SetDelimiter::kComma,
                 const TextNormalization& norm = {});
double in_list(std::string_view pred, const std::vector<std::string>& gold, const TextNormalization& norm = {});
double rouge_n(std::string_view pred, std::string_view gold, int n, const TextNormalization& norm = {});
double rouge_l(std::string_view pred, std::string_view gold, const TextNormalization& norm = {});
/// 1 iff the normalized gold token sequence occurs contiguously in the prediction.
double contains_answer(std::string_view pred, std::string_view gold, const TextNormalization& norm = {});

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Scores `pred` against the references. Metrics other than in-list take the
/// maximum over the references; an empty reference list is an error.
double score(MetricKind metric, std::string_view pred, const std::vector<std::string>& gold,
             const TextNormalization& norm = {}, SetDelimiter delim = SetDelimiter::kComma);

struct Readability {
  double flesch_reading_ease = 0.0;
  double flesch_kincaid_grade = 0.0;
  double coleman_liau = 0.0;
  std::size_t words = 0;
  std::size_t sentences = 0;
  std::size_t syllables = 0;
  std::size_t letters = 0;
};

std::size_t count_syllables(std::string_view word);
Readability readability(std::string_view text);

}  // namespace promptac::scoring
