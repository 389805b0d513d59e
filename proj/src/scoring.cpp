// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptac/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "promptac/errors.hpp"

namespace promptac::scoring {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string> split_ws(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string strip_token(const std::string& tok) {
  std::size_t b = 0, e = tok.size();
  while (b < e && is_punct(tok[b])) ++b;
  while (e > b && is_punct(tok[e - 1])) --e;
  return tok.substr(b, e - b);
}

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& toks, int n) {
  std::map<Ngram, std::size_t> counts;
  if (static_cast<int>(toks.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++counts[Ngram(toks.begin() + i, toks.begin() + i + n)];
  return counts;
}

double f_measure(double overlap, double pred_total, double gold_total) {
  if (pred_total == 0.0 || gold_total == 0.0 || overlap == 0.0) return 0.0;
  const double p = overlap / pred_total;
  const double r = overlap / gold_total;
  return 2.0 * p * r / (p + r);
}

std::set<std::string> split_items(std::string_view text, SetDelimiter delim, const TextNormalization& norm) {
  std::set<std::string> items;
  if (delim == SetDelimiter::kWhitespace) {
    for (auto& t : tokenize(text, norm)) items.insert(std::move(t));
    return items;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    std::string item = normalize(text.substr(start, end - start), norm);
    if (!item.empty()) items.insert(std::move(item));
    start = end + 1;
  }
  return items;
}

}  // namespace

const char* to_string(MetricKind m) {
  switch (m) {
    case MetricKind::kExactMatch: return "exact-match";
    case MetricKind::kF1Token: return "f1-token";
    case MetricKind::kSetMatch: return "set-match";
    case MetricKind::kInList: return "in-list";
    case MetricKind::kRouge1: return "rouge-1";
    case MetricKind::kRouge2: return "rouge-2";
    case MetricKind::kRougeL: return "rouge-l";
    case MetricKind::kContainsAnswer: return "contains-answer";
  }
  return "exact-match";
}

MetricKind metric_from_string(const std::string& s) {
  for (auto m : {MetricKind::kExactMatch, MetricKind::kF1Token, MetricKind::kSetMatch, MetricKind::kInList,
                 MetricKind::kRouge1, MetricKind::kRouge2, MetricKind::kRougeL, MetricKind::kContainsAnswer}) {
    if (s == to_string(m)) return m;
  }
  throw Error(ErrorCode::kInvalidMetric, "unknown metric '" + s + "'");
}

std::vector<std::string> tokenize(std::string_view text, const TextNormalization& norm) {
  std::vector<std::string> toks;
  for (auto& raw : split_ws(text)) {
    std::string t = norm.strip_punctuation ? strip_token(raw) : raw;
    if (norm.lowercase) {
      std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    }
    if (!t.empty()) toks.push_back(std::move(t));
  }
  return toks;
}

std::string normalize(std::string_view text, const TextNormalization& norm) {
  if (!norm.collapse_whitespace && !norm.strip_punctuation) {
    std::string out(text);
    if (norm.lowercase) {
      std::transform(out.begin(), out.end(), out.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    }
    return out;
  }
  // Token-wise processing; without whitespace collapsing the original
  // separators between surviving tokens are kept.
  if (norm.collapse_whitespace) {
    std::string out;
    for (const auto& t : tokenize(text, norm)) {
      if (!out.empty()) out += ' ';
      out += t;
    }
    return out;
  }
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = i;
    while (j < text.size() && is_space(text[j])) ++j;
    const std::string_view gap = text.substr(i, j - i);
    std::size_t k = j;
    while (k < text.size() && !is_space(text[k])) ++k;
    auto toks = tokenize(text.substr(j, k - j), norm);
    if (!toks.empty()) {
      out += gap;
      out += toks.front();
    }
    i = k;
  }
  return out;
}

double em_score(std::string_view pred, std::string_view gold, const TextNormalization& norm) {
  return normalize(pred, norm) == normalize(gold, norm) ? 1.0 : 0.0;
}

double f1_token(std::string_view pred, std::string_view gold, const TextNormalization& norm) {
  const auto p = tokenize(pred, norm);
  const auto g = tokenize(gold, norm);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::map<std::string, std::size_t> gc;
  for (const auto& t : g) ++gc[t];
  std::size_t overlap = 0;
  for (const auto& t : p) {
    auto it = gc.find(t);
    if (it != gc.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  return f_measure(static_cast<double>(overlap), static_cast<double>(p.size()), static_cast<double>(g.size()));
}

double set_match(std::string_view pred, std::string_view gold, SetDelimiter delim, const TextNormalization& norm) {
  return split_items(pred, delim, norm) == split_items(gold, delim, norm) ? 1.0 : 0.0;
}

double in_list(std::string_view pred, const std::vector<std::string>& gold, const TextNormalization& norm) {
  if (gold.empty()) throw Error(ErrorCode::kInvalidGold, "in-list needs at least one gold item");
  const std::string p = normalize(pred, norm);
  for (const auto& g : gold) {
    if (normalize(g, norm) == p) return 1.0;
  }
  return 0.0;
}

double rouge_n(std::string_view pred, std::string_view gold, int n, const TextNormalization& norm) {
  if (n != 1 && n != 2) throw Error(ErrorCode::kInvalidArgument, "rouge_n supports n = 1 or 2");
  const auto pc = ngram_counts(tokenize(pred, norm), n);
  const auto gc = ngram_counts(tokenize(gold, norm), n);
  std::size_t overlap = 0, pt = 0, gt = 0;
  for (const auto& [k, c] : pc) {
    pt += c;
    auto it = gc.find(k);
    if (it != gc.end()) overlap += std::min(c, it->second);
  }
  for (const auto& [k, c] : gc) gt += c;
  return f_measure(static_cast<double>(overlap), static_cast<double>(pt), static_cast<double>(gt));
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::string_view pred, std::string_view gold, const TextNormalization& norm) {
  const auto p = tokenize(pred, norm);
  const auto g = tokenize(gold, norm);
  return f_measure(static_cast<double>(lcs_length(p, g)), static_cast<double>(p.size()),
                   static_cast<double>(g.size()));
}

double contains_answer(std::string_view pred, std::string_view gold, const TextNormalization& norm) {
  const auto p = tokenize(pred, norm);
  const auto g = tokenize(gold, norm);
  if (g.empty()) return p.empty() ? 1.0 : 0.0;
  return std::search(p.begin(), p.end(), g.begin(), g.end()) != p.end() ? 1.0 : 0.0;
}

double score(MetricKind metric, std::string_view pred, const std::vector<std::string>& gold,
             const TextNormalization& norm, SetDelimiter delim) {
  if (gold.empty()) throw Error(ErrorCode::kInvalidGold, "no reference answers");
  if (metric == MetricKind::kInList) return in_list(pred, gold, norm);
  double best = 0.0;
  for (const auto& g : gold) {
    double s = 0.0;
    switch (metric) {
      case MetricKind::kExactMatch: s = em_score(pred, g, norm); break;
      case MetricKind::kF1Token: s = f1_token(pred, g, norm); break;
      case MetricKind::kSetMatch: s = set_match(pred, g, delim, norm); break;
      case MetricKind::kRouge1: s = rouge_n(pred, g, 1, norm); break;
      case MetricKind::kRouge2: s = rouge_n(pred, g, 2, norm); break;
      case MetricKind::kRougeL: s = rouge_l(pred, g, norm); break;
      case MetricKind::kContainsAnswer: s = contains_answer(pred, g, norm); break;
      case MetricKind::kInList: break;
    }
    best = std::max(best, s);
  }
  return best;
}

std::size_t count_syllables(std::string_view word) {
  std::string w;
  for (char c : word) {
    if (is_alpha(c)) w += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (w.empty()) return 0;
  auto vowel = [](char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y'; };
  std::size_t groups = 0;
  bool prev = false;
  for (char c : w) {
    const bool v = vowel(c);
    if (v && !prev) ++groups;
    prev = v;
  }
  // Silent final e ("take", "change"), but not "-le" ("table").
  if (groups > 1 && w.back() == 'e' && !(w.size() >= 2 && w[w.size() - 2] == 'l') &&
      !vowel(w[w.size() - 2])) {
    --groups;
  }
  return std::max<std::size_t>(groups, 1);
}

Readability readability(std::string_view text) {
  Readability r;
  bool pending = false;  // words seen since the last sentence terminator
  for (const auto& raw : split_ws(text)) {
    std::size_t letters = 0;
    for (char c : raw) letters += is_alpha(c) ? 1 : 0;
    if (letters > 0) {
      ++r.words;
      r.letters += letters;
      r.syllables += count_syllables(raw);
      pending = true;
    }
    const char last = raw.back();
    if ((last == '.' || last == '!' || last == '?') && pending) {
      ++r.sentences;
      pending = false;
    }
  }
  if (pending) ++r.sentences;
  if (r.words == 0) throw Error(ErrorCode::kInvalidArgument, "readability needs at least one word");
  const double w = static_cast<double>(r.words);
  const double s = static_cast<double>(r.sentences);
  const double syl = static_cast<double>(r.syllables);
  r.flesch_reading_ease = 206.835 - 1.015 * (w / s) - 84.6 * (syl / w);
  r.flesch_kincaid_grade = 0.39 * (w / s) + 11.8 * (syl / w) - 15.59;
  r.coleman_liau = 0.0588 * (100.0 * static_cast<double>(r.letters) / w) - 0.296 * (100.0 * s / w) - 15.8;
  return r;
}

}  // namespace promptac::scoring
