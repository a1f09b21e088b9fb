#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "receipt_ner/category.hpp"
#include "receipt_ner/corpus.hpp"
#include "receipt_ner/predictions.hpp"
#include "receipt_ner/unicode.hpp"

namespace receipt_ner {

enum class Judgement { tp, fp, fn };

inline std::string_view to_string(Judgement j) {
  switch (j) {
    case Judgement::tp: return "TP";
    case Judgement::fp: return "FP";
    case Judgement::fn: return "FN";
  }
  return "?";
}

struct ScoringConfig {
  double beta = 0.5;
  PerCategory<double> weights{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  // Also strip currency signs from non-numeric categories. Numeric
  // categories lose them through the digits-only rule regardless.
  bool strip_currency = false;

  void validate() const {
    if (!(beta > 0.0)) throw Error("beta must be positive");
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw Error("category weights must be non-negative");
      total += w;
    }
    if (!(total > 0.0)) throw Error("category weights must not all be zero");
  }
};

// Canonical form compared by the judge: no whitespace, no punctuation,
// full-width folded to half-width, and digits only for numeric categories.
inline std::string normalize(std::string_view surface, Category cat, const ScoringConfig& cfg = {}) {
  std::string out;
  for (char32_t c : unicode::decode(surface)) {
    if (unicode::is_whitespace(c) || unicode::is_punctuation(c)) continue;
    c = unicode::to_half_width(c);
    if (unicode::is_whitespace(c) || unicode::is_punctuation(c)) continue;
    if (is_numeric(cat)) {
      if (!unicode::is_ascii_digit(c)) continue;
    } else if (cfg.strip_currency && unicode::is_currency_sign(c)) {
      continue;
    }
    unicode::append(out, c);
  }
  return out;
}

inline Judgement judge(const Answer& answer, const std::vector<std::string>& truth, Category cat,
                       const ScoringConfig& cfg = {}) {
  if (answer.is_none()) return truth.empty() ? Judgement::tp : Judgement::fn;
  if (truth.empty()) return Judgement::fp;
  const auto hyp = normalize(answer.surface(), cat, cfg);
  for (const auto& t : truth) {
    if (normalize(t, cat, cfg) == hyp) return Judgement::tp;
  }
  return Judgement::fp;
}

struct CategoryScore {
  Category category = Category::shopname;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f_beta = 0.0;
};

// Standard weighted harmonic mean (1 + b^2) P R / (b^2 P + R); 0 when undefined.
inline double f_beta(double precision, double recall, double beta) {
  const double b2 = beta * beta;
  const double denom = b2 * precision + recall;
  if (precision <= 0.0 || recall <= 0.0 || denom <= 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / denom;
}

inline CategoryScore score_counts(Category cat, std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                  const ScoringConfig& cfg = {}) {
  CategoryScore s;
  s.category = cat;
  s.tp = tp;
  s.fp = fp;
  s.fn = fn;
  s.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f_beta = f_beta(s.precision, s.recall, cfg.beta);
  return s;
}

inline CategoryScore score_category(Category cat, const std::vector<Judgement>& judgements,
                                    const ScoringConfig& cfg = {}) {
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (Judgement j : judgements) {
    switch (j) {
      case Judgement::tp: ++tp; break;
      case Judgement::fp: ++fp; break;
      case Judgement::fn: ++fn; break;
    }
  }
  return score_counts(cat, tp, fp, fn, cfg);
}

struct ScoreReport {
  PerCategory<CategoryScore> per_category;
  double f_final = 0.0;
  Split split = Split::test;
  std::string config_id;
  std::optional<std::uint64_t> iterations;
  std::string manifest_digest;
};

// F_final = sum(w_i F_i) / sum(w_i) over exactly one score per category.
inline ScoreReport aggregate(const std::vector<CategoryScore>& scores, const ScoringConfig& cfg = {}) {
  cfg.validate();
  if (scores.size() != kNumCategories) {
    throw Error("aggregate needs exactly " + std::to_string(kNumCategories) + " category scores, got " +
                std::to_string(scores.size()));
  }
  ScoreReport report;
  std::set<Category> seen;
  for (const auto& s : scores) {
    if (!seen.insert(s.category).second) {
      throw Error("duplicate score for category " + std::string(japanese_label(s.category)));
    }
    report.per_category[index(s.category)] = s;
  }
  double num = 0.0, den = 0.0;
  for (Category c : kCategories) {
    num += cfg.weights[index(c)] * report.per_category[index(c)].f_beta;
    den += cfg.weights[index(c)];
  }
  report.f_final = num / den;
  return report;
}

// Judges every (receipt, category) pair of the corpus. Predictions must
// cover each pair exactly once.
inline ScoreReport score_predictions(const Corpus& corpus, const std::vector<PredictionRow>& rows,
                                     const ScoringConfig& cfg = {}) {
  cfg.validate();
  std::map<std::pair<std::string, Category>, const PredictionRow*> by_key;
  std::set<std::string> ids;
  for (const auto& r : corpus.records) ids.insert(r.id);
  std::vector<std::string> problems;
  for (const auto& row : rows) {
    if (!ids.count(row.receipt_id)) {
      problems.push_back("prediction for unknown receipt '" + row.receipt_id + "'");
      continue;
    }
    if (!by_key.emplace(std::make_pair(row.receipt_id, row.category), &row).second) {
      problems.push_back("duplicate prediction for (" + row.receipt_id + ", " +
                         std::string(japanese_label(row.category)) + ")");
    }
  }
  PerCategory<std::vector<Judgement>> judgements;
  for (const auto& record : corpus.records) {
    for (Category c : kCategories) {
      auto it = by_key.find({record.id, c});
      if (it == by_key.end()) {
        problems.push_back("missing prediction for (" + record.id + ", " + std::string(japanese_label(c)) + ")");
        continue;
      }
      judgements[index(c)].push_back(judge(it->second->answer, record.truth[index(c)], c, cfg));
    }
  }
  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " prediction coverage problem(s):";
    for (const auto& p : problems) msg += "\n  " + p;
    throw Error(msg);
  }
  std::vector<CategoryScore> scores;
  for (Category c : kCategories) scores.push_back(score_category(c, judgements[index(c)], cfg));
  auto report = aggregate(scores, cfg);
  report.split = corpus.split;
  return report;
}

// Highest F_final wins; ties go to fewer training iterations (unknown
// counts last), then to the lexicographically smaller config id.
inline const ScoreReport& select_best_report(const std::vector<ScoreReport>& reports) {
  if (reports.empty()) throw Error("no reports to select from");
  for (const auto& r : reports) {
    if (r.split != Split::validation) {
      throw Error("report '" + r.config_id + "' is on the " + std::string(to_string(r.split)) +
                  " split; selection uses validation reports only");
    }
  }
  auto key = [](const ScoreReport& r) {
    return std::make_tuple(-r.f_final, r.iterations.value_or(UINT64_MAX), r.config_id);
  };
  return *std::min_element(reports.begin(), reports.end(),
                           [&](const ScoreReport& a, const ScoreReport& b) { return key(a) < key(b); });
}

inline std::string select_best_config(const std::vector<ScoreReport>& reports) {
  return select_best_report(reports).config_id;
}

}  // namespace receipt_ner
