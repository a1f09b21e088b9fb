#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iosfwd>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "receipt_ner/category.hpp"
#include "receipt_ner/corpus.hpp"
#include "receipt_ner/unicode.hpp"

namespace receipt_ner {

struct Substitution {
  char32_t replacement;
  double probability;

  friend bool operator==(const Substitution&, const Substitution&) = default;
};

// Unigram character substitution channel: source -> {(replacement, p)}.
// Replacements of one source are kept sorted by code point so sampling
// order is fixed.
class ConfusionMatrix {
 public:
  static constexpr double kTolerance = 1e-9;

  void add(char32_t source, char32_t replacement, double probability) {
    if (source == replacement) throw Error("confusion pair maps a character to itself");
    if (!(probability > 0.0) || probability > 1.0) {
      throw Error("confusion probability must lie in (0, 1]");
    }
    auto& subs = entries_[source];
    auto it = std::lower_bound(subs.begin(), subs.end(), replacement,
                               [](const Substitution& s, char32_t r) { return s.replacement < r; });
    if (it != subs.end() && it->replacement == replacement) {
      throw Error("duplicate confusion pair " + unicode::encode(source) + " -> " + unicode::encode(replacement));
    }
    double total = probability;
    for (const auto& s : subs) total += s.probability;
    if (total > 1.0 + kTolerance) {
      throw Error("substitution probabilities for '" + unicode::encode(source) + "' exceed 1");
    }
    subs.insert(it, Substitution{replacement, probability});
  }

  double substitution_probability(char32_t source) const {
    auto it = entries_.find(source);
    if (it == entries_.end()) return 0.0;
    double total = 0.0;
    for (const auto& s : it->second) total += s.probability;
    return total;
  }

  const std::vector<Substitution>* find(char32_t source) const {
    auto it = entries_.find(source);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t pair_count() const {
    std::size_t n = 0;
    for (const auto& [src, subs] : entries_) n += subs.size();
    return n;
  }

  bool empty() const { return entries_.empty(); }
  const std::map<char32_t, std::vector<Substitution>>& entries() const { return entries_; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::map<char32_t, std::vector<Substitution>> entries_;
};

// Raw alignment statistics; the matrix is derived from these.
struct ConfusionCounts {
  std::map<std::pair<char32_t, char32_t>, std::uint64_t> substitutions;
  std::map<char32_t, std::uint64_t> occurrences;
  std::uint64_t insertions = 0;
  std::uint64_t deletions = 0;

  ConfusionMatrix to_matrix() const {
    ConfusionMatrix m;
    for (const auto& [pair, count] : substitutions) {
      const auto total = occurrences.at(pair.first);
      m.add(pair.first, pair.second, static_cast<double>(count) / static_cast<double>(total));
    }
    return m;
  }
};

enum class EditOp { match, substitute, insert, remove };

struct AlignedPair {
  EditOp op;
  char32_t truth;  // 0 for insertions
  char32_t ocr;    // 0 for deletions
};

// Unit-cost Levenshtein alignment. On equal-cost paths the backtrace takes
// the diagonal (match/substitution) first, then deletion, then insertion.
inline std::vector<AlignedPair> align(std::u32string_view truth, std::u32string_view ocr) {
  const std::size_t n = truth.size(), m = ocr.size();
  const std::size_t width = m + 1;
  std::vector<std::uint32_t> dp((n + 1) * width);
  for (std::size_t j = 0; j <= m; ++j) dp[j] = static_cast<std::uint32_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    dp[i * width] = static_cast<std::uint32_t>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const std::uint32_t diag = dp[(i - 1) * width + j - 1] + (truth[i - 1] == ocr[j - 1] ? 0u : 1u);
      const std::uint32_t del = dp[(i - 1) * width + j] + 1;
      const std::uint32_t ins = dp[i * width + j - 1] + 1;
      dp[i * width + j] = std::min({diag, del, ins});
    }
  }
  std::vector<AlignedPair> path;
  path.reserve(std::max(n, m));
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const std::uint32_t here = dp[i * width + j];
    if (i > 0 && j > 0) {
      const bool same = truth[i - 1] == ocr[j - 1];
      if (here == dp[(i - 1) * width + j - 1] + (same ? 0u : 1u)) {
        path.push_back({same ? EditOp::match : EditOp::substitute, truth[i - 1], ocr[j - 1]});
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && here == dp[(i - 1) * width + j] + 1) {
      path.push_back({EditOp::remove, truth[i - 1], 0});
      --i;
    } else {
      path.push_back({EditOp::insert, 0, ocr[j - 1]});
      --j;
    }
  }
  std::reverse(path.begin(), path.end());
  return path;
}

using TextPair = std::pair<std::string, std::string>;

inline ConfusionCounts count_confusions(const std::vector<TextPair>& pairs) {
  if (pairs.empty()) throw Error("no text pairs to estimate a confusion matrix from");
  ConfusionCounts counts;
  for (const auto& [truth_text, ocr_text] : pairs) {
    if (truth_text.empty()) throw Error("empty truth text in confusion estimation input");
    const auto truth = unicode::decode(truth_text);
    const auto ocr = unicode::decode(ocr_text);
    for (char32_t c : truth) ++counts.occurrences[c];
    for (const auto& step : align(truth, ocr)) {
      switch (step.op) {
        case EditOp::substitute: ++counts.substitutions[{step.truth, step.ocr}]; break;
        case EditOp::insert: ++counts.insertions; break;
        case EditOp::remove: ++counts.deletions; break;
        case EditOp::match: break;
      }
    }
  }
  return counts;
}

inline ConfusionMatrix estimate_confusion_matrix(const std::vector<TextPair>& pairs) {
  return count_confusions(pairs).to_matrix();
}

// ---- seeded sampling -------------------------------------------------------

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Stable per-sample seed: FNV-1a over (base LE, id bytes, 0x00, repeat LE), then mix64.
inline std::uint64_t derive_seed(std::uint64_t base_seed, std::string_view record_id, std::uint32_t repeat) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  auto feed = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001B3ull;
  };
  for (int k = 0; k < 8; ++k) feed(static_cast<std::uint8_t>(base_seed >> (8 * k)));
  for (char ch : record_id) feed(static_cast<std::uint8_t>(ch));
  feed(0);
  for (int k = 0; k < 4; ++k) feed(static_cast<std::uint8_t>(repeat >> (8 * k)));
  return mix64(h);
}

// Top 53 bits of one mt19937_64 draw; identical on every conforming platform.
inline double next_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::string corrupt_text(std::string_view text, const ConfusionMatrix& matrix, std::uint64_t seed) {
  const auto chars = unicode::decode(text);
  if (matrix.empty()) return std::string(text);
  std::mt19937_64 rng(seed);
  std::string out;
  out.reserve(text.size());
  for (char32_t c : chars) {
    const double u = next_unit(rng);
    char32_t emitted = c;
    if (const auto* subs = matrix.find(c)) {
      double cumulative = 0.0;
      for (const auto& s : *subs) {
        cumulative += s.probability;
        if (u < cumulative) {
          emitted = s.replacement;
          break;
        }
      }
    }
    unicode::append(out, emitted);
  }
  return out;
}

// Extension hook: random newline insertions after characters. Disabled
// unless rate > 0. Changes text length, unlike corrupt_text.
inline std::string insert_newlines(std::string_view text, double rate, std::uint64_t seed) {
  if (rate <= 0.0) return std::string(text);
  std::mt19937_64 rng(mix64(seed ^ 0x6E65776C696E6521ull));
  std::string out;
  for (char32_t c : unicode::decode(text)) {
    unicode::append(out, c);
    if (c != U'\n' && next_unit(rng) < rate) out.push_back('\n');
  }
  return out;
}

// ---- dataset variants ------------------------------------------------------

enum class Variant { truth, ocr1, ocr10 };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::truth: return "truth";
    case Variant::ocr1: return "ocr1";
    case Variant::ocr10: return "ocr10";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "truth") return Variant::truth;
  if (s == "ocr1") return Variant::ocr1;
  if (s == "ocr10") return Variant::ocr10;
  throw Error("unknown variant '" + std::string(s) + "' (expected truth, ocr1 or ocr10)");
}

struct CorruptionSpec {
  Variant variant = Variant::truth;
  std::uint64_t base_seed = 0;
  double newline_insertion_rate = 0.0;

  std::uint32_t repeats() const { return variant == Variant::ocr10 ? 10u : 1u; }
};

struct GeneratedSample {
  std::string id;
  std::uint32_t repeat = 0;
  std::string text;
  PerCategory<Answer> answers;

  friend bool operator==(const GeneratedSample&, const GeneratedSample&) = default;
};

inline std::vector<GeneratedSample> generate_training_variant(const Corpus& corpus, const ConfusionMatrix& matrix,
                                                              const CorruptionSpec& spec,
                                                              Warnings* warnings = nullptr) {
  if (corpus.split != Split::train) throw Error("training variants are generated from the train split only");
  if (spec.variant != Variant::truth && matrix.empty() && warnings) {
    warnings->push_back("empty confusion matrix: " + std::string(to_string(spec.variant)) +
                        " output equals the truth variant");
  }
  std::vector<GeneratedSample> out;
  out.reserve(corpus.records.size() * spec.repeats());
  for (const auto& record : corpus.records) {
    PerCategory<Answer> answers;
    for (Category c : kCategories) answers[index(c)] = first_truth(record, c);
    for (std::uint32_t r = 0; r < spec.repeats(); ++r) {
      GeneratedSample s{record.id, r, record.text, answers};
      if (spec.variant != Variant::truth) {
        const auto seed = derive_seed(spec.base_seed, record.id, r);
        s.text = insert_newlines(corrupt_text(record.text, matrix, seed), spec.newline_insertion_rate, seed);
      }
      out.push_back(std::move(s));
    }
  }
  std::sort(out.begin(), out.end(), [](const GeneratedSample& a, const GeneratedSample& b) {
    return std::tie(a.id, a.repeat) < std::tie(b.id, b.repeat);
  });
  return out;
}

// ---- file formats ----------------------------------------------------------

namespace detail {

inline std::string escape_tsv_char(char32_t c) {
  switch (c) {
    case U'\t': return "\\t";
    case U'\n': return "\\n";
    case U'\r': return "\\r";
    case U'\\': return "\\\\";
    default: return unicode::encode(c);
  }
}

inline char32_t unescape_tsv_char(std::string_view field, const std::string& source, std::size_t line) {
  if (field == "\\t") return U'\t';
  if (field == "\\n") return U'\n';
  if (field == "\\r") return U'\r';
  if (field == "\\\\") return U'\\';
  const auto cps = unicode::decode(field);
  if (cps.size() != 1) throw ParseError(source, line, "expected exactly one character, got '" + std::string(field) + "'");
  return cps.front();
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, '\t')) fields.push_back(field);
  if (!line.empty() && line.back() == '\t') fields.emplace_back();
  return fields;
}

}  // namespace detail

inline constexpr std::string_view kMatrixHeader = "source_char\treplacement_char\tprobability";

// TSV, one pair per row. Tab, newline, CR and backslash are escaped as \t \n \r \\.
inline void write_matrix(std::ostream& out, const ConfusionMatrix& m) {
  out << kMatrixHeader << '\n';
  for (const auto& [src, subs] : m.entries()) {
    for (const auto& s : subs) {
      std::ostringstream p;
      p << std::setprecision(17) << s.probability;
      out << detail::escape_tsv_char(src) << '\t' << detail::escape_tsv_char(s.replacement) << '\t' << p.str() << '\n';
    }
  }
}

inline ConfusionMatrix read_matrix(std::istream& in, const std::string& source = "<stream>") {
  ConfusionMatrix m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (lineno == 1 && line == kMatrixHeader) continue;
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 3) throw ParseError(source, lineno, "expected 3 tab-separated columns");
    const char32_t src = detail::unescape_tsv_char(fields[0], source, lineno);
    const char32_t rep = detail::unescape_tsv_char(fields[1], source, lineno);
    double p = 0.0;
    try {
      std::size_t used = 0;
      p = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ParseError(source, lineno, "bad probability '" + fields[2] + "'");
    }
    try {
      m.add(src, rep, p);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return m;
}

inline ConfusionMatrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open confusion matrix '" + path + "'");
  return read_matrix(in, path);
}

inline void save_matrix(const std::string& path, const ConfusionMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write confusion matrix '" + path + "'");
  write_matrix(out, m);
}

// Counts sidecar for re-estimation: source, replacement, count, source occurrences.
inline void write_counts(std::ostream& out, const ConfusionCounts& counts) {
  out << "source_char\treplacement_char\tcount\tsource_occurrences\n";
  for (const auto& [pair, n] : counts.substitutions) {
    out << detail::escape_tsv_char(pair.first) << '\t' << detail::escape_tsv_char(pair.second) << '\t' << n << '\t'
        << counts.occurrences.at(pair.first) << '\n';
  }
  out << "# insertions\t" << counts.insertions << "\n# deletions\t" << counts.deletions << '\n';
}

inline nlohmann::ordered_json to_json(const GeneratedSample& s) {
  nlohmann::ordered_json answers = nlohmann::ordered_json::object();
  for (Category c : kCategories) answers[std::string(japanese_label(c))] = s.answers[index(c)].to_prompt_string();
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["repeat"] = s.repeat;
  j["text"] = s.text;
  j["answers"] = answers;
  return j;
}

inline void write_variant(std::ostream& out, const std::vector<GeneratedSample>& samples) {
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
}

inline std::vector<GeneratedSample> read_variant(std::istream& in, const std::string& source = "<stream>") {
  std::vector<GeneratedSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (unicode::trim_view(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      GeneratedSample s;
      s.id = j.at("id").get<std::string>();
      s.repeat = j.at("repeat").get<std::uint32_t>();
      s.text = j.at("text").get<std::string>();
      for (const auto& [key, value] : j.at("answers").items()) {
        const auto v = value.get<std::string>();
        s.answers[index(category_or_throw(key))] = v == kNoneLiteral ? Answer::none() : Answer(v);
      }
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, lineno, e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return out;
}

}  // namespace receipt_ner
