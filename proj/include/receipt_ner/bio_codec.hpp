#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "receipt_ner/category.hpp"
#include "receipt_ner/corpus.hpp"
#include "receipt_ner/predictions.hpp"
#include "receipt_ner/unicode.hpp"

namespace receipt_ner {

// IO tagging: no B- tags, plus a dedicated whitespace tag "_".
enum class CharTag : std::uint8_t { outside, whitespace, shopname, address, item1, telephone, date, total };

inline constexpr std::size_t kNumTags = 8;

constexpr CharTag inside(Category c) { return static_cast<CharTag>(index(c) + 2); }

constexpr std::optional<Category> category_of(CharTag t) {
  if (t == CharTag::outside || t == CharTag::whitespace) return std::nullopt;
  return static_cast<Category>(static_cast<std::size_t>(t) - 2);
}

inline std::string tag_name(CharTag t) {
  if (t == CharTag::outside) return "O";
  if (t == CharTag::whitespace) return "_";
  return "I-" + std::string(japanese_label(*category_of(t)));
}

inline CharTag parse_tag(std::string_view s) {
  if (s == "O") return CharTag::outside;
  if (s == "_") return CharTag::whitespace;
  if (s.starts_with("I-")) {
    if (auto c = parse_category(s.substr(2))) return inside(*c);
  }
  throw Error("unknown tag '" + std::string(s) + "'");
}

struct TagSequence {
  std::u32string chars;
  std::vector<CharTag> tags;

  // Whitespace tag only on whitespace; whitespace is tagged "_" unless it
  // sits inside an entity span.
  bool valid() const {
    if (chars.size() != tags.size()) return false;
    for (std::size_t i = 0; i < chars.size(); ++i) {
      const bool ws = unicode::is_whitespace(chars[i]);
      if (tags[i] == CharTag::whitespace && !ws) return false;
      if (ws && tags[i] == CharTag::outside) return false;
    }
    return true;
  }

  friend bool operator==(const TagSequence&, const TagSequence&) = default;
};

struct ChunkingConfig {
  std::size_t max_len = 512;
};

struct EntitySpan {
  Category category;
  std::size_t begin;  // code point offsets
  std::size_t end;
  std::string surface;

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

inline void fill_whitespace(TagSequence& seq) {
  for (std::size_t i = 0; i < seq.chars.size(); ++i) {
    if (seq.tags[i] == CharTag::outside && unicode::is_whitespace(seq.chars[i])) seq.tags[i] = CharTag::whitespace;
  }
}

// Locates each ground-truth surface form by exact search (first
// occurrence, longest forms first) and tags it.
inline TagSequence encode_tags(const ReceiptRecord& record, Warnings* warnings = nullptr) {
  TagSequence seq;
  seq.chars = unicode::decode(record.text);
  seq.tags.assign(seq.chars.size(), CharTag::outside);

  struct Form {
    Category cat;
    std::u32string chars;
  };
  std::vector<Form> forms;
  for (Category c : kCategories) {
    for (const auto& s : record.truth[index(c)]) {
      auto cps = unicode::decode(s);
      if (cps.empty()) continue;
      const bool dup = std::any_of(forms.begin(), forms.end(),
                                   [&](const Form& f) { return f.cat == c && f.chars == cps; });
      if (!dup) forms.push_back({c, std::move(cps)});
    }
  }
  std::stable_sort(forms.begin(), forms.end(),
                   [](const Form& a, const Form& b) { return a.chars.size() > b.chars.size(); });

  std::vector<std::optional<Category>> owner(seq.chars.size());
  for (const auto& f : forms) {
    const auto pos = seq.chars.find(f.chars);
    if (pos == std::u32string::npos) {
      if (warnings) {
        warnings->push_back("record '" + record.id + "': " + std::string(japanese_label(f.cat)) + " '" +
                            unicode::encode(f.chars) + "' not found in text; span left untagged");
      }
      continue;
    }
    for (std::size_t i = pos; i < pos + f.chars.size(); ++i) {
      if (owner[i] && *owner[i] != f.cat) {
        throw Error("record '" + record.id + "': overlapping entities of categories " +
                    std::string(japanese_label(*owner[i])) + " and " + std::string(japanese_label(f.cat)));
      }
    }
    for (std::size_t i = pos; i < pos + f.chars.size(); ++i) owner[i] = f.cat;
  }
  for (std::size_t i = 0; i < seq.chars.size(); ++i) {
    if (owner[i]) seq.tags[i] = inside(*owner[i]);
  }
  fill_whitespace(seq);
  return seq;
}

inline std::vector<TagSequence> chunk(const TagSequence& seq, const ChunkingConfig& cfg = {}) {
  if (cfg.max_len == 0) throw Error("chunk max_len must be at least 1");
  std::vector<TagSequence> out;
  for (std::size_t pos = 0; pos < seq.chars.size(); pos += cfg.max_len) {
    const std::size_t n = std::min(cfg.max_len, seq.chars.size() - pos);
    out.push_back({seq.chars.substr(pos, n), {seq.tags.begin() + static_cast<std::ptrdiff_t>(pos),
                                               seq.tags.begin() + static_cast<std::ptrdiff_t>(pos + n)}});
  }
  return out;
}

inline TagSequence concat(const std::vector<TagSequence>& parts) {
  TagSequence out;
  for (const auto& p : parts) {
    out.chars += p.chars;
    out.tags.insert(out.tags.end(), p.tags.begin(), p.tags.end());
  }
  return out;
}

// Maximal runs of one I- tag, in text order.
inline std::vector<EntitySpan> entity_spans(const TagSequence& seq) {
  std::vector<EntitySpan> spans;
  std::size_t i = 0;
  while (i < seq.tags.size()) {
    const auto cat = category_of(seq.tags[i]);
    if (!cat) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < seq.tags.size() && seq.tags[j] == seq.tags[i]) ++j;
    spans.push_back({*cat, i, j, unicode::encode(std::u32string_view(seq.chars).substr(i, j - i))});
    i = j;
  }
  return spans;
}

inline PerCategory<std::vector<std::string>> decode_tags(const TagSequence& seq) {
  PerCategory<std::vector<std::string>> out;
  for (auto& span : entity_spans(seq)) out[index(span.category)].push_back(std::move(span.surface));
  return out;
}

// Entities that chunking at max_len would cut in two.
inline std::vector<EntitySpan> straddling_spans(const TagSequence& seq, const ChunkingConfig& cfg = {}) {
  std::vector<EntitySpan> out;
  for (auto& span : entity_spans(seq)) {
    if (span.begin / cfg.max_len != (span.end - 1) / cfg.max_len) out.push_back(std::move(span));
  }
  return out;
}

// ---- rule-based reference tagger -------------------------------------------

namespace detail {

inline bool is_phone_separator(char32_t c) {
  return c == U'-' || c == U'－' || c == U'‐' || c == U'(' || c == U')' || c == U'（' || c == U'）';
}

inline bool span_free(const std::vector<CharTag>& tags, std::size_t b, std::size_t e) {
  return std::all_of(tags.begin() + static_cast<std::ptrdiff_t>(b), tags.begin() + static_cast<std::ptrdiff_t>(e),
                     [](CharTag t) { return t == CharTag::outside; });
}

inline void mark(std::vector<CharTag>& tags, std::size_t b, std::size_t e, Category c) {
  for (std::size_t i = b; i < e; ++i) tags[i] = inside(c);
}

inline std::size_t read_digits(const std::u32string& s, std::size_t i, std::size_t max_count) {
  std::size_t n = 0;
  while (i + n < s.size() && n < max_count && unicode::is_digit(s[i + n])) ++n;
  return n;
}

inline std::size_t skip_spaces(const std::u32string& s, std::size_t i) {
  while (i < s.size() && (s[i] == U' ' || s[i] == U'　')) ++i;
  return i;
}

// "TEL", "電話" or "☎" immediately before position `start`, allowing
// separators like ':' and spaces in between.
inline bool has_phone_prefix(const std::u32string& s, std::size_t start) {
  std::size_t i = start;
  while (i > 0 && (s[i - 1] == U':' || s[i - 1] == U'：' || s[i - 1] == U'.' || s[i - 1] == U' ' ||
                   s[i - 1] == U'　')) {
    --i;
  }
  if (i >= 1 && s[i - 1] == U'☎') return true;
  if (i >= 2 && s[i - 2] == U'電' && s[i - 1] == U'話') return true;
  if (i >= 3) {
    std::u32string word;
    for (std::size_t k = i - 3; k < i; ++k) {
      char32_t c = unicode::to_half_width(s[k]);
      if (c >= U'a' && c <= U'z') c -= 0x20;
      word.push_back(c);
    }
    if (word == U"TEL") return true;
  }
  return false;
}

inline void tag_totals(const std::u32string& s, std::vector<CharTag>& tags) {
  std::size_t line_start = 0;
  while (line_start <= s.size()) {
    std::size_t line_end = s.find(U'\n', line_start);
    if (line_end == std::u32string::npos) line_end = s.size();
    std::size_t i = line_start;
    while (i < line_end && unicode::is_whitespace(s[i])) ++i;
    if (s.compare(i, 2, U"合計") == 0 && i + 2 <= line_end) {
      for (std::size_t k = i + 2; k < line_end; ++k) {
        const bool sign = (s[k] == U'¥' || s[k] == U'￥' || s[k] == U'\\') && k + 1 < line_end &&
                          unicode::is_digit(s[k + 1]);
        if (!sign && !unicode::is_digit(s[k])) continue;
        std::size_t e = sign ? k + 1 : k;
        while (e < line_end && (unicode::is_digit(s[e]) ||
                                ((s[e] == U',' || s[e] == U'，') && e + 1 < line_end && unicode::is_digit(s[e + 1])))) {
          ++e;
        }
        if (span_free(tags, k, e)) mark(tags, k, e, Category::total);
        break;
      }
    }
    line_start = line_end + 1;
  }
}

inline void tag_dates(const std::u32string& s, std::vector<CharTag>& tags) {
  std::size_t i = 0;
  while (i < s.size()) {
    if (!unicode::is_digit(s[i]) || (i > 0 && unicode::is_digit(s[i - 1])) || read_digits(s, i, 4) != 4) {
      ++i;
      continue;
    }
    std::size_t end = 0;
    std::size_t k = i + 4;
    if (k < s.size() && (s[k] == U'/' || s[k] == U'-' || s[k] == U'.')) {
      const char32_t sep = s[k];
      const std::size_t m = read_digits(s, k + 1, 2);
      if (m > 0 && k + 1 + m < s.size() && s[k + 1 + m] == sep) {
        const std::size_t d = read_digits(s, k + 2 + m, 2);
        if (d > 0) end = k + 2 + m + d;
      }
    } else {
      std::size_t p = skip_spaces(s, k);
      if (p < s.size() && s[p] == U'年') {
        p = skip_spaces(s, p + 1);
        const std::size_t m = read_digits(s, p, 2);
        p = skip_spaces(s, p + m);
        if (m > 0 && p < s.size() && s[p] == U'月') {
          p = skip_spaces(s, p + 1);
          const std::size_t d = read_digits(s, p, 2);
          p = skip_spaces(s, p + d);
          if (d > 0 && p < s.size() && s[p] == U'日') end = p + 1;
        }
      }
    }
    if (end > 0 && span_free(tags, i, end)) {
      mark(tags, i, end, Category::date);
      i = end;
    } else {
      ++i;
    }
  }
}

inline void tag_telephones(const std::u32string& s, std::vector<CharTag>& tags) {
  std::size_t i = 0;
  while (i < s.size()) {
    const bool opener = s[i] == U'(' || s[i] == U'（';
    if ((!unicode::is_digit(s[i]) && !opener) || (i > 0 && unicode::is_digit(s[i - 1]))) {
      ++i;
      continue;
    }
    std::size_t e = i;
    std::size_t digits = 0;
    bool separated = false;
    while (e < s.size() && (unicode::is_digit(s[e]) || is_phone_separator(s[e]))) {
      if (unicode::is_digit(s[e])) {
        ++digits;
      } else {
        separated = true;
      }
      ++e;
    }
    std::size_t last = e;
    while (last > i && !unicode::is_digit(s[last - 1])) --last;
    if (digits >= 10 && digits <= 11 && (separated || has_phone_prefix(s, i)) && span_free(tags, i, last)) {
      mark(tags, i, last, Category::telephone);
    }
    i = std::max(e, i + 1);
  }
}

}  // namespace detail

// Pattern baseline covering the numeric categories only.
inline TagSequence rule_tag(std::string_view text) {
  TagSequence seq;
  seq.chars = unicode::decode(text);
  seq.tags.assign(seq.chars.size(), CharTag::outside);
  detail::tag_totals(seq.chars, seq.tags);
  detail::tag_dates(seq.chars, seq.tags);
  detail::tag_telephones(seq.chars, seq.tags);
  fill_whitespace(seq);
  return seq;
}

// Any string -> TagSequence function can stand in for the classifier.
using Tagger = std::function<TagSequence(std::string_view)>;

// First decoded entity per category, NoneAnswer when the tagger found none.
inline std::vector<PredictionRow> tag_predictions(const Corpus& corpus, const Tagger& tagger) {
  std::vector<PredictionRow> rows;
  rows.reserve(corpus.records.size() * kNumCategories);
  for (const auto& record : corpus.records) {
    const auto decoded = decode_tags(tagger(record.text));
    for (Category c : kCategories) {
      const auto& found = decoded[index(c)];
      PredictionRow row;
      row.receipt_id = record.id;
      row.category = c;
      row.answer = found.empty() ? Answer::none() : Answer(found.front());
      row.raw = row.answer.to_prompt_string();
      row.terminated = true;
      rows.push_back(std::move(row));
    }
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const PredictionRow& a, const PredictionRow& b) { return a.receipt_id < b.receipt_id; });
  return rows;
}

// ---- tagged-data JSONL -------------------------------------------------------

inline nlohmann::ordered_json to_json(const TagSequence& seq, const std::string& id) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["chars"] = unicode::encode(seq.chars);
  auto tags = nlohmann::ordered_json::array();
  for (CharTag t : seq.tags) tags.push_back(tag_name(t));
  j["tags"] = tags;
  return j;
}

inline TagSequence tag_sequence_from_json(const nlohmann::json& j) {
  TagSequence seq;
  seq.chars = unicode::decode(j.at("chars").get<std::string>());
  for (const auto& t : j.at("tags")) seq.tags.push_back(parse_tag(t.get<std::string>()));
  if (seq.tags.size() != seq.chars.size()) {
    throw Error("tag count " + std::to_string(seq.tags.size()) + " does not match character count " +
                std::to_string(seq.chars.size()));
  }
  return seq;
}

}  // namespace receipt_ner
