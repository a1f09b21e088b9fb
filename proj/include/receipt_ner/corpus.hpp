#pragma once

#include <fstream>
#include <iosfwd>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "receipt_ner/category.hpp"
#include "receipt_ner/unicode.hpp"

namespace receipt_ner {

enum class Split { train, validation, test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "validation" || s == "val") return Split::validation;
  if (s == "test") return Split::test;
  throw Error("unknown split '" + std::string(s) + "'");
}

struct ReceiptRecord {
  std::string id;
  std::string text;
  PerCategory<std::vector<std::string>> truth;

  friend bool operator==(const ReceiptRecord&, const ReceiptRecord&) = default;
};

struct Corpus {
  Split split = Split::train;
  std::vector<ReceiptRecord> records;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Line-numbered input failure.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

using Warnings = std::vector<std::string>;

// First annotated surface form, or NoneAnswer when the category is empty.
inline Answer first_truth(const ReceiptRecord& record, Category cat) {
  const auto& list = record.truth[index(cat)];
  return list.empty() ? Answer::none() : Answer(list.front());
}

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& obj, const char* key,
                                           const std::string& source, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(source, line, std::string("missing required field '") + key + "'");
  return *it;
}

inline ReceiptRecord record_from_json(const nlohmann::json& j, const std::string& source,
                                      std::size_t line, Warnings* warnings) {
  if (!j.is_object()) throw ParseError(source, line, "expected a JSON object");
  ReceiptRecord r;
  const auto& id = require_field(j, "id", source, line);
  const auto& text = require_field(j, "text", source, line);
  const auto& truth = require_field(j, "truth", source, line);
  if (!id.is_string()) throw ParseError(source, line, "'id' must be a string");
  if (!text.is_string()) throw ParseError(source, line, "'text' must be a string");
  if (!truth.is_object()) throw ParseError(source, line, "'truth' must be an object");
  r.id = id.get<std::string>();
  r.text = text.get<std::string>();
  if (r.text.empty()) throw ParseError(source, line, "empty 'text' for record '" + r.id + "'");
  for (const auto& [key, value] : truth.items()) {
    auto cat = parse_category(key);
    if (!cat) throw ParseError(source, line, "unknown category key '" + key + "'");
    if (!value.is_array()) throw ParseError(source, line, "truth['" + key + "'] must be an array");
    auto& list = r.truth[index(*cat)];
    for (const auto& v : value) {
      if (!v.is_string()) throw ParseError(source, line, "truth['" + key + "'] entries must be strings");
      list.push_back(v.get<std::string>());
      if (warnings && list.back() == kNoneLiteral) {
        warnings->push_back(source + ":" + std::to_string(line) + ": record '" + r.id +
                            "' has a ground-truth " + key +
                            " equal to the literal \"None\"; it is kept as a surface form");
      }
    }
  }
  return r;
}

}  // namespace detail

inline nlohmann::json to_json(const ReceiptRecord& r) {
  nlohmann::ordered_json truth = nlohmann::ordered_json::object();
  for (Category c : kCategories) truth[std::string(japanese_label(c))] = r.truth[index(c)];
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["text"] = r.text;
  j["truth"] = truth;
  return j;
}

inline Corpus read_corpus(std::istream& in, Split split, const std::string& source = "<stream>",
                          Warnings* warnings = nullptr) {
  Corpus corpus{split, {}};
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (unicode::trim_view(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source, lineno, std::string("malformed JSON: ") + e.what());
    }
    auto record = detail::record_from_json(j, source, lineno, warnings);
    if (!seen.insert(record.id).second) {
      throw ParseError(source, lineno, "duplicate id '" + record.id + "'");
    }
    corpus.records.push_back(std::move(record));
  }
  return corpus;
}

inline Corpus load_corpus(const std::string& path, Split split, Warnings* warnings = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file '" + path + "'");
  return read_corpus(in, split, path, warnings);
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& r : corpus.records) out << to_json(r).dump() << '\n';
}

inline void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus file '" + path + "'");
  write_corpus(out, corpus);
}

// Parallel text files for matrix estimation only need {"id", "text"}.
struct TextRecord {
  std::string id;
  std::string text;
};

inline std::vector<TextRecord> load_texts(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open text file '" + path + "'");
  std::vector<TextRecord> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (unicode::trim_view(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path, lineno, std::string("malformed JSON: ") + e.what());
    }
    const auto& id = detail::require_field(j, "id", path, lineno);
    const auto& text = detail::require_field(j, "text", path, lineno);
    if (!id.is_string() || !text.is_string()) throw ParseError(path, lineno, "'id' and 'text' must be strings");
    TextRecord r{id.get<std::string>(), text.get<std::string>()};
    if (!seen.insert(r.id).second) throw ParseError(path, lineno, "duplicate id '" + r.id + "'");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace receipt_ner
