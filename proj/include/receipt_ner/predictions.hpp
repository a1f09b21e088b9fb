#pragma once

#include <fstream>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "receipt_ner/category.hpp"
#include "receipt_ner/corpus.hpp"

namespace receipt_ner {

// One extracted answer for a (receipt, category) pair.
struct PredictionRow {
  std::string receipt_id;
  Category category = Category::shopname;
  std::string raw;
  Answer answer;
  bool terminated = false;
  std::string error;  // empty when the backend call succeeded

  friend bool operator==(const PredictionRow&, const PredictionRow&) = default;
};

// NoneAnswer is written as null. On read, null and the literal "None" both
// mean NoneAnswer.
inline nlohmann::ordered_json to_json(const PredictionRow& row) {
  nlohmann::ordered_json j;
  j["receipt_id"] = row.receipt_id;
  j["category"] = std::string(japanese_label(row.category));
  j["raw"] = row.raw;
  j["answer"] = row.answer.is_none() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(row.answer.surface());
  j["terminated"] = row.terminated;
  if (!row.error.empty()) j["error"] = row.error;
  return j;
}

inline void write_predictions(std::ostream& out, const std::vector<PredictionRow>& rows) {
  for (const auto& r : rows) out << to_json(r).dump() << '\n';
}

inline void save_predictions(const std::string& path, const std::vector<PredictionRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write predictions file '" + path + "'");
  write_predictions(out, rows);
}

inline std::vector<PredictionRow> read_predictions(std::istream& in, const std::string& source = "<stream>") {
  std::vector<PredictionRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (unicode::trim_view(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PredictionRow row;
      row.receipt_id = j.at("receipt_id").get<std::string>();
      row.category = category_or_throw(j.at("category").get<std::string>());
      row.raw = j.value("raw", std::string());
      const auto& a = j.at("answer");
      if (a.is_null() || (a.is_string() && a.get<std::string>() == kNoneLiteral)) {
        row.answer = Answer::none();
      } else {
        row.answer = Answer(a.get<std::string>());
      }
      row.terminated = j.value("terminated", false);
      row.error = j.value("error", std::string());
      rows.push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, lineno, e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return rows;
}

inline std::vector<PredictionRow> load_predictions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open predictions file '" + path + "'");
  return read_predictions(in, path);
}

}  // namespace receipt_ner
