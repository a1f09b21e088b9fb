#pragma once

#include <cstdio>
#include <fstream>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "receipt_ner/category.hpp"
#include "receipt_ner/scoring.hpp"

namespace receipt_ner {

// Scores are kept in [0,1]; tables show them x100 to one decimal.
inline std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v * 100.0);
  return buf;
}

inline std::string category_display(Category c) {
  return std::string(japanese_label(c)) + " (" + std::string(english_name(c)) + ")";
}

inline void write_report_csv(std::ostream& out, const ScoreReport& r) {
  out << "Category,Precision,Recall,F_beta\n";
  for (Category c : kCategories) {
    const auto& s = r.per_category[index(c)];
    out << category_display(c) << ',' << percent(s.precision) << ',' << percent(s.recall) << ','
        << percent(s.f_beta) << '\n';
  }
  out << "F_final,,," << percent(r.f_final) << '\n';
}

inline void write_report_markdown(std::ostream& out, const ScoreReport& r) {
  out << "Config `" << r.config_id << "`, split " << to_string(r.split);
  if (r.iterations) out << ", " << *r.iterations << " iterations";
  if (!r.manifest_digest.empty()) out << ", manifest " << r.manifest_digest;
  out << "\n\n";
  out << "| Category | Precision | Recall | F_beta |\n";
  out << "|---|---:|---:|---:|\n";
  for (Category c : kCategories) {
    const auto& s = r.per_category[index(c)];
    out << "| " << category_display(c) << " | " << percent(s.precision) << " | " << percent(s.recall) << " | "
        << percent(s.f_beta) << " |\n";
  }
  out << "| **F_final** | | | " << percent(r.f_final) << " |\n";
}

// Config comparison in the style of a model-selection table.
inline void write_summary_markdown(std::ostream& out, const std::vector<ScoreReport>& reports) {
  out << "| Config | Split | Iterations | F_final |\n|---|---|---:|---:|\n";
  for (const auto& r : reports) {
    out << "| " << r.config_id << " | " << to_string(r.split) << " | "
        << (r.iterations ? std::to_string(*r.iterations) : std::string("-")) << " | " << percent(r.f_final) << " |\n";
  }
}

inline void write_summary_csv(std::ostream& out, const std::vector<ScoreReport>& reports) {
  out << "Config,Split,Iterations,F_final\n";
  for (const auto& r : reports) {
    out << r.config_id << ',' << to_string(r.split) << ','
        << (r.iterations ? std::to_string(*r.iterations) : std::string()) << ',' << percent(r.f_final) << '\n';
  }
}

inline nlohmann::ordered_json to_json(const ScoreReport& r) {
  nlohmann::ordered_json j;
  j["config_id"] = r.config_id;
  j["split"] = std::string(to_string(r.split));
  j["iterations"] = r.iterations ? nlohmann::ordered_json(*r.iterations) : nlohmann::ordered_json(nullptr);
  j["manifest_digest"] = r.manifest_digest;
  j["f_final"] = r.f_final;
  auto cats = nlohmann::ordered_json::array();
  for (Category c : kCategories) {
    const auto& s = r.per_category[index(c)];
    cats.push_back({{"category", std::string(japanese_label(c))},
                    {"tp", s.tp},
                    {"fp", s.fp},
                    {"fn", s.fn},
                    {"precision", s.precision},
                    {"recall", s.recall},
                    {"f_beta", s.f_beta}});
  }
  j["categories"] = cats;
  return j;
}

inline ScoreReport report_from_json(const nlohmann::json& j) {
  ScoreReport r;
  r.config_id = j.at("config_id").get<std::string>();
  r.split = parse_split(j.at("split").get<std::string>());
  if (j.contains("iterations") && !j.at("iterations").is_null()) r.iterations = j.at("iterations").get<std::uint64_t>();
  r.manifest_digest = j.value("manifest_digest", std::string());
  r.f_final = j.at("f_final").get<double>();
  if (j.contains("categories")) {
    for (const auto& c : j.at("categories")) {
      CategoryScore s;
      s.category = category_or_throw(c.at("category").get<std::string>());
      s.tp = c.at("tp").get<std::uint64_t>();
      s.fp = c.at("fp").get<std::uint64_t>();
      s.fn = c.at("fn").get<std::uint64_t>();
      s.precision = c.at("precision").get<double>();
      s.recall = c.at("recall").get<double>();
      s.f_beta = c.at("f_beta").get<double>();
      r.per_category[index(s.category)] = s;
    }
  }
  return r;
}

inline ScoreReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open report '" + path + "'");
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

}  // namespace receipt_ner
