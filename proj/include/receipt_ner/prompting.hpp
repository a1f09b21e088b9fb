#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "receipt_ner/category.hpp"
#include "receipt_ner/unicode.hpp"

namespace receipt_ner {

// Prompt scaffold:
//   " ### Question: {receipt}の{CAT}\n ### は: {NE}です。"
// The inference prompt stops right after the response marker.
struct PromptTemplate {
  std::string instruction_marker = "### Question:";
  std::string response_marker = "\n ### は:";
  std::string terminator = "です。";
  std::string category_joiner = "の";
  bool leading_space = true;

  bool is_default() const { return *this == PromptTemplate{}; }

  void validate() const {
    if (instruction_marker.empty() || response_marker.empty() || terminator.empty()) {
      throw Error("prompt template markers must be non-empty");
    }
    if (instruction_marker == response_marker) throw Error("instruction and response markers must differ");
  }

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

enum class PromptKind { training, inference };

inline std::string_view to_string(PromptKind k) { return k == PromptKind::training ? "training" : "inference"; }

inline PromptKind parse_prompt_kind(std::string_view s) {
  if (s == "training") return PromptKind::training;
  if (s == "inference") return PromptKind::inference;
  throw Error("unknown prompt kind '" + std::string(s) + "'");
}

struct PromptSample {
  std::string receipt_id;
  Category category = Category::shopname;
  PromptKind kind = PromptKind::inference;
  std::string text;
  Answer answer;  // training only
  std::uint32_t repeat = 0;

  friend bool operator==(const PromptSample&, const PromptSample&) = default;
};

// Receipt text that would make the template ambiguous, or an answer that
// would be cut short at parse time.
class TemplateError : public Error {
 public:
  using Error::Error;
};

inline std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

namespace detail {

inline void check_receipt_text(std::string_view receipt_text, const PromptTemplate& tpl) {
  if (receipt_text.empty()) throw TemplateError("receipt text is empty");
  if (receipt_text.find(tpl.instruction_marker) != std::string_view::npos) {
    throw TemplateError("receipt text contains the instruction marker '" + tpl.instruction_marker + "'");
  }
  if (receipt_text.find(tpl.response_marker) != std::string_view::npos) {
    throw TemplateError("receipt text contains the response marker");
  }
}

inline std::string question(std::string_view receipt_text, Category cat, const PromptTemplate& tpl) {
  std::string text;
  if (tpl.leading_space) text += ' ';
  text += tpl.instruction_marker;
  text += ' ';
  text += receipt_text;
  text += tpl.category_joiner;
  text += japanese_label(cat);
  text += tpl.response_marker;
  return text;
}

}  // namespace detail

inline PromptSample build_inference_prompt(std::string_view receipt_text, Category cat,
                                           const PromptTemplate& tpl = {}) {
  detail::check_receipt_text(receipt_text, tpl);
  PromptSample s;
  s.category = cat;
  s.kind = PromptKind::inference;
  s.text = detail::question(receipt_text, cat, tpl);
  return s;
}

inline PromptSample build_training_prompt(std::string_view receipt_text, Category cat, const Answer& answer,
                                          const PromptTemplate& tpl = {}) {
  detail::check_receipt_text(receipt_text, tpl);
  const std::string answer_string = answer.to_prompt_string();
  if (answer_string.find(tpl.terminator) != std::string::npos) {
    throw TemplateError("answer '" + answer_string + "' contains the terminator");
  }
  PromptSample s;
  s.category = cat;
  s.kind = PromptKind::training;
  s.answer = answer;
  s.text = detail::question(receipt_text, cat, tpl);
  s.text += ' ';
  s.text += answer_string;
  s.text += tpl.terminator;
  return s;
}

struct Completion {
  std::string raw;
  Answer answer;
  bool terminated = false;

  friend bool operator==(const Completion&, const Completion&) = default;
};

// Everything from the first terminator on is discarded. An unterminated
// completion is still an answer.
inline Completion parse_completion(std::string_view raw, const PromptTemplate& tpl = {}) {
  Completion c;
  c.raw = std::string(raw);
  const auto pos = raw.find(tpl.terminator);
  c.terminated = pos != std::string_view::npos;
  const auto body = unicode::trim(c.terminated ? raw.substr(0, pos) : raw);
  c.answer = body == kNoneLiteral ? Answer::none() : Answer(body);
  return c;
}

struct TemplateDiagnostics {
  std::size_t instruction_count = 0;
  std::size_t response_count = 0;

  bool ok() const { return instruction_count == 1 && response_count == 1; }
};

inline TemplateDiagnostics check_template_integrity(const PromptSample& sample, const PromptTemplate& tpl = {}) {
  return {count_occurrences(sample.text, tpl.instruction_marker), count_occurrences(sample.text, tpl.response_marker)};
}

inline nlohmann::ordered_json to_json(const PromptSample& s) {
  nlohmann::ordered_json j;
  j["receipt_id"] = s.receipt_id;
  j["category"] = std::string(japanese_label(s.category));
  j["kind"] = std::string(to_string(s.kind));
  if (s.repeat != 0) j["repeat"] = s.repeat;
  j["text"] = s.text;
  if (s.kind == PromptKind::training) j["answer"] = s.answer.to_prompt_string();
  return j;
}

inline void write_prompts(std::ostream& out, const std::vector<PromptSample>& samples) {
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
}

}  // namespace receipt_ner
