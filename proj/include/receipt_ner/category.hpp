#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "receipt_ner/unicode.hpp"

namespace receipt_ner {

// The six extracted categories, in their canonical reporting order.
enum class Category : std::size_t { shopname = 0, address, item1, telephone, date, total };

inline constexpr std::size_t kNumCategories = 6;

inline constexpr std::array<Category, kNumCategories> kCategories = {
    Category::shopname, Category::address, Category::item1,
    Category::telephone, Category::date, Category::total};

struct CategoryInfo {
  std::string_view japanese_label;
  std::string_view english_name;
  bool numeric;
};

inline constexpr std::array<CategoryInfo, kNumCategories> kCategoryInfo = {{
    {"店名", "shopname", false},
    {"住所", "address", false},
    {"品目_1", "item1", false},
    {"電話番号", "telephone", true},
    {"日付", "date", true},
    {"合計", "total", true},
}};

constexpr std::size_t index(Category c) { return static_cast<std::size_t>(c); }
constexpr const CategoryInfo& info(Category c) { return kCategoryInfo[index(c)]; }
constexpr std::string_view japanese_label(Category c) { return info(c).japanese_label; }
constexpr std::string_view english_name(Category c) { return info(c).english_name; }
constexpr bool is_numeric(Category c) { return info(c).numeric; }

// Accepts either the Japanese label or the English name.
inline std::optional<Category> parse_category(std::string_view s) {
  for (Category c : kCategories) {
    if (s == japanese_label(c) || s == english_name(c)) return c;
  }
  return std::nullopt;
}

inline Category category_or_throw(std::string_view s) {
  if (auto c = parse_category(s)) return *c;
  throw Error("unknown category '" + std::string(s) + "'");
}

// Per-category storage indexed by Category.
template <typename T>
using PerCategory = std::array<T, kNumCategories>;

inline constexpr std::string_view kNoneLiteral = "None";

// An extracted or ground-truth answer: a surface form, or the
// distinguished "no value on this receipt" answer.
class Answer {
 public:
  Answer() = default;
  explicit Answer(std::string surface) : value_(std::move(surface)) {}

  static Answer none() { return Answer(); }

  bool is_none() const { return !value_.has_value(); }
  const std::string& surface() const {
    if (!value_) throw Error("NoneAnswer has no surface form");
    return *value_;
  }
  // Prompt/completion boundary form.
  std::string to_prompt_string() const { return value_ ? *value_ : std::string(kNoneLiteral); }

  friend bool operator==(const Answer&, const Answer&) = default;

 private:
  std::optional<std::string> value_;
};

}  // namespace receipt_ner
