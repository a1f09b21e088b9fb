#include <gtest/gtest.h>

#include "receipt_ner/unicode.hpp"

namespace u = receipt_ner::unicode;

TEST(Unicode, DecodeEncodeRoundTrip) {
  const std::string s = "合計 ¥1,015　ＴＥＬ";
  const auto cps = u::decode(s);
  EXPECT_EQ(cps.size(), 13u);
  EXPECT_EQ(u::encode(cps), s);
}

TEST(Unicode, InvalidUtf8Throws) {
  EXPECT_THROW(u::decode(std::string("ab\xff", 3)), receipt_ner::Error);
  EXPECT_THROW(u::decode(std::string("\xe5\x90", 2)), receipt_ner::Error);
}

TEST(Unicode, Whitespace) {
  for (char32_t c : {U' ', U'\t', U'\n', U'\r', U'　'}) EXPECT_TRUE(u::is_whitespace(c)) << static_cast<int>(c);
  for (char32_t c : {U'a', U'_', U'合', U'-'}) EXPECT_FALSE(u::is_whitespace(c));
}

TEST(Unicode, PunctuationIsGeneralCategoryP) {
  for (char32_t c : {U'!', U'-', U'.', U',', U':', U'(', U')', U'、', U'。', U'「', U'」', U'・', U'：', U'－'}) {
    EXPECT_TRUE(u::is_punctuation(c)) << u::encode(c);
  }
  // Symbols (S*) are not punctuation.
  for (char32_t c : {U'¥', U'$', U'+', U'~', U'ー', U'A', U'1'}) EXPECT_FALSE(u::is_punctuation(c)) << u::encode(c);
}

TEST(Unicode, HalfWidthFolding) {
  std::u32string folded;
  for (char32_t c : u::decode("ＴＥＬ：０７８ａ￥　")) folded.push_back(u::to_half_width(c));
  EXPECT_EQ(u::encode(folded), "TEL:078a¥ ");
  // Half-width katakana and ordinary kana are untouched.
  EXPECT_EQ(u::to_half_width(U'ｱ'), U'ｱ');
  EXPECT_EQ(u::to_half_width(U'ア'), U'ア');
}

TEST(Unicode, TrimHandlesMultibyteWhitespace) {
  EXPECT_EQ(u::trim("　 ¥270 \n"), "¥270");
  EXPECT_EQ(u::trim("   "), "");
  EXPECT_EQ(u::trim("a b"), "a b");
}
