#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

namespace receipt_ner {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace unicode {

// Strict UTF-8 decode; malformed input throws.
inline std::u32string decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
  const auto length = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    const int32_t at = i;
    U8_NEXT(bytes, i, length, c);
    if (c < 0) throw Error("invalid UTF-8 at byte offset " + std::to_string(at));
    out.push_back(static_cast<char32_t>(c));
  }
  return out;
}

inline void append(std::string& out, char32_t c) {
  uint8_t buf[4];
  int32_t n = 0;
  UBool error = false;
  U8_APPEND(buf, n, 4, static_cast<UChar32>(c), error);
  if (error) throw Error("cannot encode code point " + std::to_string(static_cast<uint32_t>(c)));
  out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
}

inline std::string encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : s) append(out, c);
  return out;
}

inline std::string encode(char32_t c) {
  std::string out;
  append(out, c);
  return out;
}

inline std::size_t length(std::string_view s) { return decode(s).size(); }

inline bool is_whitespace(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }

// General category P* (Pc, Pd, Ps, Pe, Pi, Pf, Po).
inline bool is_punctuation(char32_t c) {
  switch (u_charType(static_cast<UChar32>(c))) {
    case U_CONNECTOR_PUNCTUATION:
    case U_DASH_PUNCTUATION:
    case U_START_PUNCTUATION:
    case U_END_PUNCTUATION:
    case U_INITIAL_PUNCTUATION:
    case U_FINAL_PUNCTUATION:
    case U_OTHER_PUNCTUATION:
      return true;
    default:
      return false;
  }
}

inline bool is_currency_sign(char32_t c) {
  return u_charType(static_cast<UChar32>(c)) == U_CURRENCY_SYMBOL;
}

inline bool is_ascii_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

inline bool is_digit(char32_t c) { return is_ascii_digit(c) || (c >= U'０' && c <= U'９'); }

// Full-width forms with a half-width counterpart. Half-width katakana
// (U+FF61..U+FF9F) is left alone.
inline char32_t to_half_width(char32_t c) {
  if (c >= 0xFF01 && c <= 0xFF5E) return c - 0xFEE0;
  switch (c) {
    case 0x3000: return 0x0020;
    case 0xFFE0: return 0x00A2;
    case 0xFFE1: return 0x00A3;
    case 0xFFE2: return 0x00AC;
    case 0xFFE3: return 0x00AF;
    case 0xFFE4: return 0x00A6;
    case 0xFFE5: return 0x00A5;
    case 0xFFE6: return 0x20A9;
    default: return c;
  }
}

inline std::string_view trim_view(std::string_view s) {
  // Strip on code point boundaries so multi-byte whitespace (U+3000) goes too.
  const std::u32string cps = decode(s);
  std::size_t first = 0, last = cps.size();
  while (first < last && is_whitespace(cps[first])) ++first;
  while (last > first && is_whitespace(cps[last - 1])) --last;
  std::size_t begin_byte = 0;
  for (std::size_t i = 0; i < first; ++i) begin_byte += encode(cps[i]).size();
  std::size_t end_byte = s.size();
  for (std::size_t i = cps.size(); i > last; --i) end_byte -= encode(cps[i - 1]).size();
  return s.substr(begin_byte, end_byte - begin_byte);
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

}  // namespace unicode
}  // namespace receipt_ner
