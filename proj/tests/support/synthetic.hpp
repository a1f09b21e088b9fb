#pragma once

// Synthetic receipts for property and acceptance tests. Each category draws
// entity characters from its own alphabet, and filler never uses any of
// them, so every placed entity is findable and unambiguous.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "receipt_ner/corpus.hpp"
#include "receipt_ner/unicode.hpp"

namespace receipt_ner::synth {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline std::string random_from(std::mt19937_64& rng, std::u32string_view alphabet, std::size_t len) {
  std::u32string out;
  for (std::size_t i = 0; i < len; ++i) out.push_back(alphabet[pick(rng, alphabet.size())]);
  return unicode::encode(out);
}

inline constexpr std::u32string_view kFiller = U"abcdefghijklmnopqrstuvwxyzあいうえおかきくけこさしすせそ     \n\n";
inline constexpr std::u32string_view kFillerSolid = U"abcdefghijklmnopqrstuvwxyzあいうえお";

inline std::string random_entity(std::mt19937_64& rng, Category c) {
  switch (c) {
    case Category::shopname: {
      std::string s = random_from(rng, U"ABCDEFGHIJKLMNOPQRSTUVWXYZ", 3 + pick(rng, 6));
      if (pick(rng, 2)) s += " " + random_from(rng, U"ABCDEFGHIJKLMNOPQRSTUVWXYZ", 2 + pick(rng, 5));
      return s;
    }
    case Category::address:
      return random_from(rng, U"東京都港区麻布十番丁目明石市大久保町", 5 + pick(rng, 8)) + "1-" +
             random_from(rng, U"123456789", 1);
    case Category::item1:
      return random_from(rng, U"アイウエオカキクケコサシスセソタチツテト", 3 + pick(rng, 8));
    case Category::telephone:
      return "0" + random_from(rng, U"123456789", 2) + "-" + random_from(rng, U"0123456789", 3) + "-" +
             random_from(rng, U"0123456789", 4);
    case Category::date:
      return "20" + random_from(rng, U"0123456789", 2) + "/" + random_from(rng, U"01", 1) +
             random_from(rng, U"123456789", 1) + "/" + random_from(rng, U"12", 1) + random_from(rng, U"0123456789", 1);
    case Category::total:
      return "¥" + random_from(rng, U"123456789", 1) + random_from(rng, U"0123456789", pick(rng, 4));
  }
  return {};
}

inline std::size_t count_occurrences_u32(const std::u32string& hay, const std::u32string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::u32string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

// Entities are separated by filler containing at least one non-whitespace
// character; every entity occurs exactly once in the text.
inline ReceiptRecord random_receipt(std::mt19937_64& rng, const std::string& id, std::size_t max_per_category = 2,
                                    std::size_t filler_len = 12) {
  for (;;) {
    ReceiptRecord r;
    r.id = id;
    struct Placed {
      Category cat;
      std::string surface;
    };
    std::vector<Placed> placed;
    for (Category c : kCategories) {
      const std::size_t n = pick(rng, max_per_category + 1);
      for (std::size_t k = 0; k < n; ++k) {
        auto s = random_entity(rng, c);
        if (std::find(r.truth[index(c)].begin(), r.truth[index(c)].end(), s) != r.truth[index(c)].end()) continue;
        r.truth[index(c)].push_back(s);
        placed.push_back({c, s});
      }
    }
    std::shuffle(placed.begin(), placed.end(), rng);
    std::string text = random_from(rng, kFiller, pick(rng, filler_len)) + random_from(rng, kFillerSolid, 1);
    for (const auto& p : placed) {
      text += p.surface;
      text += random_from(rng, kFiller, pick(rng, filler_len)) + random_from(rng, kFillerSolid, 1) +
              random_from(rng, kFiller, pick(rng, 3));
    }
    r.text = text;
    const auto cps = unicode::decode(r.text);
    bool unique = true;
    for (const auto& p : placed) unique = unique && count_occurrences_u32(cps, unicode::decode(p.surface)) == 1;
    if (unique) return r;
  }
}

inline Corpus random_corpus(std::mt19937_64& rng, std::size_t n, Split split = Split::train) {
  Corpus c{split, {}};
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "r%04zu", i);
    c.records.push_back(random_receipt(rng, id));
  }
  return c;
}

}  // namespace receipt_ner::synth
