#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "receipt_ner/bio_codec.hpp"
#include "synthetic.hpp"

using namespace receipt_ner;

namespace {

ReceiptRecord record(std::string text) {
  ReceiptRecord r;
  r.id = "t";
  r.text = std::move(text);
  return r;
}

TagSequence tags_of(std::u32string chars, std::vector<CharTag> tags) { return {std::move(chars), std::move(tags)}; }

std::string tagged_surface(const TagSequence& seq, Category c) {
  std::u32string out;
  for (std::size_t i = 0; i < seq.chars.size(); ++i) {
    if (seq.tags[i] == inside(c)) out.push_back(seq.chars[i]);
  }
  return unicode::encode(out);
}

}  // namespace

TEST(Tags, EightTagsWithNames) {
  std::set<std::string> names;
  for (std::size_t t = 0; t < kNumTags; ++t) names.insert(tag_name(static_cast<CharTag>(t)));
  EXPECT_EQ(names, (std::set<std::string>{"O", "_", "I-店名", "I-住所", "I-品目_1", "I-電話番号", "I-日付", "I-合計"}));
  for (const auto& n : names) EXPECT_EQ(tag_name(parse_tag(n)), n);
  EXPECT_THROW(parse_tag("B-合計"), Error);
}

TEST(Encode, NoAnnotations) {
  const auto seq = encode_tags(record("A B"));
  EXPECT_EQ(seq.tags, (std::vector<CharTag>{CharTag::outside, CharTag::whitespace, CharTag::outside}));
  EXPECT_TRUE(seq.valid());
}

TEST(Encode, TotalAtEndOfLine) {
  auto r = record("合計 ¥270");
  r.truth[index(Category::total)] = {"¥270"};
  const auto seq = encode_tags(r);
  ASSERT_EQ(seq.tags.size(), 7u);
  EXPECT_EQ(seq.tags[2], CharTag::whitespace);
  for (std::size_t i = 3; i < 7; ++i) EXPECT_EQ(seq.tags[i], inside(Category::total));
}

TEST(Encode, MissingSurfaceWarnsAndStaysUntagged) {
  auto r = record("abc");
  r.truth[index(Category::shopname)] = {"XYZ"};
  Warnings w;
  const auto seq = encode_tags(r, &w);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("XYZ"), std::string::npos);
  EXPECT_TRUE(std::all_of(seq.tags.begin(), seq.tags.end(), [](CharTag t) { return t == CharTag::outside; }));
}

TEST(Encode, CrossCategoryOverlapNamesBothCategories) {
  auto r = record("x 078-920 y");
  r.truth[index(Category::telephone)] = {"078-920"};
  r.truth[index(Category::total)] = {"920"};
  try {
    encode_tags(r);
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("電話番号"), std::string::npos);
    EXPECT_NE(msg.find("合計"), std::string::npos);
  }
}

TEST(Encode, SameCategoryNestedFormsAndInteriorWhitespace) {
  const auto r = load_corpus(RECEIPT_NER_TEST_DATA "/fixture_corpus.jsonl", Split::train).records.at(0);
  Warnings w;
  const auto seq = encode_tags(r, &w);
  EXPECT_TRUE(w.empty()) << w.front();
  EXPECT_TRUE(seq.valid());
  const auto decoded = decode_tags(seq);
  EXPECT_EQ(decoded[index(Category::shopname)], std::vector<std::string>{"Boulangerie BARUC PLUS"});
  EXPECT_EQ(decoded[index(Category::telephone)], std::vector<std::string>{"078-920-8257"});
  EXPECT_EQ(decoded[index(Category::date)], std::vector<std::string>{"2021/10/01"});
  EXPECT_EQ(decoded[index(Category::total)], std::vector<std::string>{"¥270"});
}

TEST(Chunk, UnderLimitIsSingleChunk) {
  TagSequence seq{std::u32string(300, U'a'), std::vector<CharTag>(300, CharTag::outside)};
  const auto chunks = chunk(seq, {512});
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0], seq);
}

TEST(Chunk, SplitsAtMaxLen) {
  TagSequence seq{std::u32string(1025, U'a'), std::vector<CharTag>(1025, CharTag::outside)};
  const auto chunks = chunk(seq, {512});
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[0].chars.size(), 512u);
  EXPECT_EQ(chunks[1].chars.size(), 512u);
  EXPECT_EQ(chunks[2].chars.size(), 1u);
  EXPECT_EQ(concat(chunks), seq);
  EXPECT_TRUE(chunk(TagSequence{}, {512}).empty());
  EXPECT_THROW(chunk(seq, {0}), Error);
}

TEST(Chunk, PreservesCharsAndTagMultiset) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 100; ++t) {
    const auto seq = encode_tags(synth::random_receipt(rng, "x"));
    const std::size_t max_len = 1 + synth::pick(rng, 40);
    const auto chunks = chunk(seq, {max_len});
    const auto joined = concat(chunks);
    EXPECT_EQ(joined, seq);
    for (const auto& c : chunks) EXPECT_LE(c.chars.size(), max_len);
    std::map<CharTag, int> a, b;
    for (auto x : seq.tags) ++a[x];
    for (const auto& c : chunks)
      for (auto x : c.tags) ++b[x];
    EXPECT_EQ(a, b);
  }
}

TEST(Chunk, StraddlingEntitiesReported) {
  auto r = record("aaaa¥270bb");
  r.truth[index(Category::total)] = {"¥270"};
  const auto seq = encode_tags(r);
  const auto s = straddling_spans(seq, {5});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].surface, "¥270");
  EXPECT_TRUE(straddling_spans(seq, {8}).empty());
}

TEST(Decode, AllOutside) {
  const auto d = decode_tags(tags_of(U"abc", {CharTag::outside, CharTag::outside, CharTag::outside}));
  for (const auto& v : d) EXPECT_TRUE(v.empty());
}

TEST(Decode, TwoMaximalRuns) {
  const auto t = inside(Category::total);
  const auto d = decode_tags(tags_of(U"27a0", {t, t, CharTag::outside, t}));
  EXPECT_EQ(d[index(Category::total)], (std::vector<std::string>{"27", "0"}));
}

TEST(Decode, WhitespaceSplitsRunsButInteriorIWhitespaceJoins) {
  const auto t = inside(Category::shopname);
  EXPECT_EQ(decode_tags(tags_of(U"AB CD", {t, t, CharTag::whitespace, t, t}))[index(Category::shopname)],
            (std::vector<std::string>{"AB", "CD"}));
  EXPECT_EQ(decode_tags(tags_of(U"AB CD", {t, t, t, t, t}))[index(Category::shopname)],
            (std::vector<std::string>{"AB CD"}));
}

TEST(Decode, AdjacentDifferentCategoriesSplit) {
  const auto d = decode_tags(tags_of(U"AB12", {inside(Category::shopname), inside(Category::shopname),
                                               inside(Category::total), inside(Category::total)}));
  EXPECT_EQ(d[index(Category::shopname)], std::vector<std::string>{"AB"});
  EXPECT_EQ(d[index(Category::total)], std::vector<std::string>{"12"});
}

TEST(RoundTrip, EncodeDecodeRecoversUniqueEntities) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 200; ++t) {
    const auto r = synth::random_receipt(rng, "x");
    Warnings w;
    const auto seq = encode_tags(r, &w);
    EXPECT_TRUE(w.empty());
    EXPECT_TRUE(seq.valid());
    const auto decoded = decode_tags(seq);
    for (Category c : kCategories) {
      auto want = r.truth[index(c)], got = decoded[index(c)];
      std::sort(want.begin(), want.end());
      std::sort(got.begin(), got.end());
      EXPECT_EQ(got, want) << r.text;
    }
  }
}

TEST(RuleTag, Telephone) {
  const auto seq = rule_tag("TEL:078-920-8257");
  EXPECT_EQ(tagged_surface(seq, Category::telephone), "078-920-8257");
  EXPECT_EQ(seq.tags[0], CharTag::outside);
  EXPECT_EQ(tagged_surface(rule_tag("電話:03-5439-6226"), Category::telephone), "03-5439-6226");
  EXPECT_EQ(tagged_surface(rule_tag("ＴＥＬ 0789208257"), Category::telephone), "0789208257");
  // Postal codes and bare digit runs are not phone numbers.
  EXPECT_EQ(tagged_surface(rule_tag("〒674-0068"), Category::telephone), "");
  EXPECT_EQ(tagged_surface(rule_tag("No 0789208257"), Category::telephone), "");
}

TEST(RuleTag, Dates) {
  const auto seq = rule_tag("2021年 3月15日(月)20:56");
  EXPECT_EQ(tagged_surface(seq, Category::date), "2021年 3月15日");
  EXPECT_EQ(decode_tags(seq)[index(Category::date)], std::vector<std::string>{"2021年 3月15日"});
  EXPECT_EQ(tagged_surface(rule_tag("====2021/10/0115:17:17"), Category::date), "2021/10/01");
  EXPECT_EQ(tagged_surface(rule_tag("利用日時 2021/03/15 20:56:20"), Category::date), "2021/03/15");
}

TEST(RuleTag, Total) {
  EXPECT_EQ(tagged_surface(rule_tag("合計 ¥1,015"), Category::total), "¥1,015");
  EXPECT_EQ(tagged_surface(rule_tag("小計 ¥250\n 合計 ¥270\n 現金 ¥270"), Category::total), "¥270");
  EXPECT_EQ(tagged_surface(rule_tag("小計 ¥250"), Category::total), "");
}

TEST(RuleTag, FixtureReceipt) {
  const auto text = synth::read_file(RECEIPT_NER_TEST_DATA "/fixture_receipt.txt");
  const auto d = decode_tags(rule_tag(text));
  EXPECT_EQ(d[index(Category::telephone)], std::vector<std::string>{"078-920-8257"});
  EXPECT_EQ(d[index(Category::date)], std::vector<std::string>{"2021/10/01"});
  EXPECT_EQ(d[index(Category::total)], std::vector<std::string>{"¥270"});
}

TEST(RuleTag, NeverEmitsTextCategoriesAndIsValid) {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 200; ++t) {
    const auto text = synth::random_receipt(rng, "x").text + "\n合計 ¥" + std::to_string(rng() % 10000);
    const auto seq = rule_tag(text);
    EXPECT_TRUE(seq.valid());
    EXPECT_EQ(seq, rule_tag(text));
    for (auto tag : seq.tags) {
      EXPECT_NE(tag, inside(Category::shopname));
      EXPECT_NE(tag, inside(Category::address));
      EXPECT_NE(tag, inside(Category::item1));
    }
  }
}

TEST(Tagger, PredictionsUseFirstDecodedEntity) {
  Corpus c{Split::test, {}};
  c.records.push_back(record("TEL:078-920-8257\n合計 ¥270"));
  const auto rows = tag_predictions(c, [](std::string_view t) { return rule_tag(t); });
  ASSERT_EQ(rows.size(), kNumCategories);
  EXPECT_EQ(rows[index(Category::telephone)].answer, Answer("078-920-8257"));
  EXPECT_EQ(rows[index(Category::total)].answer, Answer("¥270"));
  EXPECT_TRUE(rows[index(Category::shopname)].answer.is_none());
}

TEST(TaggedJson, RoundTripAndLengthCheck) {
  auto r = record("合計 ¥270");
  r.truth[index(Category::total)] = {"¥270"};
  const auto seq = encode_tags(r);
  const auto j = nlohmann::json::parse(to_json(seq, "t").dump());
  EXPECT_EQ(tag_sequence_from_json(j), seq);
  auto bad = j;
  bad["tags"].erase(bad["tags"].begin());
  EXPECT_THROW(tag_sequence_from_json(bad), Error);
}
