#include <gtest/gtest.h>

#include "oracles.hpp"

using cmsq::clean_text;

TEST(CleanText, Examples) {
  EXPECT_EQ(clean_text("", ""), "");
  EXPECT_EQ(clean_text("Hello WORLD!!", ""), "hello world");
  EXPECT_EQ(clean_text("see https://x.y/z now", ""), "see <url> now");
}

TEST(CleanText, JoinsTitleAndBody) {
  EXPECT_EQ(clean_text("Title", "Body text"), "title body text");
  EXPECT_EQ(clean_text("", "only body"), "only body");
}

TEST(CleanText, UrlVariants) {
  EXPECT_EQ(clean_text("go to www.example.com/a?b=c, please", ""), "go to <url> please");
  EXPECT_EQ(clean_text("(http://a.b)", ""), "<url>");
  EXPECT_EQ(clean_text("link:https://a.b end", ""), "link <url> end");
  EXPECT_EQ(clean_text("awww.no", ""), "awwwno");
}

TEST(CleanText, KeepsApostrophesAndDigits) {
  EXPECT_EQ(clean_text("I'm 25, can't   sleep\t\n", ""), "i'm 25 can't sleep");
  EXPECT_EQ(clean_text("don\xE2\x80\x99t", ""), "don't");
  EXPECT_EQ(clean_text("caf\xC3\xA9 \xF0\x9F\x98\x80 ok", ""), "caf ok");
}

TEST(CleanText, Idempotent) {
  cmsq::Rng rng(3);
  const std::string alphabet = "aZ9 '!?.,-:/\t\nhttps://www.<url>\xE2\x80\x99";
  for (int k = 0; k < 500; ++k) {
    std::string raw;
    const std::size_t len = rng.below(60);
    for (std::size_t i = 0; i < len; ++i) raw += alphabet[rng.below(alphabet.size())];
    const std::string once = clean_text(raw, "");
    EXPECT_EQ(clean_text(once, ""), once) << raw;
    EXPECT_EQ(once, cmsq::trim(once));
    EXPECT_EQ(once.find("  "), std::string::npos);
  }
}

TEST(Tokenize, SplitsOnWhitespace) {
  EXPECT_EQ(cmsq::tokenize("a  b\tc"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(cmsq::tokenize("   ").empty());
}

TEST(Vocab, SmallCorpus) {
  const std::vector<std::string> corpus = {"a a b"};
  const cmsq::Vocab v = cmsq::build_vocab(corpus);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v.id("<pad>"), 0u);
  EXPECT_EQ(v.id("<oov>"), 1u);
  EXPECT_EQ(v.id("a"), 2u);
  EXPECT_EQ(v.id("b"), 3u);
  EXPECT_EQ(v.id("zzz"), cmsq::kOovId);
}

TEST(Vocab, TiesAreLexicographic) {
  const std::vector<std::string> corpus = {"pear apple fig", "fig pear apple"};
  const cmsq::Vocab v = cmsq::build_vocab(corpus);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<pad>", "<oov>", "apple", "fig", "pear"}));
}

TEST(Vocab, CapsAtMaxTokens) {
  std::string doc;
  for (int k = 0; k < 15000; ++k) doc += "w" + std::to_string(k) + " ";
  const std::vector<std::string> corpus = {doc};
  const cmsq::Vocab v = cmsq::build_vocab(corpus);
  EXPECT_EQ(v.size(), 10002u);
  EXPECT_EQ(cmsq::build_vocab(corpus), v);
}

TEST(Vocab, EmptyCorpusIsUsageError) {
  EXPECT_THROW(cmsq::build_vocab(std::span<const std::string>{}), cmsq::UsageError);
}

TEST(Vocab, FromTokensValidates) {
  EXPECT_THROW(cmsq::Vocab::from_tokens({"a", "<oov>"}), cmsq::DataError);
  EXPECT_THROW(cmsq::Vocab::from_tokens({"<pad>", "<oov>", "x", "x"}), cmsq::DataError);
}

TEST(Encode, EmptyTextIsAllPadding) {
  const cmsq::EncodedText e = cmsq::encode_text("", cmsq::Vocab{});
  EXPECT_EQ(e.token_ids, std::vector<cmsq::TokenId>(100, 0));
  EXPECT_EQ(e.mask, std::vector<std::uint8_t>(100, 0));
}

TEST(Encode, PadsAndMapsUnknowns) {
  const std::vector<std::string> corpus = {"hello world"};
  const cmsq::Vocab v = cmsq::build_vocab(corpus);
  const cmsq::EncodedText e = cmsq::encode_text("hello there world", v);
  ASSERT_EQ(e.token_ids.size(), 100u);
  EXPECT_EQ(e.token_ids[0], v.id("hello"));
  EXPECT_EQ(e.token_ids[1], cmsq::kOovId);
  EXPECT_EQ(e.token_ids[2], v.id("world"));
  EXPECT_EQ(e.mask[2], 1);
  for (std::size_t t = 3; t < 100; ++t) {
    EXPECT_EQ(e.token_ids[t], cmsq::kPadId);
    EXPECT_EQ(e.mask[t], 0);
  }
}

TEST(Encode, TruncatesLongText) {
  std::string text;
  for (int k = 0; k < 150; ++k) text += "t" + std::to_string(k) + " ";
  const std::vector<std::string> corpus = {text};
  const cmsq::Vocab v = cmsq::build_vocab(corpus);
  const cmsq::EncodedText e = cmsq::encode_text(text, v);
  ASSERT_EQ(e.token_ids.size(), 100u);
  EXPECT_EQ(e.token_ids[99], v.id("t99"));
  EXPECT_EQ(e.mask, std::vector<std::uint8_t>(100, 1));
}

TEST(Temporal, EpochAnchor) {
  const cmsq::TemporalVector want = {1, 1, 0, 3, 0, 0};
  EXPECT_EQ(cmsq::extract_temporal(0), want);
}

TEST(Temporal, SampleTimestamp) {
  const cmsq::TemporalVector want = {11, 17, 6, 3, 0, 0};
  EXPECT_EQ(cmsq::extract_temporal(1668668048), want);
}

TEST(Temporal, SaturdayIsWeekendNotWorking) {
  // 2022-11-19 12:00:00 UTC, a Saturday.
  const auto v = cmsq::extract_temporal(1668859200);
  EXPECT_EQ(v[3], 5.0);
  EXPECT_EQ(v[4], 0.0);
  EXPECT_EQ(v[5], 1.0);
}

TEST(Temporal, WorkingHourBoundaries) {
  // Thursday 2022-11-17, 00:00 UTC.
  const std::int64_t midnight = 1668643200;
  EXPECT_EQ(cmsq::extract_temporal(midnight + 8 * 3600 + 3599)[4], 0.0);
  EXPECT_EQ(cmsq::extract_temporal(midnight + 9 * 3600)[4], 1.0);
  EXPECT_EQ(cmsq::extract_temporal(midnight + 17 * 3600 + 3599)[4], 1.0);
  EXPECT_EQ(cmsq::extract_temporal(midnight + 18 * 3600)[4], 0.0);
  EXPECT_EQ(cmsq::extract_temporal(midnight + 8 * 3600, {8, 8})[4], 1.0);
}

TEST(Temporal, MatchesLibcCalendar) {
  cmsq::Rng rng(17);
  for (int k = 0; k < 1000; ++k) {
    const auto ts = static_cast<std::int64_t>(rng.below(2'000'000'001ULL));
    const auto v = cmsq::extract_temporal(ts);
    const oracle::Calendar c = oracle::gmtime_calendar(ts);
    EXPECT_EQ(v[0], c.month);
    EXPECT_EQ(v[1], c.day);
    EXPECT_EQ(v[2], c.hour);
    EXPECT_EQ(v[3], c.weekday_mon0);
    EXPECT_EQ(v[5], c.weekday_mon0 >= 5 ? 1.0 : 0.0);
  }
}

TEST(Temporal, NegativeIsDataError) {
  EXPECT_THROW(cmsq::extract_temporal(-1), cmsq::DataError);
}

TEST(Scaler, RangeEndpointsAndClamping) {
  const std::vector<cmsq::TemporalVector> rows = {{1, 5, 0, 0, 0, 1}, {12, 5, 23, 6, 1, 1}};
  const cmsq::TemporalScaler s = cmsq::fit_scaler(rows);
  EXPECT_EQ(s.apply(rows[1])[0], 1.0);
  EXPECT_EQ(s.apply(rows[0])[0], 0.0);
  EXPECT_EQ(s.apply(rows[0])[1], 0.0);  // constant feature
  EXPECT_EQ(s.apply(rows[1])[5], 0.0);
  const cmsq::TemporalVector outside = {20, 9, -3, 3, 0, 0};
  const auto scaled = s.apply(outside);
  EXPECT_EQ(scaled[0], 1.0);
  EXPECT_EQ(scaled[2], 0.0);
  EXPECT_DOUBLE_EQ(scaled[3], 0.5);
}

TEST(Scaler, TrainingValuesStayInUnitInterval) {
  cmsq::Rng rng(4);
  std::vector<cmsq::TemporalVector> rows;
  for (int k = 0; k < 200; ++k)
    rows.push_back(cmsq::extract_temporal(static_cast<std::int64_t>(rng.below(2'000'000'000ULL))));
  const auto s = cmsq::fit_scaler(rows);
  for (const auto& r : rows)
    for (double v : s.apply(r)) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
}

TEST(Labels, SortedAssignment) {
  const std::vector<std::string> raw = {"depression", "anxiety", "depression", "bipolar"};
  const cmsq::LabelMap m = cmsq::LabelMap::from_labels(raw);
  EXPECT_EQ(m.size(), 3u);
  EXPECT_EQ(m.id("anxiety"), 0u);
  EXPECT_EQ(m.id("bipolar"), 1u);
  EXPECT_EQ(m.id("depression"), 2u);
  EXPECT_EQ(m.name(2), "depression");
  EXPECT_THROW(m.id("ocd"), cmsq::DataError);
  EXPECT_THROW(cmsq::LabelMap::from_names({"b", "a"}), cmsq::DataError);
}

TEST(Examples, RandomPostsSatisfyInvariants) {
  cmsq::Rng rng(21);
  const std::vector<std::string> words = {"i", "feel", "tired", "today", "can't", "sleep", "help", "please"};
  std::vector<std::string> corpus;
  for (int k = 0; k < 50; ++k) {
    std::string doc;
    for (std::size_t n = rng.below(150); n > 0; --n) doc += words[rng.below(words.size())] + "! ";
    corpus.push_back(clean_text("T", doc));
  }
  const cmsq::Vocab v = cmsq::build_vocab(corpus);
  for (const auto& text : corpus) {
    const auto e = cmsq::encode_text(text, v);
    ASSERT_EQ(e.token_ids.size(), 100u);
    for (std::size_t t = 0; t < 100; ++t) EXPECT_EQ(e.mask[t] == 0, e.token_ids[t] == cmsq::kPadId);
    EXPECT_EQ(cmsq::encode_text(clean_text(text, ""), v).token_ids, e.token_ids);
  }
}
