#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmsq/config.hpp"
#include "cmsq/csv.hpp"
#include "cmsq/errors.hpp"
#include "cmsq/preprocess.hpp"

namespace cmsq {

struct RawPost {
  std::string title;
  std::string selftext;
  std::int64_t created_utc = 0;
  bool over_18 = false;
  std::string subreddit;

  friend bool operator==(const RawPost&, const RawPost&) = default;
};

struct MalformedRow {
  std::size_t line = 0;
  std::string reason;
};

struct LoadResult {
  std::vector<RawPost> posts;
  std::vector<MalformedRow> malformed;
  std::size_t rows = 0;  // data records seen, malformed included
};

inline constexpr std::array<std::string_view, 5> kPostColumns = {"title", "selftext", "created_utc",
                                                                  "over_18", "subreddit"};

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Accepts integral or decimal epoch seconds ("1668668048", "1668668048.0").
inline bool parse_timestamp(std::string_view text, std::int64_t& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v) || v < 0.0 || v > 9.0e15) {
    return false;
  }
  out = static_cast<std::int64_t>(std::floor(v));
  return true;
}

inline bool parse_bool(std::string_view text, bool& out) {
  const std::string t = lower(trim(text));
  if (t == "true" || t == "1" || t == "t" || t == "yes") {
    out = true;
    return true;
  }
  if (t == "false" || t == "0" || t == "f" || t == "no") {
    out = false;
    return true;
  }
  return false;
}

}  // namespace detail

// Parses CSV with a header naming title, selftext, created_utc, over_18 and
// subreddit (any order, any case, extra columns ignored). Rows that cannot
// be parsed are reported in LoadResult::malformed rather than dropped.
inline LoadResult read_posts(std::istream& in, std::string_view source = "input") {
  CsvReader reader(in);
  CsvRecord rec;
  if (!reader.next(rec)) throw DataError(std::string(source) + ": missing header row");
  if (!rec.fields.empty() && rec.fields[0].starts_with("\xEF\xBB\xBF")) rec.fields[0].erase(0, 3);

  std::array<std::size_t, kPostColumns.size()> col{};
  for (std::size_t k = 0; k < kPostColumns.size(); ++k) {
    const auto it = std::find_if(rec.fields.begin(), rec.fields.end(), [&](const std::string& h) {
      return detail::lower(trim(h)) == kPostColumns[k];
    });
    if (it == rec.fields.end()) {
      throw DataError(std::string(source) + ": missing column '" + std::string(kPostColumns[k]) + "'");
    }
    col[k] = static_cast<std::size_t>(it - rec.fields.begin());
  }
  const std::size_t width = rec.fields.size();

  LoadResult result;
  while (reader.next(rec)) {
    ++result.rows;
    auto bad = [&](std::string reason) { result.malformed.push_back({rec.line, std::move(reason)}); };
    if (rec.fields.size() != width) {
      bad("expected " + std::to_string(width) + " fields, got " + std::to_string(rec.fields.size()));
      continue;
    }
    RawPost p;
    p.title = rec.fields[col[0]];
    p.selftext = rec.fields[col[1]];
    if (!detail::parse_timestamp(rec.fields[col[2]], p.created_utc)) {
      bad("unparseable created_utc '" + rec.fields[col[2]] + "'");
      continue;
    }
    if (!detail::parse_bool(rec.fields[col[3]], p.over_18)) {
      bad("unparseable over_18 '" + rec.fields[col[3]] + "'");
      continue;
    }
    p.subreddit = trim(rec.fields[col[4]]);
    if (p.subreddit.empty()) {
      bad("empty subreddit");
      continue;
    }
    result.posts.push_back(std::move(p));
  }
  return result;
}

inline LoadResult load_posts(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file " + path);
  return read_posts(in, path);
}

struct FilterResult {
  std::vector<RawPost> kept;
  std::map<std::string, std::size_t> dropped;  // reason -> count
};

inline bool is_removed_body(std::string_view selftext) {
  const std::string t = trim(selftext);
  return t.empty() || t == "[removed]" || t == "[deleted]";
}

// Drops NSFW posts ("nsfw"), posts without a usable body ("empty_selftext")
// and posts outside UTC years 2021-2022 ("year"). Each post is counted under
// the first reason that applies.
inline FilterResult filter_posts(std::span<const RawPost> posts) {
  FilterResult r;
  for (const char* reason : {"nsfw", "empty_selftext", "year"}) r.dropped[reason] = 0;
  for (const RawPost& p : posts) {
    if (p.over_18) {
      ++r.dropped["nsfw"];
    } else if (is_removed_body(p.selftext)) {
      ++r.dropped["empty_selftext"];
    } else if (const int y = utc_year(p.created_utc); y < 2021 || y > 2022) {
      ++r.dropped["year"];
    } else {
      r.kept.push_back(p);
    }
  }
  return r;
}

}  // namespace cmsq
