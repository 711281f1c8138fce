#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cmsq/errors.hpp"
#include "cmsq/model.hpp"

namespace cmsq {

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kOovId = 1;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kOovToken = "<oov>";
inline constexpr std::string_view kUrlToken = "<url>";
inline constexpr std::size_t kTemporalFeatures = 6;

using TemporalVector = std::array<double, kTemporalFeatures>;

// One model-ready sample.
struct Example {
  std::vector<TokenId> token_ids;
  std::vector<std::uint8_t> mask;
  TemporalVector temporal{};
  std::size_t label = 0;

  friend bool operator==(const Example&, const Example&) = default;
};

namespace detail {

inline bool starts_with_ci(std::string_view text, std::size_t pos, std::string_view prefix) {
  if (text.size() - pos < prefix.size()) return false;
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    if (std::tolower(static_cast<unsigned char>(text[pos + k])) != prefix[k]) return false;
  }
  return true;
}

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && (std::isalnum(u) != 0 || c == '\'');
}

}  // namespace detail

// Concatenates title and body, lowercases, replaces URLs with <url>, drops
// every byte that is not an ASCII letter, digit, apostrophe or whitespace,
// and collapses whitespace. U+2019 (right single quote) counts as an
// apostrophe. The <url> sentinel survives re-cleaning.
inline std::string clean_text(std::string_view title, std::string_view selftext) {
  std::string joined;
  joined.reserve(title.size() + selftext.size() + 1);
  joined.append(title).append(" ").append(selftext);

  std::string out;
  out.reserve(joined.size());
  std::size_t i = 0;
  auto at_boundary = [&] { return i == 0 || !detail::is_word_char(joined[i - 1]); };
  while (i < joined.size()) {
    const bool url = at_boundary() && (detail::starts_with_ci(joined, i, "http://") ||
                                       detail::starts_with_ci(joined, i, "https://") ||
                                       detail::starts_with_ci(joined, i, "www."));
    if (url || joined.compare(i, kUrlToken.size(), kUrlToken) == 0) {
      if (url) {
        while (i < joined.size() && !detail::is_space(joined[i])) ++i;
      } else {
        i += kUrlToken.size();
      }
      out.push_back(' ');
      out.append(kUrlToken);
      out.push_back(' ');
      continue;
    }
    const char c = joined[i];
    if (joined.compare(i, 3, "\xE2\x80\x99") == 0) {
      out.push_back('\'');
      i += 3;
      continue;
    }
    if (detail::is_space(c)) {
      out.push_back(' ');
    } else if (detail::is_word_char(c)) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    ++i;
  }

  std::string collapsed;
  collapsed.reserve(out.size());
  for (char c : out) {
    if (c == ' ' && (collapsed.empty() || collapsed.back() == ' ')) continue;
    collapsed.push_back(c);
  }
  if (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
  return collapsed;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && detail::is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !detail::is_space(text[i])) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

class Vocab {
 public:
  Vocab() : tokens_{std::string(kPadToken), std::string(kOovToken)} { reindex(); }

  // Rebuilds from an id-ordered token list whose first two entries are the
  // PAD and OOV markers.
  static Vocab from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kOovToken) {
      throw DataError("vocabulary must start with " + std::string(kPadToken) + " and " +
                      std::string(kOovToken));
    }
    Vocab v;
    v.tokens_ = std::move(tokens);
    v.reindex();
    if (v.index_.size() != v.tokens_.size()) throw DataError("vocabulary contains duplicate tokens");
    return v;
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(TokenId id) const { return tokens_.at(id); }

  TokenId id(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? kOovId : it->second;
  }
  bool contains(std::string_view token) const { return index_.contains(std::string(token)); }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  void reindex() {
    index_.clear();
    for (std::size_t k = 0; k < tokens_.size(); ++k) index_.emplace(tokens_[k], static_cast<TokenId>(k));
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Keeps the max_tokens most frequent tokens; ids from 2 in (count desc,
// token asc) order.
inline Vocab build_vocab(std::span<const std::string> corpus, std::size_t max_tokens = 10000) {
  if (corpus.empty()) throw UsageError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus)
    for (auto& tok : tokenize(doc)) ++counts[tok];
  counts.erase(std::string(kPadToken));
  counts.erase(std::string(kOovToken));
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_tokens) ranked.resize(max_tokens);
  std::vector<std::string> tokens{std::string(kPadToken), std::string(kOovToken)};
  for (auto& [tok, n] : ranked) tokens.push_back(tok);
  return Vocab::from_tokens(std::move(tokens));
}

struct EncodedText {
  std::vector<TokenId> token_ids;
  std::vector<std::uint8_t> mask;
};

// Truncates to max_len tokens and right-pads with PAD.
inline EncodedText encode_text(std::string_view cleaned, const Vocab& vocab, std::size_t max_len = 100) {
  EncodedText e{std::vector<TokenId>(max_len, kPadId), std::vector<std::uint8_t>(max_len, 0)};
  std::size_t t = 0;
  for (const auto& tok : tokenize(cleaned)) {
    if (t == max_len) break;
    e.token_ids[t] = vocab.id(tok);
    e.mask[t] = 1;
    ++t;
  }
  return e;
}

struct WorkingHours {
  int first_hour = 9;  // inclusive
  int last_hour = 17;  // inclusive
};

// (month 1-12, day 1-31, hour 0-23, weekday Monday=0, is_working_hour,
// is_weekend), all in UTC.
inline TemporalVector extract_temporal(std::int64_t created_utc, WorkingHours hours = {}) {
  if (created_utc < 0) throw DataError("negative timestamp " + std::to_string(created_utc));
  using namespace std::chrono;
  const sys_seconds tp{seconds{created_utc}};
  const sys_days day = floor<days>(tp);
  const year_month_day ymd{day};
  const hh_mm_ss hms{tp - day};
  const int weekday_mon0 = static_cast<int>(weekday{day}.iso_encoding()) - 1;
  const int hour = static_cast<int>(hms.hours().count());
  const bool weekend = weekday_mon0 >= 5;
  const bool working = !weekend && hour >= hours.first_hour && hour <= hours.last_hour;
  return {static_cast<double>(static_cast<unsigned>(ymd.month())),
          static_cast<double>(static_cast<unsigned>(ymd.day())),
          static_cast<double>(hour),
          static_cast<double>(weekday_mon0),
          working ? 1.0 : 0.0,
          weekend ? 1.0 : 0.0};
}

inline int utc_year(std::int64_t created_utc) {
  using namespace std::chrono;
  const year_month_day ymd{floor<days>(sys_seconds{seconds{created_utc}})};
  return static_cast<int>(ymd.year());
}

// Per-feature min-max scaling fit on training vectors.
struct TemporalScaler {
  TemporalVector min{};
  TemporalVector max{};

  static TemporalScaler fit(std::span<const TemporalVector> rows) {
    if (rows.empty()) throw UsageError("cannot fit a scaler on zero rows");
    TemporalScaler s{rows[0], rows[0]};
    for (const auto& r : rows) {
      for (std::size_t k = 0; k < kTemporalFeatures; ++k) {
        s.min[k] = std::min(s.min[k], r[k]);
        s.max[k] = std::max(s.max[k], r[k]);
      }
    }
    return s;
  }

  // Constant features map to 0; out-of-range values are clamped to [0, 1].
  TemporalVector apply(const TemporalVector& raw) const {
    TemporalVector out{};
    for (std::size_t k = 0; k < kTemporalFeatures; ++k) {
      const double range = max[k] - min[k];
      out[k] = range > 0.0 ? std::clamp((raw[k] - min[k]) / range, 0.0, 1.0) : 0.0;
    }
    return out;
  }

  friend bool operator==(const TemporalScaler&, const TemporalScaler&) = default;
};

inline TemporalScaler fit_scaler(std::span<const TemporalVector> rows) { return TemporalScaler::fit(rows); }
inline TemporalVector apply_scaler(const TemporalVector& raw, const TemporalScaler& s) { return s.apply(raw); }

// Class ids follow lexicographic order of the label strings.
class LabelMap {
 public:
  LabelMap() = default;

  static LabelMap from_labels(std::span<const std::string> labels) {
    std::vector<std::string> names(labels.begin(), labels.end());
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    return from_names(std::move(names));
  }

  // names must already be sorted and unique (as stored in artifacts).
  static LabelMap from_names(std::vector<std::string> names) {
    if (!std::is_sorted(names.begin(), names.end()) ||
        std::adjacent_find(names.begin(), names.end()) != names.end()) {
      throw DataError("label names must be sorted and unique");
    }
    for (const auto& n : names)
      if (n.empty()) throw DataError("empty label name");
    LabelMap m;
    m.names_ = std::move(names);
    return m;
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t id) const { return names_.at(id); }

  std::size_t id(std::string_view label) const {
    const auto it = std::lower_bound(names_.begin(), names_.end(), label);
    if (it == names_.end() || *it != label) throw DataError("unknown label '" + std::string(label) + "'");
    return static_cast<std::size_t>(it - names_.begin());
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::vector<std::string> names_;
};

}  // namespace cmsq
