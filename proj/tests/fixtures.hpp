#pragma once

// Synthetic post corpora written as CSV, shared by the data and CLI tests.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cmsq.hpp"

namespace fixture {

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct CorpusSpec {
  std::size_t per_class = 30;
  std::vector<std::string> classes = {"anxiety", "bpd", "depression"};
  std::uint64_t seed = 5;
  bool with_noise = true;
};

// Each class talks about its own handful of words and posts at its own hour
// of day, so both branches carry signal. Noise rows exercise every filter.
inline std::string synthetic_csv(const CorpusSpec& spec = {}) {
  static const std::vector<std::vector<std::string>> topics = {
      {"worry", "panic", "heart", "racing", "nervous"},
      {"mood", "split", "abandon", "intense", "empty"},
      {"sad", "tired", "hopeless", "sleep", "numb"},
      {"voices", "paranoid", "hear", "meds", "real"},
  };
  static const std::vector<std::string> shared = {"i", "feel", "today", "really", "so", "and", "my"};
  cmsq::Rng rng(spec.seed);
  std::string out = "Title,Selftext,Created_UTC,Over_18,Subreddit\n";
  const std::int64_t base = 1640995200;  // 2022-01-01 00:00:00 UTC
  for (std::size_t k = 0; k < spec.per_class * spec.classes.size(); ++k) {
    const std::size_t c = k % spec.classes.size();
    const auto& words = topics[c % topics.size()];
    std::string title = words[rng.below(words.size())] + " " + shared[rng.below(shared.size())];
    std::string body;
    for (std::size_t n = 4 + rng.below(12); n > 0; --n) {
      body += (rng.below(3) == 0 ? shared[rng.below(shared.size())] : words[rng.below(words.size())]);
      body += rng.below(5) == 0 ? ", " : " ";
    }
    const std::int64_t ts = base + static_cast<std::int64_t>(rng.below(300)) * 86400 +
                            static_cast<std::int64_t>(3 + 6 * c) * 3600 + static_cast<std::int64_t>(rng.below(3600));
    out += csv_quote(title) + "," + csv_quote(body) + "," + std::to_string(ts) + ",False," + spec.classes[c] + "\n";
  }
  if (spec.with_noise) {
    out += "nsfw post,some body,1650000000,True," + spec.classes[0] + "\n";
    out += "removed,[removed],1650000000,False," + spec.classes[0] + "\n";
    out += "old post,from long ago,1550000000,False," + spec.classes[0] + "\n";
    out += "broken,row,not-a-time,False," + spec.classes[0] + "\n";
    out += "!!!,???,1650000000,False," + spec.classes[0] + "\n";
  }
  return out;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cmsq_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixture
