#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cmsq/checkpoint.hpp"
#include "cmsq/config.hpp"
#include "cmsq/errors.hpp"
#include "cmsq/posts.hpp"
#include "cmsq/preprocess.hpp"
#include "cmsq/split.hpp"

namespace cmsq {

// Output of the prep step. On disk it is a directory of text files:
//   config.txt     key=value, the config used to build it
//   vocab.txt      one token per line, line index = token id
//   labels.txt     one label per line, line index = class id
//   scaler.txt     min.<feature>=v / max.<feature>=v
//   train.tsv      label<TAB>t1,...,t6<TAB>id id ... (max_len ids)
//   validation.tsv same layout
//   manifest.txt   key=value statistics
struct Dataset {
  TrainConfig config;
  Vocab vocab;
  TemporalScaler scaler;
  LabelMap labels;
  std::vector<Example> train;
  std::vector<Example> validation;
  std::vector<std::pair<std::string, std::string>> manifest;
};

inline constexpr std::array<std::string_view, kTemporalFeatures> kTemporalNames = {
    "month", "day", "hour", "weekday", "is_working_hour", "is_weekend"};

inline Example make_example(const RawPost& post, const Vocab& vocab, const TemporalScaler& scaler,
                            const LabelMap& labels, const TrainConfig& cfg) {
  const EncodedText enc = encode_text(clean_text(post.title, post.selftext), vocab, cfg.max_len);
  const WorkingHours hours{cfg.work_first_hour, cfg.work_last_hour};
  return {enc.token_ids, enc.mask, scaler.apply(extract_temporal(post.created_utc, hours)),
          labels.id(post.subreddit)};
}

// load -> filter -> clean -> drop empty text -> label map -> stratified
// split -> vocab, scaler (train split only) -> encode both splits.
inline Dataset prepare_dataset(const LoadResult& loaded, const TrainConfig& cfg) {
  cfg.validate();
  const FilterResult filtered = filter_posts(loaded.posts);

  std::vector<const RawPost*> posts;
  std::vector<std::string> cleaned;
  std::size_t empty_text = 0;
  for (const RawPost& p : filtered.kept) {
    std::string text = clean_text(p.title, p.selftext);
    if (text.empty()) {
      ++empty_text;
      continue;
    }
    posts.push_back(&p);
    cleaned.push_back(std::move(text));
  }
  if (posts.empty()) throw DataError("no examples after filtering");

  Dataset ds;
  ds.config = cfg;
  std::vector<std::string> names;
  for (const RawPost* p : posts) names.push_back(p->subreddit);
  ds.labels = LabelMap::from_labels(names);
  std::vector<std::size_t> label_ids;
  for (const RawPost* p : posts) label_ids.push_back(ds.labels.id(p->subreddit));

  const SplitIndices split = stratified_split(label_ids, {cfg.train_fraction, cfg.seed});
  std::vector<std::string> train_text;
  std::vector<TemporalVector> train_raw;
  const WorkingHours hours{cfg.work_first_hour, cfg.work_last_hour};
  for (std::size_t i : split.train) {
    train_text.push_back(cleaned[i]);
    train_raw.push_back(extract_temporal(posts[i]->created_utc, hours));
  }
  ds.vocab = build_vocab(train_text, cfg.vocab_size);
  ds.scaler = TemporalScaler::fit(train_raw);

  for (std::size_t i : split.train) ds.train.push_back(make_example(*posts[i], ds.vocab, ds.scaler, ds.labels, cfg));
  for (std::size_t i : split.validation)
    ds.validation.push_back(make_example(*posts[i], ds.vocab, ds.scaler, ds.labels, cfg));

  std::size_t tokens = 0, known = 0;
  for (const auto& t : train_text) {
    for (const auto& tok : tokenize(t)) {
      ++tokens;
      known += ds.vocab.contains(tok) ? 1 : 0;
    }
  }

  auto& m = ds.manifest;
  m.emplace_back("rows_read", std::to_string(loaded.rows));
  m.emplace_back("malformed", std::to_string(loaded.malformed.size()));
  for (const auto& [reason, n] : filtered.dropped) m.emplace_back("dropped." + reason, std::to_string(n));
  m.emplace_back("dropped.empty_text", std::to_string(empty_text));
  m.emplace_back("examples", std::to_string(posts.size()));
  m.emplace_back("train", std::to_string(ds.train.size()));
  m.emplace_back("validation", std::to_string(ds.validation.size()));
  m.emplace_back("classes", std::to_string(ds.labels.size()));
  m.emplace_back("vocab_size", std::to_string(ds.vocab.size()));
  m.emplace_back("vocab_coverage", format_double(tokens ? static_cast<double>(known) / static_cast<double>(tokens) : 0.0));
  std::vector<std::size_t> per_train(ds.labels.size()), per_val(ds.labels.size());
  for (const auto& e : ds.train) ++per_train[e.label];
  for (const auto& e : ds.validation) ++per_val[e.label];
  for (std::size_t c = 0; c < ds.labels.size(); ++c) {
    m.emplace_back("class." + ds.labels.name(c) + ".train", std::to_string(per_train[c]));
    m.emplace_back("class." + ds.labels.name(c) + ".validation", std::to_string(per_val[c]));
  }
  return ds;
}

namespace detail {

inline std::string lines_to_text(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline std::string examples_to_text(const std::vector<Example>& examples) {
  std::string out;
  for (const auto& e : examples) {
    out += std::to_string(e.label) + "\t";
    for (std::size_t k = 0; k < kTemporalFeatures; ++k) out += (k ? "," : "") + format_double(e.temporal[k]);
    out += "\t";
    for (std::size_t t = 0; t < e.token_ids.size(); ++t) out += (t ? " " : "") + std::to_string(e.token_ids[t]);
    out += "\n";
  }
  return out;
}

inline std::vector<Example> examples_from_file(const std::filesystem::path& path, const Dataset& ds) {
  std::vector<Example> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      std::istringstream fields(line);
      std::string label, temporal, ids;
      if (!std::getline(fields, label, '\t') || !std::getline(fields, temporal, '\t') ||
          !std::getline(fields, ids)) {
        throw DataError("expected three tab-separated fields");
      }
      Example e;
      e.label = parse_number<std::size_t>(label, "label");
      if (e.label >= ds.labels.size()) throw DataError("label id out of range");
      std::istringstream tin(temporal);
      std::string v;
      std::size_t k = 0;
      while (std::getline(tin, v, ',')) {
        if (k == kTemporalFeatures) throw DataError("too many temporal features");
        e.temporal[k++] = parse_number<double>(v, "temporal feature");
      }
      if (k != kTemporalFeatures) throw DataError("expected 6 temporal features");
      std::istringstream iin(ids);
      std::string id;
      while (iin >> id) {
        const auto tok = parse_number<TokenId>(id, "token id");
        if (tok >= ds.vocab.size()) throw DataError("token id " + id + " outside vocabulary");
        e.token_ids.push_back(tok);
        e.mask.push_back(tok == kPadId ? 0 : 1);
      }
      if (e.token_ids.size() != ds.config.max_len) {
        throw DataError("expected " + std::to_string(ds.config.max_len) + " token ids, got " +
                        std::to_string(e.token_ids.size()));
      }
      out.push_back(std::move(e));
    } catch (const Error& err) {
      throw DataError(where + err.what());
    }
  }
  return out;
}

inline std::vector<std::pair<std::string, std::string>> read_key_values(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    out.emplace_back(t.substr(0, eq), t.substr(eq + 1));
  }
  return out;
}

}  // namespace detail

inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "config.txt", config_to_text(ds.config));
  write_file_atomic(dir / "vocab.txt", detail::lines_to_text(ds.vocab.tokens()));
  write_file_atomic(dir / "labels.txt", detail::lines_to_text(ds.labels.names()));
  std::string scaler;
  for (std::size_t k = 0; k < kTemporalFeatures; ++k) {
    scaler += "min." + std::string(kTemporalNames[k]) + "=" + format_double(ds.scaler.min[k]) + "\n";
    scaler += "max." + std::string(kTemporalNames[k]) + "=" + format_double(ds.scaler.max[k]) + "\n";
  }
  write_file_atomic(dir / "scaler.txt", scaler);
  write_file_atomic(dir / "train.tsv", detail::examples_to_text(ds.train));
  write_file_atomic(dir / "validation.tsv", detail::examples_to_text(ds.validation));
  std::string manifest;
  for (const auto& [k, v] : ds.manifest) manifest += k + "=" + v + "\n";
  write_file_atomic(dir / "manifest.txt", manifest);
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("dataset directory " + dir.string() + " not found");
  Dataset ds;
  try {
    apply_config_file(ds.config, (dir / "config.txt").string());
  } catch (const UsageError& e) {
    throw DataError(e.what());
  }
  ds.vocab = Vocab::from_tokens(detail::read_lines(dir / "vocab.txt"));
  ds.labels = LabelMap::from_names(detail::read_lines(dir / "labels.txt"));
  const auto scaler_kv = detail::read_key_values(dir / "scaler.txt");
  std::map<std::string, std::string> kv(scaler_kv.begin(), scaler_kv.end());
  for (std::size_t k = 0; k < kTemporalFeatures; ++k) {
    const std::string name(kTemporalNames[k]);
    if (!kv.contains("min." + name) || !kv.contains("max." + name)) {
      throw DataError((dir / "scaler.txt").string() + ": missing bounds for " + name);
    }
    try {
      ds.scaler.min[k] = parse_number<double>(kv["min." + name], "scaler min");
      ds.scaler.max[k] = parse_number<double>(kv["max." + name], "scaler max");
    } catch (const UsageError& e) {
      throw DataError((dir / "scaler.txt").string() + ": " + e.what());
    }
  }
  ds.train = detail::examples_from_file(dir / "train.tsv", ds);
  ds.validation = detail::examples_from_file(dir / "validation.tsv", ds);
  if (std::filesystem::exists(dir / "manifest.txt")) ds.manifest = detail::read_key_values(dir / "manifest.txt");
  return ds;
}

}  // namespace cmsq
