#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <utility>
#include <vector>

#include "cmsq/errors.hpp"
#include "cmsq/model.hpp"

namespace cmsq {

// Every tunable of a run. Defaults are the published training setup.
struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  std::size_t max_len = 100;
  std::size_t vocab_size = 10000;  // frequent tokens kept, PAD/OOV excluded
  std::size_t embed_dim = 128;
  std::size_t text_hidden = 64;  // per direction
  std::size_t time_hidden = 64;
  std::size_t d_fuse = 64;
  std::size_t d_att = 64;
  double dropout = 0.6;
  double eta = 0.0005;
  double beta = 0.99;
  double mu = 0.9;
  double epsilon = 1e-8;
  double weight_decay = 1e-5;
  double train_fraction = 0.8;
  int work_first_hour = 9;
  int work_last_hour = 17;
  std::uint64_t seed = 42;

  ModelDims dims(std::size_t vocab_rows, std::size_t classes) const {
    return {vocab_rows, embed_dim, text_hidden, time_hidden, d_fuse, d_att, classes};
  }

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw UsageError("invalid value '" + std::string(text) + "' for " + std::string(what));
  }
  return value;
}

struct ConfigField {
  std::string key;
  std::string help;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, std::string_view)> set;
};

namespace detail {

template <typename T>
ConfigField make_field(std::string key, std::string help, T TrainConfig::*member) {
  ConfigField f{key, std::move(help), nullptr, nullptr};
  f.get = [member](const TrainConfig& c) {
    if constexpr (std::is_floating_point_v<T>) {
      return format_double(c.*member);
    } else {
      return std::to_string(c.*member);
    }
  };
  f.set = [member, key](TrainConfig& c, std::string_view v) { c.*member = parse_number<T>(v, key); };
  return f;
}

}  // namespace detail

// Field table in serialization order.
inline const std::vector<ConfigField>& config_fields() {
  using detail::make_field;
  static const std::vector<ConfigField> fields = {
      make_field("epochs", "training epochs", &TrainConfig::epochs),
      make_field("batch_size", "mini-batch size", &TrainConfig::batch_size),
      make_field("max_len", "tokens per post after padding/truncation", &TrainConfig::max_len),
      make_field("vocab_size", "most frequent tokens kept in the vocabulary", &TrainConfig::vocab_size),
      make_field("embed_dim", "word embedding width", &TrainConfig::embed_dim),
      make_field("text_hidden", "BiLSTM hidden units per direction", &TrainConfig::text_hidden),
      make_field("time_hidden", "temporal LSTM hidden units", &TrainConfig::time_hidden),
      make_field("d_fuse", "shared width of the projected modality embeddings", &TrainConfig::d_fuse),
      make_field("d_att", "attention scoring width", &TrainConfig::d_att),
      make_field("dropout", "dropout rate on both modality embeddings", &TrainConfig::dropout),
      make_field("eta", "RMSprop learning rate", &TrainConfig::eta),
      make_field("beta", "RMSprop squared-gradient smoothing", &TrainConfig::beta),
      make_field("mu", "momentum coefficient", &TrainConfig::mu),
      make_field("epsilon", "RMSprop stability constant", &TrainConfig::epsilon),
      make_field("weight_decay", "L2 weight decay", &TrainConfig::weight_decay),
      make_field("train_fraction", "per-class share of examples in the training split", &TrainConfig::train_fraction),
      make_field("work_first_hour", "first UTC hour counted as working time", &TrainConfig::work_first_hour),
      make_field("work_last_hour", "last UTC hour counted as working time", &TrainConfig::work_last_hour),
      make_field("seed", "random seed", &TrainConfig::seed),
  };
  return fields;
}

inline const ConfigField* find_config_field(std::string_view key) {
  for (const auto& f : config_fields())
    if (f.key == key) return &f;
  return nullptr;
}

inline void set_config_value(TrainConfig& c, std::string_view key, std::string_view value) {
  const ConfigField* f = find_config_field(key);
  if (f == nullptr) throw UsageError("unknown config key '" + std::string(key) + "'");
  f->set(c, value);
}

inline std::vector<std::pair<std::string, std::string>> config_to_pairs(const TrainConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : config_fields()) out.emplace_back(f.key, f.get(c));
  return out;
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// key=value lines; '#' starts a comment; blank lines ignored.
inline void apply_config_text(TrainConfig& c, const std::string& text, std::string_view source = "config") {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) throw UsageError(where + "expected key=value");
    try {
      set_config_value(c, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(where + e.what());
    }
  }
}

inline void apply_config_file(TrainConfig& c, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(c, ss.str(), path);
}

inline std::string config_to_text(const TrainConfig& c) {
  std::string out;
  for (const auto& [k, v] : config_to_pairs(c)) out += k + "=" + v + "\n";
  return out;
}

inline void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw UsageError("invalid config: " + msg); };
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (max_len == 0) fail("max_len must be >= 1");
  if (vocab_size == 0) fail("vocab_size must be >= 1");
  if (embed_dim == 0 || text_hidden == 0 || time_hidden == 0 || d_fuse == 0 || d_att == 0) {
    fail("layer widths must be >= 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (!(eta > 0.0)) fail("eta must be > 0");
  if (!(beta >= 0.0 && beta < 1.0)) fail("beta must be in [0, 1)");
  if (!(mu >= 0.0 && mu < 1.0)) fail("mu must be in [0, 1)");
  if (!(epsilon > 0.0)) fail("epsilon must be > 0");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail("train_fraction must be in (0, 1)");
  if (work_first_hour < 0 || work_last_hour > 23 || work_first_hour > work_last_hour) {
    fail("working hours must satisfy 0 <= work_first_hour <= work_last_hour <= 23");
  }
}

}  // namespace cmsq
