#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cmsq/config.hpp"
#include "cmsq/errors.hpp"
#include "cmsq/matrix.hpp"
#include "cmsq/model.hpp"
#include "cmsq/preprocess.hpp"

namespace cmsq {

// Binary layout, all integers and reals little-endian:
//
//   "CMSQ"                      4-byte magic
//   u16 version                 currently 1
//   u32 tensor count, then per tensor:
//     u16 name length, name bytes, u8 rank, u64 dims[rank], f64 values
//   u32 config entries, then per entry: u16 key length, key, u32 value length, value
//   u32 vocab size, then per token: u32 length, bytes (index = token id)
//   u32 label count, then per label: u32 length, bytes (index = class id)
//   f64 scaler min[6], f64 scaler max[6]
//
// Config values are the same text used in key=value config files; doubles
// are written with 17 significant digits so they round-trip exactly.
inline constexpr std::string_view kCheckpointMagic = "CMSQ";
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  Vocab vocab;
  TemporalScaler scaler;
  LabelMap labels;
  TrainConfig config;
};

namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t k = 0; k < sizeof(T); ++k) {
      buf_.push_back(static_cast<char>(u & 0xff));
      u = static_cast<U>(u >> 8);
    }
  }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_bytes(std::string_view s) { buf_.append(s); }
  template <typename Len>
  void put_string(std::string_view s) {
    if (s.size() > std::numeric_limits<Len>::max()) throw DataError("string too long for checkpoint field");
    put(static_cast<Len>(s.size()));
    put_bytes(s);
  }
  const std::string& bytes() const noexcept { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t u = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) {
      u |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + k])) << (8 * k);
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string_view get_bytes(std::size_t n) {
    need(n);
    const auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename Len>
  std::string get_string() {
    const auto n = get<Len>();
    return std::string(get_bytes(n));
  }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
  detail::ByteWriter w;
  w.put_bytes(kCheckpointMagic);
  w.put(kCheckpointVersion);

  std::uint32_t count = 0;
  visit_tensors(ck.params, [&](const std::string&, const Matrix&) { ++count; });
  w.put(count);
  visit_tensors(ck.params, [&](const std::string& name, const Matrix& m) {
    w.put_string<std::uint16_t>(name);
    w.put(std::uint8_t{2});
    w.put(static_cast<std::uint64_t>(m.rows()));
    w.put(static_cast<std::uint64_t>(m.cols()));
    for (double v : m.values()) w.put_f64(v);
  });

  const auto pairs = config_to_pairs(ck.config);
  w.put(static_cast<std::uint32_t>(pairs.size()));
  for (const auto& [k, v] : pairs) {
    w.put_string<std::uint16_t>(k);
    w.put_string<std::uint32_t>(v);
  }
  w.put(static_cast<std::uint32_t>(ck.vocab.size()));
  for (const auto& t : ck.vocab.tokens()) w.put_string<std::uint32_t>(t);
  w.put(static_cast<std::uint32_t>(ck.labels.size()));
  for (const auto& l : ck.labels.names()) w.put_string<std::uint32_t>(l);
  for (double v : ck.scaler.min) w.put_f64(v);
  for (double v : ck.scaler.max) w.put_f64(v);
  return w.bytes();
}

// Cross-checks the model against the embedded vocabulary, labels and config.
inline void check_checkpoint_consistency(const Checkpoint& ck) {
  const ModelDims d = ck.params.dims();
  auto fail = [](const std::string& msg) { throw DataError("inconsistent checkpoint: " + msg); };
  if (d.vocab != ck.vocab.size()) {
    fail("embedding has " + std::to_string(d.vocab) + " rows but vocabulary has " +
         std::to_string(ck.vocab.size()) + " tokens");
  }
  if (ck.vocab.size() > ck.config.vocab_size + 2) {
    fail("vocabulary of " + std::to_string(ck.vocab.size()) + " tokens exceeds config vocab_size " +
         std::to_string(ck.config.vocab_size) + " + 2");
  }
  if (d.classes != ck.labels.size()) {
    fail("output layer has " + std::to_string(d.classes) + " classes but label map has " +
         std::to_string(ck.labels.size()));
  }
  if (d != ck.config.dims(d.vocab, d.classes)) fail("tensor shapes disagree with config layer widths");
  for (std::size_t k = 0; k < kTemporalFeatures; ++k)
    if (!(ck.scaler.max[k] >= ck.scaler.min[k])) fail("scaler max < min");
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.remaining() < kCheckpointMagic.size() || r.get_bytes(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }

  std::map<std::string, Matrix> tensors;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t n = 0; n < count; ++n) {
    std::string name = r.get_string<std::uint16_t>();
    const auto rank = r.get<std::uint8_t>();
    if (rank != 2) throw DataError("tensor " + name + " has unsupported rank " + std::to_string(rank));
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (rows != 0 && cols > r.remaining() / 8 / rows) {
      throw DataError("tensor " + name + " dimensions overflow the file");
    }
    std::vector<double> values(rows * cols);
    for (double& v : values) v = r.get_f64();
    if (!tensors.emplace(name, Matrix(rows, cols, std::move(values))).second) {
      throw DataError("duplicate tensor " + name);
    }
  }

  Checkpoint ck;
  std::size_t used = 0;
  visit_tensors(ck.params, [&](const std::string& name, Matrix& m) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("checkpoint lacks tensor " + name);
    m = std::move(it->second);
    ++used;
  });
  if (used != tensors.size()) throw DataError("checkpoint has unknown tensors");
  try {
    ck.params.validate();
  } catch (const ShapeError& e) {
    throw DataError(std::string("checkpoint tensors malformed: ") + e.what());
  }

  const auto n_config = r.get<std::uint32_t>();
  for (std::uint32_t n = 0; n < n_config; ++n) {
    const std::string key = r.get_string<std::uint16_t>();
    const std::string value = r.get_string<std::uint32_t>();
    try {
      set_config_value(ck.config, key, value);
    } catch (const UsageError& e) {
      throw DataError(std::string("checkpoint config: ") + e.what());
    }
  }
  const auto n_vocab = r.get<std::uint32_t>();
  if (n_vocab > r.remaining() / 4) throw DataError("vocabulary size overflows the file");
  std::vector<std::string> tokens;
  tokens.reserve(n_vocab);
  for (std::uint32_t n = 0; n < n_vocab; ++n) tokens.push_back(r.get_string<std::uint32_t>());
  ck.vocab = Vocab::from_tokens(std::move(tokens));
  const auto n_labels = r.get<std::uint32_t>();
  if (n_labels > r.remaining() / 4) throw DataError("label count overflows the file");
  std::vector<std::string> labels;
  for (std::uint32_t n = 0; n < n_labels; ++n) labels.push_back(r.get_string<std::uint32_t>());
  ck.labels = LabelMap::from_names(std::move(labels));
  for (double& v : ck.scaler.min) v = r.get_f64();
  for (double& v : ck.scaler.max) v = r.get_f64();
  if (r.remaining() != 0) throw DataError("trailing bytes after checkpoint");

  check_checkpoint_consistency(ck);
  return ck;
}

// Writes to "<path>.tmp" and renames over path.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  check_checkpoint_consistency(ck);
  write_file_atomic(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace cmsq
