#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "cmsq/attention.hpp"
#include "cmsq/errors.hpp"
#include "cmsq/lstm.hpp"
#include "cmsq/matrix.hpp"
#include "cmsq/random.hpp"

namespace cmsq {

using TokenId = std::uint32_t;

// Shape of the network. vocab counts every embedding row (PAD and OOV
// included); text_hidden is per direction.
struct ModelDims {
  std::size_t vocab = 10002;
  std::size_t embed = 128;
  std::size_t text_hidden = 64;
  std::size_t time_hidden = 64;
  std::size_t fuse = 64;
  std::size_t att = 64;
  std::size_t classes = 2;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Text branch: embedding -> BiLSTM -> masked max-pool -> dropout -> proj_text.
// Time branch: scalar sequence -> LSTM -> final hidden -> dropout -> proj_time.
// The two projections bring both embeddings to a shared width before the
// modality gate; the output head is a dense softmax layer.
struct ModelParams {
  Matrix embedding;  // vocab x embed
  BiLstmParams text_bilstm;
  LstmParams time_lstm;
  Matrix proj_text;  // fuse x 2*text_hidden
  Matrix proj_time;  // fuse x time_hidden
  AttentionParams attention;
  Matrix W_output;  // classes x fuse
  Matrix b_output;  // classes x 1

  static ModelParams init(const ModelDims& d, Rng& rng) {
    ModelParams p;
    p.embedding = init_glorot(d.vocab, d.embed, rng);
    p.text_bilstm.forward = LstmParams::init(d.text_hidden, d.embed, rng);
    p.text_bilstm.backward = LstmParams::init(d.text_hidden, d.embed, rng);
    p.time_lstm = LstmParams::init(d.time_hidden, 1, rng);
    p.proj_text = init_glorot(d.fuse, 2 * d.text_hidden, rng);
    p.proj_time = init_glorot(d.fuse, d.time_hidden, rng);
    p.attention = AttentionParams::init(d.att, d.fuse, rng);
    p.W_output = init_glorot(d.classes, d.fuse, rng);
    p.b_output = Matrix(d.classes, 1);
    return p;
  }

  ModelDims dims() const {
    return {embedding.rows(), embedding.cols(), text_bilstm.forward.hidden(), time_lstm.hidden(),
            proj_text.rows(),  attention.W_text.rows(), W_output.rows()};
  }

  // Throws ShapeError unless every tensor agrees with dims().
  void validate() const;

  std::size_t parameter_count() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Visits every learnable tensor in a fixed order with a stable name. The
// order defines optimizer state layout and checkpoint layout.
template <typename P, typename F>
  requires std::same_as<std::remove_const_t<P>, ModelParams>
void visit_tensors(P& p, F&& f) {
  f(std::string("embedding"), p.embedding);
  visit_tensors(p.text_bilstm, "text_bilstm.", f);
  visit_tensors(p.time_lstm, "time_lstm.", f);
  f(std::string("proj_text"), p.proj_text);
  f(std::string("proj_time"), p.proj_time);
  visit_tensors(p.attention, "attention.", f);
  f(std::string("output.W"), p.W_output);
  f(std::string("output.b"), p.b_output);
}

// Pairwise visit over two parameter sets with identical layout.
template <typename A, typename B, typename F>
void visit_tensor_pairs(A& a, B& b, F&& f) {
  std::vector<std::reference_wrapper<std::conditional_t<std::is_const_v<B>, const Matrix, Matrix>>> rhs;
  visit_tensors(b, [&](const std::string&, auto& m) { rhs.emplace_back(m); });
  std::size_t k = 0;
  visit_tensors(a, [&](const std::string& name, auto& m) { f(name, m, rhs.at(k++).get()); });
}

inline ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  visit_tensors(z, [](const std::string&, Matrix& m) { m.set_zero(); });
  return z;
}

inline std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  visit_tensors(*this, [&](const std::string&, const Matrix& m) { n += m.size(); });
  return n;
}

inline void ModelParams::validate() const {
  const ModelDims d = dims();
  if (d.vocab == 0 || d.embed == 0 || d.text_hidden == 0 || d.time_hidden == 0 || d.fuse == 0 ||
      d.att == 0 || d.classes == 0) {
    throw ShapeError("model dimensions must all be >= 1");
  }
  text_bilstm.validate();
  time_lstm.validate();
  attention.validate();
  auto expect = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows() != r || m.cols() != c)
      throw ShapeError(std::string(name) + " is " + m.shape() + ", expected " + Matrix::shape_str(r, c));
  };
  expect(text_bilstm.forward.W_f, d.text_hidden, d.text_hidden + d.embed, "text_bilstm.forward.W_f");
  expect(time_lstm.W_f, d.time_hidden, d.time_hidden + 1, "time_lstm.W_f");
  expect(proj_text, d.fuse, 2 * d.text_hidden, "proj_text");
  expect(proj_time, d.fuse, d.time_hidden, "proj_time");
  expect(attention.W_text, d.att, d.fuse, "attention.W_text");
  expect(W_output, d.classes, d.fuse, "output.W");
  expect(b_output, d.classes, 1, "output.b");
}

enum class Mode { train, infer };

// Everything the backward pass needs, captured during the forward pass.
struct ForwardTrace {
  ModelDims dims;
  std::vector<TokenId> tokens;
  std::vector<std::uint8_t> mask;
  std::vector<Matrix> embedded;
  BiLstmRun text_run;
  PoolResult pool;
  Matrix text_dropout;  // per-unit multiplier (0 or 1/keep); empty when no dropout
  Matrix text_dropped;
  std::vector<Matrix> time_inputs;
  LstmRun time_run;
  Matrix time_dropout;
  Matrix time_dropped;
  Matrix z_text;
  Matrix z_time;
  AttentionResult attention;
  Matrix logits;  // classes x 1
  Matrix probs;   // classes x 1
};

// Inverted dropout. Returns the multiplier vector, or an empty matrix when
// the layer is a no-op (infer mode or rate 0).
inline Matrix dropout_mask(std::size_t n, double rate, Mode mode, Rng& rng) {
  if (mode == Mode::infer || rate == 0.0) return {};
  if (!(rate > 0.0 && rate < 1.0)) throw UsageError("dropout rate must be in [0, 1)");
  const double keep = 1.0 - rate;
  Matrix m(n, 1);
  for (double& v : m.values()) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return m;
}

inline Matrix apply_mask(const Matrix& x, const Matrix& mask) {
  return mask.empty() ? x : hadamard(x, mask);
}

inline ForwardTrace model_forward(std::span<const TokenId> tokens, std::span<const std::uint8_t> mask,
                                  std::span<const double> temporal, const ModelParams& params,
                                  Mode mode, double dropout, Rng& rng) {
  params.validate();
  ForwardTrace tr;
  tr.dims = params.dims();
  if (tokens.empty() || tokens.size() != mask.size()) {
    throw UsageError("token and mask lengths must match and be non-empty");
  }
  if (temporal.empty()) throw UsageError("temporal sequence is empty");
  tr.tokens.assign(tokens.begin(), tokens.end());
  tr.mask.assign(mask.begin(), mask.end());

  tr.embedded.reserve(tokens.size());
  for (TokenId id : tokens) {
    if (id >= tr.dims.vocab) {
      throw UsageError("token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(tr.dims.vocab));
    }
    tr.embedded.push_back(transpose(row_slice(params.embedding, id, 1)));
  }
  tr.text_run = bilstm_forward(tr.embedded, tr.mask, params.text_bilstm);
  tr.pool = maxpool_masked(tr.text_run.output, tr.mask);
  tr.text_dropout = dropout_mask(tr.pool.pooled.size(), dropout, mode, rng);
  tr.text_dropped = apply_mask(tr.pool.pooled, tr.text_dropout);
  tr.z_text = matmul(params.proj_text, tr.text_dropped);

  tr.time_inputs.reserve(temporal.size());
  for (double v : temporal) tr.time_inputs.push_back(Matrix::column({v}));
  tr.time_run = lstm_forward(tr.time_inputs, params.time_lstm);
  tr.time_dropout = dropout_mask(tr.time_run.h_final().size(), dropout, mode, rng);
  tr.time_dropped = apply_mask(tr.time_run.h_final(), tr.time_dropout);
  tr.z_time = matmul(params.proj_time, tr.time_dropped);

  tr.attention = cross_modal_attention(tr.z_text, tr.z_time, params.attention);
  tr.logits = matmul(params.W_output, tr.attention.fused) + params.b_output;
  tr.probs = transpose(softmax_row(transpose(tr.logits)));
  return tr;
}

// Analytic gradient of every parameter given dL/dlogits.
inline ModelParams model_backward(const ForwardTrace& tr, const ModelParams& params,
                                  const Matrix& grad_logits) {
  if (params.dims() != tr.dims) throw ShapeError("trace was produced by a model with different dimensions");
  if (grad_logits.size() != tr.dims.classes) {
    throw ShapeError("grad_logits " + grad_logits.shape() + " expected " +
                     Matrix::shape_str(tr.dims.classes, 1));
  }
  const Matrix d_logits(tr.dims.classes, 1, std::vector<double>(grad_logits.values().begin(), grad_logits.values().end()));
  ModelParams g = zeros_like(params);

  add_outer(g.W_output, d_logits, tr.attention.fused);
  g.b_output += d_logits;
  const Matrix d_fused = matmul_tn(params.W_output, d_logits);

  const AttentionGrads d_att =
      attention_backward(params.attention, tr.z_text, tr.z_time, tr.attention, d_fused, g.attention);

  // Time branch: only the final hidden state feeds forward.
  add_outer(g.proj_time, d_att.d_time, tr.time_dropped);
  const Matrix d_time_hidden = apply_mask(matmul_tn(params.proj_time, d_att.d_time), tr.time_dropout);
  std::vector<Matrix> dh_time(tr.time_run.steps.size());
  dh_time.back() = d_time_hidden;
  lstm_backward(params.time_lstm, tr.time_run, dh_time, g.time_lstm);

  // Text branch.
  add_outer(g.proj_text, d_att.d_text, tr.text_dropped);
  const Matrix d_pooled = apply_mask(matmul_tn(params.proj_text, d_att.d_text), tr.text_dropout);
  const Matrix d_H = maxpool_backward(tr.pool, tr.tokens.size(), d_pooled);
  const std::vector<Matrix> d_emb = bilstm_backward(params.text_bilstm, tr.text_run, d_H, g.text_bilstm);
  for (std::size_t t = 0; t < tr.tokens.size(); ++t) {
    const TokenId id = tr.tokens[t];
    for (std::size_t j = 0; j < tr.dims.embed; ++j) g.embedding(id, j) += d_emb[t][j];
  }
  return g;
}

}  // namespace cmsq
