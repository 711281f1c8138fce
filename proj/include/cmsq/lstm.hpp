#pragma once

#include <cstddef>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "cmsq/errors.hpp"
#include "cmsq/matrix.hpp"
#include "cmsq/random.hpp"

namespace cmsq {

// Gate weights act on the stacked vector [h_prev; x_t].
struct LstmParams {
  Matrix W_f, W_i, W_o, W_c;  // hidden x (hidden + input)
  Matrix b_f, b_i, b_o, b_c;  // hidden x 1

  std::size_t hidden() const noexcept { return W_f.rows(); }
  std::size_t input() const noexcept { return W_f.cols() - W_f.rows(); }

  static LstmParams zeros(std::size_t hidden, std::size_t input) {
    const Matrix w(hidden, hidden + input);
    const Matrix b(hidden, 1);
    return {w, w, w, w, b, b, b, b};
  }

  // Glorot weights, zero biases, forget-gate bias 1.
  static LstmParams init(std::size_t hidden, std::size_t input, Rng& rng) {
    LstmParams p = zeros(hidden, input);
    p.W_f = init_glorot(hidden, hidden + input, rng);
    p.W_i = init_glorot(hidden, hidden + input, rng);
    p.W_o = init_glorot(hidden, hidden + input, rng);
    p.W_c = init_glorot(hidden, hidden + input, rng);
    p.b_f = Matrix(hidden, 1, 1.0);
    return p;
  }

  void validate() const {
    const std::size_t h = W_f.rows();
    if (h == 0 || W_f.cols() <= h) throw ShapeError("LSTM weight shape " + W_f.shape() + " invalid");
    for (const Matrix* w : {&W_i, &W_o, &W_c})
      if (!w->same_shape(W_f)) throw ShapeError("LSTM gate weights differ: " + w->shape() + " vs " + W_f.shape());
    for (const Matrix* b : {&b_f, &b_i, &b_o, &b_c})
      if (b->rows() != h || b->cols() != 1)
        throw ShapeError("LSTM bias shape " + b->shape() + " expected " + Matrix::shape_str(h, 1));
  }

  friend bool operator==(const LstmParams&, const LstmParams&) = default;
};

template <typename P, typename F>
  requires std::same_as<std::remove_const_t<P>, LstmParams>
void visit_tensors(P& p, const std::string& prefix, F&& f) {
  f(prefix + "W_f", p.W_f);
  f(prefix + "W_i", p.W_i);
  f(prefix + "W_o", p.W_o);
  f(prefix + "W_c", p.W_c);
  f(prefix + "b_f", p.b_f);
  f(prefix + "b_i", p.b_i);
  f(prefix + "b_o", p.b_o);
  f(prefix + "b_c", p.b_c);
}

struct GateCache {
  Matrix stacked;  // [h_prev; x_t]
  Matrix f, i, o, g;
  Matrix c_prev, tanh_c;
};

struct LstmStep {
  Matrix h, c;
  GateCache cache;
};

inline LstmStep lstm_cell(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                          const LstmParams& p) {
  const std::size_t hidden = p.hidden();
  if (x.cols() != 1 || x.rows() != p.input()) {
    throw ShapeError("lstm_cell input " + x.shape() + " expected " + Matrix::shape_str(p.input(), 1));
  }
  if (h_prev.rows() != hidden || h_prev.cols() != 1 || !c_prev.same_shape(h_prev)) {
    throw ShapeError("lstm_cell state " + h_prev.shape() + "/" + c_prev.shape() + " expected " +
                     Matrix::shape_str(hidden, 1));
  }
  LstmStep s;
  s.cache.stacked = vconcat(h_prev, x);
  s.cache.f = sigmoid(matmul(p.W_f, s.cache.stacked) + p.b_f);
  s.cache.i = sigmoid(matmul(p.W_i, s.cache.stacked) + p.b_i);
  s.cache.o = sigmoid(matmul(p.W_o, s.cache.stacked) + p.b_o);
  s.cache.g = tanh_m(matmul(p.W_c, s.cache.stacked) + p.b_c);
  s.cache.c_prev = c_prev;
  s.c = hadamard(s.cache.f, c_prev) + hadamard(s.cache.i, s.cache.g);
  s.cache.tanh_c = tanh_m(s.c);
  s.h = hadamard(s.cache.o, s.cache.tanh_c);
  return s;
}

struct LstmRun {
  std::vector<Matrix> hidden;  // h_1 .. h_T
  std::vector<GateCache> steps;
  const Matrix& h_final() const { return hidden.back(); }
};

// h_0 = c_0 = 0.
inline LstmRun lstm_forward(std::span<const Matrix> seq, const LstmParams& p) {
  if (seq.empty()) throw UsageError("lstm_forward needs a non-empty sequence");
  p.validate();
  LstmRun run;
  run.hidden.reserve(seq.size());
  run.steps.reserve(seq.size());
  Matrix h(p.hidden(), 1);
  Matrix c(p.hidden(), 1);
  for (const Matrix& x : seq) {
    LstmStep s = lstm_cell(x, h, c, p);
    h = s.h;
    c = std::move(s.c);
    run.hidden.push_back(std::move(s.h));
    run.steps.push_back(std::move(s.cache));
  }
  return run;
}

// Backpropagation through time. dh[t] is the loss gradient arriving at h_t
// from outside the recurrence; an empty matrix means zero. Parameter
// gradients are accumulated into grads; returns dL/dx_t for every step.
inline std::vector<Matrix> lstm_backward(const LstmParams& p, const LstmRun& run,
                                         std::span<const Matrix> dh, LstmParams& grads) {
  const std::size_t steps = run.steps.size();
  if (dh.size() != steps) throw ShapeError("lstm_backward: gradient count does not match steps");
  const std::size_t hidden = p.hidden();
  std::vector<Matrix> dx(steps);
  Matrix dh_next(hidden, 1);
  Matrix dc_next(hidden, 1);
  for (std::size_t k = steps; k-- > 0;) {
    const GateCache& gc = run.steps[k];
    Matrix dh_total = dh_next;
    if (!dh[k].empty()) dh_total += dh[k];

    Matrix dz_f(hidden, 1), dz_i(hidden, 1), dz_o(hidden, 1), dz_g(hidden, 1), dc(hidden, 1);
    for (std::size_t j = 0; j < hidden; ++j) {
      const double f = gc.f[j], i = gc.i[j], o = gc.o[j], g = gc.g[j], tc = gc.tanh_c[j];
      dz_o[j] = dh_total[j] * tc * o * (1.0 - o);
      dc[j] = dc_next[j] + dh_total[j] * o * (1.0 - tc * tc);
      dz_f[j] = dc[j] * gc.c_prev[j] * f * (1.0 - f);
      dz_i[j] = dc[j] * g * i * (1.0 - i);
      dz_g[j] = dc[j] * i * (1.0 - g * g);
    }
    add_outer(grads.W_f, dz_f, gc.stacked);
    add_outer(grads.W_i, dz_i, gc.stacked);
    add_outer(grads.W_o, dz_o, gc.stacked);
    add_outer(grads.W_c, dz_g, gc.stacked);
    grads.b_f += dz_f;
    grads.b_i += dz_i;
    grads.b_o += dz_o;
    grads.b_c += dz_g;

    Matrix dstacked = matmul_tn(p.W_f, dz_f);
    dstacked += matmul_tn(p.W_i, dz_i);
    dstacked += matmul_tn(p.W_o, dz_o);
    dstacked += matmul_tn(p.W_c, dz_g);
    dh_next = row_slice(dstacked, 0, hidden);
    dx[k] = row_slice(dstacked, hidden, dstacked.rows() - hidden);
    dc_next = hadamard(dc, gc.f);
  }
  return dx;
}

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;

  void validate() const {
    forward.validate();
    backward.validate();
    if (!forward.W_f.same_shape(backward.W_f))
      throw ShapeError("BiLSTM directions differ: " + forward.W_f.shape() + " vs " + backward.W_f.shape());
  }

  friend bool operator==(const BiLstmParams&, const BiLstmParams&) = default;
};

template <typename P, typename F>
  requires std::same_as<std::remove_const_t<P>, BiLstmParams>
void visit_tensors(P& p, const std::string& prefix, F&& f) {
  visit_tensors(p.forward, prefix + "forward.", f);
  visit_tensors(p.backward, prefix + "backward.", f);
}

struct BiLstmRun {
  LstmRun forward;
  LstmRun backward;  // over the reversed sequence: step k is position T-1-k
  Matrix output;     // T x 2*hidden, row t = [h_fwd_t ; h_bwd_t]
};

inline void require_any_mask(std::span<const std::uint8_t> mask) {
  for (auto m : mask)
    if (m) return;
  throw UsageError("mask has no real tokens");
}

// Both directions run over every position, padding included; the mask only
// gates pooling.
inline BiLstmRun bilstm_forward(std::span<const Matrix> emb_seq, std::span<const std::uint8_t> mask,
                                const BiLstmParams& p) {
  if (emb_seq.size() != mask.size()) {
    throw ShapeError("bilstm_forward: sequence length " + std::to_string(emb_seq.size()) +
                     " != mask length " + std::to_string(mask.size()));
  }
  require_any_mask(mask);
  p.validate();
  const std::size_t steps = emb_seq.size();
  const std::size_t hidden = p.forward.hidden();
  BiLstmRun run;
  run.forward = lstm_forward(emb_seq, p.forward);
  std::vector<Matrix> reversed(emb_seq.rbegin(), emb_seq.rend());
  run.backward = lstm_forward(reversed, p.backward);
  run.output = Matrix(steps, 2 * hidden);
  for (std::size_t t = 0; t < steps; ++t) {
    const Matrix& hf = run.forward.hidden[t];
    const Matrix& hb = run.backward.hidden[steps - 1 - t];
    for (std::size_t j = 0; j < hidden; ++j) {
      run.output(t, j) = hf[j];
      run.output(t, hidden + j) = hb[j];
    }
  }
  return run;
}

// d_output is T x 2*hidden. Returns dL/dx per position (both directions summed).
inline std::vector<Matrix> bilstm_backward(const BiLstmParams& p, const BiLstmRun& run,
                                           const Matrix& d_output, BiLstmParams& grads) {
  const std::size_t steps = run.forward.hidden.size();
  const std::size_t hidden = p.forward.hidden();
  if (d_output.rows() != steps || d_output.cols() != 2 * hidden) {
    throw ShapeError("bilstm_backward gradient " + d_output.shape() + " expected " +
                     Matrix::shape_str(steps, 2 * hidden));
  }
  std::vector<Matrix> dh_fwd(steps, Matrix(hidden, 1));
  std::vector<Matrix> dh_bwd(steps, Matrix(hidden, 1));
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < hidden; ++j) {
      dh_fwd[t][j] = d_output(t, j);
      dh_bwd[steps - 1 - t][j] = d_output(t, hidden + j);
    }
  }
  std::vector<Matrix> dx = lstm_backward(p.forward, run.forward, dh_fwd, grads.forward);
  const std::vector<Matrix> dx_rev = lstm_backward(p.backward, run.backward, dh_bwd, grads.backward);
  for (std::size_t t = 0; t < steps; ++t) dx[t] += dx_rev[steps - 1 - t];
  return dx;
}

struct PoolResult {
  Matrix pooled;                   // features x 1
  std::vector<std::size_t> argmax;  // winning time index per feature
};

// Elementwise max over rows whose mask bit is set; ties go to the lowest index.
inline PoolResult maxpool_masked(const Matrix& H, std::span<const std::uint8_t> mask) {
  if (H.rows() != mask.size()) {
    throw ShapeError("maxpool_masked: " + H.shape() + " rows vs mask length " + std::to_string(mask.size()));
  }
  require_any_mask(mask);
  PoolResult r{Matrix(H.cols(), 1), std::vector<std::size_t>(H.cols(), 0)};
  std::vector<bool> seen(H.cols(), false);
  for (std::size_t t = 0; t < H.rows(); ++t) {
    if (!mask[t]) continue;
    for (std::size_t j = 0; j < H.cols(); ++j) {
      if (!seen[j] || H(t, j) > r.pooled[j]) {
        r.pooled[j] = H(t, j);
        r.argmax[j] = t;
        seen[j] = true;
      }
    }
  }
  return r;
}

inline Matrix maxpool_backward(const PoolResult& pool, std::size_t steps, const Matrix& d_pooled) {
  Matrix dH(steps, pool.argmax.size());
  for (std::size_t j = 0; j < pool.argmax.size(); ++j) dH(pool.argmax[j], j) = d_pooled[j];
  return dH;
}

}  // namespace cmsq
