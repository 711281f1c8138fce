#pragma once

#include <concepts>
#include <cstddef>
#include <string>
#include <type_traits>
#include <tuple>
#include <utility>

#include "cmsq/errors.hpp"
#include "cmsq/matrix.hpp"
#include "cmsq/random.hpp"

namespace cmsq {

// Two-way modality gate. Each modality gets a scalar score
//   s = w^T tanh(W z + b)
// and the weights are a / (a + b) with a = exp(s_text), b = exp(s_time).
struct AttentionParams {
  Matrix W_text;  // att x fuse
  Matrix b_text;  // att x 1
  Matrix W_time;  // att x fuse
  Matrix b_time;  // att x 1
  Matrix w;       // att x 1

  static AttentionParams init(std::size_t att, std::size_t fuse, Rng& rng) {
    return {init_glorot(att, fuse, rng), Matrix(att, 1), init_glorot(att, fuse, rng), Matrix(att, 1),
            init_glorot(att, 1, rng)};
  }

  void validate() const {
    const std::size_t att = W_text.rows();
    if (!W_time.same_shape(W_text)) throw ShapeError("attention W_time " + W_time.shape() + " vs W_text " + W_text.shape());
    for (const Matrix* v : {&b_text, &b_time, &w})
      if (v->rows() != att || v->cols() != 1)
        throw ShapeError("attention vector " + v->shape() + " expected " + Matrix::shape_str(att, 1));
  }

  friend bool operator==(const AttentionParams&, const AttentionParams&) = default;
};

template <typename P, typename F>
  requires std::same_as<std::remove_const_t<P>, AttentionParams>
void visit_tensors(P& p, const std::string& prefix, F&& f) {
  f(prefix + "W_text", p.W_text);
  f(prefix + "W_time", p.W_time);
  f(prefix + "b_text", p.b_text);
  f(prefix + "b_time", p.b_time);
  f(prefix + "w", p.w);
}

// a/(a+b) and b/(a+b) evaluated as logistic functions of the score
// difference, so large scores cannot overflow.
inline std::pair<double, double> attention_weights(double score_text, double score_time) noexcept {
  const double d = score_text - score_time;
  return {sigmoid(d), sigmoid(-d)};
}

struct AttentionResult {
  Matrix fused;
  double alpha_text = 0.0;
  double alpha_time = 0.0;
  double score_text = 0.0;
  double score_time = 0.0;
  Matrix u_text;  // tanh(W_text z_text + b_text)
  Matrix u_time;
};

inline AttentionResult cross_modal_attention(const Matrix& z_text, const Matrix& z_time,
                                             const AttentionParams& p) {
  p.validate();
  if (!z_text.same_shape(z_time) || z_text.cols() != 1 || z_text.rows() != p.W_text.cols()) {
    throw ShapeError("attention inputs " + z_text.shape() + " and " + z_time.shape() +
                     " must both be " + Matrix::shape_str(p.W_text.cols(), 1));
  }
  AttentionResult r;
  r.u_text = tanh_m(matmul(p.W_text, z_text) + p.b_text);
  r.u_time = tanh_m(matmul(p.W_time, z_time) + p.b_time);
  r.score_text = dot(p.w, r.u_text);
  r.score_time = dot(p.w, r.u_time);
  std::tie(r.alpha_text, r.alpha_time) = attention_weights(r.score_text, r.score_time);
  r.fused = z_text * r.alpha_text + z_time * r.alpha_time;
  return r;
}

struct AttentionGrads {
  Matrix d_text;
  Matrix d_time;
};

inline AttentionGrads attention_backward(const AttentionParams& p, const Matrix& z_text,
                                         const Matrix& z_time, const AttentionResult& r,
                                         const Matrix& d_fused, AttentionParams& grads) {
  AttentionGrads out{d_fused * r.alpha_text, d_fused * r.alpha_time};
  const double d_alpha_text = dot(d_fused, z_text);
  const double d_alpha_time = dot(d_fused, z_time);
  // alpha_text = sigmoid(s_text - s_time), alpha_time = 1 - alpha_text.
  const double d_diff = (d_alpha_text - d_alpha_time) * r.alpha_text * r.alpha_time;

  auto branch = [&](double d_score, const Matrix& u, const Matrix& z, const Matrix& W, Matrix& dW,
                    Matrix& db, Matrix& dz) {
    grads.w += u * d_score;
    Matrix d_pre = p.w * d_score;
    for (std::size_t k = 0; k < d_pre.size(); ++k) d_pre[k] *= 1.0 - u[k] * u[k];
    add_outer(dW, d_pre, z);
    db += d_pre;
    dz += matmul_tn(W, d_pre);
  };
  branch(d_diff, r.u_text, z_text, p.W_text, grads.W_text, grads.b_text, out.d_text);
  branch(-d_diff, r.u_time, z_time, p.W_time, grads.W_time, grads.b_time, out.d_time);
  return out;
}

}  // namespace cmsq
