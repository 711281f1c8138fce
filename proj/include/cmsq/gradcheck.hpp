#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "cmsq/errors.hpp"
#include "cmsq/matrix.hpp"
#include "cmsq/model.hpp"
#include "cmsq/optim.hpp"
#include "cmsq/random.hpp"

namespace cmsq {

struct GradCheckConfig {
  ModelDims dims{20, 8, 4, 4, 8, 8, 3};
  std::size_t seq_len = 5;
  std::size_t temporal_len = 6;
  std::size_t batch = 4;
  double dropout = 0.0;
  // With dropout > 0: true reuses one mask per example for every loss
  // evaluation, false draws fresh masks each time (which breaks the check).
  bool fixed_masks = true;
  double eps = 1e-5;
  // Tensors larger than this are checked on a random subsample of this size.
  std::size_t max_per_tensor = 256;
  std::uint64_t seed = 7;
};

struct TensorCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& t : tensors) m = std::max(m, t.max_rel_error);
    return m;
  }
  bool passed(double threshold) const { return max_rel_error() < threshold; }
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-12);
}

struct CheckSample {
  std::vector<TokenId> tokens;
  std::vector<std::uint8_t> mask;
  std::vector<double> temporal;
  std::size_t label = 0;
};

// Random right-padded sequences with real tokens drawn from ids >= 2.
inline std::vector<CheckSample> make_check_batch(const GradCheckConfig& cfg, Rng& rng) {
  if (cfg.dims.vocab < 3) throw UsageError("gradient check needs vocab >= 3");
  std::vector<CheckSample> batch(cfg.batch);
  for (std::size_t b = 0; b < cfg.batch; ++b) {
    CheckSample& s = batch[b];
    const std::size_t len = 1 + rng.below(cfg.seq_len);
    for (std::size_t t = 0; t < cfg.seq_len; ++t) {
      const bool real = t < len;
      s.tokens.push_back(real ? static_cast<TokenId>(2 + rng.below(cfg.dims.vocab - 2)) : 0);
      s.mask.push_back(real ? 1 : 0);
    }
    for (std::size_t k = 0; k < cfg.temporal_len; ++k) s.temporal.push_back(rng.uniform());
    s.label = b % cfg.dims.classes;
  }
  return batch;
}

// Compares analytic gradients of the mean cross-entropy over a small random
// batch against central differences (L(θ+eps) - L(θ-eps)) / (2 eps).
inline GradCheckReport grad_check(const GradCheckConfig& cfg) {
  if (!(cfg.eps >= 1e-7 && cfg.eps <= 1e-3)) throw UsageError("eps must lie in [1e-7, 1e-3]");
  if (cfg.batch == 0 || cfg.seq_len == 0 || cfg.temporal_len == 0) {
    throw UsageError("gradient check needs non-empty batch and sequences");
  }
  Rng init_rng = Rng::derive(cfg.seed, 0);
  ModelParams params = ModelParams::init(cfg.dims, init_rng);
  Rng data_rng = Rng::derive(cfg.seed, 1);
  const std::vector<CheckSample> batch = make_check_batch(cfg, data_rng);
  Rng free_rng = Rng::derive(cfg.seed, 2);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  auto mask_rng = [&](std::size_t b) {
    return cfg.fixed_masks ? Rng::derive(cfg.seed, 1000 + b) : Rng(free_rng.next_u64());
  };

  auto logits = [&](const ModelParams& p) {
    std::vector<Matrix> out;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      Rng rng = mask_rng(b);
      out.push_back(model_forward(batch[b].tokens, batch[b].mask, batch[b].temporal, p, Mode::train,
                                  cfg.dropout, rng)
                        .logits);
    }
    return out;
  };

  // L(θ+) - L(θ-) for the batch-mean cross-entropy. Per example,
  //   CE(z+) - CE(z-) = log(sum_i p-_i exp(z+_i - z-_i)) - (z+_y - z-_y)
  // evaluated through log1p/expm1, so the difference is not lost to
  // rounding of two nearly equal O(1) losses.
  auto loss_delta = [&](const std::vector<Matrix>& up, const std::vector<Matrix>& down) {
    double total = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Matrix p_down = softmax_row(transpose(down[b]));
      double acc = 0.0;
      for (std::size_t i = 0; i < p_down.size(); ++i) acc += p_down[i] * std::expm1(up[b][i] - down[b][i]);
      const std::size_t y = batch[b].label;
      total += std::log1p(acc) - (up[b][y] - down[b][y]);
    }
    return total * inv_batch;
  };

  ModelParams analytic = zeros_like(params);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    Rng rng = mask_rng(b);
    const ForwardTrace tr = model_forward(batch[b].tokens, batch[b].mask, batch[b].temporal, params,
                                          Mode::train, cfg.dropout, rng);
    const ModelParams g =
        model_backward(tr, params, ce_softmax_grad(tr.probs.values(), batch[b].label) * inv_batch);
    visit_tensor_pairs(analytic, g, [](const std::string&, Matrix& acc, const Matrix& x) { acc += x; });
  }

  GradCheckReport report;
  Rng pick_rng = Rng::derive(cfg.seed, 3);
  visit_tensor_pairs(params, analytic, [&](const std::string& name, Matrix& theta, const Matrix& ga) {
    std::vector<std::size_t> indices(theta.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (indices.size() > cfg.max_per_tensor) {
      shuffle(std::span<std::size_t>(indices), pick_rng);
      indices.resize(cfg.max_per_tensor);
      std::sort(indices.begin(), indices.end());
    }
    TensorCheck tc{name, indices.size()};
    for (std::size_t i : indices) {
      const double saved = theta[i];
      const double step = (saved + cfg.eps) - (saved - cfg.eps);
      theta[i] = saved + cfg.eps;
      const std::vector<Matrix> up = logits(params);
      theta[i] = saved - cfg.eps;
      const std::vector<Matrix> down = logits(params);
      theta[i] = saved;
      const double numeric = loss_delta(up, down) / step;
      const double err = relative_error(ga[i], numeric);
      if (err >= tc.max_rel_error) {
        tc.max_rel_error = err;
        tc.worst_index = i;
        tc.analytic = ga[i];
        tc.numeric = numeric;
      }
    }
    report.tensors.push_back(std::move(tc));
  });
  return report;
}

}  // namespace cmsq
