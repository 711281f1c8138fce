#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cmsq/errors.hpp"
#include "cmsq/matrix.hpp"
#include "cmsq/model.hpp"

namespace cmsq {

struct RmspropConfig {
  double eta = 0.0005;
  double beta = 0.99;
  double mu = 0.9;
  double epsilon = 1e-8;
  double weight_decay = 1e-5;
};

// RMSprop with classic momentum on the scaled step:
//   g  <- g + weight_decay * theta
//   s  <- beta * s + (1 - beta) * g^2
//   v  <- mu * v + eta * g / sqrt(s + epsilon)
//   theta <- theta - v
// mu = 0 gives plain RMSprop.
class Rmsprop {
 public:
  Rmsprop(const ModelParams& params, RmspropConfig config) : config_(config) {
    visit_tensors(params, [&](const std::string&, const Matrix& m) {
      sq_avg_.emplace_back(m.rows(), m.cols());
      momentum_.emplace_back(m.rows(), m.cols());
    });
  }

  const RmspropConfig& config() const noexcept { return config_; }
  const std::vector<Matrix>& sq_avg() const noexcept { return sq_avg_; }
  const std::vector<Matrix>& momentum() const noexcept { return momentum_; }

  void step(ModelParams& params, const ModelParams& grads) {
    std::size_t k = 0;
    visit_tensor_pairs(params, grads, [&](const std::string& name, Matrix& theta, const Matrix& g) {
      if (k >= sq_avg_.size() || !theta.same_shape(g) || !theta.same_shape(sq_avg_[k])) {
        throw ShapeError("optimizer state does not match tensor " + name);
      }
      if (!all_finite(g)) throw NumericalError("non-finite gradient in tensor " + name);
      update(theta.values(), g.values(), sq_avg_[k].values(), momentum_[k].values());
      ++k;
    });
  }

  // Single-tensor form of step(); exposed for hand-checkable scalar cases.
  void update(std::span<double> theta, std::span<const double> grad, std::span<double> sq_avg,
              std::span<double> momentum) const {
    const auto& c = config_;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i] + c.weight_decay * theta[i];
      sq_avg[i] = c.beta * sq_avg[i] + (1.0 - c.beta) * g * g;
      momentum[i] = c.mu * momentum[i] + c.eta * g / std::sqrt(sq_avg[i] + c.epsilon);
      theta[i] -= momentum[i];
    }
  }

 private:
  RmspropConfig config_;
  std::vector<Matrix> sq_avg_;
  std::vector<Matrix> momentum_;
};

inline constexpr double kProbFloor = 1e-12;

// -log(p[label]) with p clamped at 1e-12.
inline double cross_entropy(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) {
    throw UsageError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(probs.size()) + " classes");
  }
  return -std::log(std::max(probs[label], kProbFloor));
}

// d(cross_entropy(softmax(z)))/dz = p - onehot(label).
inline Matrix ce_softmax_grad(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) {
    throw UsageError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(probs.size()) + " classes");
  }
  Matrix g = Matrix::column(probs);
  g[label] -= 1.0;
  return g;
}

}  // namespace cmsq
