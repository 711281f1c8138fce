#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cmsq/checkpoint.hpp"
#include "cmsq/config.hpp"
#include "cmsq/errors.hpp"
#include "cmsq/metrics.hpp"
#include "cmsq/model.hpp"
#include "cmsq/optim.hpp"
#include "cmsq/preprocess.hpp"
#include "cmsq/random.hpp"

namespace cmsq {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double val_weighted_f1 = 0.0;
  double wall_seconds = 0.0;

  // Everything except wall time, which is not reproducible.
  bool same_numbers(const EpochLog& o) const {
    return epoch == o.epoch && train_loss == o.train_loss && val_loss == o.val_loss &&
           val_accuracy == o.val_accuracy && val_weighted_f1 == o.val_weighted_f1;
  }
};

inline std::string format_epoch_log(const EpochLog& e) {
  return "epoch=" + std::to_string(e.epoch) + " train_loss=" + format_double(e.train_loss) +
         " val_loss=" + format_double(e.val_loss) + " val_accuracy=" + format_double(e.val_accuracy) +
         " val_weighted_f1=" + format_double(e.val_weighted_f1) + " wall_seconds=" + format_double(e.wall_seconds);
}

struct TrainHooks {
  std::size_t threads = 1;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  ModelParams best;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  double best_f1 = 0.0;
};

// Stream ids for Rng::derive(seed, ...).
inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kShuffleStream = 2;
inline constexpr std::uint64_t kDropoutStream = 3;

struct Evaluation {
  ConfusionMatrix confusion;
  double mean_loss = 0.0;
  std::vector<std::size_t> predictions;
};

// Infer-mode pass; never touches parameters.
inline Evaluation evaluate_examples(const ModelParams& params, std::span<const Example> examples) {
  const std::size_t classes = params.dims().classes;
  Evaluation ev{ConfusionMatrix(classes), 0.0, {}};
  Rng unused(0);
  for (const Example& e : examples) {
    const ForwardTrace tr = model_forward(e.token_ids, e.mask, e.temporal, params, Mode::infer, 0.0, unused);
    ev.mean_loss += cross_entropy(tr.probs.values(), e.label);
    const std::size_t pred = argmax(tr.probs.values());
    ev.predictions.push_back(pred);
    ev.confusion.add(e.label, pred);
  }
  if (!examples.empty()) ev.mean_loss /= static_cast<double>(examples.size());
  return ev;
}

namespace detail {

struct ExampleGrad {
  ModelParams grads;
  double loss = 0.0;
};

inline ExampleGrad example_gradient(const ModelParams& params, const Example& e, double dropout,
                                    double batch_scale, Rng rng) {
  const ForwardTrace tr = model_forward(e.token_ids, e.mask, e.temporal, params, Mode::train, dropout, rng);
  const double loss = cross_entropy(tr.probs.values(), e.label);
  return {model_backward(tr, params, ce_softmax_grad(tr.probs.values(), e.label) * batch_scale), loss};
}

}  // namespace detail

// Mini-batch RMSprop training with per-epoch validation. Returns the
// parameters from the epoch with the highest validation weighted F1 (the
// earliest on ties). Per-example gradients are summed in batch order, so
// results do not depend on hooks.threads.
inline TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set,
                         const TrainConfig& cfg, std::size_t vocab_rows, std::size_t classes,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  Rng init_rng = Rng::derive(cfg.seed, kInitStream);
  ModelParams params = ModelParams::init(cfg.dims(vocab_rows, classes), init_rng);
  TrainResult result{params, {}, 0, 0.0};
  if (cfg.epochs == 0) return result;
  if (train_set.empty() || val_set.empty()) throw UsageError("training needs non-empty train and validation sets");

  Rmsprop opt(params, {cfg.eta, cfg.beta, cfg.mu, cfg.epsilon, cfg.weight_decay});
  const std::uint64_t shuffle_seed = Rng::derive(cfg.seed, kShuffleStream).next_u64();
  const std::uint64_t dropout_seed = Rng::derive(cfg.seed, kDropoutStream).next_u64();
  const std::size_t threads = std::max<std::size_t>(1, hooks.threads);
  const std::size_t n = train_set.size();
  double best_f1 = -1.0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = Rng::derive(shuffle_seed, epoch);
    shuffle(std::span<std::size_t>(order), shuffle_rng);

    double epoch_loss = 0.0;
    for (std::size_t begin = 0, batch = 0; begin < n; begin += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - begin);
      ModelParams acc = zeros_like(params);
      double batch_loss = 0.0;
      auto rng_for = [&](std::size_t pos) { return Rng::derive(dropout_seed, (epoch - 1) * n + pos); };

      for (std::size_t wave = begin; wave < end; wave += threads) {
        const std::size_t wave_end = std::min(end, wave + threads);
        std::vector<detail::ExampleGrad> out(wave_end - wave);
        if (out.size() == 1) {
          out[0] = detail::example_gradient(params, train_set[order[wave]], cfg.dropout, scale, rng_for(wave));
        } else {
          std::vector<std::thread> pool;
          for (std::size_t k = 0; k < out.size(); ++k) {
            pool.emplace_back([&, k] {
              out[k] = detail::example_gradient(params, train_set[order[wave + k]], cfg.dropout, scale,
                                                rng_for(wave + k));
            });
          }
          for (auto& t : pool) t.join();
        }
        for (auto& g : out) {
          visit_tensor_pairs(acc, g.grads, [](const std::string&, Matrix& a, const Matrix& x) { a += x; });
          batch_loss += g.loss;
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch + 1));
      }
      try {
        opt.step(params, acc);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch + 1));
      }
      epoch_loss += batch_loss;
    }

    const Evaluation ev = evaluate_examples(params, val_set);
    const EvalReport report = evaluate(ev.confusion);
    EpochLog log{epoch, epoch_loss / static_cast<double>(n), ev.mean_loss, report.accuracy, report.weighted_f1, 0.0};
    log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (report.weighted_f1 > best_f1) {
      best_f1 = report.weighted_f1;
      result.best = params;
      result.best_epoch = epoch;
      result.best_f1 = best_f1;
    }
    result.log.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(log);
  }
  return result;
}

struct Prediction {
  std::size_t class_id = 0;
  std::string label;
  std::vector<double> probs;
  double alpha_text = 0.0;
  double alpha_time = 0.0;
};

// Full preprocessing plus an infer-mode forward pass.
inline Prediction predict(const Checkpoint& ck, std::string_view title, std::string_view selftext,
                          std::int64_t created_utc) {
  const std::string text = clean_text(title, selftext);
  const EncodedText enc = encode_text(text, ck.vocab, ck.config.max_len);
  if (text.empty()) throw DataError("post has no tokens after cleaning");
  const WorkingHours hours{ck.config.work_first_hour, ck.config.work_last_hour};
  const TemporalVector temporal = ck.scaler.apply(extract_temporal(created_utc, hours));
  Rng unused(0);
  const ForwardTrace tr = model_forward(enc.token_ids, enc.mask, temporal, ck.params, Mode::infer, 0.0, unused);
  Prediction p;
  p.probs.assign(tr.probs.values().begin(), tr.probs.values().end());
  p.class_id = argmax(p.probs);
  p.label = ck.labels.name(p.class_id);
  p.alpha_text = tr.attention.alpha_text;
  p.alpha_time = tr.attention.alpha_time;
  return p;
}

}  // namespace cmsq
