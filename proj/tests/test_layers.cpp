#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

using cmsq::Matrix;
using cmsq::Rng;

namespace {

cmsq::LstmParams random_lstm(std::size_t hidden, std::size_t input, Rng& rng) {
  cmsq::LstmParams p = cmsq::LstmParams::zeros(hidden, input);
  for (Matrix* m : {&p.W_f, &p.W_i, &p.W_o, &p.W_c, &p.b_f, &p.b_i, &p.b_o, &p.b_c})
    *m = oracle::random_matrix(m->rows(), m->cols(), rng);
  return p;
}

std::vector<Matrix> random_sequence(std::size_t steps, std::size_t width, Rng& rng) {
  std::vector<Matrix> seq;
  for (std::size_t t = 0; t < steps; ++t) seq.push_back(oracle::random_matrix(width, 1, rng));
  return seq;
}

const oracle::ScalarLstm kScalar{0.3, -0.7, 0.1, 0.5, 0.9, -0.2, -0.4, 0.6, 0.05, 0.8, -1.1, 0.3};

}  // namespace

TEST(LstmCell, ZeroParamsHalveTheCell) {
  const cmsq::LstmParams p = cmsq::LstmParams::zeros(3, 2);
  const Matrix x = Matrix::column({0.4, -2.0});
  const Matrix h(3, 1);
  const Matrix c = Matrix::column({1.0, -0.5, 0.0});
  const cmsq::LstmStep s = cmsq::lstm_cell(x, h, c, p);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(s.cache.f[j], 0.5);
    EXPECT_EQ(s.cache.i[j], 0.5);
    EXPECT_EQ(s.cache.o[j], 0.5);
    EXPECT_DOUBLE_EQ(s.c[j], 0.5 * c[j]);
    EXPECT_DOUBLE_EQ(s.h[j], 0.5 * std::tanh(0.5 * c[j]));
  }
  EXPECT_EQ(s.h[2], 0.0);
}

TEST(LstmCell, ScalarHandArithmetic) {
  double h = 0.2, c = -0.3;
  const double x = 0.7;
  const cmsq::LstmStep s =
      cmsq::lstm_cell(Matrix::column({x}), Matrix::column({h}), Matrix::column({c}), kScalar.params());
  kScalar.step(x, h, c);
  EXPECT_NEAR(s.h[0], h, 1e-12);
  EXPECT_NEAR(s.c[0], c, 1e-12);
}

TEST(LstmCell, HiddenStateBounded) {
  Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    const cmsq::LstmParams p = random_lstm(4, 3, rng);
    const cmsq::LstmStep s = cmsq::lstm_cell(oracle::random_matrix(3, 1, rng, 50.0),
                                             oracle::random_matrix(4, 1, rng), oracle::random_matrix(4, 1, rng, 10.0), p);
    for (double v : s.h.values()) EXPECT_LT(std::abs(v), 1.0);
  }
}

TEST(LstmCell, RejectsBadShapes) {
  const cmsq::LstmParams p = cmsq::LstmParams::zeros(3, 2);
  EXPECT_THROW(cmsq::lstm_cell(Matrix(3, 1), Matrix(3, 1), Matrix(3, 1), p), cmsq::ShapeError);
  EXPECT_THROW(cmsq::lstm_cell(Matrix(2, 1), Matrix(2, 1), Matrix(3, 1), p), cmsq::ShapeError);
}

TEST(LstmForward, SingleStepEqualsCell) {
  Rng rng(12);
  const cmsq::LstmParams p = random_lstm(3, 2, rng);
  const auto seq = random_sequence(1, 2, rng);
  const cmsq::LstmRun run = cmsq::lstm_forward(seq, p);
  const cmsq::LstmStep s = cmsq::lstm_cell(seq[0], Matrix(3, 1), Matrix(3, 1), p);
  EXPECT_EQ(run.h_final(), s.h);
}

TEST(LstmForward, Deterministic) {
  Rng rng(13);
  const cmsq::LstmParams p = random_lstm(3, 2, rng);
  const auto seq = random_sequence(6, 2, rng);
  EXPECT_EQ(cmsq::lstm_forward(seq, p).hidden, cmsq::lstm_forward(seq, p).hidden);
}

TEST(LstmForward, ScalarUnrolledOracle) {
  const std::vector<double> xs = {0.1, -0.4, 0.9, 0.3, -1.2};
  std::vector<Matrix> seq;
  for (double x : xs) seq.push_back(Matrix::column({x}));
  const cmsq::LstmRun run = cmsq::lstm_forward(seq, kScalar.params());
  double h = 0.0, c = 0.0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    kScalar.step(xs[t], h, c);
    EXPECT_NEAR(run.hidden[t][0], h, 1e-12) << "step " << t;
  }
}

TEST(LstmForward, EmptySequenceIsUsageError) {
  EXPECT_THROW(cmsq::lstm_forward({}, cmsq::LstmParams::zeros(2, 2)), cmsq::UsageError);
}

TEST(BiLstm, BackwardHalfIsForwardRunOnReversedSequence) {
  Rng rng(14);
  cmsq::BiLstmParams p{random_lstm(3, 4, rng), random_lstm(3, 4, rng)};
  const auto seq = random_sequence(7, 4, rng);
  const std::vector<std::uint8_t> mask(7, 1);
  const cmsq::BiLstmRun bi = cmsq::bilstm_forward(seq, mask, p);
  const std::vector<Matrix> reversed(seq.rbegin(), seq.rend());
  const cmsq::LstmRun rev = cmsq::lstm_forward(reversed, p.backward);
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(bi.output(t, 3 + j), rev.hidden[6 - t][j]);
}

TEST(BiLstm, SingleStepIsConcatOfTwoCells) {
  Rng rng(15);
  cmsq::BiLstmParams p{random_lstm(2, 3, rng), random_lstm(2, 3, rng)};
  const auto seq = random_sequence(1, 3, rng);
  const cmsq::BiLstmRun bi = cmsq::bilstm_forward(seq, std::vector<std::uint8_t>{1}, p);
  const auto f = cmsq::lstm_cell(seq[0], Matrix(2, 1), Matrix(2, 1), p.forward);
  const auto b = cmsq::lstm_cell(seq[0], Matrix(2, 1), Matrix(2, 1), p.backward);
  EXPECT_EQ(bi.output(0, 0), f.h[0]);
  EXPECT_EQ(bi.output(0, 1), f.h[1]);
  EXPECT_EQ(bi.output(0, 2), b.h[0]);
  EXPECT_EQ(bi.output(0, 3), b.h[1]);
}

TEST(BiLstm, ComposesTwoIndependentRuns) {
  Rng rng(16);
  cmsq::BiLstmParams p{random_lstm(3, 2, rng), random_lstm(3, 2, rng)};
  const auto seq = random_sequence(4, 2, rng);
  const cmsq::BiLstmRun bi = cmsq::bilstm_forward(seq, std::vector<std::uint8_t>{1, 1, 0, 1}, p);
  const cmsq::LstmRun fwd = cmsq::lstm_forward(seq, p.forward);
  const cmsq::LstmRun bwd = cmsq::lstm_forward(std::vector<Matrix>(seq.rbegin(), seq.rend()), p.backward);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(bi.output(t, j), fwd.hidden[t][j]);
      EXPECT_EQ(bi.output(t, 3 + j), bwd.hidden[3 - t][j]);
    }
}

TEST(BiLstm, AllZeroMaskIsUsageError) {
  cmsq::BiLstmParams p{cmsq::LstmParams::zeros(2, 2), cmsq::LstmParams::zeros(2, 2)};
  EXPECT_THROW(cmsq::bilstm_forward(std::vector<Matrix>(3, Matrix(2, 1)), std::vector<std::uint8_t>(3, 0), p),
               cmsq::UsageError);
}

TEST(MaxPool, SingleStep) {
  const Matrix H = Matrix::row({0.3, -0.2, 0.9});
  const auto r = cmsq::maxpool_masked(H, std::vector<std::uint8_t>{1});
  EXPECT_EQ(r.pooled, cmsq::transpose(H));
}

TEST(MaxPool, DominantRowWins) {
  Rng rng(17);
  Matrix H = oracle::random_matrix(5, 4, rng);
  for (std::size_t j = 0; j < 4; ++j) H(3, j) = 2.0 + static_cast<double>(j);
  const auto r = cmsq::maxpool_masked(H, std::vector<std::uint8_t>(5, 1));
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(r.pooled[j], H(3, j));
    EXPECT_EQ(r.argmax[j], 3u);
  }
}

TEST(MaxPool, PaddingNeverLeaks) {
  Rng rng(18);
  Matrix H = oracle::random_matrix(6, 3, rng);
  const std::vector<std::uint8_t> mask = {1, 1, 1, 0, 0, 0};
  for (std::size_t t = 3; t < 6; ++t)
    for (std::size_t j = 0; j < 3; ++j) H(t, j) = 1e6;
  const auto r = cmsq::maxpool_masked(H, mask);
  const auto unpadded = cmsq::maxpool_masked(cmsq::row_slice(H, 0, 3), std::vector<std::uint8_t>(3, 1));
  EXPECT_EQ(r.pooled, unpadded.pooled);
}

TEST(MaxPool, TiesGoToLowestIndex) {
  const Matrix H(3, 2, 0.25);
  const auto r = cmsq::maxpool_masked(H, std::vector<std::uint8_t>{0, 1, 1});
  EXPECT_EQ(r.argmax[0], 1u);
  EXPECT_EQ(r.argmax[1], 1u);
}

TEST(MaxPool, InvariantToMaskedValues) {
  Rng rng(19);
  const std::vector<std::uint8_t> mask = {1, 0, 1, 0, 1};
  Matrix H = oracle::random_matrix(5, 4, rng);
  const auto base = cmsq::maxpool_masked(H, mask);
  for (int trial = 0; trial < 20; ++trial) {
    H(1, trial % 4) = rng.uniform(-1e3, 1e3);
    H(3, (trial + 1) % 4) = rng.uniform(-1e3, 1e3);
    EXPECT_EQ(cmsq::maxpool_masked(H, mask).pooled, base.pooled);
  }
}

TEST(Attention, EqualBranchesSplitEvenly) {
  Rng rng(20);
  cmsq::AttentionParams p = cmsq::AttentionParams::init(5, 4, rng);
  p.W_time = p.W_text;
  p.b_time = p.b_text = oracle::random_matrix(5, 1, rng);
  const Matrix z = oracle::random_matrix(4, 1, rng);
  const auto r = cmsq::cross_modal_attention(z, z, p);
  EXPECT_NEAR(r.alpha_text, 0.5, 1e-12);
  EXPECT_NEAR(r.alpha_time, 0.5, 1e-12);
}

TEST(Attention, WeightsFormAConvexPair) {
  Rng rng(21);
  for (int k = 0; k < 1000; ++k) {
    const cmsq::AttentionParams p{oracle::random_matrix(3, 4, rng, 3.0), oracle::random_matrix(3, 1, rng),
                                  oracle::random_matrix(3, 4, rng, 3.0), oracle::random_matrix(3, 1, rng),
                                  oracle::random_matrix(3, 1, rng, 5.0)};
    const auto r = cmsq::cross_modal_attention(oracle::random_matrix(4, 1, rng, 5.0),
                                               oracle::random_matrix(4, 1, rng, 5.0), p);
    EXPECT_NEAR(r.alpha_text + r.alpha_time, 1.0, 1e-12);
    EXPECT_GT(r.alpha_text, 0.0);
    EXPECT_LT(r.alpha_text, 1.0);
  }
}

TEST(Attention, ScalarHandArithmetic) {
  const cmsq::AttentionParams p{Matrix::column({0.8}), Matrix::column({-0.1}), Matrix::column({-0.5}),
                                Matrix::column({0.3}), Matrix::column({1.7})};
  const double zt = 0.6, zm = -0.9;
  const auto r = cmsq::cross_modal_attention(Matrix::column({zt}), Matrix::column({zm}), p);
  const double a = std::exp(1.7 * std::tanh(0.8 * zt - 0.1));
  const double b = std::exp(1.7 * std::tanh(-0.5 * zm + 0.3));
  EXPECT_NEAR(r.alpha_text, a / (a + b), 1e-12);
  EXPECT_NEAR(r.alpha_time, b / (a + b), 1e-12);
  EXPECT_NEAR(r.fused[0], a / (a + b) * zt + b / (a + b) * zm, 1e-12);
}

TEST(Attention, ScalingRawScoresLeavesWeightsUnchanged) {
  Rng rng(22);
  for (int k = 0; k < 500; ++k) {
    const double s_text = rng.uniform(-20, 20), s_time = rng.uniform(-20, 20);
    const double log_k = std::log(rng.uniform(1e-3, 1e3));
    const auto [a1, b1] = cmsq::attention_weights(s_text, s_time);
    const auto [a2, b2] = cmsq::attention_weights(s_text + log_k, s_time + log_k);
    EXPECT_NEAR(a1, a2, 1e-12);
    EXPECT_NEAR(b1, b2, 1e-12);
  }
}

TEST(Attention, HugeScoresDoNotOverflow) {
  const auto [a, b] = cmsq::attention_weights(900.0, -900.0);
  EXPECT_EQ(a, 1.0);
  EXPECT_EQ(b, 0.0);
}

namespace {

struct TinyInput {
  std::vector<cmsq::TokenId> tokens{5, 9, 2, 0, 0};
  std::vector<std::uint8_t> mask{1, 1, 1, 0, 0};
  std::vector<double> temporal{0.1, 0.5, 0.9, 0.3, 0.0, 1.0};
};

const cmsq::ModelDims kTinyDims{20, 8, 4, 4, 8, 8, 3};

}  // namespace

TEST(Model, InferModeIsDeterministic) {
  Rng init(30);
  const cmsq::ModelParams p = cmsq::ModelParams::init(kTinyDims, init);
  const TinyInput in;
  Rng r1(1), r2(2);
  const auto a = cmsq::model_forward(in.tokens, in.mask, in.temporal, p, cmsq::Mode::infer, 0.6, r1);
  const auto b = cmsq::model_forward(in.tokens, in.mask, in.temporal, p, cmsq::Mode::infer, 0.6, r2);
  EXPECT_TRUE(oracle::bit_equal(a.probs, b.probs));
}

TEST(Model, TrainWithoutDropoutEqualsInfer) {
  Rng init(31);
  const cmsq::ModelParams p = cmsq::ModelParams::init(kTinyDims, init);
  const TinyInput in;
  Rng r(3);
  const auto a = cmsq::model_forward(in.tokens, in.mask, in.temporal, p, cmsq::Mode::train, 0.0, r);
  const auto b = cmsq::model_forward(in.tokens, in.mask, in.temporal, p, cmsq::Mode::infer, 0.0, r);
  EXPECT_TRUE(oracle::bit_equal(a.probs, b.probs));
}

TEST(Model, TinyConfigProducesDistribution) {
  Rng init(32);
  const cmsq::ModelParams p = cmsq::ModelParams::init(kTinyDims, init);
  const TinyInput in;
  Rng r(4);
  const auto tr = cmsq::model_forward(in.tokens, in.mask, in.temporal, p, cmsq::Mode::train, 0.6, r);
  ASSERT_EQ(tr.probs.size(), 3u);
  double total = 0.0;
  for (double v : tr.probs.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
    total += v;
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Model, DropoutMasksAreInverted) {
  Rng r(5);
  const Matrix m = cmsq::dropout_mask(10000, 0.6, cmsq::Mode::train, r);
  std::size_t kept = 0;
  for (double v : m.values()) {
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.4) < 1e-15);
    kept += v > 0 ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(kept) / 10000.0, 0.4, 0.02);
  EXPECT_TRUE(cmsq::dropout_mask(10, 0.6, cmsq::Mode::infer, r).empty());
}

TEST(Model, TokenOutsideVocabularyIsUsageError) {
  Rng init(33), r(6);
  const cmsq::ModelParams p = cmsq::ModelParams::init(kTinyDims, init);
  TinyInput in;
  in.tokens[1] = 20;
  EXPECT_THROW(cmsq::model_forward(in.tokens, in.mask, in.temporal, p, cmsq::Mode::infer, 0.0, r),
               cmsq::UsageError);
}

TEST(Model, ZeroUpstreamGradientGivesZeroGradients) {
  Rng init(34), r(7);
  const cmsq::ModelParams p = cmsq::ModelParams::init(kTinyDims, init);
  const TinyInput in;
  const auto tr = cmsq::model_forward(in.tokens, in.mask, in.temporal, p, cmsq::Mode::train, 0.6, r);
  const cmsq::ModelParams g = cmsq::model_backward(tr, p, Matrix(3, 1));
  cmsq::visit_tensors(g, [](const std::string& name, const Matrix& m) {
    for (double v : m.values()) EXPECT_EQ(v, 0.0) << name;
  });
}

TEST(Model, UnusedTokensGetNoEmbeddingGradient) {
  Rng init(35), r(8);
  const cmsq::ModelParams p = cmsq::ModelParams::init(kTinyDims, init);
  const TinyInput in;
  const auto tr = cmsq::model_forward(in.tokens, in.mask, in.temporal, p, cmsq::Mode::train, 0.0, r);
  const cmsq::ModelParams g = cmsq::model_backward(tr, p, cmsq::ce_softmax_grad(tr.probs.values(), 1));
  for (cmsq::TokenId id = 0; id < 20; ++id) {
    const bool used = id == 0 || id == 2 || id == 5 || id == 9;
    double norm = 0.0;
    for (std::size_t j = 0; j < 8; ++j) norm += std::abs(g.embedding(id, j));
    if (used) {
      EXPECT_GT(norm, 0.0) << "token " << id;
    } else {
      EXPECT_EQ(norm, 0.0) << "token " << id;
    }
  }
}

TEST(Model, BackwardRejectsMismatchedParams) {
  Rng init(36), r(9);
  const cmsq::ModelParams p = cmsq::ModelParams::init(kTinyDims, init);
  const TinyInput in;
  const auto tr = cmsq::model_forward(in.tokens, in.mask, in.temporal, p, cmsq::Mode::train, 0.0, r);
  cmsq::ModelDims other = kTinyDims;
  other.vocab = 21;
  Rng init2(37);
  EXPECT_THROW(cmsq::model_backward(tr, cmsq::ModelParams::init(other, init2), Matrix(3, 1)), cmsq::ShapeError);
}

TEST(Model, TensorNamesAreStableAndComplete) {
  Rng init(38);
  const cmsq::ModelParams p = cmsq::ModelParams::init(kTinyDims, init);
  std::vector<std::string> names;
  cmsq::visit_tensors(p, [&](const std::string& n, const Matrix&) { names.push_back(n); });
  ASSERT_EQ(names.size(), 34u);
  EXPECT_EQ(names.front(), "embedding");
  EXPECT_EQ(names[1], "text_bilstm.forward.W_f");
  EXPECT_EQ(names.back(), "output.b");
  EXPECT_EQ(p.time_lstm.b_f, Matrix(4, 1, 1.0));
  EXPECT_EQ(p.b_output, Matrix(3, 1));
}
