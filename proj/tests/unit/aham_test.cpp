#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "finite_diff.hpp"
#include "mwafm/aham.hpp"
#include "mwafm/error.hpp"
#include "mwafm/ops.hpp"
#include "oracles.hpp"

using namespace mwafm;

TEST(UnimodalEncode, SinglePositionDoubles) {
  Tape tape;
  const Tensor x = Tensor::matrix({{1, -2, 0.5, 3}});
  const Tensor out = unimodal_encode(tape.constant(x), {true}).value();
  const auto n = oracle::layer_norm_row({1, -2, 0.5, 3}, kLayerNormEps);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(out[c], 2.0 * n[c]);
}

TEST(UnimodalEncode, IdenticalRowsDouble) {
  Tape tape;
  const Tensor x = Tensor::matrix({{1, -2, 0.5, 3}, {1, -2, 0.5, 3}});
  const Tensor out = unimodal_encode(tape.constant(x), {true, true}).value();
  const auto n = oracle::layer_norm_row({1, -2, 0.5, 3}, kLayerNormEps);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out(r, c), 2.0 * n[c], 1e-15);
}

TEST(UnimodalEncode, MatchesRowLoop) {
  std::mt19937_64 rng(1);
  const Tensor x = oracle::random_tensor({5, 8}, rng, -2, 2);
  Tape tape;
  const std::vector<bool> all(5, true);
  const Tensor out = unimodal_encode(tape.constant(x), all).value();
  EXPECT_LE(oracle::max_diff(oracle::to_mat(out), oracle::unimodal_encode(oracle::to_mat(x), all, kLayerNormEps)), 1e-12);
}

TEST(UnimodalEncode, PaddingIsolated) {
  std::mt19937_64 rng(2);
  Tensor x = oracle::random_tensor({5, 8}, rng, -2, 2);
  const std::vector<bool> valid{true, true, false, true, false};
  Tape tape;
  const Tensor a = unimodal_encode(tape.constant(x), valid).value();
  EXPECT_LE(oracle::max_diff(oracle::to_mat(a), oracle::unimodal_encode(oracle::to_mat(x), valid, kLayerNormEps)), 1e-12);
  for (std::size_t c = 0; c < 8; ++c) {
    EXPECT_EQ(a(2, c), 0.0);
    EXPECT_EQ(a(4, c), 0.0);
    x(2, c) = 100.0 + c;
  }
  const Tensor b = unimodal_encode(tape.constant(x), valid).value();
  EXPECT_EQ(a, b);
}

TEST(CrossmodalGate, SingleStep) {
  Tape tape;
  const Tensor a = Tensor::matrix({{1, 2, 3}});
  auto [out, w] = crossmodal_gate(tape.constant(a), tape.constant(Tensor::vector({4, -1, 0})), {true});
  EXPECT_EQ(w.value(), Tensor::vector({1}));
  EXPECT_EQ(out.value(), Tensor::matrix({{2, 4, 6}}));
}

TEST(CrossmodalGate, IdenticalRowsUniform) {
  Tape tape;
  const std::size_t t = 4;
  Tensor a({t, 3});
  for (std::size_t r = 0; r < t; ++r) {
    a(r, 0) = 0.5;
    a(r, 1) = -1.0;
    a(r, 2) = 2.0;
  }
  auto [out, w] = crossmodal_gate(tape.constant(a), tape.constant(Tensor::vector({1, 2, 3})), std::vector<bool>(t, true));
  for (std::size_t r = 0; r < t; ++r) {
    EXPECT_DOUBLE_EQ(w.value()[r], 0.25);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(out.value()(r, c), 1.25 * a(r, c));
  }
}

TEST(CrossmodalGate, MatchesSoftmaxGateLoop) {
  std::mt19937_64 rng(3);
  const Tensor a = oracle::random_tensor({6, 8}, rng, -2, 2);
  const Tensor q = oracle::random_tensor({8}, rng, -2, 2);
  const std::vector<bool> valid{true, true, true, true, false, true};
  Tape tape;
  auto [out, w] = crossmodal_gate(tape.constant(a), tape.constant(q), valid);
  std::vector<double> expected_w;
  const auto expected =
      oracle::gate(oracle::to_mat(a), std::vector<double>(q.data().begin(), q.data().end()), valid, &expected_w);
  EXPECT_LE(oracle::max_diff(oracle::to_mat(out.value()), expected), 1e-12);
  EXPECT_LE(oracle::max_diff(std::vector<double>(w.value().data().begin(), w.value().data().end()), expected_w), 1e-12);
  EXPECT_EQ(w.value()[4], 0.0);
}

TEST(CrossmodalGate, ContextModeAddsSharedSummary) {
  std::mt19937_64 rng(4);
  const Tensor a = oracle::random_tensor({3, 4}, rng);
  const Tensor q = oracle::random_tensor({4}, rng);
  const std::vector<bool> valid{true, true, false};
  Tape tape;
  auto [out, w] = crossmodal_gate(tape.constant(a), tape.constant(q), valid, CrossMode::context);
  for (std::size_t c = 0; c < 4; ++c) {
    const double ctx = w.value()[0] * a(0, c) + w.value()[1] * a(1, c);
    EXPECT_NEAR(out.value()(0, c), a(0, c) + ctx, 1e-15);
    EXPECT_NEAR(out.value()(1, c), a(1, c) + ctx, 1e-15);
    EXPECT_EQ(out.value()(2, c), 0.0);
  }
}

TEST(CrossMode, Parse) {
  EXPECT_EQ(parse_cross_mode("gate"), CrossMode::gate);
  EXPECT_EQ(parse_cross_mode("context"), CrossMode::context);
  EXPECT_EQ(to_string(CrossMode::context), "context");
  EXPECT_THROW(parse_cross_mode("sum"), ValidationError);
}

TEST(AhamForward, DisabledPassesThrough) {
  std::mt19937_64 rng(5);
  const Tensor a = oracle::random_tensor({4, 6}, rng), q = oracle::random_tensor({3, 6}, rng);
  Tape tape;
  const Var va = tape.constant(a), vq = tape.constant(q);
  const AhamOutput out = aham_forward(va, vq, std::vector<bool>(4, true), {true, true, false}, {.enabled = false});
  EXPECT_EQ(out.audio.value(), a);
  EXPECT_EQ(out.question.value(), q);
  for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(out.question_sentence.value()[c], (q(0, c) + q(1, c)) / 2, 1e-15);
}

TEST(AhamForward, SingleStepSingleToken) {
  Tape tape;
  const Tensor a = Tensor::matrix({{1, 2, 4}});
  const Tensor q = Tensor::matrix({{-1, 0, 3}});
  const AhamOutput out = aham_forward(tape.constant(a), tape.constant(q), {true}, {true});
  const auto na = oracle::layer_norm_row({1, 2, 4}, kLayerNormEps);
  const auto nq = oracle::layer_norm_row({-1, 0, 3}, kLayerNormEps);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(out.question_sentence.value()[c], 2.0 * nq[c]);
    EXPECT_DOUBLE_EQ(out.audio.value()(0, c), 4.0 * na[c]);
  }
}

TEST(AhamForward, MatchesComposedOracle) {
  std::mt19937_64 rng(6);
  const Tensor a = oracle::random_tensor({6, 8}, rng, -2, 2), q = oracle::random_tensor({5, 8}, rng, -2, 2);
  const std::vector<bool> av(6, true), qv{true, true, true, false, false};
  Tape tape;
  const AhamOutput out = aham_forward(tape.constant(a), tape.constant(q), av, qv);
  const auto qe = oracle::unimodal_encode(oracle::to_mat(q), qv, kLayerNormEps);
  const auto sentence = oracle::mean_pool(qe, qv);
  const auto expected = oracle::gate(oracle::unimodal_encode(oracle::to_mat(a), av, kLayerNormEps), sentence, av);
  EXPECT_LE(oracle::max_diff(oracle::to_mat(out.audio.value()), expected), 1e-12);
  EXPECT_LE(oracle::max_diff(oracle::to_mat(out.question.value()), qe), 1e-12);
}

TEST(AhamForward, Gradient) {
  std::mt19937_64 rng(7);
  const std::vector<bool> av{true, true, true, true, false}, qv{true, true, false};
  const Tensor pa = oracle::random_tensor({5, 6}, rng), pq = oracle::random_tensor({6}, rng);
  for (CrossMode mode : {CrossMode::gate, CrossMode::context}) {
    const double err = fd::max_error(
        [&](auto& v) {
          const AhamOutput o = aham_forward(v[0], v[1], av, qv, {.cross_mode = mode});
          return add(sum(mul(o.audio, v[2])), sum(mul(o.question_sentence, v[3])));
        },
        {oracle::random_tensor({5, 6}, rng, -2, 2), oracle::random_tensor({3, 6}, rng, -2, 2), pa, pq});
    EXPECT_LE(err, 1e-6);
  }
}
