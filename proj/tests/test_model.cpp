// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hydra/model.hpp"
#include "oracle.hpp"

using namespace hydra;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no hydra::Error thrown";
  return ErrorKind::VerificationFailed;
}

Vector random_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

ModelConfig small_config(int d, int heads, int d_mlp) {
  ModelConfig c;
  c.n_layers = 1;
  c.d_model = d;
  c.n_heads = heads;
  c.d_head = d / heads;
  c.d_mlp = d_mlp;
  c.vocab_size = 10;
  c.max_seq_len = 8;
  return c;
}

Tokens random_tokens(std::mt19937_64& rng, int n, int vocab) {
  std::uniform_int_distribution<int> pick(0, vocab - 1);
  Tokens t(static_cast<std::size_t>(n));
  for (auto& x : t) x = pick(rng);
  return t;
}

}  // namespace

TEST(RmsNorm, OnesAreAFixedPoint) {
  for (int d : {1, 3, 64}) {
    const Vector ones = Vector::Ones(d);
    EXPECT_EQ(rms_norm(ones, ones), ones);
  }
}

TEST(RmsNorm, ScaleInvariant) {
  std::mt19937_64 rng(1);
  const Vector z = random_vector(rng, 16), g = random_vector(rng, 16);
  for (double c : {0.001, 0.5, 3.0, 1e6}) {
    EXPECT_LT((rms_norm(c * z, g) - rms_norm(z, g)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RmsNorm, MatchesExtendedPrecisionFormula) {
  std::mt19937_64 rng(7);
  const Vector z = random_vector(rng, 8), g = random_vector(rng, 8);
  long double ss = 0.0L;
  for (int i = 0; i < 8; ++i) ss += static_cast<long double>(z[i]) * z[i];
  const long double sigma = std::sqrt(ss / 8.0L);
  EXPECT_NEAR(rms(z), static_cast<double>(sigma), 1e-15);
  const Vector out = rms_norm(z, g);
  for (int i = 0; i < 8; ++i) {
    EXPECT_NEAR(out[i], static_cast<double>(z[i] / sigma * g[i]), 1e-12);
  }
}

TEST(RmsNorm, IdentityModeAppliesOnlyTheGain) {
  std::mt19937_64 rng(2);
  const Vector z = random_vector(rng, 6), g = random_vector(rng, 6);
  EXPECT_EQ(rms_norm(z, g, NormMode::identity), z.cwiseProduct(g));
}

TEST(RmsNorm, ZeroVectorIsDegenerate) {
  EXPECT_EQ(kind_of([] { rms_norm(Vector::Zero(4), Vector::Ones(4)); }), ErrorKind::DegenerateNorm);
}

TEST(Attention, SinglePositionAttendsToItself) {
  const auto cfg = small_config(8, 2, 4);
  const auto p = gen_params(cfg, 4);
  std::mt19937_64 rng(4);
  const Vector z = random_vector(rng, 8);
  const std::vector<Vector> prefix{z};
  const Vector value = p.layers[0].w_v.transpose() * rms_norm(z, p.layers[0].attn_gain);
  const Vector expected = p.layers[0].w_o.transpose() * value;
  EXPECT_LT((attention_layer(prefix, p.layers[0], cfg) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Attention, EqualKeysGiveUniformWeights) {
  const auto cfg = small_config(8, 2, 4);
  auto p = gen_params(cfg, 4);
  p.layers[0].w_k.setZero();
  std::mt19937_64 rng(5);
  std::vector<Vector> prefix;
  Vector mean_value = Vector::Zero(8);
  for (int t = 0; t < 4; ++t) {
    prefix.push_back(random_vector(rng, 8));
    mean_value += p.layers[0].w_v.transpose() * rms_norm(prefix.back(), p.layers[0].attn_gain) / 4.0;
  }
  const Vector expected = p.layers[0].w_o.transpose() * mean_value;
  EXPECT_LT((attention_layer(prefix, p.layers[0], cfg) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Attention, MatchesBruteForceLoopTwoHeads) {
  const auto cfg = small_config(8, 2, 4);
  const auto p = gen_params(cfg, 11);
  const auto& lp = p.layers[0];
  std::mt19937_64 rng(11);
  std::vector<Vector> prefix;
  for (int t = 0; t < 3; ++t) prefix.push_back(random_vector(rng, 8));

  // Explicit score matrix and softmax, head by head.
  const int d = 8, dh = 4;
  std::vector<std::vector<double>> n(3, std::vector<double>(d));
  for (int t = 0; t < 3; ++t) {
    double ss = 0;
    for (int i = 0; i < d; ++i) ss += prefix[t][i] * prefix[t][i];
    const double s = std::sqrt(ss / d);
    for (int i = 0; i < d; ++i) n[t][i] = prefix[t][i] / s * lp.attn_gain[i];
  }
  auto proj = [&](const Matrix& w, int t, int col) {
    double acc = 0;
    for (int i = 0; i < d; ++i) acc += n[t][i] * w(i, col);
    return acc;
  };
  std::vector<double> heads(d, 0.0);
  for (int h = 0; h < 2; ++h) {
    double scores[3];
    for (int s = 0; s < 3; ++s) {
      double acc = 0;
      for (int c = h * dh; c < (h + 1) * dh; ++c) acc += proj(lp.w_q, 2, c) * proj(lp.w_k, s, c);
      scores[s] = acc / std::sqrt(static_cast<double>(dh));
    }
    const double mx = std::max({scores[0], scores[1], scores[2]});
    double z = 0;
    for (double& s : scores) z += (s = std::exp(s - mx));
    for (int s = 0; s < 3; ++s) {
      for (int c = h * dh; c < (h + 1) * dh; ++c) heads[c] += scores[s] / z * proj(lp.w_v, s, c);
    }
  }
  const Vector out = attention_layer(prefix, lp, cfg);
  for (int j = 0; j < d; ++j) {
    double acc = 0;
    for (int c = 0; c < d; ++c) acc += heads[c] * lp.w_o(c, j);
    EXPECT_NEAR(out[j], acc, 1e-10);
  }
}

TEST(Attention, PrefixLengthBounds) {
  const auto cfg = small_config(8, 2, 4);
  const auto p = gen_params(cfg, 1);
  EXPECT_EQ(kind_of([&] { attention_layer(std::vector<Vector>{}, p.layers[0], cfg); }),
            ErrorKind::SequenceTooLong);
  const std::vector<Vector> long_prefix(9, Vector::Ones(8));
  EXPECT_EQ(kind_of([&] { attention_layer(long_prefix, p.layers[0], cfg); }),
            ErrorKind::SequenceTooLong);
}

TEST(Mlp, DeadRegionGivesZero) {
  const auto cfg = small_config(8, 2, 16);
  auto p = gen_params(cfg, 3);
  // All hidden pre-activations negative for x = ones: make every column of W_in negative-sum.
  p.layers[0].w_in = -p.layers[0].w_in.cwiseAbs();
  p.layers[0].mlp_gain = Vector::Ones(8);
  EXPECT_EQ(mlp_layer(Vector::Ones(8), p.layers[0], cfg), Vector::Zero(8));
}

TEST(Mlp, ZeroInputWeightsGiveZero) {
  const auto cfg = small_config(8, 2, 16);
  auto p = gen_params(cfg, 3);
  p.layers[0].w_in.setZero();
  std::mt19937_64 rng(3);
  EXPECT_EQ(mlp_layer(random_vector(rng, 8), p.layers[0], cfg), Vector::Zero(8));
}

TEST(Mlp, MatchesScalarLoop) {
  const auto cfg = small_config(8, 2, 16);
  const auto p = gen_params(cfg, 3);
  const auto& lp = p.layers[0];
  std::mt19937_64 rng(3);
  const Vector x = random_vector(rng, 8);
  double ss = 0;
  for (int i = 0; i < 8; ++i) ss += x[i] * x[i];
  const double s = std::sqrt(ss / 8);
  std::vector<double> hidden(16);
  for (int k = 0; k < 16; ++k) {
    double acc = 0;
    for (int i = 0; i < 8; ++i) acc += x[i] / s * lp.mlp_gain[i] * lp.w_in(i, k);
    hidden[k] = acc > 0 ? acc : 0;
  }
  const Vector out = mlp_layer(x, lp, cfg);
  for (int j = 0; j < 8; ++j) {
    double acc = 0;
    for (int k = 0; k < 16; ++k) acc += hidden[k] * lp.w_out(k, j);
    EXPECT_NEAR(out[j], acc, 1e-10);
  }
}

TEST(Config, Validation) {
  ModelConfig c;
  c.n_layers = 0;
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::InvalidConfig);
  c = ModelConfig{};
  c.d_head = 7;
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind_of([&] { gen_params(c, 1); }), ErrorKind::InvalidConfig);
  EXPECT_NO_THROW(ModelConfig{}.validate());
}

TEST(Config, EnumParsing) {
  EXPECT_EQ(parse_block_order("parallel"), BlockOrder::parallel);
  EXPECT_EQ(parse_norm_mode("identity"), NormMode::identity);
  EXPECT_EQ(parse_node_kind("mlp"), NodeKind::mlp);
  EXPECT_EQ(parse_init_scheme("orthogonal"), InitScheme::orthogonal);
  EXPECT_EQ(kind_of([] { parse_node_kind("head"); }), ErrorKind::ConfigError);
}

TEST(Forward, ResidualTelescopesExactly) {
  const auto p = gen_params(ModelConfig{}, 21);
  std::mt19937_64 rng(21);
  const auto tr = forward(p, random_tokens(rng, 10, 100));
  for (int t = 1; t <= tr.length(); ++t) {
    Vector z = tr.embed[static_cast<std::size_t>(t - 1)];
    for (int l = 1; l <= tr.n_layers(); ++l) {
      z = z + tr.node({l, NodeKind::attn, t}) + tr.node({l, NodeKind::mlp, t});
    }
    EXPECT_EQ(z, tr.final_resid(t));
  }
}

class ForwardOracle : public ::testing::TestWithParam<std::tuple<BlockOrder, NormMode>> {};

TEST_P(ForwardOracle, MatchesStraightLineImplementation) {
  ModelConfig cfg;  // d_model 64, L 4, V 100
  cfg.block_order = std::get<0>(GetParam());
  cfg.norm_mode = std::get<1>(GetParam());
  const auto p = gen_params(cfg, 5);
  std::mt19937_64 rng(5);
  const auto tokens = random_tokens(rng, 12, 100);
  const auto tr = forward(p, tokens);
  const auto ref = oracle::forward(p, tokens);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    for (int i = 0; i < 100; ++i) {
      ASSERT_NEAR(tr.logits[t][i], ref.logits[t][static_cast<std::size_t>(i)], 1e-8);
    }
    EXPECT_EQ(tr.top_token[t], static_cast<TokenId>(argmax(tr.logits[t])));
  }
}

INSTANTIATE_TEST_SUITE_P(
    AllModes, ForwardOracle,
    ::testing::Combine(::testing::Values(BlockOrder::sequential, BlockOrder::parallel),
                       ::testing::Values(NormMode::rms, NormMode::identity)));

TEST(Forward, CausalMasking) {
  const auto p = gen_params(ModelConfig{}, 8);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    auto a = random_tokens(rng, 10, 100);
    auto b = a;
    const int changed = 1 + trial;  // 0-based position t'
    b[static_cast<std::size_t>(changed)] = (a[static_cast<std::size_t>(changed)] + 1) % 100;
    const auto ta = forward(p, a), tb = forward(p, b);
    for (int t = 0; t < changed; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      for (std::size_t l = 0; l < 4; ++l) {
        EXPECT_EQ(ta.attn[l][ut], tb.attn[l][ut]);
        EXPECT_EQ(ta.mlp[l][ut], tb.mlp[l][ut]);
      }
      EXPECT_EQ(ta.logits[ut], tb.logits[ut]);
    }
    EXPECT_NE(ta.logits.back(), tb.logits.back());
  }
}

TEST(Forward, Deterministic) {
  const auto p = gen_params(ModelConfig{}, 9);
  const Tokens tokens{3, 1, 4, 1, 5, 9, 2, 6};
  const auto a = forward(p, tokens), b = forward(p, tokens);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_EQ(a.resid, b.resid);
}

TEST(Forward, InputErrors) {
  const auto p = gen_params(ModelConfig{}, 1);
  EXPECT_EQ(kind_of([&] { forward(p, {}); }), ErrorKind::SequenceTooLong);
  EXPECT_EQ(kind_of([&] { forward(p, Tokens(17, 1)); }), ErrorKind::SequenceTooLong);
  EXPECT_EQ(kind_of([&] { forward(p, {1, 100}); }), ErrorKind::BadToken);
  EXPECT_EQ(kind_of([&] { forward(p, {-1}); }), ErrorKind::BadToken);
  EXPECT_NO_THROW(forward(p, Tokens(16, 1)));
}

TEST(Unembed, ZeroVectorReadsZero) {
  const auto p = gen_params(ModelConfig{}, 2);
  const auto r = unembed_frozen(Vector::Zero(64), 1.7, p);
  EXPECT_TRUE(r.centred);
  EXPECT_EQ(r.values, Vector::Zero(100));
}

TEST(Unembed, LinearInValue) {
  const auto p = gen_params(ModelConfig{}, 2);
  std::mt19937_64 rng(2);
  const Vector a = random_vector(rng, 64), b = random_vector(rng, 64);
  const Vector lhs = unembed_frozen(a + b, 2.5, p).values;
  const Vector rhs = unembed_frozen(a, 2.5, p).values + unembed_frozen(b, 2.5, p).values;
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(kind_of([&] { unembed_frozen(a, 0.0, p); }), ErrorKind::DegenerateNorm);
}

TEST(Unembed, ArgmaxInvariantToSigma) {
  const auto p = gen_params(ModelConfig{}, 3);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector v = random_vector(rng, 64);
    const auto base = argmax(unembed_frozen(v, 1.0, p).values);
    for (double s : {0.01, 0.3, 7.0, 1e4}) EXPECT_EQ(argmax(unembed_frozen(v, s, p).values), base);
  }
}

class Additivity : public ::testing::TestWithParam<std::tuple<BlockOrder, NormMode>> {};

TEST_P(Additivity, ReadoutsSumToCentredLogits) {
  ModelConfig cfg;
  cfg.block_order = std::get<0>(GetParam());
  cfg.norm_mode = std::get<1>(GetParam());
  std::mt19937_64 rng(12);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = gen_params(cfg, seed);
    const auto tr = forward(p, random_tokens(rng, 1 + static_cast<int>(seed) * 3, 100));
    for (int t = 1; t <= tr.length(); ++t) {
      const auto ut = static_cast<std::size_t>(t - 1);
      const double sigma = tr.sigma_final[ut];
      Vector sum = unembed_frozen(tr.embed[ut], sigma, p).values;
      for (int l = 1; l <= tr.n_layers(); ++l) {
        sum += unembed_frozen(tr.node({l, NodeKind::attn, t}), sigma, p).values;
        sum += unembed_frozen(tr.node({l, NodeKind::mlp, t}), sigma, p).values;
      }
      EXPECT_LT((sum - tr.centred_logits[ut]).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(
    AllModes, Additivity,
    ::testing::Combine(::testing::Values(BlockOrder::sequential, BlockOrder::parallel),
                       ::testing::Values(NormMode::rms, NormMode::identity)));

TEST(GenParams, DeterministicPerSeedAndScheme) {
  for (auto scheme : {InitScheme::gaussian, InitScheme::orthogonal}) {
    const auto a = gen_params(ModelConfig{}, 77, scheme), b = gen_params(ModelConfig{}, 77, scheme);
    EXPECT_EQ(a.embed, b.embed);
    EXPECT_EQ(a.unembed, b.unembed);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
      EXPECT_EQ(a.layers[l].w_q, b.layers[l].w_q);
      EXPECT_EQ(a.layers[l].w_out, b.layers[l].w_out);
      EXPECT_EQ(a.layers[l].mlp_gain, b.layers[l].mlp_gain);
    }
    const auto c = gen_params(ModelConfig{}, 78, scheme);
    EXPECT_NE(a.embed, c.embed);
  }
}

TEST(GenParams, GaussianScaleMatchesFanIn) {
  const auto p = gen_params(ModelConfig{}, 13);
  auto check = [](const Matrix& m) {
    const double n = static_cast<double>(m.size());
    const double mean = m.sum() / n;
    const double sd = std::sqrt((m.array() - mean).square().sum() / (n - 1));
    const double want = 1.0 / std::sqrt(static_cast<double>(m.rows()));
    EXPECT_NEAR(sd, want, 0.2 * want) << m.rows() << "x" << m.cols();
  };
  check(p.embed);
  check(p.unembed);
  for (const auto& l : p.layers) {
    check(l.w_q);
    check(l.w_k);
    check(l.w_v);
    check(l.w_o);
    check(l.w_in);
    check(l.w_out);
  }
}

TEST(GenParams, OrthogonalSquareMatricesAreOrthogonal) {
  const auto p = gen_params(ModelConfig{}, 14, InitScheme::orthogonal);
  const Matrix wq = p.layers[0].w_q;
  EXPECT_LT((wq.transpose() * wq - Matrix::Identity(64, 64)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Parameters, ValidateCatchesShapeErrors) {
  auto p = gen_params(ModelConfig{}, 1);
  p.layers[1].w_in = Matrix::Zero(64, 3);
  EXPECT_EQ(kind_of([&] { p.validate(); }), ErrorKind::ShapeMismatch);
}
