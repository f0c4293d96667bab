//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "fedretro/learner.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace fedretro::learner {
namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.fp_dim = 64;
  cfg.embed_dim = 6;
  cfg.hidden_dim = 8;
  cfg.max_len = 24;
  cfg.fingerprint.nbits = 256;
  return cfg;
}

Example random_example(std::mt19937_64 &rng, const ModelConfig &cfg) {
  Example ex;
  ex.fp.assign(cfg.fp_dim, 0.0);
  for (auto &x: ex.fp)
    x = testing::chance(rng, 0.2) ? 1.0 : 0.0;
  const int len = testing::uniform(rng, 1, cfg.max_len - 1);
  for (int i = 0; i < len; ++i)
    ex.tokens.push_back(testing::uniform(rng, 4, cfg.vocab_size() - 1));
  return ex;
}

ParamVector random_params(std::mt19937_64 &rng, const ModelConfig &cfg) {
  ParamVector p = init_params(cfg, rng());
  std::normal_distribution<double> noise(0.0, 0.3);
  for (auto &v: p.values)
    v = noise(rng);
  return p;
}

TEST(Vocabulary, FixedAndLossless) {
  const Vocabulary &v = Vocabulary::global();
  EXPECT_EQ(v.token(Vocabulary::kEos), "<eos>");
  EXPECT_EQ(v.id("Cl"), v.id("Cl"));
  EXPECT_EQ(v.id("[Xe]"), Vocabulary::kUnk);
  const auto ids = v.encode(smiles::tokenize("CC(=O)[O-].[nH]1cccc1Br"));
  EXPECT_EQ(v.decode(ids), "CC(=O)[O-].[nH]1cccc1Br");
}

TEST(InitParams, DeterministicBoundedZeroBias) {
  const ModelConfig cfg;
  const ParamVector a = init_params(cfg, 42), b = init_params(cfg, 42),
                    c = init_params(cfg, 43);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
  for (const auto &s: a.layout) {
    for (std::size_t i = s.offset; i < s.offset + s.size(); ++i) {
      if (s.is_bias)
        ASSERT_EQ(a.values[i], 0.0) << s.name;
      else
        ASSERT_LE(std::abs(a.values[i]), 0.08);
    }
  }
  const auto &last = a.layout.back();
  EXPECT_EQ(a.size(), last.offset + last.size());
}

TEST(ParamVector, SerializationRoundTrip) {
  const ParamVector p = init_params(small_config(), 5);
  std::stringstream ss;
  save_params(ss, p);
  const ParamVector q = load_params(ss);
  EXPECT_EQ(p.layout, q.layout);
  EXPECT_EQ(p.values, q.values);

  std::stringstream bad("FRPVgarbage");
  EXPECT_THROW(load_params(bad), std::runtime_error);
}

TEST(LossAndGrad, UniformModelGivesLogVocabPerToken) {
  const ModelConfig cfg = small_config();
  ParamVector p = init_params(cfg, 1);
  std::fill(p.values.begin(), p.values.end(), 0.0);
  std::mt19937_64 rng(2);
  std::vector<Example> batch { random_example(rng, cfg), random_example(rng, cfg) };
  double tokens = 0;
  for (const auto &ex: batch)
    tokens += static_cast<double>(ex.tokens.size() + 1);
  const LossGrad lg = loss_and_grad(p, batch, cfg);
  EXPECT_NEAR(lg.loss, tokens / 2.0 * std::log(cfg.vocab_size()), 1e-12);
  EXPECT_GE(lg.loss, 0.0);
}

TEST(LossAndGrad, DuplicateExampleKeepsGradient) {
  const ModelConfig cfg = small_config();
  std::mt19937_64 rng(3);
  const ParamVector p = random_params(rng, cfg);
  const Example ex = random_example(rng, cfg);
  std::vector<Example> one { ex }, two { ex, ex };
  const LossGrad a = loss_and_grad(p, one, cfg);
  const LossGrad b = loss_and_grad(p, two, cfg);
  EXPECT_NEAR(a.loss, b.loss, 1e-12);
  for (std::size_t i = 0; i < a.grad.size(); ++i)
    ASSERT_NEAR(a.grad.values[i], b.grad.values[i], 1e-12);
}

TEST(LossAndGrad, RejectsBadShapes) {
  const ModelConfig cfg = small_config();
  const ParamVector p = init_params(cfg, 1);
  Example ex;
  ex.fp.assign(cfg.fp_dim, 0.0);
  ex.tokens = { cfg.vocab_size() };
  std::vector<Example> batch { ex };
  EXPECT_THROW(loss_and_grad(p, batch, cfg), ShapeMismatch);
  batch[0].tokens.assign(cfg.max_len, 5);
  EXPECT_THROW(loss_and_grad(p, batch, cfg), ShapeMismatch);
  ModelConfig other = cfg;
  other.hidden_dim = 9;
  batch[0].tokens = { 5 };
  EXPECT_THROW(loss_and_grad(p, batch, other), ShapeMismatch);
}

// Central differences against the analytic gradient.
double max_relative_error(const ParamVector &p, std::span<const Example> batch,
                          const ModelConfig &cfg) {
  const LossGrad lg = loss_and_grad(p, batch, cfg);
  ParamVector q = p;
  const double h = 1e-4;
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    q.values[i] = p.values[i] + h;
    const double up = loss_only(q, batch, cfg);
    q.values[i] = p.values[i] - h;
    const double down = loss_only(q, batch, cfg);
    q.values[i] = p.values[i];
    const double numeric = (up - down) / (2 * h);
    const double analytic = lg.grad.values[i];
    const double denom = std::max({ std::abs(numeric), std::abs(analytic), 1e-6 });
    worst = std::max(worst, std::abs(numeric - analytic) / denom);
  }
  return worst;
}

TEST(LossAndGrad, MatchesFiniteDifferences) {
  for (bool position: { true, false }) {
    ModelConfig cfg = small_config();
    cfg.position_embedding = position;
    std::mt19937_64 rng(position ? 10 : 11);
    const ParamVector p = random_params(rng, cfg);
    std::vector<Example> batch;
    for (int i = 0; i < 4; ++i)
      batch.push_back(random_example(rng, cfg));
    EXPECT_LT(max_relative_error(p, batch, cfg), 1e-4);
  }
}

TEST(Adam, ZeroGradientLeavesParams) {
  const ModelConfig cfg = small_config();
  ParamVector p = init_params(cfg, 3);
  const ParamVector before = p;
  OptimizerState opt;
  adam_step(p, zeros_like(p), opt);
  EXPECT_EQ(p.values, before.values);
  EXPECT_EQ(opt.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamVector p;
  p.values = { 1.0, -2.0, 0.5 };
  ParamVector g;
  g.values = { 3.0, -0.25, 1e-3 };
  OptimizerState opt;
  adam_step(p, g, opt);
  // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  for (int i = 0; i < 3; ++i) {
    const double gi = g.values[i];
    const double expected = std::vector<double> { 1.0, -2.0, 0.5 }[i]
                            - 0.0002 * gi / (std::abs(gi) + 1e-8);
    EXPECT_NEAR(p.values[i], expected, 1e-15);
  }
  EXPECT_NEAR(p.values[0], 1.0 - 0.0002, 1e-12);
  EXPECT_NEAR(p.values[1], -2.0 + 0.0002, 1e-10);

  ParamVector short_grad;
  short_grad.values = { 1.0 };
  EXPECT_THROW(adam_step(p, short_grad, opt), LengthMismatch);
}

TEST(Adam, Deterministic) {
  std::mt19937_64 rng(4);
  const ModelConfig cfg = small_config();
  const ParamVector p = random_params(rng, cfg);
  const ParamVector g = random_params(rng, cfg);
  ParamVector a = p, b = p;
  OptimizerState oa, ob;
  adam_step(a, g, oa);
  adam_step(b, g, ob);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(oa.second_moment, ob.second_moment);
}

std::vector<Example> toy_set(const ModelConfig &cfg, int n) {
  std::vector<Example> out;
  const char *alcohols[] = { "CO", "CCO", "CCCO", "CC(C)O", "CCCCO" };
  const char *acids[] = { "CC(=O)O", "CCC(=O)O", "O=CO", "CCCC(=O)O" };
  for (int i = 0; i < n; ++i) {
    const std::string alcohol = alcohols[i % 5];
    const std::string acid = acids[(i / 5) % 4];
    const std::string reactants = smiles::canonicalize(acid + "." + alcohol);
    const std::string product =
        smiles::canonicalize(std::string(acid).substr(0, std::string(acid).size() - 1)
                             + alcohol.substr(0, alcohol.size() - 1) + "O");
    out.push_back(*make_example(product, reactants, cfg));
  }
  return out;
}

TEST(TrainLocal, ZeroEpochsIsIdentity) {
  const ModelConfig cfg = small_config();
  const ParamVector p = init_params(cfg, 9);
  TrainOptions opts;
  opts.epochs = 0;
  EXPECT_EQ(train_local(p, {}, opts, cfg).params.values, p.values);
  opts.epochs = 1;
  EXPECT_THROW(train_local(p, {}, opts, cfg), EmptyDataset);
}

TEST(TrainLocal, LossDecreasesAndIsDeterministic) {
  ModelConfig cfg;
  cfg.max_len = 40;
  const auto data = toy_set(cfg, 100);
  const ParamVector p = init_params(cfg, 1);
  TrainOptions opts;
  opts.epochs = 5;
  opts.batch_size = 16;
  opts.lr = 0.003;
  opts.seed = 17;
  const double before = loss_only(p, data, cfg);
  const TrainResult r = train_local(p, data, opts, cfg);
  EXPECT_LT(loss_only(r.params, data, cfg), before);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  EXPECT_EQ(train_local(p, data, opts, cfg).params.values, r.params.values);
}

// Independent forward pass over the named blocks: log P(next | prefix).
std::vector<double> next_log_probs(const ParamVector &p, const ModelConfig &cfg,
                                   const std::vector<double> &fp,
                                   const std::vector<int> &prefix) {
  const int H = cfg.hidden_dim, D = cfg.embed_dim, F = cfg.fp_dim,
            V = cfg.vocab_size();
  const auto A = p.block("fp_proj"), E = p.block("embed"),
             B = p.block("prev1_proj"), C = p.block("prev2_proj"),
             b = p.block("hidden_bias"), U = p.block("out_proj"),
             c = p.block("out_bias");
  const int t = static_cast<int>(prefix.size());
  const int y1 = t >= 1 ? prefix[t - 1] : Vocabulary::kBos;
  const int y2 = t >= 2 ? prefix[t - 2] : Vocabulary::kBos;
  std::vector<double> h(H);
  for (int i = 0; i < H; ++i) {
    double z = b[i];
    for (int j = 0; j < F; ++j)
      z += A[i * F + j] * fp[j];
    for (int k = 0; k < D; ++k)
      z += B[i * D + k] * E[y1 * D + k] + C[i * D + k] * E[y2 * D + k];
    if (cfg.position_embedding)
      z += p.block("position")[t * H + i];
    h[i] = std::tanh(z);
  }
  std::vector<double> out(V);
  double mx = -1e300;
  for (int o = 0; o < V; ++o) {
    out[o] = c[o];
    for (int i = 0; i < H; ++i)
      out[o] += U[o * H + i] * h[i];
    mx = std::max(mx, out[o]);
  }
  double sum = 0.0;
  for (double v: out)
    sum += std::exp(v - mx);
  for (double &v: out)
    v -= mx + std::log(sum);
  return out;
}

TEST(BeamDecode, WidthOneIsGreedy) {
  const ModelConfig cfg = small_config();
  for (int trial = 0; trial < 10; ++trial) {
    std::mt19937_64 rng(100 + trial);
    const ParamVector p = random_params(rng, cfg);
    std::vector<double> fp(cfg.fp_dim, 0.0);
    for (auto &x: fp)
      x = testing::chance(rng, 0.2) ? 1.0 : 0.0;

    std::vector<int> tokens;
    double lp = 0.0;
    bool ended = false;
    for (int t = 0; t < cfg.max_len; ++t) {
      const auto lps = next_log_probs(p, cfg, fp, tokens);
      int best = -1;
      for (int v = 0; v < cfg.vocab_size(); ++v) {
        if (v == Vocabulary::kPad || v == Vocabulary::kBos || v == Vocabulary::kUnk)
          continue;
        if (best < 0 || lps[v] > lps[best])
          best = v;
      }
      lp += lps[best];
      if (best == Vocabulary::kEos) {
        ended = true;
        break;
      }
      tokens.push_back(best);
    }

    const auto greedy = BeamDecoder(p, cfg).decode(fp, 1, 1);
    if (!ended) {
      EXPECT_TRUE(greedy.empty());
      continue;
    }
    ASSERT_EQ(greedy.size(), 1u);
    EXPECT_NEAR(greedy[0].log_prob, lp, 1e-9);
    const std::string raw = Vocabulary::global().decode(tokens);
    std::string expected = raw;
    try {
      expected = smiles::canonicalize(raw);
    } catch (const smiles::SmilesError &) {
    }
    EXPECT_EQ(greedy[0].smiles, expected);
  }
}

TEST(BeamDecode, RanksAndScoresAreOrdered) {
  const ModelConfig cfg = small_config();
  std::mt19937_64 rng(12);
  ParamVector p = random_params(rng, cfg);
  p.block("out_bias")[Vocabulary::kEos] = 2.0;  // make short outputs likely
  const auto preds = beam_decode(p, smiles::parse_smiles("CCOC(C)=O"), cfg, 8, 8);
  ASSERT_FALSE(preds.empty());
  EXPECT_EQ(preds[0].rank, 1);
  for (std::size_t i = 1; i < preds.size(); ++i) {
    EXPECT_GE(preds[i - 1].log_prob, preds[i].log_prob);
    EXPECT_EQ(preds[i].rank, static_cast<int>(i) + 1);
    EXPECT_NE(preds[i - 1].smiles, preds[i].smiles);
  }
  EXPECT_THROW(beam_decode(p, smiles::parse_smiles("C"), cfg, 2, 3),
               std::invalid_argument);
}

TEST(BeamDecode, MemorizesOnePair) {
  ModelConfig cfg;
  cfg.max_len = 40;
  const std::string product = smiles::canonicalize("CCOC(C)=O");
  const std::string reactants = smiles::canonicalize("CC(=O)O.CCO");
  const std::vector<Example> data { *make_example(product, reactants, cfg) };
  TrainOptions opts;
  opts.epochs = 300;
  opts.batch_size = 1;
  opts.lr = 0.01;
  const TrainResult r = train_local(init_params(cfg, 2), data, opts, cfg);
  const auto preds = beam_decode(r.params, smiles::parse_smiles(product), cfg, 5, 3);
  ASSERT_FALSE(preds.empty());
  EXPECT_TRUE(preds[0].parsed);
  EXPECT_EQ(preds[0].smiles, reactants);
}

}  // namespace
}  // namespace fedretro::learner
