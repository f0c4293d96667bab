//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedretro/learner.hpp"
#include "fedretro/rng.hpp"
#include "model_view.hpp"

namespace fedretro::learner {

namespace detail {

ModelView::ModelView(const ParamVector &p, const ModelConfig &cfg)
    : vocab(cfg.vocab_size()), hidden(cfg.hidden_dim), embed(cfg.embed_dim),
      fp_dim(cfg.fp_dim), max_len(cfg.max_len) {
  if (p.layout != make_layout(cfg))
    throw ShapeMismatch("parameter layout does not match the model config");
  auto at = [&](const char *name) -> const double * {
    return p.values.data() + p.segment(name).offset;
  };
  fp_proj = at("fp_proj");
  embedding = at("embed");
  prev1 = at("prev1_proj");
  prev2 = at("prev2_proj");
  position = cfg.position_embedding ? at("position") : nullptr;
  hidden_bias = at("hidden_bias");
  out_proj = at("out_proj");
  out_bias = at("out_bias");
}

void ModelView::conditioning(std::span<const double> fp, double *a) const {
  std::copy(hidden_bias, hidden_bias + hidden, a);
  for (int j = 0; j < fp_dim; ++j) {
    const double x = fp[j];
    if (x == 0.0)
      continue;
    for (int i = 0; i < hidden; ++i)
      a[i] += fp_proj[i * fp_dim + j] * x;
  }
}

double log_softmax_inplace(double *logits, int n) {
  const double mx = *std::max_element(logits, logits + n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    sum += std::exp(logits[i] - mx);
  const double lse = mx + std::log(sum);
  for (int i = 0; i < n; ++i)
    logits[i] -= lse;
  return lse;
}

}  // namespace detail

namespace {

using detail::ModelView;

using Batch = std::span<const Example *const>;

void check_batch(Batch batch, const ModelConfig &cfg) {
  const int v = cfg.vocab_size();
  for (const Example *p: batch) {
    const Example &ex = *p;
    if (static_cast<int>(ex.fp.size()) != cfg.fp_dim)
      throw ShapeMismatch("conditioning vector has the wrong length");
    if (static_cast<int>(ex.tokens.size()) + 1 > cfg.max_len)
      throw ShapeMismatch("sequence longer than max_len");
    for (const int t: ex.tokens)
      if (t < 0 || t >= v)
        throw ShapeMismatch("token id out of range");
  }
}

// Shared forward (and optionally backward) pass. grad may be null.
double run(const ParamVector &params, Batch batch, const ModelConfig &cfg,
           ParamVector *grad) {
  check_batch(batch, cfg);
  const ModelView m(params, cfg);
  const int V = m.vocab, H = m.hidden, D = m.embed, F = m.fp_dim;

  double *g_fp = nullptr, *g_embed = nullptr, *g_prev1 = nullptr,
         *g_prev2 = nullptr, *g_pos = nullptr, *g_hbias = nullptr,
         *g_out = nullptr, *g_obias = nullptr;
  if (grad) {
    *grad = zeros_like(params);
    auto at = [&](const char *name) {
      return grad->values.data() + grad->segment(name).offset;
    };
    g_fp = at("fp_proj");
    g_embed = at("embed");
    g_prev1 = at("prev1_proj");
    g_prev2 = at("prev2_proj");
    g_pos = cfg.position_embedding ? at("position") : nullptr;
    g_hbias = at("hidden_bias");
    g_out = at("out_proj");
    g_obias = at("out_bias");
  }

  const double scale = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
  std::vector<double> a(H), h(H), logits(V), dz(H), da(H);
  double total = 0.0;

  for (const Example *p: batch) {
    const Example &ex = *p;
    m.conditioning(ex.fp, a.data());
    std::fill(da.begin(), da.end(), 0.0);
    const int steps = static_cast<int>(ex.tokens.size()) + 1;
    for (int t = 0; t < steps; ++t) {
      const int p1 = t >= 1 ? ex.tokens[t - 1] : Vocabulary::kBos;
      const int p2 = t >= 2 ? ex.tokens[t - 2] : Vocabulary::kBos;
      const int target = t < steps - 1 ? ex.tokens[t] : Vocabulary::kEos;
      const double *e1 = m.embedding + p1 * D;
      const double *e2 = m.embedding + p2 * D;

      for (int i = 0; i < H; ++i) {
        const double *r1 = m.prev1 + i * D;
        const double *r2 = m.prev2 + i * D;
        double s = a[i];
        for (int k = 0; k < D; ++k)
          s += r1[k] * e1[k] + r2[k] * e2[k];
        if (m.position)
          s += m.position[t * H + i];
        h[i] = std::tanh(s);
      }
      for (int o = 0; o < V; ++o) {
        const double *row = m.out_proj + o * H;
        double s = m.out_bias[o];
        for (int i = 0; i < H; ++i)
          s += row[i] * h[i];
        logits[o] = s;
      }
      detail::log_softmax_inplace(logits.data(), V);
      total -= logits[target];

      if (!grad)
        continue;

      // logits now holds log-probabilities; dlogit = (p - onehot) * scale.
      std::fill(dz.begin(), dz.end(), 0.0);
      for (int o = 0; o < V; ++o) {
        double d = std::exp(logits[o]);
        if (o == target)
          d -= 1.0;
        d *= scale;
        g_obias[o] += d;
        const double *row = m.out_proj + o * H;
        double *grow = g_out + o * H;
        for (int i = 0; i < H; ++i) {
          grow[i] += d * h[i];
          dz[i] += d * row[i];
        }
      }
      for (int i = 0; i < H; ++i)
        dz[i] *= 1.0 - h[i] * h[i];

      double *ge1 = g_embed + p1 * D;
      double *ge2 = g_embed + p2 * D;
      for (int i = 0; i < H; ++i) {
        const double g = dz[i];
        da[i] += g;
        if (g_pos)
          g_pos[t * H + i] += g;
        const double *r1 = m.prev1 + i * D;
        const double *r2 = m.prev2 + i * D;
        double *gr1 = g_prev1 + i * D;
        double *gr2 = g_prev2 + i * D;
        for (int k = 0; k < D; ++k) {
          gr1[k] += g * e1[k];
          gr2[k] += g * e2[k];
          ge1[k] += g * r1[k];
          ge2[k] += g * r2[k];
        }
      }
    }

    if (grad) {
      for (int i = 0; i < H; ++i)
        g_hbias[i] += da[i];
      for (int j = 0; j < F; ++j) {
        const double x = ex.fp[j];
        if (x == 0.0)
          continue;
        for (int i = 0; i < H; ++i)
          g_fp[i * F + j] += da[i] * x;
      }
    }
  }
  return total * scale;
}

std::vector<const Example *> pointers(std::span<const Example> batch) {
  std::vector<const Example *> out;
  out.reserve(batch.size());
  for (const auto &ex: batch)
    out.push_back(&ex);
  return out;
}

}  // namespace

LossGrad loss_and_grad(const ParamVector &params,
                       std::span<const Example> batch, const ModelConfig &cfg) {
  LossGrad out;
  out.loss = run(params, pointers(batch), cfg, &out.grad);
  return out;
}

double loss_only(const ParamVector &params, std::span<const Example> batch,
                 const ModelConfig &cfg) {
  return run(params, pointers(batch), cfg, nullptr);
}

void adam_step(ParamVector &params, const ParamVector &grad,
               OptimizerState &opt) {
  const std::size_t n = params.size();
  if (grad.size() != n)
    throw LengthMismatch("gradient and parameter lengths differ");
  if (opt.first_moment.empty() && opt.second_moment.empty()) {
    opt.first_moment.assign(n, 0.0);
    opt.second_moment.assign(n, 0.0);
  }
  if (opt.first_moment.size() != n || opt.second_moment.size() != n)
    throw LengthMismatch("optimizer moments and parameter lengths differ");

  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad.values[i];
    double &m = opt.first_moment[i];
    double &v = opt.second_moment[i];
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g * g;
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    params.values[i] -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.epsilon);
  }
}

TrainResult train_local(const ParamVector &params,
                        std::span<const Example> data,
                        const TrainOptions &options, const ModelConfig &cfg) {
  if (options.batch_size <= 0)
    throw std::invalid_argument("batch_size must be positive");
  TrainResult result;
  result.params = params;
  if (options.epochs <= 0)
    return result;
  if (data.empty())
    throw EmptyDataset();

  OptimizerState opt;
  opt.lr = options.lr;
  opt.beta1 = options.beta1;
  opt.beta2 = options.beta2;
  opt.epsilon = options.epsilon;

  Rng rng(derive_seed(options.seed, 0x7a41));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t { 0 });
  std::vector<const Example *> batch;
  LossGrad lg;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(options.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i)
        batch.push_back(&data[order[i]]);
      lg.loss = run(result.params, batch, cfg, &lg.grad);
      weighted += lg.loss * static_cast<double>(batch.size());
      adam_step(result.params, lg.grad, opt);
    }
    result.epoch_loss.push_back(weighted / static_cast<double>(order.size()));
  }
  return result;
}

}  // namespace fedretro::learner
