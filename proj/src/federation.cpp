//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "fedretro/federation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

#include "fedretro/fingerprint.hpp"
#include "fedretro/rng.hpp"
#include "fedretro/smiles.hpp"

namespace fedretro::federation {

using learner::ParamVector;

const char *mode_name(Mode m) {
  switch (m) {
  case Mode::kCkif:
    return "ckif";
  case Mode::kFedAvg:
    return "fedavg";
  case Mode::kLocal:
    return "local";
  case Mode::kCentral:
    return "central";
  }
  return "unknown";
}

Mode parse_mode(std::string_view name) {
  for (const Mode m: { Mode::kCkif, Mode::kFedAvg, Mode::kLocal, Mode::kCentral })
    if (name == mode_name(m))
      return m;
  throw InvalidConfig("unknown mode '" + std::string(name) + "'");
}

void FedConfig::validate(int num_clients) const {
  if (num_clients < 1)
    throw InvalidConfig("need at least one client");
  if (rounds < 1 || local_epochs < 0)
    throw InvalidConfig("rounds must be >= 1 and local_epochs >= 0");
  if (finetune_rounds < 0 || finetune_rounds > rounds)
    throw InvalidConfig("finetune_rounds must be in [0, rounds]");
  const double m = self_weight(num_clients);
  if (!(m >= 0.0 && m <= 1.0))
    throw InvalidConfig("mu must be in [0, 1]");
  if (!(tau > 0.0))
    throw InvalidConfig("tau must be positive");
  if (eval_beam_width < 1)
    throw InvalidConfig("eval_beam_width must be >= 1");
  if (proxy_cap && *proxy_cap == 0)
    throw InvalidConfig("proxy_cap must be positive when set");
  if (threads < 1)
    throw InvalidConfig("threads must be >= 1");
  if (train.batch_size < 1 || !(train.lr > 0.0))
    throw InvalidConfig("batch_size and lr must be positive");
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)> &fn) {
  const std::size_t workers =
      std::min(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next { 0 };
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto &t: pool)
    t.join();
  // Lowest index wins so the reported failure does not depend on timing.
  for (const auto &e: errors)
    if (e)
      std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------

Client::Client(int id, const data::ReactionDataset &local,
               const learner::ModelConfig &cfg)
    : id_(id), cfg_(cfg) {
  bool labelled = true;
  for (std::size_t i = 0; i < local.size(); ++i) {
    const auto &r = local.records[i];
    switch (local.splits[i]) {
    case data::Split::kTrain:
      if (auto ex = learner::make_example(r.product, r.reactants, cfg_))
        train_.push_back(std::move(*ex));
      break;
    case data::Split::kVal:
      // Similarity needs a valid reference, so contaminated pairs whose
      // reactant side no longer parses are not used as proxies.
      try {
        proxy_.push_back({ r.product, smiles::canonicalize(r.reactants) });
      } catch (const smiles::SmilesError &) {
        ++dropped_proxy_;
      } catch (const smiles::EmptyMolecule &) {
        ++dropped_proxy_;
      }
      break;
    case data::Split::kTest:
      test_product_.push_back(r.product);
      test_truth_.push_back(r.reactants);
      labelled = labelled && r.reaction_class.has_value();
      test_class_.push_back(r.reaction_class.value_or(0));
      break;
    }
  }
  if (!labelled)
    test_class_.clear();
}

learner::TrainResult Client::train(const ParamVector &start, int epochs,
                                   const learner::TrainOptions &options,
                                   std::uint64_t master_seed, int round) const {
  learner::TrainOptions opt = options;
  opt.epochs = epochs;
  opt.seed = derive_seed(master_seed, static_cast<std::uint64_t>(id_),
                         static_cast<std::uint64_t>(round));
  return learner::train_local(start, train_, opt, cfg_);
}

std::vector<std::size_t> Client::proxy_indices(std::optional<std::size_t> cap,
                                               std::uint64_t seed) const {
  std::vector<std::size_t> idx(proxy_.size());
  std::iota(idx.begin(), idx.end(), std::size_t { 0 });
  if (cap && *cap < idx.size()) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(id_), 0x9e0));
    rng.shuffle(std::span<std::size_t>(idx));
    idx.resize(*cap);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

double Client::proxy_similarity(const ParamVector &foreign, int beam_width,
                                std::optional<std::size_t> cap,
                                std::uint64_t seed) const {
  if (proxy_.empty())
    throw EmptyProxySet(id_);
  const learner::BeamDecoder decoder(foreign, cfg_);
  const auto idx = proxy_indices(cap, seed);
  double sum = 0.0;
  for (const std::size_t i: idx) {
    const auto fp = learner::conditioning_vector(proxy_[i].product, cfg_);
    const auto preds = decoder.decode(fp, beam_width, 1);
    if (!preds.empty())
      sum += fingerprint::molecule_similarity(preds.front().smiles,
                                              proxy_[i].reactants);
  }
  return sum / static_cast<double>(idx.size());
}

double Client::proxy_top1(const ParamVector &params, int beam_width) const {
  if (proxy_.empty())
    return 0.0;
  const learner::BeamDecoder decoder(params, cfg_);
  std::size_t hits = 0;
  for (const auto &p: proxy_) {
    const auto fp = learner::conditioning_vector(p.product, cfg_);
    const auto preds = decoder.decode(fp, beam_width, 1);
    hits += !preds.empty() && preds.front().parsed
            && preds.front().smiles == p.reactants;
  }
  return static_cast<double>(hits) / static_cast<double>(proxy_.size());
}

metrics::EvalResult Client::evaluate(const ParamVector &params, int beam_width,
                                     std::span<const int> ks,
                                     const metrics::ForwardModel *forward) const {
  const learner::BeamDecoder decoder(params, cfg_);
  std::vector<metrics::PredictionList> preds;
  preds.reserve(test_product_.size());
  for (const auto &p: test_product_)
    preds.push_back(decoder.decode(learner::conditioning_vector(p, cfg_),
                                   beam_width, beam_width));
  metrics::EvalInput in;
  in.predictions = preds;
  in.truths = test_truth_;
  in.products = test_product_;
  in.classes = test_class_;
  return metrics::evaluate(in, ks, forward);
}

// ---------------------------------------------------------------------------

SimilarityMatrix similarity_matrix(std::span<const Client> clients,
                                   std::span<const ParamVector> models,
                                   const FedConfig &cfg) {
  const int k = static_cast<int>(clients.size());
  if (models.size() != clients.size())
    throw LayoutMismatch("one model per client expected");
  for (const auto &c: clients)
    if (c.num_proxy() == 0)
      throw EmptyProxySet(c.id());
  SimilarityMatrix s(k);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j)
        pairs.emplace_back(i, j);
  parallel_for(pairs.size(), cfg.threads, [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    s(i, j) = clients[i].proxy_similarity(models[j], cfg.eval_beam_width,
                                          cfg.proxy_cap, cfg.seed);
  });
  return s;
}

WeightMatrix ckiw_weights(const SimilarityMatrix &s, double mu, double tau) {
  const int k = s.n;
  WeightMatrix w(k);
  if (k == 1) {
    w(0, 0) = 1.0;
    return w;
  }
  for (int i = 0; i < k; ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j)
      if (j != i)
        top = std::max(top, s(i, j) / tau);
    double denom = 0.0;
    for (int j = 0; j < k; ++j)
      if (j != i)
        denom += std::exp(s(i, j) / tau - top);
    for (int j = 0; j < k; ++j)
      w(i, j) = j == i ? mu : (1.0 - mu) * std::exp(s(i, j) / tau - top) / denom;
  }
  return w;
}

WeightMatrix fedavg_weights(std::span<const std::size_t> sizes) {
  if (sizes.empty())
    throw ZeroSize("no clients");
  double total = 0.0;
  for (const std::size_t n: sizes) {
    if (n == 0)
      throw ZeroSize("client with no training records");
    total += static_cast<double>(n);
  }
  const int k = static_cast<int>(sizes.size());
  WeightMatrix w(k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      w(i, j) = static_cast<double>(sizes[j]) / total;
  return w;
}

ParamVector aggregate(std::span<const ParamVector> models,
                      std::span<const double> row) {
  if (models.empty())
    throw LayoutMismatch("nothing to aggregate");
  if (row.size() != models.size())
    throw BadWeights("weight row length differs from the number of models");
  for (const auto &m: models)
    if (!m.same_layout(models.front()) || m.values.size() != models.front().values.size())
      throw LayoutMismatch("parameter layouts differ");
  double sum = 0.0;
  for (const double w: row) {
    if (!(w >= 0.0))
      throw BadWeights("negative or non-finite weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw BadWeights("weights do not sum to 1");

  for (std::size_t k = 0; k < row.size(); ++k)
    if (row[k] == 1.0)
      return models[k];

  ParamVector out = learner::zeros_like(models.front());
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (row[k] == 0.0)
      continue;
    const double w = row[k];
    const auto &v = models[k].values;
    for (std::size_t p = 0; p < v.size(); ++p)
      out.values[p] += w * v[p];
  }
  return out;
}

ParamVector initial_params(const learner::ModelConfig &model_cfg,
                           std::uint64_t master_seed) {
  return learner::init_params(model_cfg, derive_seed(master_seed, 0x1417));
}

FedResult run_federated(std::span<const Client> clients, const FedConfig &cfg,
                        const learner::ModelConfig &model_cfg,
                        const RoundCallback &on_round) {
  const int k = static_cast<int>(clients.size());
  cfg.validate(k);
  if (cfg.mode == Mode::kCentral)
    throw InvalidConfig("central training is not a federated mode");

  FedResult result;
  result.models.assign(clients.size(), initial_params(model_cfg, cfg.seed));
  std::vector<std::size_t> sizes;
  for (const auto &c: clients)
    sizes.push_back(c.num_train());
  std::optional<SimilarityMatrix> cached;

  for (int r = 1; r <= cfg.rounds; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    RoundReport rep;
    rep.round = r;
    rep.train_loss.assign(clients.size(), 0.0);

    std::vector<ParamVector> trained(clients.size());
    parallel_for(clients.size(), cfg.threads, [&](std::size_t i) {
      auto res = clients[i].train(result.models[i], cfg.local_epochs, cfg.train,
                                  cfg.seed, r);
      trained[i] = std::move(res.params);
      if (!res.epoch_loss.empty())
        rep.train_loss[i] = res.epoch_loss.back();
    });

    const bool aggregate_phase = r <= cfg.rounds - cfg.finetune_rounds
                                 && cfg.mode != Mode::kLocal;
    if (aggregate_phase && cfg.mode == Mode::kCkif) {
      if (!cached || !cfg.cache_similarity)
        cached = similarity_matrix(clients, trained, cfg);
      rep.similarity = *cached;
      rep.weights = ckiw_weights(*cached, cfg.self_weight(k), cfg.tau);
      parallel_for(clients.size(), cfg.threads, [&](std::size_t i) {
        result.models[i] = aggregate(trained, rep.weights->row(static_cast<int>(i)));
      });
      rep.aggregated = true;
    } else if (aggregate_phase && cfg.mode == Mode::kFedAvg) {
      rep.weights = fedavg_weights(sizes);
      const ParamVector global = aggregate(trained, rep.weights->row(0));
      for (auto &m: result.models)
        m = global;
      rep.aggregated = true;
    } else {
      result.models = std::move(trained);
    }

    if (cfg.track_proxy) {
      rep.proxy_top1.assign(clients.size(), 0.0);
      parallel_for(clients.size(), cfg.threads, [&](std::size_t i) {
        rep.proxy_top1[i] =
            clients[i].proxy_top1(result.models[i], cfg.eval_beam_width);
      });
    }
    rep.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0).count();
    if (on_round)
      on_round(rep, result.models);
    result.rounds.push_back(std::move(rep));
  }
  return result;
}

ParamVector run_central(std::span<const Client> clients, const FedConfig &cfg,
                        const learner::ModelConfig &model_cfg,
                        std::size_t *pooled_size) {
  if (clients.empty())
    throw learner::EmptyDataset();
  std::vector<learner::Example> pooled;
  for (const auto &c: clients)
    pooled.insert(pooled.end(), c.train_.begin(), c.train_.end());
  if (pooled_size)
    *pooled_size = pooled.size();
  if (pooled.empty())
    throw learner::EmptyDataset();
  learner::TrainOptions opt = cfg.train;
  opt.epochs = cfg.rounds * cfg.local_epochs;
  // Same stream as client 0 in round 1, so a single-client central run is
  // one long local round.
  opt.seed = derive_seed(cfg.seed, 0, 1);
  return learner::train_local(initial_params(model_cfg, cfg.seed), pooled, opt,
                              model_cfg)
      .params;
}

}  // namespace fedretro::federation
