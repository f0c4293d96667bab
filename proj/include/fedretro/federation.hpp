//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedretro/data.hpp"
#include "fedretro/learner.hpp"
#include "fedretro/metrics.hpp"

namespace fedretro::federation {

class EmptyProxySet : public std::invalid_argument {
public:
  explicit EmptyProxySet(int client)
      : std::invalid_argument("client " + std::to_string(client)
                              + " has no proxy reactions") { }
};

class ZeroSize : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class LayoutMismatch : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class BadWeights : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class InvalidConfig : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class Mode { kCkif, kFedAvg, kLocal, kCentral };

const char *mode_name(Mode m);
Mode parse_mode(std::string_view name);  // throws InvalidConfig

// Square row-major matrix.
struct Matrix {
  int n = 0;
  std::vector<double> values;

  Matrix() = default;
  explicit Matrix(int size, double fill = 0.0)
      : n(size), values(static_cast<std::size_t>(size) * size, fill) { }
  double &operator()(int i, int k) { return values[i * n + k]; }
  double operator()(int i, int k) const { return values[i * n + k]; }
  std::span<const double> row(int i) const {
    return std::span<const double>(values).subspan(i * n, n);
  }
};

using SimilarityMatrix = Matrix;  // diagonal unused, left at 0
using WeightMatrix = Matrix;

struct FedConfig {
  int rounds = 50;          // R_T
  int local_epochs = 5;     // R_L
  int finetune_rounds = 10; // R_F
  std::optional<double> mu; // 1/K when unset
  double tau = 1.5;
  Mode mode = Mode::kCkif;
  std::optional<std::size_t> proxy_cap;
  int eval_beam_width = 5;
  std::uint64_t seed = 0;
  bool cache_similarity = false;
  bool track_proxy = true;  // per-round proxy top-1 of each client's model
  int threads = 1;
  learner::TrainOptions train;  // epochs and seed are set per round

  double self_weight(int k) const { return mu.value_or(1.0 / k); }
  void validate(int num_clients) const;
};

// One participant. Training data stays inside; the public surface only
// exchanges parameter vectors and scalar summaries.
class Client {
public:
  Client(int id, const data::ReactionDataset &local,
         const learner::ModelConfig &cfg);

  int id() const { return id_; }
  std::size_t num_train() const { return train_.size(); }
  std::size_t num_proxy() const { return proxy_.size(); }
  // Validation pairs left out of the proxy set because they do not parse.
  std::size_t num_dropped_proxy() const { return dropped_proxy_; }
  std::size_t num_test() const { return test_truth_.size(); }

  // R_L epochs from `start`, seeded per (master, client, round).
  learner::TrainResult train(const learner::ParamVector &start, int epochs,
                             const learner::TrainOptions &options,
                             std::uint64_t master_seed, int round) const;

  // Mean molecule similarity between the top-1 decode of `foreign` on this
  // client's proxy products and the true proxy reactants.
  double proxy_similarity(const learner::ParamVector &foreign, int beam_width,
                          std::optional<std::size_t> cap,
                          std::uint64_t seed) const;

  // Top-1 exact match of `params` on the proxy set.
  double proxy_top1(const learner::ParamVector &params, int beam_width) const;

  // Test-split metrics, computed locally.
  metrics::EvalResult evaluate(const learner::ParamVector &params,
                               int beam_width, std::span<const int> ks,
                               const metrics::ForwardModel *forward) const;

private:
  friend learner::ParamVector run_central(std::span<const Client>,
                                          const FedConfig &,
                                          const learner::ModelConfig &,
                                          std::size_t *);

  struct Pair {
    std::string product;
    std::string reactants;
  };

  std::vector<std::size_t> proxy_indices(std::optional<std::size_t> cap,
                                         std::uint64_t seed) const;

  int id_;
  learner::ModelConfig cfg_;
  std::vector<learner::Example> train_;
  std::vector<Pair> proxy_;
  std::size_t dropped_proxy_ = 0;
  std::vector<std::string> test_product_;
  std::vector<std::string> test_truth_;
  std::vector<int> test_class_;
};

SimilarityMatrix similarity_matrix(std::span<const Client> clients,
                                   std::span<const learner::ParamVector> models,
                                   const FedConfig &cfg);

WeightMatrix ckiw_weights(const SimilarityMatrix &s, double mu, double tau);

WeightMatrix fedavg_weights(std::span<const std::size_t> sizes);

learner::ParamVector aggregate(std::span<const learner::ParamVector> models,
                               std::span<const double> row);

struct RoundReport {
  int round = 0;
  bool aggregated = false;
  std::optional<SimilarityMatrix> similarity;
  std::optional<WeightMatrix> weights;
  std::vector<double> train_loss;  // last-epoch loss per client
  std::vector<double> proxy_top1;  // empty unless tracked
  double seconds = 0.0;
};

struct FedResult {
  std::vector<learner::ParamVector> models;
  std::vector<RoundReport> rounds;
};

// Optional hook run after each round, e.g. for checkpointing.
using RoundCallback =
    std::function<void(const RoundReport &,
                       std::span<const learner::ParamVector>)>;

FedResult run_federated(std::span<const Client> clients, const FedConfig &cfg,
                        const learner::ModelConfig &model_cfg,
                        const RoundCallback &on_round = {});

// Pools every client's training data; a baseline that ignores privacy.
learner::ParamVector run_central(std::span<const Client> clients,
                                 const FedConfig &cfg,
                                 const learner::ModelConfig &model_cfg,
                                 std::size_t *pooled_size = nullptr);

// Shared starting point of every client model.
learner::ParamVector initial_params(const learner::ModelConfig &model_cfg,
                                    std::uint64_t master_seed);

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)> &fn);

}  // namespace fedretro::federation
