//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fedretro/fingerprint.hpp"
#include "fedretro/smiles.hpp"

namespace fedretro::learner {

class ShapeMismatch : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class LengthMismatch : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class EmptyDataset : public std::invalid_argument {
public:
  EmptyDataset(): std::invalid_argument("dataset is empty") { }
};

// Fixed token alphabet shared by every client. Derived from the SMILES
// grammar supported by the parser, never from data.
class Vocabulary {
public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  static const Vocabulary &global();

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string &token(int id) const { return tokens_[id]; }
  int id(std::string_view token) const;
  std::vector<int> encode(const smiles::TokenSeq &seq) const;
  // Concatenates non-special tokens up to the first EOS.
  std::string decode(std::span<const int> ids) const;
  // Stable digest of the token list, stored with checkpoints.
  std::uint64_t fingerprint() const;

private:
  Vocabulary();

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct ModelConfig {
  int fp_dim = 256;
  int embed_dim = 32;
  int hidden_dim = 64;
  int max_len = 160;
  // Adds a learned per-position term to the hidden pre-activation.
  bool position_embedding = true;
  fingerprint::FingerprintConfig fingerprint;

  int vocab_size() const { return Vocabulary::global().size(); }
  void validate() const;
};

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool is_bias = false;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Segment &) const = default;
};

// Flat model parameters; the only object exchanged between clients.
struct ParamVector {
  std::vector<double> values;
  std::vector<Segment> layout;

  std::size_t size() const { return values.size(); }
  const Segment &segment(std::string_view name) const;
  std::span<double> block(std::string_view name);
  std::span<const double> block(std::string_view name) const;
  bool same_layout(const ParamVector &o) const { return layout == o.layout; }
};

std::vector<Segment> make_layout(const ModelConfig &cfg);

// Weights uniform in [-0.08, 0.08] from a counter-based stream keyed by
// seed; biases zero.
ParamVector init_params(const ModelConfig &cfg, std::uint64_t seed);
ParamVector zeros_like(const ParamVector &p);

void save_params(std::ostream &os, const ParamVector &p);
ParamVector load_params(std::istream &is);
void save_params(const std::string &path, const ParamVector &p);
ParamVector load_params(const std::string &path);

// One (product, reactants) training pair in model space.
struct Example {
  std::vector<double> fp;   // folded product fingerprint, length fp_dim
  std::vector<int> tokens;  // target ids without BOS/EOS
};

// Folded fingerprint of a SMILES string; all-zero when it does not parse.
std::vector<double> conditioning_vector(std::string_view smiles,
                                        const ModelConfig &cfg);
std::vector<double> conditioning_vector(const smiles::MolGraph &mol,
                                        const ModelConfig &cfg);

// nullopt when the target does not fit in max_len (EOS included) or does
// not tokenize.
std::optional<Example> make_example(std::string_view input_smiles,
                                    std::string_view target_smiles,
                                    const ModelConfig &cfg);

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

// Mean over the batch of summed per-token negative log-likelihood.
LossGrad loss_and_grad(const ParamVector &params,
                       std::span<const Example> batch, const ModelConfig &cfg);
double loss_only(const ParamVector &params, std::span<const Example> batch,
                 const ModelConfig &cfg);

struct OptimizerState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
  double lr = 0.0002;
  double beta1 = 0.9;
  double beta2 = 0.998;
  double epsilon = 1e-8;
};

void adam_step(ParamVector &params, const ParamVector &grad,
               OptimizerState &opt);

struct TrainOptions {
  int epochs = 1;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double lr = 0.0002;
  double beta1 = 0.9;
  double beta2 = 0.998;
  double epsilon = 1e-8;
};

struct TrainResult {
  ParamVector params;
  std::vector<double> epoch_loss;  // mean per-example loss of each epoch
};

// Fresh optimizer state on every call.
TrainResult train_local(const ParamVector &params,
                        std::span<const Example> data,
                        const TrainOptions &options, const ModelConfig &cfg);

struct Prediction {
  std::string smiles;  // canonical when parsed, raw text otherwise
  double log_prob = 0.0;
  int rank = 0;
  bool parsed = false;
};

// Reusable decoder for one parameter set.
class BeamDecoder {
public:
  BeamDecoder(const ParamVector &params, const ModelConfig &cfg);

  std::vector<Prediction> decode(std::span<const double> fp, int beam_width,
                                 int topn) const;
  std::vector<Prediction> decode(const smiles::MolGraph &input, int beam_width,
                                 int topn) const;

private:
  const ParamVector &params_;
  ModelConfig cfg_;
  int vocab_;
  std::vector<double> prev1_table_;  // vocab x hidden
  std::vector<double> prev2_table_;  // vocab x hidden
};

std::vector<Prediction> beam_decode(const ParamVector &params,
                                    const smiles::MolGraph &product,
                                    const ModelConfig &cfg,
                                    int beam_width = 10, int topn = 10);

}  // namespace fedretro::learner
