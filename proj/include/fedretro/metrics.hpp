//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedretro/learner.hpp"

namespace fedretro::metrics {

class BadK : public std::invalid_argument {
public:
  explicit BadK(int k)
      : std::invalid_argument("K must be positive, got " + std::to_string(k)) { }
};

class MissingForwardModel : public std::invalid_argument {
public:
  MissingForwardModel()
      : std::invalid_argument("round-trip accuracy needs a forward model") { }
};

using PredictionList = std::vector<learner::Prediction>;

inline const std::vector<int> kDefaultKs { 1, 3, 5, 10 };

// Fraction of records whose truth is among the first K predictions.
double topk_accuracy(std::span<const PredictionList> predictions,
                     std::span<const std::string> truths, int k);

// Same, comparing only the largest fragment on both sides.
double maxfrag_accuracy(std::span<const PredictionList> predictions,
                        std::span<const std::string> truths, int k);

struct ForwardModel {
  const learner::ParamVector *params = nullptr;
  learner::ModelConfig config;
  int beam_width = 5;
  std::string source;  // where the checkpoint came from, echoed in reports
};

// Whether the forward model maps each rank-1 prediction back to its product.
double roundtrip_accuracy(std::span<const PredictionList> predictions,
                          std::span<const std::string> products,
                          const ForwardModel &forward);

// Top-K restricted to each class; classes without records are absent.
std::map<int, double> per_class_breakdown(
    std::span<const PredictionList> predictions,
    std::span<const std::string> truths, std::span<const int> classes, int k);

struct EvalResult {
  std::size_t n_evaluated = 0;
  std::map<int, double> topk;
  std::map<int, double> maxfrag_topk;
  std::optional<double> roundtrip_top1;
  std::map<int, std::map<int, double>> per_class;  // class -> K -> accuracy
  std::map<int, std::size_t> class_counts;
};

struct EvalInput {
  std::span<const PredictionList> predictions;
  std::span<const std::string> truths;
  std::span<const std::string> products;
  std::span<const int> classes;  // empty when unlabelled
};

EvalResult evaluate(const EvalInput &input, std::span<const int> ks,
                    const ForwardModel *forward = nullptr);

}  // namespace fedretro::metrics
