//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "fedretro/metrics.hpp"

#include <limits>

#include "fedretro/smiles.hpp"

namespace fedretro::metrics {
namespace {

constexpr int kNoHit = std::numeric_limits<int>::max();

std::optional<std::string> canonical_or_none(std::string_view s) {
  try {
    return smiles::canonicalize(s);
  } catch (const smiles::SmilesError &) {
  } catch (const smiles::EmptyMolecule &) {
  }
  return std::nullopt;
}

std::optional<std::string> largest_fragment_or_none(std::string_view s) {
  try {
    return smiles::canonical_smiles(
        smiles::largest_fragment(smiles::parse_smiles(s)));
  } catch (const smiles::SmilesError &) {
  } catch (const smiles::EmptyMolecule &) {
  }
  return std::nullopt;
}

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b)
    throw std::invalid_argument("predictions and truths differ in length");
}

// 1-based position of the first matching prediction, kNoHit if none.
int first_exact_hit(const PredictionList &preds, const std::string &truth) {
  const auto t = canonical_or_none(truth);
  if (!t)
    return kNoHit;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (canonical_or_none(preds[i].smiles) == t)
      return static_cast<int>(i) + 1;
  return kNoHit;
}

// Unparseable predictions are skipped rather than counted as a rank.
int first_maxfrag_hit(const PredictionList &preds, const std::string &truth) {
  const auto t = largest_fragment_or_none(truth);
  if (!t)
    return kNoHit;
  int rank = 0;
  for (const auto &p: preds) {
    const auto f = largest_fragment_or_none(p.smiles);
    if (!f)
      continue;
    ++rank;
    if (f == t)
      return rank;
  }
  return kNoHit;
}

double fraction_within(const std::vector<int> &ranks, int k) {
  if (ranks.empty())
    return 0.0;
  std::size_t hits = 0;
  for (const int r: ranks)
    hits += r <= k;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::vector<int> exact_ranks(std::span<const PredictionList> predictions,
                             std::span<const std::string> truths) {
  check_sizes(predictions.size(), truths.size());
  std::vector<int> ranks(truths.size());
  for (std::size_t i = 0; i < truths.size(); ++i)
    ranks[i] = first_exact_hit(predictions[i], truths[i]);
  return ranks;
}

std::vector<int> maxfrag_ranks(std::span<const PredictionList> predictions,
                               std::span<const std::string> truths) {
  check_sizes(predictions.size(), truths.size());
  std::vector<int> ranks(truths.size());
  for (std::size_t i = 0; i < truths.size(); ++i)
    ranks[i] = first_maxfrag_hit(predictions[i], truths[i]);
  return ranks;
}

std::map<int, double> by_class(const std::vector<int> &ranks,
                               std::span<const int> classes, int k) {
  check_sizes(ranks.size(), classes.size());
  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < ranks.size(); ++i)
    groups[classes[i]].push_back(ranks[i]);
  std::map<int, double> out;
  for (const auto &[c, r]: groups)
    out[c] = fraction_within(r, k);
  return out;
}

}  // namespace

double topk_accuracy(std::span<const PredictionList> predictions,
                     std::span<const std::string> truths, int k) {
  if (k <= 0)
    throw BadK(k);
  return fraction_within(exact_ranks(predictions, truths), k);
}

double maxfrag_accuracy(std::span<const PredictionList> predictions,
                        std::span<const std::string> truths, int k) {
  if (k <= 0)
    throw BadK(k);
  return fraction_within(maxfrag_ranks(predictions, truths), k);
}

double roundtrip_accuracy(std::span<const PredictionList> predictions,
                          std::span<const std::string> products,
                          const ForwardModel &forward) {
  if (!forward.params)
    throw MissingForwardModel();
  check_sizes(predictions.size(), products.size());
  if (products.empty())
    return 0.0;
  const learner::BeamDecoder decoder(*forward.params, forward.config);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < products.size(); ++i) {
    if (predictions[i].empty())
      continue;
    smiles::MolGraph reactants;
    try {
      reactants = smiles::parse_smiles(predictions[i].front().smiles);
    } catch (const smiles::SmilesError &) {
      continue;
    }
    const auto out = decoder.decode(reactants, forward.beam_width, 1);
    if (out.empty())
      continue;
    const auto product = canonical_or_none(products[i]);
    hits += out.front().parsed && product && out.front().smiles == *product;
  }
  return static_cast<double>(hits) / static_cast<double>(products.size());
}

std::map<int, double> per_class_breakdown(
    std::span<const PredictionList> predictions,
    std::span<const std::string> truths, std::span<const int> classes, int k) {
  if (k <= 0)
    throw BadK(k);
  return by_class(exact_ranks(predictions, truths), classes, k);
}

EvalResult evaluate(const EvalInput &input, std::span<const int> ks,
                    const ForwardModel *forward) {
  for (const int k: ks)
    if (k <= 0)
      throw BadK(k);
  EvalResult r;
  r.n_evaluated = input.truths.size();
  const auto exact = exact_ranks(input.predictions, input.truths);
  const auto frag = maxfrag_ranks(input.predictions, input.truths);
  for (const int k: ks) {
    r.topk[k] = fraction_within(exact, k);
    r.maxfrag_topk[k] = fraction_within(frag, k);
  }
  if (!input.classes.empty()) {
    for (const int k: ks)
      for (const auto &[c, acc]: by_class(exact, input.classes, k))
        r.per_class[c][k] = acc;
    for (const int c: input.classes)
      ++r.class_counts[c];
  }
  if (forward)
    r.roundtrip_top1 =
        roundtrip_accuracy(input.predictions, input.products, *forward);
  return r;
}

}  // namespace fedretro::metrics
