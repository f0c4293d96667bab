//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <cmath>
#include <map>

#include "fedretro/learner.hpp"
#include "model_view.hpp"

namespace fedretro::learner {
namespace {

struct Hypothesis {
  std::vector<int> tokens;
  double log_prob = 0.0;
};

struct Candidate {
  double score;
  int beam;
  int token;
};

bool better(const Candidate &a, const Candidate &b) {
  if (a.score != b.score)
    return a.score > b.score;
  if (a.beam != b.beam)
    return a.beam < b.beam;
  return a.token < b.token;
}

}  // namespace

BeamDecoder::BeamDecoder(const ParamVector &params, const ModelConfig &cfg)
    : params_(params), cfg_(cfg), vocab_(cfg.vocab_size()) {
  const detail::ModelView m(params_, cfg_);
  const int H = m.hidden, D = m.embed;
  prev1_table_.assign(static_cast<std::size_t>(vocab_) * H, 0.0);
  prev2_table_.assign(static_cast<std::size_t>(vocab_) * H, 0.0);
  for (int v = 0; v < vocab_; ++v) {
    const double *e = m.embedding + v * D;
    for (int i = 0; i < H; ++i) {
      double s1 = 0.0, s2 = 0.0;
      for (int k = 0; k < D; ++k) {
        s1 += m.prev1[i * D + k] * e[k];
        s2 += m.prev2[i * D + k] * e[k];
      }
      prev1_table_[v * H + i] = s1;
      prev2_table_[v * H + i] = s2;
    }
  }
}

std::vector<Prediction> BeamDecoder::decode(const smiles::MolGraph &input,
                                            int beam_width, int topn) const {
  const auto fp = conditioning_vector(input, cfg_);
  return decode(fp, beam_width, topn);
}

std::vector<Prediction> BeamDecoder::decode(std::span<const double> fp,
                                            int beam_width, int topn) const {
  if (beam_width < 1 || topn < 1 || topn > beam_width)
    throw std::invalid_argument("require beam_width >= topn >= 1");
  if (static_cast<int>(fp.size()) != cfg_.fp_dim)
    throw ShapeMismatch("conditioning vector has the wrong length");

  const detail::ModelView m(params_, cfg_);
  const int H = m.hidden, V = vocab_;
  std::vector<double> a(H), h(H), logits(V);
  m.conditioning(fp, a.data());

  std::vector<Hypothesis> live { Hypothesis {} };
  std::vector<Hypothesis> finished;
  std::vector<Candidate> cands;

  for (int t = 0; t < cfg_.max_len && !live.empty(); ++t) {
    cands.clear();
    for (int b = 0; b < static_cast<int>(live.size()); ++b) {
      const auto &tok = live[b].tokens;
      const int p1 = t >= 1 ? tok[t - 1] : Vocabulary::kBos;
      const int p2 = t >= 2 ? tok[t - 2] : Vocabulary::kBos;
      const double *r1 = prev1_table_.data() + p1 * H;
      const double *r2 = prev2_table_.data() + p2 * H;
      for (int i = 0; i < H; ++i) {
        double s = a[i] + r1[i] + r2[i];
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
      for (int o = 0; o < V; ++o) {
        if (o == Vocabulary::kPad || o == Vocabulary::kBos
            || o == Vocabulary::kUnk)
          continue;
        cands.push_back({ live[b].log_prob + logits[o], b, o });
      }
    }

    const std::size_t keep =
        std::min(cands.size(), static_cast<std::size_t>(beam_width));
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(), better);

    std::vector<Hypothesis> next;
    for (std::size_t c = 0; c < keep; ++c) {
      Hypothesis hyp { live[cands[c].beam].tokens, cands[c].score };
      if (cands[c].token == Vocabulary::kEos) {
        finished.push_back(std::move(hyp));
      } else {
        hyp.tokens.push_back(cands[c].token);
        next.push_back(std::move(hyp));
      }
    }
    live = std::move(next);

    // Scores only decrease, so stop once no live hypothesis can enter the
    // finished top beam_width.
    if (static_cast<int>(finished.size()) >= beam_width && !live.empty()) {
      std::vector<double> scores;
      for (const auto &f: finished)
        scores.push_back(f.log_prob);
      std::nth_element(scores.begin(), scores.begin() + (beam_width - 1),
                       scores.end(), std::greater<>());
      if (live.front().log_prob <= scores[beam_width - 1])
        break;
    }
  }

  // Canonicalize, merge duplicates keeping the best score, then rank.
  std::map<std::string, Prediction> merged;
  const Vocabulary &vocab = Vocabulary::global();
  for (const auto &f: finished) {
    Prediction p;
    p.smiles = vocab.decode(f.tokens);
    p.log_prob = f.log_prob;
    try {
      p.smiles = smiles::canonicalize(p.smiles);
      p.parsed = true;
    } catch (const smiles::SmilesError &) {
      p.parsed = false;
    }
    auto it = merged.find(p.smiles);
    if (it == merged.end())
      merged.emplace(p.smiles, p);
    else if (p.log_prob > it->second.log_prob)
      it->second = p;
  }

  std::vector<Prediction> out;
  for (auto &[_, p]: merged)
    out.push_back(std::move(p));
  std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) {
    if (a.log_prob != b.log_prob)
      return a.log_prob > b.log_prob;
    return a.smiles < b.smiles;
  });
  if (static_cast<int>(out.size()) > topn)
    out.resize(topn);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].rank = static_cast<int>(i) + 1;
  return out;
}

std::vector<Prediction> beam_decode(const ParamVector &params,
                                    const smiles::MolGraph &product,
                                    const ModelConfig &cfg, int beam_width,
                                    int topn) {
  return BeamDecoder(params, cfg).decode(product, beam_width, topn);
}

}  // namespace fedretro::learner
