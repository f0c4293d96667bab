//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <span>

#include "fedretro/learner.hpp"

namespace fedretro::learner::detail {

// Raw pointers into the parameter blocks of one ParamVector.
struct ModelView {
  ModelView(const ParamVector &p, const ModelConfig &cfg);

  // a = fp_proj * fp + hidden_bias
  void conditioning(std::span<const double> fp, double *a) const;

  int vocab, hidden, embed, fp_dim, max_len;
  const double *fp_proj;
  const double *embedding;
  const double *prev1;
  const double *prev2;
  const double *position;  // null when disabled
  const double *hidden_bias;
  const double *out_proj;
  const double *out_bias;
};

// Returns the log-sum-exp and leaves log-probabilities in place.
double log_softmax_inplace(double *logits, int n);

}  // namespace fedretro::learner::detail
