//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "fedretro/smiles.hpp"

namespace fedretro::fingerprint {

class LengthMismatch : public std::invalid_argument {
public:
  LengthMismatch(): std::invalid_argument("fingerprint lengths differ") { }
};

class BadDimension : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class BitFingerprint {
public:
  // nbits must be one of 256, 512, 1024, 2048, 4096.
  explicit BitFingerprint(int nbits = 2048);

  int nbits() const { return nbits_; }
  int popcount() const { return popcount_; }
  bool test(int bit) const;
  void set(int bit);
  const std::vector<std::uint64_t> &words() const { return words_; }
  std::vector<int> on_bits() const;

  bool operator==(const BitFingerprint &o) const {
    return nbits_ == o.nbits_ && words_ == o.words_;
  }

private:
  int nbits_;
  int popcount_ = 0;
  std::vector<std::uint64_t> words_;
};

struct FoldedVector {
  int dim = 0;
  std::vector<double> values;
};

struct FingerprintConfig {
  int radius = 2;
  int nbits = 2048;
};

// Platform-independent 64-bit mixing used for atom environments.
std::uint64_t stable_hash(std::uint64_t seed, std::uint64_t value);
// Radius-0 invariant of one atom.
std::uint64_t atom_invariant(const smiles::MolGraph &mol, int atom);

BitFingerprint ecfp(const smiles::MolGraph &mol, int radius = 2,
                    int nbits = 2048);
double tanimoto(const BitFingerprint &a, const BitFingerprint &b);

// Tanimoto between whole (multi-fragment) molecules. An unparseable
// prediction scores 0; an unparseable truth throws.
double molecule_similarity(std::string_view pred, std::string_view truth,
                           const FingerprintConfig &cfg = {});

FoldedVector fold(const BitFingerprint &fp, int dim);

}  // namespace fedretro::fingerprint
