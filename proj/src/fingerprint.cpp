//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "fedretro/fingerprint.hpp"

#include <algorithm>
#include <bit>
#include <utility>
#include <vector>

namespace fedretro::fingerprint {
namespace {

constexpr std::uint64_t kSeed = 0x5eed'ec4f'0000'2026ULL;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool valid_nbits(int nbits) {
  return nbits == 256 || nbits == 512 || nbits == 1024 || nbits == 2048
         || nbits == 4096;
}

}  // namespace

BitFingerprint::BitFingerprint(int nbits): nbits_(nbits) {
  if (!valid_nbits(nbits))
    throw BadDimension("nbits must be a power of two in [256, 4096]");
  words_.assign(nbits / 64, 0);
}

bool BitFingerprint::test(int bit) const {
  return (words_[bit >> 6] >> (bit & 63)) & 1U;
}

void BitFingerprint::set(int bit) {
  std::uint64_t &w = words_[bit >> 6];
  const std::uint64_t mask = std::uint64_t { 1 } << (bit & 63);
  if (!(w & mask)) {
    w |= mask;
    ++popcount_;
  }
}

std::vector<int> BitFingerprint::on_bits() const {
  std::vector<int> out;
  for (int i = 0; i < nbits_; ++i)
    if (test(i))
      out.push_back(i);
  return out;
}

std::uint64_t stable_hash(std::uint64_t seed, std::uint64_t value) {
  return splitmix64(seed ^ splitmix64(value));
}

std::uint64_t atom_invariant(const smiles::MolGraph &mol, int atom) {
  const smiles::Atom &a = mol.atom(atom);
  std::uint64_t h = kSeed;
  h = stable_hash(h, static_cast<std::uint64_t>(a.element));
  h = stable_hash(h, static_cast<std::uint64_t>(a.formal_charge + 16));
  h = stable_hash(h, static_cast<std::uint64_t>(mol.degree(atom)));
  h = stable_hash(h, a.aromatic ? 1 : 0);
  h = stable_hash(h, static_cast<std::uint64_t>(a.explicit_h.value_or(0)));
  return h;
}

BitFingerprint ecfp(const smiles::MolGraph &mol, int radius, int nbits) {
  if (radius < 0 || radius > 4)
    throw std::invalid_argument("ECFP radius must be in [0, 4]");
  BitFingerprint fp(nbits);
  const int n = mol.num_atoms();
  std::vector<std::uint64_t> inv(n), next(n);
  for (int a = 0; a < n; ++a) {
    inv[a] = atom_invariant(mol, a);
    fp.set(static_cast<int>(inv[a] % static_cast<std::uint64_t>(nbits)));
  }

  std::vector<std::pair<std::uint64_t, std::uint64_t>> env;
  for (int r = 1; r <= radius; ++r) {
    for (int a = 0; a < n; ++a) {
      env.clear();
      for (const auto &nb: mol.neighbors(a))
        env.emplace_back(static_cast<std::uint64_t>(mol.bond(nb.bond).order),
                         inv[nb.atom]);
      std::sort(env.begin(), env.end());
      std::uint64_t h = stable_hash(kSeed + static_cast<std::uint64_t>(r),
                                    inv[a]);
      for (const auto &[order, neighbor]: env) {
        h = stable_hash(h, order);
        h = stable_hash(h, neighbor);
      }
      next[a] = h;
      fp.set(static_cast<int>(h % static_cast<std::uint64_t>(nbits)));
    }
    std::swap(inv, next);
  }
  return fp;
}

double tanimoto(const BitFingerprint &a, const BitFingerprint &b) {
  if (a.nbits() != b.nbits())
    throw LengthMismatch();
  int both = 0, either = 0;
  for (std::size_t i = 0; i < a.words().size(); ++i) {
    both += std::popcount(a.words()[i] & b.words()[i]);
    either += std::popcount(a.words()[i] | b.words()[i]);
  }
  if (either == 0)
    return 1.0;
  return static_cast<double>(both) / static_cast<double>(either);
}

double molecule_similarity(std::string_view pred, std::string_view truth,
                           const FingerprintConfig &cfg) {
  const smiles::MolGraph truth_mol =
      smiles::parse_smiles(smiles::canonicalize(truth));
  smiles::MolGraph pred_mol;
  try {
    pred_mol = smiles::parse_smiles(smiles::canonicalize(pred));
  } catch (const smiles::SmilesError &) {
    return 0.0;
  }
  return tanimoto(ecfp(pred_mol, cfg.radius, cfg.nbits),
                  ecfp(truth_mol, cfg.radius, cfg.nbits));
}

FoldedVector fold(const BitFingerprint &fp, int dim) {
  if (dim <= 0 || fp.nbits() % dim != 0)
    throw BadDimension("fold dimension must divide the fingerprint length");
  FoldedVector out;
  out.dim = dim;
  out.values.assign(dim, 0.0);
  for (int i = 0; i < fp.nbits(); ++i)
    if (fp.test(i))
      out.values[i % dim] = 1.0;
  return out;
}

}  // namespace fedretro::fingerprint
