//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "fedretro/learner.hpp"
#include "fedretro/rng.hpp"

namespace fedretro::learner {

Vocabulary::Vocabulary() {
  tokens_ = { "<pad>", "<bos>", "<eos>", "<unk>", "." };
  for (const char *t: { "B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I" })
    tokens_.emplace_back(t);
  for (const char *t: { "b", "c", "n", "o", "p", "s" })
    tokens_.emplace_back(t);
  for (const char *t: { "-", "=", "#", ":", "/", "\\", "(", ")" })
    tokens_.emplace_back(t);
  for (int d = 1; d <= 9; ++d)
    tokens_.push_back(std::to_string(d));
  for (int d = 10; d <= 19; ++d)
    tokens_.push_back("%" + std::to_string(d));
  // Bracket atoms: common charged, hydrogen-bearing and chiral forms.
  for (const char *t: {
           "[H]",    "[H+]",   "[H-]",   "[nH]",   "[NH]",   "[NH2]",
           "[NH+]",  "[NH2+]", "[NH3+]", "[NH4+]", "[N+]",   "[N-]",
           "[n+]",   "[n-]",   "[O-]",   "[O+]",   "[OH-]",  "[OH]",
           "[S-]",   "[S+]",   "[s+]",   "[SH]",   "[P+]",   "[PH]",
           "[B-]",   "[BH]",   "[C-]",   "[CH]",   "[CH2]",  "[C@]",
           "[C@@]",  "[C@H]",  "[C@@H]", "[F-]",   "[Cl-]",  "[Br-]",
           "[I-]",
       })
    tokens_.emplace_back(t);

  for (int i = 0; i < size(); ++i)
    index_.emplace(tokens_[i], i);
}

const Vocabulary &Vocabulary::global() {
  static const Vocabulary vocab;
  return vocab;
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const smiles::TokenSeq &seq) const {
  std::vector<int> ids;
  ids.reserve(seq.tokens.size());
  for (const auto &t: seq.tokens)
    ids.push_back(id(t));
  return ids;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  for (const int id: ids) {
    if (id == kEos)
      break;
    if (id == kPad || id == kBos || id == kUnk)
      continue;
    out += tokens_[id];
  }
  return out;
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = 0x766f636162ULL;
  for (const auto &t: tokens_) {
    for (const char c: t)
      h = splitmix64(h ^ static_cast<unsigned char>(c));
    h = splitmix64(h ^ 0xff);
  }
  return h;
}

}  // namespace fedretro::learner
