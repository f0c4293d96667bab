//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedretro/smiles.hpp"

namespace fedretro::smiles {
namespace {

void append_atom(std::string &out, const Atom &atom) {
  const bool bracket = atom.explicit_h.has_value()
                       || atom.element == Element::H || atom.formal_charge != 0
                       || atom.isotope.has_value()
                       || atom.chirality != Chirality::kNone;
  std::string symbol(element_symbol(atom.element));
  if (atom.aromatic)
    symbol[0] = static_cast<char>(symbol[0] - 'A' + 'a');

  if (!bracket) {
    out += symbol;
    return;
  }

  out += '[';
  if (atom.isotope)
    out += std::to_string(*atom.isotope);
  out += symbol;
  if (atom.chirality == Chirality::kCounterClockwise)
    out += '@';
  else if (atom.chirality == Chirality::kClockwise)
    out += "@@";
  const int h = atom.explicit_h.value_or(0);
  if (h > 0) {
    out += 'H';
    if (h > 1)
      out += std::to_string(h);
  }
  if (atom.formal_charge != 0) {
    out += atom.formal_charge > 0 ? '+' : '-';
    const int magnitude = std::abs(atom.formal_charge);
    if (magnitude > 1)
      out += std::to_string(magnitude);
  }
  out += ']';
}

class Writer {
public:
  Writer(const MolGraph &mol, std::span<const int> priority)
      : mol_(mol), rank_(mol.num_atoms(), -1) {
    if (static_cast<int>(priority.size()) != mol.num_atoms())
      throw std::invalid_argument("priority must cover every atom");
    for (int i = 0; i < mol.num_atoms(); ++i) {
      const int a = priority[i];
      if (a < 0 || a >= mol.num_atoms() || rank_[a] >= 0)
        throw std::invalid_argument("priority is not a permutation");
      rank_[a] = i;
    }
  }

  std::string write() {
    const int n = mol_.num_atoms();
    visited_.assign(n, 0);
    bond_seen_.assign(mol_.num_bonds(), 0);
    children_.assign(n, {});
    ring_open_.assign(n, {});
    ring_close_.assign(n, {});
    digit_of_bond_.assign(mol_.num_bonds(), 0);

    std::vector<int> by_rank(n);
    std::iota(by_rank.begin(), by_rank.end(), 0);
    std::sort(by_rank.begin(), by_rank.end(),
              [&](int a, int b) { return rank_[a] < rank_[b]; });

    std::string out;
    for (const int root: by_rank) {
      if (visited_[root])
        continue;
      discover(root, -1);
      if (!out.empty())
        out += '.';
      emit(out, root);
    }
    return out;
  }

private:
  struct Edge {
    int atom;
    int bond;
  };

  void discover(int u, int parent_bond) {
    visited_[u] = 1;
    std::vector<MolGraph::Neighbor> nbs(mol_.neighbors(u).begin(),
                                        mol_.neighbors(u).end());
    std::sort(nbs.begin(), nbs.end(), [&](const auto &a, const auto &b) {
      return rank_[a.atom] < rank_[b.atom];
    });
    for (const auto &nb: nbs) {
      if (nb.bond == parent_bond || bond_seen_[nb.bond])
        continue;
      bond_seen_[nb.bond] = 1;
      if (!visited_[nb.atom]) {
        children_[u].push_back({ nb.atom, nb.bond });
        discover(nb.atom, nb.bond);
      } else {
        // Back edge to an ancestor.
        ring_open_[nb.atom].push_back({ u, nb.bond });
        ring_close_[u].push_back({ nb.atom, nb.bond });
      }
    }
  }

  void append_bond(std::string &out, int from, int bond_idx) const {
    const Bond &bond = mol_.bond(bond_idx);
    const int to = bond.other(from);
    BondStereo stereo = bond.stereo;
    if (bond.from != from) {
      if (stereo == BondStereo::kUp)
        stereo = BondStereo::kDown;
      else if (stereo == BondStereo::kDown)
        stereo = BondStereo::kUp;
    }
    const bool both_aromatic = mol_.atom(from).aromatic && mol_.atom(to).aromatic;
    switch (bond.order) {
    case BondOrder::kSingle:
      if (stereo == BondStereo::kUp)
        out += '/';
      else if (stereo == BondStereo::kDown)
        out += '\\';
      else if (both_aromatic)
        out += '-';
      break;
    case BondOrder::kDouble:
      out += '=';
      break;
    case BondOrder::kTriple:
      out += '#';
      break;
    case BondOrder::kAromatic:
      if (!both_aromatic)
        out += ':';
      break;
    }
  }

  static void append_digit(std::string &out, int digit) {
    if (digit < 10) {
      out += static_cast<char>('0' + digit);
    } else {
      out += '%';
      out += std::to_string(digit);
    }
  }

  int take_digit() {
    for (int d = 1; d < 100; ++d) {
      if (std::find(used_digits_.begin(), used_digits_.end(), d)
          == used_digits_.end()) {
        used_digits_.push_back(d);
        return d;
      }
    }
    throw std::runtime_error("more than 99 simultaneously open rings");
  }

  void emit(std::string &out, int u) {
    append_atom(out, mol_.atom(u));

    auto by_rank = [&](const Edge &a, const Edge &b) {
      return rank_[a.atom] < rank_[b.atom];
    };
    auto closes = ring_close_[u];
    std::sort(closes.begin(), closes.end(), by_rank);
    for (const auto &e: closes) {
      const int digit = digit_of_bond_[e.bond];
      append_digit(out, digit);
      std::erase(used_digits_, digit);
    }

    auto opens = ring_open_[u];
    std::sort(opens.begin(), opens.end(), by_rank);
    for (const auto &e: opens) {
      const int digit = take_digit();
      digit_of_bond_[e.bond] = digit;
      append_bond(out, u, e.bond);
      append_digit(out, digit);
    }

    const auto &kids = children_[u];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const bool last = i + 1 == kids.size();
      if (!last)
        out += '(';
      append_bond(out, u, kids[i].bond);
      emit(out, kids[i].atom);
      if (!last)
        out += ')';
    }
  }

  const MolGraph &mol_;
  std::vector<int> rank_;
  std::vector<char> visited_;
  std::vector<char> bond_seen_;
  std::vector<std::vector<Edge>> children_;
  std::vector<std::vector<Edge>> ring_open_;
  std::vector<std::vector<Edge>> ring_close_;
  std::vector<int> digit_of_bond_;
  std::vector<int> used_digits_;
};

}  // namespace

std::string write_smiles(const MolGraph &mol, std::span<const int> priority) {
  return Writer(mol, priority).write();
}

std::string write_smiles(const MolGraph &mol) {
  std::vector<int> order(mol.num_atoms());
  std::iota(order.begin(), order.end(), 0);
  return write_smiles(mol, order);
}

}  // namespace fedretro::smiles
