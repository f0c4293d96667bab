//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "fedretro/smiles.hpp"

namespace fedretro::smiles {

std::string_view element_symbol(Element e) {
  switch (e) {
  case Element::B:
    return "B";
  case Element::C:
    return "C";
  case Element::N:
    return "N";
  case Element::O:
    return "O";
  case Element::P:
    return "P";
  case Element::S:
    return "S";
  case Element::F:
    return "F";
  case Element::Cl:
    return "Cl";
  case Element::Br:
    return "Br";
  case Element::I:
    return "I";
  case Element::H:
    return "H";
  }
  return "?";
}

bool may_be_aromatic(Element e) {
  switch (e) {
  case Element::B:
  case Element::C:
  case Element::N:
  case Element::O:
  case Element::P:
  case Element::S:
    return true;
  default:
    return false;
  }
}

int MolGraph::add_atom(const Atom &atom) {
  atoms_.push_back(atom);
  adj_.emplace_back();
  fragments_valid_ = false;
  return num_atoms() - 1;
}

int MolGraph::add_bond(int from, int to, BondOrder order, BondStereo stereo) {
  if (from < 0 || to < 0 || from >= num_atoms() || to >= num_atoms())
    throw std::invalid_argument("bond endpoint out of range");
  if (from == to)
    throw std::invalid_argument("bond endpoints must be distinct");
  if (find_bond(from, to) >= 0)
    throw std::invalid_argument("duplicate bond");

  const int idx = num_bonds();
  bonds_.push_back({ from, to, order, stereo });
  adj_[from].push_back({ to, idx });
  adj_[to].push_back({ from, idx });
  fragments_valid_ = false;
  return idx;
}

int MolGraph::find_bond(int a, int b) const {
  for (const auto &nb: adj_[a])
    if (nb.atom == b)
      return nb.bond;
  return -1;
}

const std::vector<int> &MolGraph::fragment_ids() const {
  if (fragments_valid_)
    return fragments_;

  fragments_.assign(atoms_.size(), -1);
  int next = 0;
  std::vector<int> stack;
  for (int root = 0; root < num_atoms(); ++root) {
    if (fragments_[root] >= 0)
      continue;
    fragments_[root] = next;
    stack.push_back(root);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto &nb: adj_[u]) {
        if (fragments_[nb.atom] < 0) {
          fragments_[nb.atom] = next;
          stack.push_back(nb.atom);
        }
      }
    }
    ++next;
  }
  fragments_valid_ = true;
  return fragments_;
}

int MolGraph::num_fragments() const {
  const auto &ids = fragment_ids();
  return ids.empty() ? 0 : *std::max_element(ids.begin(), ids.end()) + 1;
}

MolGraph MolGraph::subgraph(std::span<const int> atoms) const {
  std::vector<int> remap(atoms_.size(), -1);
  MolGraph sub;
  for (const int a: atoms)
    remap[a] = sub.add_atom(atoms_[a]);
  for (const auto &b: bonds_) {
    if (remap[b.from] >= 0 && remap[b.to] >= 0)
      sub.add_bond(remap[b.from], remap[b.to], b.order, b.stereo);
  }
  return sub;
}

namespace {

BondStereo flip(BondStereo s) {
  switch (s) {
  case BondStereo::kUp:
    return BondStereo::kDown;
  case BondStereo::kDown:
    return BondStereo::kUp;
  default:
    return s;
  }
}

bool bonds_match(const MolGraph &a, int ba, const MolGraph &b, int bb,
                 const std::vector<int> &map) {
  const Bond &x = a.bond(ba);
  const Bond &y = b.bond(bb);
  if (x.order != y.order)
    return false;
  const BondStereo expected = map[x.from] == y.from ? x.stereo : flip(x.stereo);
  return expected == y.stereo;
}

}  // namespace

bool isomorphic(const MolGraph &a, const MolGraph &b) {
  const int n = a.num_atoms();
  if (n != b.num_atoms() || a.num_bonds() != b.num_bonds())
    return false;

  // Visit atoms of `a` in BFS order so every atom after a fragment root has
  // an already-mapped neighbour.
  std::vector<int> order;
  std::vector<char> seen(n, 0);
  for (int root = 0; root < n; ++root) {
    if (seen[root])
      continue;
    seen[root] = 1;
    std::size_t head = order.size();
    order.push_back(root);
    while (head < order.size()) {
      const int u = order[head++];
      for (const auto &nb: a.neighbors(u)) {
        if (!seen[nb.atom]) {
          seen[nb.atom] = 1;
          order.push_back(nb.atom);
        }
      }
    }
  }

  std::vector<int> map(n, -1), inverse(n, -1);
  std::function<bool(int)> extend = [&](int depth) -> bool {
    if (depth == n)
      return true;
    const int u = order[depth];
    for (int v = 0; v < n; ++v) {
      if (inverse[v] >= 0 || !(a.atom(u) == b.atom(v))
          || a.degree(u) != b.degree(v))
        continue;
      bool ok = true;
      for (const auto &nb: a.neighbors(u)) {
        if (map[nb.atom] < 0)
          continue;
        const int bb = b.find_bond(v, map[nb.atom]);
        map[u] = v;
        if (bb < 0 || !bonds_match(a, nb.bond, b, bb, map)) {
          ok = false;
        }
        map[u] = -1;
        if (!ok)
          break;
      }
      if (!ok)
        continue;
      map[u] = v;
      inverse[v] = u;
      if (extend(depth + 1))
        return true;
      map[u] = -1;
      inverse[v] = -1;
    }
    return false;
  };
  return extend(0);
}

}  // namespace fedretro::smiles
