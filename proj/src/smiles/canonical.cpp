//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <map>
#include <mutex>
#include <numeric>
#include <tuple>
#include <vector>

#include "fedretro/smiles.hpp"

namespace fedretro::smiles {
namespace {

std::mutex g_fallback_mutex;
std::vector<std::string> g_fallback_log;
constexpr std::size_t kMaxFallbackLog = 1024;

void log_fallback(const MolGraph &mol) {
  std::lock_guard lock(g_fallback_mutex);
  if (g_fallback_log.size() < kMaxFallbackLog)
    g_fallback_log.push_back(write_smiles(mol));
}

// Replaces arbitrary ordered keys by dense ranks 0..m-1; returns m.
template <class Key>
int dense_rank(const std::vector<Key> &keys, std::vector<int> &ranks) {
  const int n = static_cast<int>(keys.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return keys[a] < keys[b]; });
  ranks.assign(n, 0);
  int r = -1;
  for (int i = 0; i < n; ++i) {
    if (i == 0 || keys[idx[i - 1]] < keys[idx[i]])
      ++r;
    ranks[idx[i]] = r;
  }
  return r + 1;
}

int refine(const MolGraph &g, std::vector<int> &ranks, int classes) {
  const int n = g.num_atoms();
  using Key = std::pair<int, std::vector<std::pair<int, int>>>;
  std::vector<Key> keys(n);
  while (classes < n) {
    for (int a = 0; a < n; ++a) {
      keys[a].first = ranks[a];
      auto &env = keys[a].second;
      env.clear();
      for (const auto &nb: g.neighbors(a))
        env.emplace_back(ranks[nb.atom],
                         static_cast<int>(g.bond(nb.bond).order));
      std::sort(env.begin(), env.end());
    }
    const int next = dense_rank(keys, ranks);
    if (next == classes)
      break;
    classes = next;
  }
  return classes;
}

class Canonicalizer {
public:
  explicit Canonicalizer(const MolGraph &g): g_(g), n_(g.num_atoms()) { }

  std::vector<int> run(CanonicalStats *stats) {
    using Key = std::tuple<int, int, int, int, int, int, int>;
    std::vector<Key> keys(n_);
    for (int a = 0; a < n_; ++a) {
      const Atom &atom = g_.atom(a);
      keys[a] = { static_cast<int>(atom.element), atom.formal_charge,
                  g_.degree(a), atom.aromatic ? 1 : 0,
                  atom.explicit_h.value_or(-1), atom.isotope.value_or(-1),
                  static_cast<int>(atom.chirality) };
    }
    std::vector<int> ranks;
    int classes = dense_rank(keys, ranks);
    classes = refine(g_, ranks, classes);

    std::vector<int> path;
    search(ranks, classes, path);

    if (stats) {
      stats->fallback = exhausted_;
      stats->leaves = leaves_;
    }
    if (exhausted_) {
      log_fallback(g_);
      return first_leaf_;
    }
    return best_order_;
  }

private:
  using Perm = std::vector<int>;

  static std::vector<int> order_from_ranks(const std::vector<int> &ranks) {
    std::vector<int> order(ranks.size());
    for (std::size_t a = 0; a < ranks.size(); ++a)
      order[ranks[a]] = static_cast<int>(a);
    return order;
  }

  void leaf(const std::vector<int> &ranks) {
    ++leaves_;
    std::vector<int> order = order_from_ranks(ranks);
    std::string s = write_smiles(g_, order);
    if (first_leaf_.empty())
      first_leaf_ = order;

    auto it = seen_.find(s);
    if (it != seen_.end()) {
      // Same labelled graph from two labellings: an automorphism.
      Perm gamma(n_);
      for (int p = 0; p < n_; ++p)
        gamma[it->second[p]] = order[p];
      automorphisms_.push_back(std::move(gamma));
    } else {
      if (best_order_.empty() || s < best_) {
        best_ = s;
        best_order_ = order;
      }
      seen_.emplace(std::move(s), std::move(order));
    }
  }

  int find(std::vector<int> &parent, int x) const {
    while (parent[x] != x)
      x = parent[x] = parent[parent[x]];
    return x;
  }

  // Orbit representative of each atom under the automorphisms that fix
  // every atom on the current individualization path.
  std::vector<int> orbits(const std::vector<int> &path) const {
    std::vector<int> parent(n_);
    std::iota(parent.begin(), parent.end(), 0);
    for (const auto &gamma: automorphisms_) {
      bool fixes = std::all_of(path.begin(), path.end(),
                               [&](int a) { return gamma[a] == a; });
      if (!fixes)
        continue;
      for (int a = 0; a < n_; ++a) {
        int x = find(parent, a), y = find(parent, gamma[a]);
        if (x != y)
          parent[std::max(x, y)] = std::min(x, y);
      }
    }
    for (int a = 0; a < n_; ++a)
      parent[a] = find(parent, a);
    return parent;
  }

  void search(const std::vector<int> &ranks, int classes,
              std::vector<int> &path) {
    if (exhausted_)
      return;
    if (classes == n_) {
      leaf(ranks);
      return;
    }
    if (leaves_ >= kMaxCanonicalCandidates) {
      exhausted_ = true;
      return;
    }

    // Smallest rank shared by more than one atom.
    std::vector<int> count(n_, 0);
    for (int r: ranks)
      ++count[r];
    int target = 0;
    while (count[target] < 2)
      ++target;

    std::vector<int> cell;
    for (int a = 0; a < n_; ++a)
      if (ranks[a] == target)
        cell.push_back(a);

    std::vector<int> explored;
    for (const int c: cell) {
      const auto orbit = orbits(path);
      const bool redundant = std::any_of(
          explored.begin(), explored.end(),
          [&](int e) { return orbit[e] == orbit[c]; });
      if (redundant)
        continue;
      explored.push_back(c);

      std::vector<int> keys(n_);
      for (int a = 0; a < n_; ++a)
        keys[a] = 2 * ranks[a] + (ranks[a] == target && a != c ? 1 : 0);
      std::vector<int> next;
      int next_classes = dense_rank(keys, next);
      next_classes = refine(g_, next, next_classes);

      path.push_back(c);
      search(next, next_classes, path);
      path.pop_back();
      if (exhausted_)
        return;
    }
  }

  const MolGraph &g_;
  int n_;
  int leaves_ = 0;
  bool exhausted_ = false;
  std::string best_;
  std::vector<int> best_order_;
  std::vector<int> first_leaf_;
  std::map<std::string, std::vector<int>> seen_;
  std::vector<Perm> automorphisms_;
};

struct FragmentResult {
  std::vector<int> atoms;  // global indices in canonical priority order
  std::string smiles;
};

std::vector<FragmentResult> canonical_fragments(const MolGraph &mol,
                                                CanonicalStats *stats) {
  const auto &ids = mol.fragment_ids();
  const int nfrag = mol.num_fragments();
  std::vector<std::vector<int>> members(nfrag);
  for (int a = 0; a < mol.num_atoms(); ++a)
    members[ids[a]].push_back(a);

  std::vector<FragmentResult> out;
  out.reserve(nfrag);
  for (const auto &atoms: members) {
    const MolGraph sub = mol.subgraph(atoms);
    CanonicalStats local;
    const std::vector<int> order = Canonicalizer(sub).run(&local);
    if (stats) {
      stats->fallback |= local.fallback;
      stats->leaves += local.leaves;
    }
    FragmentResult fr;
    fr.smiles = write_smiles(sub, order);
    for (const int a: order)
      fr.atoms.push_back(atoms[a]);
    out.push_back(std::move(fr));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto &a, const auto &b) {
                     return a.smiles < b.smiles;
                   });
  return out;
}

}  // namespace

std::vector<int> canonical_order(const MolGraph &mol, CanonicalStats *stats) {
  if (stats)
    *stats = {};
  std::vector<int> order;
  order.reserve(mol.num_atoms());
  for (auto &fr: canonical_fragments(mol, stats))
    order.insert(order.end(), fr.atoms.begin(), fr.atoms.end());
  return order;
}

std::string canonical_smiles(const MolGraph &mol, CanonicalStats *stats) {
  if (stats)
    *stats = {};
  std::string out;
  for (const auto &fr: canonical_fragments(mol, stats)) {
    if (!out.empty())
      out += '.';
    out += fr.smiles;
  }
  return out;
}

std::string canonicalize(std::string_view text) {
  return canonical_smiles(parse_smiles(text));
}

std::vector<std::string> canonical_fallback_log() {
  std::lock_guard lock(g_fallback_mutex);
  return g_fallback_log;
}

MolGraph largest_fragment(const MolGraph &mol) {
  if (mol.num_atoms() == 0)
    throw EmptyMolecule();
  if (mol.num_fragments() == 1)
    return mol;

  const auto &ids = mol.fragment_ids();
  std::vector<std::vector<int>> members(mol.num_fragments());
  for (int a = 0; a < mol.num_atoms(); ++a)
    members[ids[a]].push_back(a);

  int best = -1, best_heavy = -1;
  std::string best_smiles;
  for (int f = 0; f < static_cast<int>(members.size()); ++f) {
    const int heavy = static_cast<int>(
        std::count_if(members[f].begin(), members[f].end(), [&](int a) {
          return mol.atom(a).element != Element::H;
        }));
    if (heavy < best_heavy)
      continue;
    std::string s = canonical_smiles(mol.subgraph(members[f]));
    if (heavy > best_heavy || s < best_smiles) {
      best = f;
      best_heavy = heavy;
      best_smiles = std::move(s);
    }
  }
  return mol.subgraph(members[best]);
}

}  // namespace fedretro::smiles
