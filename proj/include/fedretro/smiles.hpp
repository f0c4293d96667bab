//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fedretro::smiles {

enum class Element : std::uint8_t { B, C, N, O, P, S, F, Cl, Br, I, H };

std::string_view element_symbol(Element e);
bool may_be_aromatic(Element e);

enum class Chirality : std::uint8_t { kNone, kClockwise, kCounterClockwise };

enum class BondOrder : std::uint8_t { kSingle, kDouble, kTriple, kAromatic };

// Direction marks are relative to the (from, to) endpoint order of the bond:
// kUp means "from / to", kDown means "from \ to".
enum class BondStereo : std::uint8_t { kNone, kUp, kDown };

struct Atom {
  Element element = Element::C;
  bool aromatic = false;
  int formal_charge = 0;
  // Set iff the atom was written in brackets. Organic-subset atoms carry no
  // hydrogen count since there is no valence model.
  std::optional<int> explicit_h;
  std::optional<int> isotope;
  Chirality chirality = Chirality::kNone;

  bool operator==(const Atom &) const = default;
};

struct Bond {
  int from = 0;
  int to = 0;
  BondOrder order = BondOrder::kSingle;
  BondStereo stereo = BondStereo::kNone;

  int other(int atom) const { return atom == from ? to : from; }
};

// Parsed molecular graph. Multi-fragment input yields a single graph whose
// connected components are labelled by fragment_ids().
class MolGraph {
public:
  struct Neighbor {
    int atom;
    int bond;
  };

  MolGraph() = default;

  int add_atom(const Atom &atom);
  // Throws std::invalid_argument on self loops, bad indices or duplicates.
  int add_bond(int from, int to, BondOrder order,
               BondStereo stereo = BondStereo::kNone);

  int num_atoms() const { return static_cast<int>(atoms_.size()); }
  int num_bonds() const { return static_cast<int>(bonds_.size()); }
  const Atom &atom(int i) const { return atoms_[i]; }
  Atom &atom(int i) { return atoms_[i]; }
  const Bond &bond(int i) const { return bonds_[i]; }
  std::span<const Atom> atoms() const { return atoms_; }
  std::span<const Bond> bonds() const { return bonds_; }
  std::span<const Neighbor> neighbors(int atom) const { return adj_[atom]; }
  int degree(int atom) const { return static_cast<int>(adj_[atom].size()); }
  int find_bond(int a, int b) const;

  // Connected-component label per atom, numbered in order of first atom.
  const std::vector<int> &fragment_ids() const;
  int num_fragments() const;

  // Subgraph induced by the given atoms, in the given order.
  MolGraph subgraph(std::span<const int> atoms) const;

private:
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<Neighbor>> adj_;
  mutable std::vector<int> fragments_;
  mutable bool fragments_valid_ = false;
};

// Labelled-graph isomorphism including atom attributes, bond orders and
// direction-relative stereo marks. Backtracking; intended for tests and
// small molecules.
bool isomorphic(const MolGraph &a, const MolGraph &b);

class SmilesError : public std::runtime_error {
public:
  SmilesError(const std::string &what, std::size_t position)
      : std::runtime_error(what + " at position " + std::to_string(position)),
        position_(position) { }

  std::size_t position() const { return position_; }

private:
  std::size_t position_;
};

class SyntaxError : public SmilesError {
  using SmilesError::SmilesError;
};

class UnclosedRing : public SmilesError {
  using SmilesError::SmilesError;
};

class UnbalancedBranch : public SmilesError {
  using SmilesError::SmilesError;
};

class UnsupportedElement : public SmilesError {
  using SmilesError::SmilesError;
};

class TokenError : public SmilesError {
  using SmilesError::SmilesError;
};

class EmptyMolecule : public std::invalid_argument {
public:
  EmptyMolecule(): std::invalid_argument("molecule has no atoms") { }
};

MolGraph parse_smiles(std::string_view text);

// Writes each fragment by depth-first traversal. `priority` is a permutation
// of all atoms: each fragment is rooted at its highest-priority atom,
// neighbours are visited in priority order, and fragments are emitted in
// order of their roots.
std::string write_smiles(const MolGraph &mol, std::span<const int> priority);
// Input-order serialization.
std::string write_smiles(const MolGraph &mol);

struct CanonicalStats {
  bool fallback = false;  // tie-break exploration exceeded its budget
  int leaves = 0;
};

inline constexpr int kMaxCanonicalCandidates = 64;

// Canonical atom priority for the whole graph. Fragments are ranked
// independently.
std::vector<int> canonical_order(const MolGraph &mol,
                                 CanonicalStats *stats = nullptr);
std::string canonical_smiles(const MolGraph &mol,
                             CanonicalStats *stats = nullptr);
std::string canonicalize(std::string_view text);

// Molecules whose canonicalization fell back to input-order tie-breaking
// since the process started. Thread safe.
std::vector<std::string> canonical_fallback_log();

MolGraph largest_fragment(const MolGraph &mol);

struct TokenSeq {
  std::vector<std::string> tokens;
};

TokenSeq tokenize(std::string_view text);
std::string detokenize(const TokenSeq &seq);
std::string detokenize(std::span<const std::string> tokens);

}  // namespace fedretro::smiles
