//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "fedretro/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "fedretro/rng.hpp"
#include "fedretro/smiles.hpp"

namespace fedretro::data {

std::vector<ReactionRecord> ReactionDataset::subset(Split s) const {
  std::vector<ReactionRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (splits[i] == s)
      out.push_back(records[i]);
  return out;
}

std::size_t ReactionDataset::count(Split s) const {
  return static_cast<std::size_t>(std::count(splits.begin(), splits.end(), s));
}

namespace {

std::vector<std::string> split_on(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c: s) {
    if (c == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

void note(LoadDiagnostics *diag, std::size_t line, const std::string &why) {
  if (!diag)
    return;
  ++diag->skipped;
  if (diag->messages.size() < 20)
    diag->messages.push_back("line " + std::to_string(line) + ": " + why);
}

}  // namespace

ReactionDataset read_reactions(std::istream &is, LoadDiagnostics *diag) {
  ReactionDataset ds;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (diag)
      ++diag->lines;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line[0] == '#')
      continue;

    const auto fields = split_on(line, '\t');
    if (fields.size() != 3)
      throw FormatError("expected 3 TAB-separated fields", lineno);
    const std::string &id = fields[0];
    if (id.empty())
      throw FormatError("empty record id", lineno);

    std::optional<int> cls;
    if (!fields[1].empty()) {
      std::size_t used = 0;
      try {
        cls = std::stoi(fields[1], &used);
      } catch (const std::exception &) {
        used = 0;
      }
      if (used != fields[1].size())
        throw FormatError("class label is not an integer", lineno);
    }

    const auto parts = split_on(fields[2], '>');
    if (parts.size() != 3)
      throw FormatError("reaction SMILES must be reactants>reagents>products",
                        lineno);

    std::string reactants, products;
    try {
      reactants = smiles::canonicalize(parts[0]);
      products = smiles::canonicalize(parts[2]);
    } catch (const smiles::SmilesError &e) {
      note(diag, lineno, e.what());
      continue;
    } catch (const smiles::EmptyMolecule &e) {
      note(diag, lineno, e.what());
      continue;
    }

    const auto fragments = split_on(products, '.');
    for (std::size_t p = 0; p < fragments.size(); ++p) {
      ReactionRecord r;
      r.id = fragments.size() == 1 ? id : id + "_p" + std::to_string(p + 1);
      r.reaction_class = cls;
      r.reactants = reactants;
      r.product = fragments[p];
      if (!ids.insert(r.id).second)
        throw FormatError("duplicate record id '" + r.id + "'", lineno);
      ds.add(std::move(r));
      if (diag)
        ++diag->records;
    }
  }
  return ds;
}

ReactionDataset load_reactions(const std::string &path, LoadDiagnostics *diag) {
  std::ifstream is(path);
  if (!is)
    throw FileError("cannot open " + path);
  return read_reactions(is, diag);
}

void write_reactions(std::ostream &os, const ReactionDataset &ds) {
  for (const auto &r: ds.records) {
    os << r.id << '\t';
    if (r.reaction_class)
      os << *r.reaction_class;
    os << '\t' << r.reactants << ">>" << r.product << '\n';
  }
}

void save_reactions(const std::string &path, const ReactionDataset &ds) {
  std::ofstream os(path);
  if (!os)
    throw FileError("cannot write " + path);
  write_reactions(os, ds);
  if (!os)
    throw FileError("write failed for " + path);
}

ReactionDataset split_dataset(const ReactionDataset &ds,
                              std::array<double, 3> fractions,
                              std::uint64_t seed) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::any_of(fractions.begin(), fractions.end(),
                  [](double f) { return f < 0.0; })
      || std::abs(total - 1.0) > 1e-9)
    throw BadFractions("split fractions must be non-negative and sum to 1");

  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t { 0 });
  Rng rng(derive_seed(seed, 0x5b117));
  rng.shuffle(std::span<std::size_t>(order));

  const auto n_train =
      static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
  const auto n_val = std::min(
      n - n_train,
      static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n))));

  ReactionDataset out = ds;
  for (std::size_t k = 0; k < n; ++k) {
    const Split s = k < n_train ? Split::kTrain
                    : k < n_train + n_val ? Split::kVal
                                          : Split::kTest;
    out.splits[order[k]] = s;
  }
  // Degenerate fractions such as (1, 0, 0) must not leak into test.
  if (fractions[2] == 0.0)
    for (auto &s: out.splits)
      if (s == Split::kTest)
        s = fractions[1] > 0.0 ? Split::kVal : Split::kTrain;
  return out;
}

std::vector<ReactionDataset> partition_clients(const ReactionDataset &ds,
                                               const PartitionSpec &spec,
                                               int num_clients,
                                               std::uint64_t seed) {
  if (num_clients < 1)
    throw std::invalid_argument("need at least one client");
  for (const auto &r: ds.records)
    if (!r.reaction_class)
      throw MissingClassLabels();

  std::vector<ReactionDataset> clients(num_clients);
  std::map<int, int> client_of_class;

  switch (spec.strategy) {
  case PartitionStrategy::kByClass: {
    std::set<int> classes;
    for (const auto &r: ds.records)
      classes.insert(*r.reaction_class);
    if (static_cast<int>(classes.size()) != num_clients)
      throw std::invalid_argument(
          "by_class partitioning needs one client per class ("
          + std::to_string(classes.size()) + " classes, "
          + std::to_string(num_clients) + " clients)");
    int k = 0;
    for (const int c: classes)
      client_of_class[c] = k++;
    break;
  }
  case PartitionStrategy::kByClassGroups: {
    if (static_cast<int>(spec.groups.size()) != num_clients)
      throw std::invalid_argument("group map must list one group per client");
    for (int k = 0; k < num_clients; ++k)
      for (const int c: spec.groups[k])
        if (!client_of_class.emplace(c, k).second)
          throw std::invalid_argument("class " + std::to_string(c)
                                      + " assigned to two clients");
    break;
  }
  case PartitionStrategy::kRandomDirichlet: {
    if (!(spec.alpha > 0.0))
      throw std::invalid_argument("Dirichlet concentration must be positive");
    std::set<int> class_set;
    for (const auto &r: ds.records)
      class_set.insert(*r.reaction_class);
    const std::vector<int> classes(class_set.begin(), class_set.end());
    Rng rng(derive_seed(seed, 0xd1c4));
    // Per-client class-proportion vectors.
    std::vector<std::vector<double>> props(num_clients,
                                           std::vector<double>(classes.size()));
    std::gamma_distribution<double> gamma(spec.alpha, 1.0);
    for (auto &p: props) {
      double sum = 0.0;
      for (auto &x: p) {
        x = gamma(rng.engine());
        sum += x;
      }
      for (auto &x: p)
        x = sum > 0.0 ? x / sum : 1.0 / static_cast<double>(p.size());
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto ci = static_cast<std::size_t>(
          std::lower_bound(classes.begin(), classes.end(),
                           *ds.records[i].reaction_class)
          - classes.begin());
      double total = 0.0;
      for (int k = 0; k < num_clients; ++k)
        total += props[k][ci];
      double u = rng.uniform() * total;
      int chosen = num_clients - 1;
      for (int k = 0; k < num_clients; ++k) {
        u -= props[k][ci];
        if (u < 0.0) {
          chosen = k;
          break;
        }
      }
      clients[chosen].add(ds.records[i], ds.splits[i]);
    }
    return clients;
  }
  }

  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int cls = *ds.records[i].reaction_class;
    auto it = client_of_class.find(cls);
    if (it == client_of_class.end())
      throw UnmappedClass(cls);
    clients[it->second].add(ds.records[i], ds.splits[i]);
  }
  return clients;
}

ReactionDataset contaminate(const ReactionDataset &ds, double fraction,
                            std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("contamination fraction must be in [0, 1]");
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.splits[i] != Split::kTest)
      candidates.push_back(i);

  const auto count = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(candidates.size()) - 1e-9));
  Rng rng(derive_seed(seed, 0xc0417));
  rng.shuffle(std::span<std::size_t>(candidates));

  auto shuffled = [&](const std::string &s) {
    auto tokens = smiles::tokenize(s).tokens;
    rng.shuffle(std::span<std::string>(tokens));
    return smiles::detokenize(tokens);
  };

  ReactionDataset out = ds;
  for (std::size_t k = 0; k < count; ++k) {
    ReactionRecord &r = out.records[candidates[k]];
    const std::string new_reactants = shuffled(r.product);
    const std::string new_product = shuffled(r.reactants);
    r.reactants = new_reactants;
    r.product = new_product;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic reactions

const char *family_name(Family f) {
  switch (f) {
  case Family::kEsterification:
    return "esterification";
  case Family::kAmideFormation:
    return "amide_formation";
  case Family::kEtherFormation:
    return "ether_formation";
  case Family::kHalogenation:
    return "halogenation";
  case Family::kSulfonamideFormation:
    return "sulfonamide_formation";
  case Family::kReductiveAmination:
    return "reductive_amination";
  }
  return "unknown";
}

namespace {

using smiles::Atom;
using smiles::BondOrder;
using smiles::Element;
using smiles::MolGraph;

int add(MolGraph &m, Element e) {
  Atom a;
  a.element = e;
  return m.add_atom(a);
}

// Random alkyl tree appended to `m`; returns the attachment atom.
int add_scaffold(MolGraph &m, Rng &rng, int max_atoms) {
  const int n = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(max_atoms)));
  const int first = m.num_atoms();
  add(m, Element::C);
  for (int i = 1; i < n; ++i) {
    int parent;
    do {
      parent = first + static_cast<int>(rng.below(static_cast<std::size_t>(i)));
    } while (m.degree(parent) >= 4);
    m.add_bond(parent, add(m, Element::C), BondOrder::kSingle);
  }
  int attach;
  do {
    attach = first + static_cast<int>(rng.below(static_cast<std::size_t>(n)));
  } while (m.degree(attach) >= 3);
  return attach;
}

// Appends the scaffold copy `src` (with attachment `at`) to `dst`.
int copy_into(MolGraph &dst, const MolGraph &src, int at) {
  const int offset = dst.num_atoms();
  for (const auto &a: src.atoms())
    dst.add_atom(a);
  for (const auto &b: src.bonds())
    dst.add_bond(b.from + offset, b.to + offset, b.order, b.stereo);
  return at + offset;
}

struct Scaffold {
  MolGraph mol;
  int attach;
};

Scaffold scaffold(Rng &rng, int max_atoms) {
  Scaffold s;
  s.attach = add_scaffold(s.mol, rng, max_atoms);
  return s;
}

std::pair<std::string, std::string> make_reaction(Family family, Rng &rng,
                                                  int max_atoms) {
  const Scaffold r1 = scaffold(rng, max_atoms);
  const Scaffold r2 = scaffold(rng, max_atoms);
  MolGraph reactants, product;

  auto acyl = [&](MolGraph &m, int at) {
    const int c = add(m, Element::C);
    m.add_bond(at, c, BondOrder::kSingle);
    m.add_bond(c, add(m, Element::O), BondOrder::kDouble);
    return c;
  };
  auto sulfonyl = [&](MolGraph &m, int at) {
    const int s = add(m, Element::S);
    m.add_bond(at, s, BondOrder::kSingle);
    m.add_bond(s, add(m, Element::O), BondOrder::kDouble);
    m.add_bond(s, add(m, Element::O), BondOrder::kDouble);
    return s;
  };
  auto hang = [&](MolGraph &m, int at, Element e) {
    const int x = add(m, e);
    m.add_bond(at, x, BondOrder::kSingle);
    return x;
  };

  switch (family) {
  case Family::kEsterification: {
    // R1-C(=O)O + R2-O -> R1-C(=O)O-R2
    hang(reactants, acyl(reactants, copy_into(reactants, r1.mol, r1.attach)),
         Element::O);
    hang(reactants, copy_into(reactants, r2.mol, r2.attach), Element::O);
    const int o = hang(product, acyl(product, copy_into(product, r1.mol, r1.attach)),
                       Element::O);
    product.add_bond(o, copy_into(product, r2.mol, r2.attach), BondOrder::kSingle);
    break;
  }
  case Family::kAmideFormation: {
    // R1-C(=O)O + R2-N -> R1-C(=O)N-R2
    hang(reactants, acyl(reactants, copy_into(reactants, r1.mol, r1.attach)),
         Element::O);
    hang(reactants, copy_into(reactants, r2.mol, r2.attach), Element::N);
    const int n = hang(product, acyl(product, copy_into(product, r1.mol, r1.attach)),
                       Element::N);
    product.add_bond(n, copy_into(product, r2.mol, r2.attach), BondOrder::kSingle);
    break;
  }
  case Family::kEtherFormation: {
    // R1-Br + R2-O -> R1-O-R2
    hang(reactants, copy_into(reactants, r1.mol, r1.attach), Element::Br);
    hang(reactants, copy_into(reactants, r2.mol, r2.attach), Element::O);
    const int o = hang(product, copy_into(product, r1.mol, r1.attach), Element::O);
    product.add_bond(o, copy_into(product, r2.mol, r2.attach), BondOrder::kSingle);
    break;
  }
  case Family::kHalogenation: {
    // R1-O + PBr3 -> R1-Br
    hang(reactants, copy_into(reactants, r1.mol, r1.attach), Element::O);
    const int p = add(reactants, Element::P);
    for (int i = 0; i < 3; ++i)
      hang(reactants, p, Element::Br);
    hang(product, copy_into(product, r1.mol, r1.attach), Element::Br);
    break;
  }
  case Family::kSulfonamideFormation: {
    // R1-S(=O)(=O)Cl + R2-N -> R1-S(=O)(=O)N-R2
    hang(reactants, sulfonyl(reactants, copy_into(reactants, r1.mol, r1.attach)),
         Element::Cl);
    hang(reactants, copy_into(reactants, r2.mol, r2.attach), Element::N);
    const int n = hang(product,
                       sulfonyl(product, copy_into(product, r1.mol, r1.attach)),
                       Element::N);
    product.add_bond(n, copy_into(product, r2.mol, r2.attach), BondOrder::kSingle);
    break;
  }
  case Family::kReductiveAmination: {
    // R1-C=O + R2-N -> R1-C-N-R2
    acyl(reactants, copy_into(reactants, r1.mol, r1.attach));
    hang(reactants, copy_into(reactants, r2.mol, r2.attach), Element::N);
    const int c = hang(product, copy_into(product, r1.mol, r1.attach), Element::C);
    const int n = hang(product, c, Element::N);
    product.add_bond(n, copy_into(product, r2.mol, r2.attach), BondOrder::kSingle);
    break;
  }
  }
  return { smiles::canonical_smiles(reactants), smiles::canonical_smiles(product) };
}

}  // namespace

ReactionDataset generate_synthetic(int n_per_family, int families,
                                   std::uint64_t seed,
                                   const SyntheticOptions &options) {
  if (families < 1 || families > kNumFamilies)
    throw std::invalid_argument("families must be in [1, "
                                + std::to_string(kNumFamilies) + "]");
  if (n_per_family < 0)
    throw std::invalid_argument("n_per_family must be non-negative");
  if (options.max_scaffold_atoms < 1 || options.max_scaffold_atoms > 8)
    throw std::invalid_argument("max_scaffold_atoms must be in [1, 8]");

  ReactionDataset ds;
  for (int f = 0; f < families; ++f) {
    Rng rng(derive_seed(seed, 0x5e7, static_cast<std::uint64_t>(f)));
    for (int i = 0; i < n_per_family; ++i) {
      auto [reactants, product] =
          make_reaction(static_cast<Family>(f), rng, options.max_scaffold_atoms);
      ReactionRecord r;
      r.id = "syn-" + std::to_string(f + 1) + "-" + std::to_string(i + 1);
      r.reaction_class = f + 1;
      r.reactants = std::move(reactants);
      r.product = std::move(product);
      ds.add(std::move(r));
    }
  }
  return ds;
}

}  // namespace fedretro::data
