//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedretro::data {

class FileError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
public:
  FormatError(const std::string &what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) { }
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

class BadFractions : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class MissingClassLabels : public std::invalid_argument {
public:
  MissingClassLabels()
      : std::invalid_argument("partitioning requires reaction class labels") { }
};

class UnmappedClass : public std::invalid_argument {
public:
  explicit UnmappedClass(int cls)
      : std::invalid_argument("reaction class " + std::to_string(cls)
                              + " is not assigned to any client") { }
};

struct ReactionRecord {
  std::string id;
  std::optional<int> reaction_class;
  std::string reactants;  // canonical, dot-joined
  std::string product;    // canonical, single fragment

  bool operator==(const ReactionRecord &) const = default;
};

enum class Split : std::uint8_t { kTrain, kVal, kTest };

struct ReactionDataset {
  std::vector<ReactionRecord> records;
  std::vector<Split> splits;  // parallel to records

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  void add(ReactionRecord r, Split s = Split::kTrain) {
    records.push_back(std::move(r));
    splits.push_back(s);
  }
  std::vector<ReactionRecord> subset(Split s) const;
  std::size_t count(Split s) const;
};

struct LoadDiagnostics {
  std::size_t lines = 0;
  std::size_t records = 0;
  std::size_t skipped = 0;
  std::vector<std::string> messages;  // first few skip reasons
};

// Wire format: `id<TAB>class<TAB>reactants>reagents>products`, '#' comments.
// Reagents are dropped, multi-product reactions split into one record per
// product, every SMILES canonicalized; unparseable reactions are skipped.
ReactionDataset read_reactions(std::istream &is,
                               LoadDiagnostics *diag = nullptr);
ReactionDataset load_reactions(const std::string &path,
                               LoadDiagnostics *diag = nullptr);
void write_reactions(std::ostream &os, const ReactionDataset &ds);
void save_reactions(const std::string &path, const ReactionDataset &ds);

// Seeded shuffle, then contiguous train/val/test assignment.
ReactionDataset split_dataset(const ReactionDataset &ds,
                              std::array<double, 3> fractions,
                              std::uint64_t seed);

enum class PartitionStrategy { kByClass, kByClassGroups, kRandomDirichlet };

struct PartitionSpec {
  PartitionStrategy strategy = PartitionStrategy::kByClass;
  std::vector<std::vector<int>> groups;  // client -> classes
  double alpha = 1.0;
};

// Split tags are carried over unchanged.
std::vector<ReactionDataset> partition_clients(const ReactionDataset &ds,
                                               const PartitionSpec &spec,
                                               int num_clients,
                                               std::uint64_t seed);

// Swaps reactants and product of ceil(fraction * |train + val|) records and
// shuffles each side's tokens. Test records are never touched.
ReactionDataset contaminate(const ReactionDataset &ds, double fraction,
                            std::uint64_t seed);

enum class Family : int {
  kEsterification = 0,
  kAmideFormation,
  kEtherFormation,
  kHalogenation,
  kSulfonamideFormation,
  kReductiveAmination,
};

inline constexpr int kNumFamilies = 6;
const char *family_name(Family f);

struct SyntheticOptions {
  int max_scaffold_atoms = 8;
};

// Template reactions on random acyclic alkyl scaffolds. Class label of a
// record is its family index + 1.
ReactionDataset generate_synthetic(int n_per_family, int families,
                                   std::uint64_t seed,
                                   const SyntheticOptions &options = {});

}  // namespace fedretro::data
