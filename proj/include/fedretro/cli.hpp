//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedretro/data.hpp"
#include "fedretro/federation.hpp"
#include "fedretro/learner.hpp"

namespace fedretro::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char *kVersion = "0.1.0";

class ConfigError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class ManifestMismatch : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A run whose invariant self-checks failed; outputs are still written.
class SelfCheckFailed : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class CheckpointPolicy { kAll, kFinal, kNone };

struct ExperimentConfig {
  // [data]
  bool synthetic = true;
  std::string data_path;
  std::vector<data::Family> families { data::Family::kEsterification,
                                       data::Family::kAmideFormation,
                                       data::Family::kEtherFormation,
                                       data::Family::kHalogenation };
  int n_per_family = 500;
  int max_scaffold_atoms = 8;
  std::array<double, 3> split { 0.8, 0.1, 0.1 };

  // [partition]
  data::PartitionSpec partition;
  int clients = 4;
  std::vector<std::size_t> client_sizes;  // per-client record caps

  // [federation] and [train]; mode and threads are filled in per run
  federation::FedConfig fed;

  // [model]
  learner::ModelConfig model;

  // [contamination]
  double contamination = 0.0;

  // [metrics]
  std::vector<int> ks { 1, 3, 5, 10 };
  int beam_width = 10;
  bool roundtrip = false;
  int forward_epochs = 20;

  // [run]
  std::uint64_t seed = 0;
  std::vector<federation::Mode> modes { federation::Mode::kLocal,
                                        federation::Mode::kFedAvg,
                                        federation::Mode::kCkif };
  std::string out_dir = "out";
  CheckpointPolicy checkpoints = CheckpointPolicy::kAll;

  void validate() const;  // throws ConfigError
};

// INI-style text: [section] headers, key = value lines, '#' comments.
ExperimentConfig parse_config(std::istream &is);
ExperimentConfig load_config(const std::string &path);

// Resolved configuration as JSON; parse_echo inverts it.
nlohmann::ordered_json config_echo(const ExperimentConfig &cfg);
ExperimentConfig parse_echo(const nlohmann::ordered_json &echo);

struct PreparedData {
  std::vector<data::ReactionDataset> clients;  // as trained on
  std::vector<data::ReactionDataset> clean;    // before contamination
  data::LoadDiagnostics diagnostics;
  bool test_splits_unchanged = true;
};

// Load or synthesize, partition, cap, split, contaminate.
PreparedData prepare_data(const ExperimentConfig &cfg);

// Digest of every client's test split, used to match checkpoints to data.
std::string test_digest(const PreparedData &data);

struct RunOutput {
  nlohmann::ordered_json report;  // reproducible, no timings
  nlohmann::ordered_json timing;
  std::string summary_csv;
  std::string curve_csv;
  bool self_checks_passed = true;
};

RunOutput cmd_run(const ExperimentConfig &cfg, int threads,
                  const std::optional<std::string> &checkpoint_dir);

// Writes report.json, timing.json, summary.csv and curve.csv.
void write_run(const RunOutput &out, const std::string &dir);

void cmd_synth(const ExperimentConfig &cfg, const std::string &path);

// Per-client train/val/test files after partitioning (and contamination
// when `contaminated` is set).
void cmd_partition(const ExperimentConfig &cfg, const std::string &dir,
                   bool contaminated);

// Re-evaluates the final models of a checkpoint directory.
nlohmann::ordered_json cmd_eval(const std::string &checkpoint_dir,
                                const std::optional<std::string> &data_path,
                                const std::optional<std::vector<int>> &ks,
                                int threads);

}  // namespace fedretro::cli
