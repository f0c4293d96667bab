//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fedretro/cli.hpp"

namespace {

using namespace fedretro;

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSelfCheck = 3;

int resolve_threads(int flag) {
  if (flag > 0)
    return flag;
  if (const char *env = std::getenv("FEDRETRO_THREADS")) {
    char *end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0 && n <= 1024)
      return static_cast<int>(n);
    throw cli::ConfigError("FEDRETRO_THREADS must be a positive integer");
  }
  return 1;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

cli::ExperimentConfig load(const Common &c) {
  auto cfg = cli::load_config(c.config);
  if (c.seed)
    cfg.seed = *c.seed;
  if (!c.out.empty())
    cfg.out_dir = c.out;
  return cfg;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app { "Federated single-step retrosynthesis simulator" };
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kVersion);

  Common common;
  int threads = 0;
  std::string modes;

  auto *synth = app.add_subcommand("synth", "Write a synthetic reaction file");
  synth->add_option("--config", common.config, "Experiment config")->required();
  synth->add_option("--seed", common.seed, "Master seed override");
  synth->add_option("--out", common.out, "Output reaction file")->required();

  auto *run = app.add_subcommand("run", "Train and evaluate the configured modes");
  run->add_option("--config", common.config, "Experiment config")->required();
  run->add_option("--seed", common.seed, "Master seed override");
  run->add_option("--threads", threads, "Worker threads (default FEDRETRO_THREADS or 1)");
  run->add_option("--out", common.out, "Output directory");
  run->add_option("--modes", modes, "Comma-separated subset of local,central,fedavg,ckif");

  std::string checkpoint, data_path, ks_text;
  auto *eval = app.add_subcommand("eval", "Evaluate a checkpoint directory");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  eval->add_option("--data", data_path, "Reaction file overriding the recorded source");
  eval->add_option("--ks", ks_text, "Comma-separated K values");
  eval->add_option("--threads", threads, "Worker threads");
  eval->add_option("--out", common.out, "Write eval.json here instead of stdout");

  auto *partition = app.add_subcommand("partition", "Write per-client split files");
  partition->add_option("--config", common.config, "Experiment config")->required();
  partition->add_option("--seed", common.seed, "Master seed override");
  partition->add_option("--out", common.out, "Output directory")->required();

  std::optional<double> fraction;
  auto *contaminate = app.add_subcommand("contaminate",
                                         "Write per-client split files after contamination");
  contaminate->add_option("--config", common.config, "Experiment config")->required();
  contaminate->add_option("--seed", common.seed, "Master seed override");
  contaminate->add_option("--fraction", fraction, "Contamination fraction override");
  contaminate->add_option("--out", common.out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const auto cfg = load(common);
      cli::cmd_synth(cfg, common.out);
    } else if (run->parsed()) {
      auto cfg = load(common);
      if (!modes.empty()) {
        std::istringstream cfg_text("[run]\nmodes = " + modes + "\n");
        cfg.modes = cli::parse_config(cfg_text).modes;
      }
      const int n = resolve_threads(threads);
      const auto out = cli::cmd_run(
          cfg, n, (std::filesystem::path(cfg.out_dir) / "checkpoints").string());
      cli::write_run(out, cfg.out_dir);
      if (!out.self_checks_passed) {
        std::cerr << "fedretro: self-checks failed, see report.json\n";
        return kExitSelfCheck;
      }
      std::cerr << "fedretro: wrote " << cfg.out_dir << "/report.json\n";
    } else if (eval->parsed()) {
      std::optional<std::vector<int>> ks;
      if (!ks_text.empty()) {
        std::istringstream cfg_text("[metrics]\nks = " + ks_text
                                    + "\nbeam_width = 1000\n");
        ks = cli::parse_config(cfg_text).ks;
      }
      const auto result = cli::cmd_eval(
          checkpoint, data_path.empty() ? std::nullopt : std::optional(data_path),
          ks, resolve_threads(threads));
      if (common.out.empty()) {
        std::cout << result.dump(2) << '\n';
      } else {
        std::filesystem::create_directories(common.out);
        std::ofstream os(std::filesystem::path(common.out) / "eval.json");
        os << result.dump(2) << '\n';
        if (!os)
          throw data::FileError("cannot write eval.json");
      }
    } else if (partition->parsed()) {
      cli::cmd_partition(load(common), common.out, false);
    } else if (contaminate->parsed()) {
      auto cfg = load(common);
      if (fraction) {
        cfg.contamination = *fraction;
        cfg.validate();
      }
      cli::cmd_partition(cfg, common.out, true);
    }
  } catch (const cli::ConfigError &e) {
    std::cerr << "fedretro: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cli::SelfCheckFailed &e) {
    std::cerr << "fedretro: " << e.what() << '\n';
    return kExitSelfCheck;
  } catch (const std::exception &e) {
    std::cerr << "fedretro: " << e.what() << '\n';
    return kExitFailure;
  }
  return 0;
}
