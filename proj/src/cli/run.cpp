//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "fedretro/cli.hpp"
#include "fedretro/rng.hpp"

namespace fedretro::cli {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

data::ReactionDataset load_source(const ExperimentConfig &cfg,
                                  data::LoadDiagnostics *diag) {
  if (!cfg.synthetic)
    return data::load_reactions(cfg.data_path, diag);
  int highest = 0;
  for (const auto f: cfg.families)
    highest = std::max(highest, static_cast<int>(f) + 1);
  data::SyntheticOptions opt;
  opt.max_scaffold_atoms = cfg.max_scaffold_atoms;
  const auto all = data::generate_synthetic(cfg.n_per_family, highest,
                                            derive_seed(cfg.seed, 0xda7a), opt);
  std::set<int> keep;
  for (const auto f: cfg.families)
    keep.insert(static_cast<int>(f) + 1);
  data::ReactionDataset ds;
  for (const auto &r: all.records)
    if (keep.count(*r.reaction_class))
      ds.add(r);
  return ds;
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  for (const unsigned char c: s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h ^ 0xff;  // field separator
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

ordered_json matrix_json(const federation::Matrix &m) {
  ordered_json rows = ordered_json::array();
  for (int i = 0; i < m.n; ++i)
    rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

bool row_stochastic(const federation::Matrix &m) {
  for (int i = 0; i < m.n; ++i) {
    double sum = 0.0;
    for (const double v: m.row(i)) {
      if (!(v >= 0.0))
        return false;
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      return false;
  }
  return true;
}

ordered_json eval_json(int id, const metrics::EvalResult &r) {
  ordered_json topk = ordered_json::array();
  for (const auto &[k, acc]: r.topk)
    topk.push_back({ { "k", k }, { "exact", acc }, { "maxfrag", r.maxfrag_topk.at(k) } });
  ordered_json classes = ordered_json::array();
  for (const auto &[cls, by_k]: r.per_class) {
    ordered_json ks = ordered_json::array();
    for (const auto &[k, acc]: by_k)
      ks.push_back({ { "k", k }, { "exact", acc } });
    classes.push_back({ { "class", cls }, { "n", r.class_counts.at(cls) }, { "topk", ks } });
  }
  ordered_json j;
  j["id"] = id;
  j["n_test"] = r.n_evaluated;
  j["topk"] = topk;
  j["roundtrip_top1"] = r.roundtrip_top1 ? ordered_json(*r.roundtrip_top1) : ordered_json();
  j["per_class"] = classes;
  return j;
}

// Client metrics plus the unweighted mean over clients.
ordered_json eval_section(std::span<const federation::Client> clients,
                          std::span<const learner::ParamVector> models,
                          const ExperimentConfig &cfg,
                          const metrics::ForwardModel *forward, int threads,
                          std::vector<metrics::EvalResult> *results = nullptr) {
  std::vector<metrics::EvalResult> evals(clients.size());
  federation::parallel_for(clients.size(), threads, [&](std::size_t i) {
    evals[i] = clients[i].evaluate(models[i], cfg.beam_width, cfg.ks, forward);
  });
  ordered_json per_client = ordered_json::array();
  for (std::size_t i = 0; i < clients.size(); ++i)
    per_client.push_back(eval_json(clients[i].id(), evals[i]));
  ordered_json mean = ordered_json::array();
  for (const int k: cfg.ks) {
    double exact = 0.0, frag = 0.0;
    for (const auto &e: evals) {
      exact += e.topk.at(k);
      frag += e.maxfrag_topk.at(k);
    }
    const double n = static_cast<double>(evals.size());
    mean.push_back({ { "k", k }, { "exact", exact / n }, { "maxfrag", frag / n } });
  }
  if (results)
    *results = std::move(evals);
  return { { "clients", per_client }, { "mean", mean } };
}

std::vector<federation::Client> make_clients(const PreparedData &prepared,
                                             const learner::ModelConfig &model) {
  std::vector<federation::Client> clients;
  for (std::size_t k = 0; k < prepared.clients.size(); ++k)
    clients.emplace_back(static_cast<int>(k), prepared.clients[k], model);
  return clients;
}

std::string client_file(int k) {
  return "client_" + std::to_string(k) + ".frpv";
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw data::FileError("cannot write " + path.string());
  os << text;
  if (!os)
    throw data::FileError("write failed for " + path.string());
}

std::string read_text(const fs::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw data::FileError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig &cfg) {
  cfg.validate();
  PreparedData out;
  const auto ds = load_source(cfg, &out.diagnostics);
  auto parts = data::partition_clients(ds, cfg.partition, cfg.clients,
                                       derive_seed(cfg.seed, 0x9a27));
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto &p = parts[k];
    if (!cfg.client_sizes.empty() && p.size() > cfg.client_sizes[k]) {
      p.records.resize(cfg.client_sizes[k]);
      p.splits.resize(cfg.client_sizes[k]);
    }
    p = data::split_dataset(p, cfg.split, derive_seed(cfg.seed, 0x5911, k));
    out.clean.push_back(p);
    if (cfg.contamination > 0.0) {
      auto dirty = data::contaminate(p, cfg.contamination,
                                     derive_seed(cfg.seed, 0xc047, k));
      out.test_splits_unchanged = out.test_splits_unchanged
          && dirty.subset(data::Split::kTest) == p.subset(data::Split::kTest);
      p = std::move(dirty);
    }
    out.clients.push_back(std::move(p));
  }
  return out;
}

std::string test_digest(const PreparedData &prepared) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto &c: prepared.clients) {
    h = fnv1a(h, "client");
    for (const auto &r: c.subset(data::Split::kTest)) {
      h = fnv1a(h, r.id);
      h = fnv1a(h, r.reactants);
      h = fnv1a(h, r.product);
    }
  }
  return hex(h);
}

RunOutput cmd_run(const ExperimentConfig &cfg, int threads,
                  const std::optional<std::string> &checkpoint_dir) {
  cfg.validate();
  const auto t_start = Clock::now();
  RunOutput out;
  const auto prepared = prepare_data(cfg);
  const auto clients = make_clients(prepared, cfg.model);

  // Self-checks: splits disjoint and every record on one client only.
  std::set<std::string> ids;
  bool disjoint = true;
  for (const auto &c: prepared.clients)
    for (const auto &r: c.records)
      disjoint = ids.insert(r.id).second && disjoint;
  bool stochastic = true;

  ordered_json report;
  report["schema_version"] = kSchemaVersion;
  report["tool"] = { { "name", "fedretro" }, { "version", kVersion } };
  report["config"] = config_echo(cfg);

  ordered_json data_json;
  ordered_json client_rows = ordered_json::array();
  for (std::size_t k = 0; k < prepared.clients.size(); ++k) {
    const auto &c = prepared.clients[k];
    std::set<int> classes;
    for (const auto &r: c.records)
      if (r.reaction_class)
        classes.insert(*r.reaction_class);
    client_rows.push_back({ { "id", k },
                            { "train", c.count(data::Split::kTrain) },
                            { "val", c.count(data::Split::kVal) },
                            { "test", c.count(data::Split::kTest) },
                            { "train_examples", clients[k].num_train() },
                            { "proxy_pairs", clients[k].num_proxy() },
                            { "classes", classes } });
  }
  data_json["clients"] = client_rows;
  data_json["skipped_records"] = prepared.diagnostics.skipped;
  data_json["test_digest"] = test_digest(prepared);
  data_json["contamination"] = { { "fraction", cfg.contamination },
                                 { "test_splits_unchanged",
                                   prepared.test_splits_unchanged } };
  report["data"] = data_json;

  std::optional<fs::path> ckpt;
  if (checkpoint_dir && cfg.checkpoints != CheckpointPolicy::kNone) {
    ckpt = fs::path(*checkpoint_dir);
    fs::create_directories(*ckpt);
  }

  ordered_json timing;
  timing["threads"] = threads;

  // Forward model for round-trip accuracy, trained on the pooled clean data.
  std::optional<learner::ParamVector> forward_params;
  std::optional<metrics::ForwardModel> forward;
  if (cfg.roundtrip) {
    const auto t0 = Clock::now();
    std::vector<learner::Example> pooled;
    for (const auto &c: prepared.clean)
      for (const auto &r: c.subset(data::Split::kTrain))
        if (auto ex = learner::make_example(r.reactants, r.product, cfg.model))
          pooled.push_back(std::move(*ex));
    learner::TrainOptions opt = cfg.fed.train;
    opt.epochs = cfg.forward_epochs;
    opt.seed = derive_seed(cfg.seed, 0xf04d);
    forward_params = learner::train_local(
        learner::init_params(cfg.model, derive_seed(cfg.seed, 0xf04e)), pooled,
        opt, cfg.model).params;
    std::string source = "pooled forward task, " + std::to_string(pooled.size())
                         + " examples, " + std::to_string(cfg.forward_epochs)
                         + " epochs";
    if (ckpt) {
      learner::save_params((*ckpt / "forward.frpv").string(), *forward_params);
      source += ", checkpoint forward.frpv";
    }
    forward = metrics::ForwardModel { &*forward_params, cfg.model,
                                      cfg.fed.eval_beam_width, source };
    report["forward_model"] = { { "source", source },
                                { "note", "trained by the experimenter on all "
                                          "clients' data; not a federated model" } };
    timing["forward_model_seconds"] = seconds_since(t0);
  }

  ordered_json manifest_modes;
  ordered_json modes_json;
  std::ostringstream summary, curve;
  summary << "mode,client,k,topk,maxfrag_topk,roundtrip_top1\n";
  curve << "mode,round,client,proxy_top1,train_loss\n";

  for (const auto mode: cfg.modes) {
    const std::string name = federation::mode_name(mode);
    const auto t0 = Clock::now();
    federation::FedConfig fc = cfg.fed;
    fc.mode = mode;
    fc.seed = cfg.seed;
    fc.threads = threads;

    std::vector<learner::ParamVector> models;
    ordered_json mode_json;
    ordered_json round_times = ordered_json::array();
    const fs::path mode_dir = ckpt ? *ckpt / name : fs::path();
    auto save_models = [&](const fs::path &dir,
                           std::span<const learner::ParamVector> ms) {
      fs::create_directories(dir);
      for (std::size_t k = 0; k < ms.size(); ++k)
        learner::save_params((dir / client_file(static_cast<int>(k))).string(), ms[k]);
    };

    if (mode == federation::Mode::kCentral) {
      std::size_t pooled = 0;
      const auto central = federation::run_central(clients, fc, cfg.model, &pooled);
      models.assign(clients.size(), central);
      mode_json["privacy_violating"] = true;
      mode_json["pooled_train"] = pooled;
    } else {
      federation::RoundCallback on_round;
      if (ckpt && cfg.checkpoints == CheckpointPolicy::kAll)
        on_round = [&](const federation::RoundReport &r,
                       std::span<const learner::ParamVector> ms) {
          save_models(mode_dir / ("round_" + std::to_string(r.round)), ms);
        };
      auto res = federation::run_federated(clients, fc, cfg.model, on_round);
      models = std::move(res.models);
      ordered_json rounds = ordered_json::array();
      for (const auto &r: res.rounds) {
        ordered_json rj;
        rj["round"] = r.round;
        rj["aggregated"] = r.aggregated;
        rj["similarity"] = r.similarity ? matrix_json(*r.similarity) : ordered_json();
        rj["weights"] = r.weights ? matrix_json(*r.weights) : ordered_json();
        rj["train_loss"] = r.train_loss;
        rj["proxy_top1"] = r.proxy_top1;
        rounds.push_back(rj);
        if (r.weights)
          stochastic = stochastic && row_stochastic(*r.weights);
        round_times.push_back(r.seconds);
        for (std::size_t k = 0; k < clients.size(); ++k)
          curve << name << ',' << r.round << ',' << k << ','
                << (r.proxy_top1.empty() ? std::string() : fmt(r.proxy_top1[k]))
                << ',' << fmt(r.train_loss[k]) << '\n';
      }
      mode_json["rounds"] = rounds;
    }
    if (ckpt) {
      save_models(mode_dir / "final", models);
      ordered_json files = ordered_json::array();
      for (std::size_t k = 0; k < models.size(); ++k)
        files.push_back(name + "/final/" + client_file(static_cast<int>(k)));
      manifest_modes[name] = { { "rounds", mode == federation::Mode::kCentral
                                               ? 0 : cfg.fed.rounds },
                               { "final", files } };
    }

    std::vector<metrics::EvalResult> evals;
    const auto section = eval_section(clients, models, cfg,
                                      forward ? &*forward : nullptr, threads, &evals);
    mode_json["clients"] = section["clients"];
    mode_json["mean"] = section["mean"];
    modes_json[name] = mode_json;
    for (std::size_t k = 0; k < evals.size(); ++k)
      for (const int kk: cfg.ks)
        summary << name << ',' << k << ',' << kk << ',' << fmt(evals[k].topk.at(kk))
                << ',' << fmt(evals[k].maxfrag_topk.at(kk)) << ','
                << (evals[k].roundtrip_top1 ? fmt(*evals[k].roundtrip_top1) : "")
                << '\n';
    timing["modes"][name] = { { "seconds", seconds_since(t0) },
                              { "rounds", round_times } };
  }
  report["modes"] = modes_json;

  out.self_checks_passed = disjoint && stochastic && prepared.test_splits_unchanged;
  report["self_checks"] = { { "splits_disjoint", disjoint },
                            { "row_stochastic", stochastic },
                            { "test_splits_unchanged", prepared.test_splits_unchanged },
                            { "passed", out.self_checks_passed } };

  if (ckpt) {
    ordered_json manifest;
    manifest["schema_version"] = kSchemaVersion;
    manifest["config"] = config_echo(cfg);
    manifest["test_digest"] = test_digest(prepared);
    manifest["modes"] = manifest_modes;
    manifest["forward"] = cfg.roundtrip ? ordered_json("forward.frpv") : ordered_json();
    write_text(*ckpt / "manifest.json", manifest.dump(2) + "\n");
  }

  timing["total_seconds"] = seconds_since(t_start);
  out.report = std::move(report);
  out.timing = std::move(timing);
  out.summary_csv = summary.str();
  out.curve_csv = curve.str();
  return out;
}

void write_run(const RunOutput &out, const std::string &dir) {
  fs::create_directories(dir);
  const fs::path d(dir);
  write_text(d / "report.json", out.report.dump(2) + "\n");
  write_text(d / "timing.json", out.timing.dump(2) + "\n");
  write_text(d / "summary.csv", out.summary_csv);
  write_text(d / "curve.csv", out.curve_csv);
}

void cmd_synth(const ExperimentConfig &cfg, const std::string &path) {
  cfg.validate();
  if (!cfg.synthetic)
    throw ConfigError("synth needs data.source = synthetic");
  const auto ds = load_source(cfg, nullptr);
  const fs::path p(path);
  if (p.has_parent_path())
    fs::create_directories(p.parent_path());
  data::save_reactions(path, ds);
}

void cmd_partition(const ExperimentConfig &cfg, const std::string &dir,
                   bool contaminated) {
  const auto prepared = prepare_data(cfg);
  if (contaminated && !prepared.test_splits_unchanged)
    throw SelfCheckFailed("contamination altered a test split");
  fs::create_directories(dir);
  const auto &sets = contaminated ? prepared.clients : prepared.clean;
  const std::pair<data::Split, const char *> splits[] = {
    { data::Split::kTrain, "train" },
    { data::Split::kVal, "val" },
    { data::Split::kTest, "test" },
  };
  for (std::size_t k = 0; k < sets.size(); ++k)
    for (const auto &[split, label]: splits) {
      data::ReactionDataset part;
      for (auto &r: sets[k].subset(split))
        part.add(std::move(r), split);
      data::save_reactions((fs::path(dir) / ("client_" + std::to_string(k) + "_"
                                             + label + ".tsv")).string(),
                           part);
    }
}

ordered_json cmd_eval(const std::string &checkpoint_dir,
                      const std::optional<std::string> &data_path,
                      const std::optional<std::vector<int>> &ks, int threads) {
  const fs::path dir(checkpoint_dir);
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path))
    throw data::FileError("no checkpoint manifest at " + manifest_path.string());
  ordered_json manifest;
  try {
    manifest = ordered_json::parse(read_text(manifest_path));
  } catch (const nlohmann::json::parse_error &e) {
    throw ManifestMismatch(std::string("unreadable manifest: ") + e.what());
  }
  if (manifest.value("schema_version", 0) != kSchemaVersion)
    throw ManifestMismatch("unsupported manifest schema version");

  ExperimentConfig cfg = parse_echo(manifest.at("config"));
  if (data_path) {
    cfg.synthetic = false;
    cfg.data_path = *data_path;
  }
  if (ks) {
    cfg.ks = *ks;
    cfg.validate();
  }
  const auto prepared = prepare_data(cfg);
  if (test_digest(prepared) != manifest.at("test_digest"))
    throw ManifestMismatch("dataset does not match the checkpoint's test splits");
  const auto clients = make_clients(prepared, cfg.model);
  const auto expected_layout = learner::make_layout(cfg.model);

  auto load = [&](const std::string &rel) {
    const fs::path p = dir / rel;
    if (!fs::exists(p))
      throw data::FileError("missing checkpoint file " + p.string());
    auto params = learner::load_params(p.string());
    if (params.layout != expected_layout)
      throw ManifestMismatch("parameter layout of " + rel
                             + " does not match the configured model");
    return params;
  };

  std::optional<learner::ParamVector> forward_params;
  std::optional<metrics::ForwardModel> forward;
  if (!manifest.at("forward").is_null()) {
    forward_params = load(manifest.at("forward").get<std::string>());
    forward = metrics::ForwardModel { &*forward_params, cfg.model,
                                      cfg.fed.eval_beam_width, "forward.frpv" };
  }

  ordered_json out;
  out["schema_version"] = kSchemaVersion;
  out["test_digest"] = manifest.at("test_digest");
  ordered_json modes;
  for (const auto &[name, entry]: manifest.at("modes").items()) {
    const auto &files = entry.at("final");
    if (files.size() != clients.size())
      throw ManifestMismatch("mode " + name + " lists "
                             + std::to_string(files.size()) + " models for "
                             + std::to_string(clients.size()) + " clients");
    std::vector<learner::ParamVector> models;
    for (const auto &f: files)
      models.push_back(load(f.get<std::string>()));
    modes[name] = eval_section(clients, models, cfg,
                               forward ? &*forward : nullptr, threads);
  }
  out["modes"] = modes;
  return out;
}

}  // namespace fedretro::cli
