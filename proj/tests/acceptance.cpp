//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Pass criterion numbers as arguments to run
// a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fedretro/cli.hpp"
#include "fedretro/federation.hpp"
#include "fedretro/fingerprint.hpp"
#include "fedretro/learner.hpp"
#include "fedretro/metrics.hpp"
#include "fedretro/smiles.hpp"

#include "test_support.hpp"

namespace {

using namespace fedretro;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char *format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// 1 -------------------------------------------------------------------------

Outcome weighting() {
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int bad = 0;
  double worst_sum = 0.0, worst_oracle = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = testing::uniform(rng, 2, 8);
    const double mu = unit(rng);
    const double tau = 0.05 + 4.95 * unit(rng);
    federation::SimilarityMatrix s(k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        if (i != j)
          // coarse grid so ties occur
          s(i, j) = testing::chance(rng, 0.2) ? std::round(unit(rng) * 4) / 4 : unit(rng);
    const auto w = federation::ckiw_weights(s, mu, tau);
    for (int i = 0; i < k; ++i) {
      double sum = 0.0, z = 0.0;
      for (int j = 0; j < k; ++j) {
        sum += w(i, j);
        if (w(i, j) < 0.0)
          ++bad;
        if (j != i)
          z += std::exp(s(i, j) / tau);
      }
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      if (std::abs(sum - 1.0) > 1e-9 || w(i, i) != mu)
        ++bad;
      for (int j = 0; j < k; ++j) {
        if (j == i)
          continue;
        // direct evaluation, no shift
        const double expect = (1.0 - mu) * std::exp(s(i, j) / tau) / z;
        worst_oracle = std::max(worst_oracle, std::abs(w(i, j) - expect));
        for (int l = 0; l < k; ++l) {
          if (l == i || l == j)
            continue;
          if (s(i, j) > s(i, l) && !(w(i, j) > w(i, l)))
            ++bad;
          if (s(i, j) == s(i, l) && w(i, j) != w(i, l))
            ++bad;
        }
      }
    }
  }
  return { bad == 0 && worst_oracle < 1e-12,
           fmt("1000 matrices, %d violations, max |row sum - 1| %.1e, "
               "max deviation from direct softmax %.1e",
               bad, worst_sum, worst_oracle) };
}

// 2 -------------------------------------------------------------------------

learner::ModelConfig toy_model() {
  learner::ModelConfig cfg;
  cfg.fp_dim = 64;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 16;
  cfg.max_len = 40;
  cfg.fingerprint.nbits = 256;
  return cfg;
}

std::vector<federation::Client> toy_clients(const learner::ModelConfig &cfg) {
  data::SyntheticOptions opt;
  opt.max_scaffold_atoms = 3;
  const auto ds = data::generate_synthetic(30, 4, 11, opt);
  std::vector<federation::Client> clients;
  int id = 0;
  for (const auto &part: data::partition_clients(ds, {}, 4, 11))
    clients.emplace_back(id++, data::split_dataset(part, { 0.6, 0.2, 0.2 }, 11), cfg);
  return clients;
}

Outcome reductions() {
  const auto cfg = toy_model();
  const auto clients = toy_clients(cfg);
  federation::FedConfig fc;
  fc.rounds = 3;
  fc.local_epochs = 1;
  fc.finetune_rounds = 1;
  fc.seed = 5;
  fc.train.lr = 0.003;
  fc.train.batch_size = 8;
  fc.eval_beam_width = 2;
  fc.proxy_cap = 4;

  fc.mode = federation::Mode::kLocal;
  const auto local = federation::run_federated(clients, fc, cfg);
  fc.mode = federation::Mode::kCkif;
  fc.mu = 1.0;
  const auto ckif = federation::run_federated(clients, fc, cfg);
  int differing = 0;
  for (std::size_t k = 0; k < clients.size(); ++k)
    if (ckif.models[k].values != local.models[k].values)
      ++differing;

  // FedAvg: aggregate every round, then rebuild the last aggregation by
  // retraining from the previous round's models and averaging by hand.
  for (const auto &c: clients)
    if (c.num_train() != clients[0].num_train())
      return { false, "toy clients are not equal-sized" };
  fc.mode = federation::Mode::kFedAvg;
  fc.mu.reset();
  fc.finetune_rounds = 0;
  std::vector<learner::ParamVector> before_last;
  const auto fedavg = federation::run_federated(
      clients, fc, cfg,
      [&](const federation::RoundReport &r, std::span<const learner::ParamVector> ms) {
        if (r.round == fc.rounds - 1)
          before_last.assign(ms.begin(), ms.end());
      });
  std::vector<learner::ParamVector> trained;
  for (std::size_t k = 0; k < clients.size(); ++k)
    trained.push_back(clients[k]
                          .train(before_last[k], fc.local_epochs, fc.train, fc.seed,
                                 fc.rounds)
                          .params);
  double worst = 0.0;
  for (std::size_t p = 0; p < trained[0].values.size(); ++p) {
    double mean = 0.0;
    for (const auto &t: trained)
      mean += t.values[p];
    mean /= static_cast<double>(trained.size());
    for (const auto &m: fedavg.models)
      worst = std::max(worst, std::abs(m.values[p] - mean));
  }
  return { differing == 0 && worst <= 1e-12,
           fmt("mu=1 ckif vs local: %d/4 clients differ; fedavg vs hand mean: "
               "max |diff| %.1e",
               differing, worst) };
}

// 3 -------------------------------------------------------------------------

Outcome gradients() {
  learner::ModelConfig cfg;
  cfg.fp_dim = 32;
  cfg.embed_dim = 5;
  cfg.hidden_dim = 7;
  cfg.max_len = 16;
  cfg.fingerprint.nbits = 256;
  std::mt19937_64 rng(33);
  std::normal_distribution<double> noise(0.0, 0.3);
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    cfg.position_embedding = draw % 2 == 0;
    learner::ParamVector p = learner::init_params(cfg, rng());
    for (auto &v: p.values)
      v = noise(rng);
    std::vector<learner::Example> batch(testing::uniform(rng, 1, 4));
    for (auto &ex: batch) {
      ex.fp.assign(cfg.fp_dim, 0.0);
      for (auto &x: ex.fp)
        x = testing::chance(rng, 0.25) ? 1.0 : 0.0;
      const int len = testing::uniform(rng, 1, cfg.max_len - 1);
      for (int i = 0; i < len; ++i)
        ex.tokens.push_back(testing::uniform(rng, 4, cfg.vocab_size() - 1));
    }
    const auto lg = learner::loss_and_grad(p, batch, cfg);
    learner::ParamVector q = p;
    const double h = 1e-4;
    for (std::size_t i = 0; i < p.size(); ++i) {
      q.values[i] = p.values[i] + h;
      const double up = learner::loss_only(q, batch, cfg);
      q.values[i] = p.values[i] - h;
      const double down = learner::loss_only(q, batch, cfg);
      q.values[i] = p.values[i];
      const double numeric = (up - down) / (2 * h);
      const double analytic = lg.grad.values[i];
      const double denom = std::max({ std::abs(numeric), std::abs(analytic), 1e-6 });
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  return { worst < 1e-4, fmt("20 draws, max relative error %.2e", worst) };
}

// 4 -------------------------------------------------------------------------

Outcome canonicalizer() {
  std::mt19937_64 rng(404);
  int split = 0, not_idempotent = 0;
  for (int i = 0; i < 1000; ++i) {
    const smiles::MolGraph m = testing::random_molecule(rng);
    std::set<std::string> forms;
    for (int j = 0; j < 10; ++j) {
      const auto order = testing::random_permutation(rng, m.num_atoms());
      forms.insert(smiles::canonicalize(smiles::write_smiles(m, order)));
    }
    if (forms.size() != 1)
      ++split;
    const std::string c = *forms.begin();
    if (smiles::canonicalize(c) != c)
      ++not_idempotent;
  }

  const std::string alphabet = "CNOSPFIcnos()[]=#1234%+-@H.\\/:*Brl09";
  int fuzzed = 0, parsed = 0, escaped = 0;
  for (int i = 0; i < 50000; ++i) {
    std::string s;
    const int len = testing::uniform(rng, 0, 32);
    for (int j = 0; j < len; ++j)
      s += testing::chance(rng, 0.3) ? static_cast<char>(rng() & 0xff)
                                     : alphabet[rng() % alphabet.size()];
    ++fuzzed;
    try {
      const std::string c = smiles::canonicalize(s);
      ++parsed;
      if (smiles::canonicalize(c) != c)
        ++not_idempotent;
    } catch (const smiles::SmilesError &) {
    } catch (const smiles::EmptyMolecule &) {
    } catch (...) {
      ++escaped;
    }
    try {
      smiles::tokenize(s);
    } catch (const smiles::TokenError &) {
    } catch (...) {
      ++escaped;
    }
  }
  return { split == 0 && not_idempotent == 0 && escaped == 0,
           fmt("1000 molecules x 10 orders: %d with several canonical forms; "
               "%d non-idempotent; %d fuzz inputs (%d parsed), %d unexpected "
               "exceptions",
               split, not_idempotent, fuzzed, parsed, escaped) };
}

// 5 -------------------------------------------------------------------------

Outcome tanimoto() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int sizes[] = { 256, 512, 1024, 2048, 4096 };
  int mismatches = 0;
  for (int pair = 0; pair < 10000; ++pair) {
    const int nbits = sizes[pair % 5];
    fingerprint::BitFingerprint a(nbits), b(nbits);
    std::set<int> sa, sb;
    // every 50th pair has both sides empty
    const double da = pair % 50 == 0 ? 0.0 : unit(rng) * unit(rng);
    const double db = pair % 50 == 0 ? 0.0 : unit(rng) * unit(rng);
    for (int bit = 0; bit < nbits; ++bit) {
      if (unit(rng) < da) {
        a.set(bit);
        sa.insert(bit);
      }
      if (unit(rng) < db) {
        b.set(bit);
        sb.insert(bit);
      }
    }
    std::vector<int> inter, uni;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                          std::back_inserter(inter));
    std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(uni));
    const double expect = uni.empty() ? 1.0
                                      : static_cast<double>(inter.size())
                                            / static_cast<double>(uni.size());
    if (fingerprint::tanimoto(a, b) != expect)
      ++mismatches;
  }
  return { mismatches == 0, fmt("10000 pairs, %d mismatches", mismatches) };
}

// 6 and 7 -------------------------------------------------------------------

constexpr int kSmallClient = 3;

cli::ExperimentConfig fixture(std::uint64_t seed, double contamination) {
  cli::ExperimentConfig c;
  c.families = { data::Family::kEsterification, data::Family::kAmideFormation,
                 data::Family::kSulfonamideFormation,
                 data::Family::kReductiveAmination };
  c.n_per_family = 2000;
  c.max_scaffold_atoms = 4;
  c.partition.strategy = data::PartitionStrategy::kByClassGroups;
  c.partition.groups = { { 1 }, { 5 }, { 6 }, { 2 } };
  c.clients = 4;
  c.client_sizes = { 2000, 2000, 2000, 200 };
  c.fed.rounds = 10;
  c.fed.local_epochs = 2;
  c.fed.finetune_rounds = 2;
  c.fed.mu = 0.25;
  c.fed.tau = 1.5;
  c.fed.track_proxy = false;
  c.fed.train.lr = 0.005;
  c.fed.train.batch_size = 16;
  c.model.max_len = 64;
  c.contamination = contamination;
  c.ks = { 1 };
  c.beam_width = 10;
  c.seed = seed;
  c.checkpoints = cli::CheckpointPolicy::kNone;
  c.validate();
  return c;
}

struct ModeTop1 {
  std::vector<double> clients;
  double mean = 0.0;
};

std::map<std::string, ModeTop1> top1_by_mode(const nlohmann::ordered_json &report) {
  std::map<std::string, ModeTop1> out;
  for (const auto &[name, mode]: report["modes"].items()) {
    ModeTop1 t;
    for (const auto &c: mode["clients"])
      t.clients.push_back(c["topk"][0]["exact"].get<double>());
    t.mean = mode["mean"][0]["exact"].get<double>();
    out[name] = t;
  }
  return out;
}

int threads() {
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

constexpr std::uint64_t kSeeds[] = { 1, 2, 3 };
std::map<std::uint64_t, std::map<std::string, ModeTop1>> clean_runs;

Outcome heterogeneity() {
  int small_wins = 0, mean_wins = 0;
  std::string detail;
  for (const auto seed: kSeeds) {
    auto cfg = fixture(seed, 0.0);
    const auto out = cli::cmd_run(cfg, threads(), std::nullopt);
    if (!out.self_checks_passed)
      return { false, fmt("seed %llu: run self-checks failed",
                          static_cast<unsigned long long>(seed)) };
    const auto t = top1_by_mode(out.report);
    clean_runs[seed] = t;
    const double small_gain = t.at("ckif").clients[kSmallClient]
                              - t.at("local").clients[kSmallClient];
    // accuracies are multiples of 1/n, so allow for rounding at the threshold
    if (small_gain >= 0.05 - 1e-9)
      ++small_wins;
    if (t.at("ckif").mean >= t.at("fedavg").mean)
      ++mean_wins;
    detail += fmt("seed %llu: small client local %.3f ckif %.3f; mean local %.3f "
                  "fedavg %.3f ckif %.3f. ",
                  static_cast<unsigned long long>(seed),
                  t.at("local").clients[kSmallClient],
                  t.at("ckif").clients[kSmallClient], t.at("local").mean,
                  t.at("fedavg").mean, t.at("ckif").mean);
  }
  detail += fmt("small-client gain >= 5 points in %d/3 seeds, ckif mean >= fedavg "
                "in %d/3",
                small_wins, mean_wins);
  return { small_wins >= 2 && mean_wins >= 2, detail };
}

std::string test_text(const cli::PreparedData &d) {
  std::ostringstream os;
  for (const auto &client: d.clients) {
    data::ReactionDataset test;
    for (const auto &r: client.subset(data::Split::kTest))
      test.add(r, data::Split::kTest);
    data::write_reactions(os, test);
    os << "--\n";
  }
  return os.str();
}

Outcome contamination() {
  int robust = 0;
  bool identical = true;
  std::string detail;
  for (const auto seed: kSeeds) {
    const auto clean_cfg = fixture(seed, 0.0);
    const auto dirty_cfg = fixture(seed, 0.2);
    const auto clean_data = cli::prepare_data(clean_cfg);
    const auto dirty_data = cli::prepare_data(dirty_cfg);
    identical = identical && dirty_data.test_splits_unchanged
                && test_text(clean_data) == test_text(dirty_data);

    if (!clean_runs.count(seed)) {
      auto cfg = clean_cfg;
      cfg.modes = { federation::Mode::kLocal, federation::Mode::kCkif };
      clean_runs[seed] = top1_by_mode(cli::cmd_run(cfg, threads(), std::nullopt).report);
    }
    auto cfg = dirty_cfg;
    cfg.modes = { federation::Mode::kLocal, federation::Mode::kCkif };
    const auto dirty = top1_by_mode(cli::cmd_run(cfg, threads(), std::nullopt).report);
    const auto &clean = clean_runs[seed];
    const double local_drop = clean.at("local").mean - dirty.at("local").mean;
    const double ckif_drop = clean.at("ckif").mean - dirty.at("ckif").mean;
    if (ckif_drop <= local_drop)
      ++robust;
    detail += fmt("seed %llu: degradation local %.3f ckif %.3f. ",
                  static_cast<unsigned long long>(seed), local_drop, ckif_drop);
  }
  detail += fmt("ckif <= local in %d/3 seeds; test splits %s", robust,
                identical ? "byte-identical" : "CHANGED");
  return { robust >= 2 && identical, detail };
}

// 8 -------------------------------------------------------------------------

metrics::PredictionList ranked(const std::vector<std::string> &smiles) {
  metrics::PredictionList out;
  for (std::size_t i = 0; i < smiles.size(); ++i) {
    learner::Prediction p;
    p.smiles = smiles[i];
    p.rank = static_cast<int>(i) + 1;
    p.log_prob = -static_cast<double>(i);
    out.push_back(p);
  }
  return out;
}

Outcome metric_identities() {
  int violations = 0;
  {
    const std::vector<metrics::PredictionList> preds { ranked({ "CC(=O)O.CCN" }) };
    const std::vector<std::string> truth { "CC(=O)O.CCO" };
    if (metrics::topk_accuracy(preds, truth, 1) != 0.0
        || metrics::maxfrag_accuracy(preds, truth, 1) != 1.0)
      ++violations;
  }
  const bool worked = violations == 0;

  const std::vector<std::string> pool { "CCO",       "OCC.CC",   "CC(=O)O.CCO",
                                        "CC(=O)O.CCN", "CCN",    "C(",
                                        "CCOC(C)=O", "c1ccccc1", "CBr.CO",
                                        "OC(C)=O.NCC" };
  const std::vector<int> ks { 1, 2, 3, 5, 10 };
  std::mt19937_64 rng(808);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = testing::uniform(rng, 1, 60);
    std::vector<metrics::PredictionList> preds;
    std::vector<std::string> truths;
    std::vector<int> classes;
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> list;
      for (int j = testing::uniform(rng, 0, 12); j > 0; --j)
        list.push_back(pool[rng() % pool.size()]);
      preds.push_back(ranked(list));
      std::string t = pool[rng() % pool.size()];
      truths.push_back(t == "C(" ? "CCO" : t);
      classes.push_back(testing::uniform(rng, 1, 5));
    }
    const metrics::EvalInput in { preds, truths, truths, classes };
    const auto r = metrics::evaluate(in, ks);
    double prev_exact = 0.0, prev_frag = 0.0;
    for (const int k: ks) {
      const double exact = r.topk.at(k), frag = r.maxfrag_topk.at(k);
      if (exact < prev_exact || frag < prev_frag)
        ++violations;
      prev_exact = exact;
      prev_frag = frag;
      // pointwise: each record's exact hit implies its MaxFrag hit
      for (int i = 0; i < n; ++i) {
        const std::span<const metrics::PredictionList> p(&preds[i], 1);
        const std::span<const std::string> t(&truths[i], 1);
        if (metrics::topk_accuracy(p, t, k) > metrics::maxfrag_accuracy(p, t, k))
          ++violations;
      }
      // class-size-weighted breakdown rebuilds the global hit count
      double hits = 0.0;
      for (const auto &[cls, by_k]: r.per_class)
        hits += std::round(by_k.at(k) * static_cast<double>(r.class_counts.at(cls)));
      if (hits / static_cast<double>(n) != exact)
        ++violations;
    }
  }
  return { violations == 0,
           fmt("worked example %s; 200 random cases, %d identity violations",
               worked ? "exact miss + MaxFrag hit" : "WRONG", violations) };
}

// 9 -------------------------------------------------------------------------

Outcome determinism() {
  cli::ExperimentConfig c;
  c.families = { data::Family::kEsterification, data::Family::kAmideFormation,
                 data::Family::kEtherFormation };
  c.n_per_family = 30;
  c.max_scaffold_atoms = 3;
  c.clients = 3;
  c.fed.rounds = 3;
  c.fed.local_epochs = 1;
  c.fed.finetune_rounds = 1;
  c.fed.eval_beam_width = 2;
  c.fed.train.lr = 0.005;
  c.fed.train.batch_size = 8;
  c.model = toy_model();
  c.contamination = 0.1;
  c.ks = { 1, 3 };
  c.beam_width = 3;
  c.roundtrip = true;
  c.forward_epochs = 2;
  c.seed = 99;
  c.modes = { federation::Mode::kLocal, federation::Mode::kCentral,
              federation::Mode::kFedAvg, federation::Mode::kCkif };
  c.checkpoints = cli::CheckpointPolicy::kNone;
  c.validate();
  const auto one = cli::cmd_run(c, 1, std::nullopt).report.dump(2);
  const auto eight = cli::cmd_run(c, 8, std::nullopt).report.dump(2);
  return { one == eight, fmt("report of %zu bytes, 1 vs 8 threads %s", one.size(),
                             one == eight ? "byte-identical" : "DIFFER") };
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char *name;
  double limit_seconds;  // 0 for none
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char **argv) {
  const std::vector<Criterion> all {
    { 1, "weighting correctness", 5, weighting },
    { 2, "reduction identities", 120, reductions },
    { 3, "gradient fidelity", 60, gradients },
    { 4, "parser/canonicalizer properties", 60, canonicalizer },
    { 5, "tanimoto oracle equivalence", 10, tanimoto },
    { 6, "heterogeneity reproduction", 900, heterogeneity },
    { 7, "contamination robustness", 0, contamination },
    { 8, "metric identities", 0, metric_identities },
    { 9, "determinism across threads", 0, determinism },
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i)
    wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto &c: all) {
    if (!wanted.empty() && !wanted.count(c.id))
      continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = { false, std::string("exception: ") + e.what() };
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::string limit;
    if (c.limit_seconds > 0 && secs > c.limit_seconds) {
      o.pass = false;
      limit = fmt(", over the %.0f s limit", c.limit_seconds);
    }
    std::printf("criterion %d: %s  %s [%.1f s%s] %s\n", c.id, o.pass ? "PASS" : "FAIL",
                c.name, secs, limit.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass)
      ++failed;
  }
  return failed == 0 ? 0 : 1;
}
