//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "fedretro/cli.hpp"

namespace fedretro::cli {

using nlohmann::ordered_json;
namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> kKnownKeys {
  { "data",
    { "source", "path", "families", "n_per_family", "max_scaffold_atoms",
      "split" } },
  { "partition", { "strategy", "clients", "groups", "alpha", "client_sizes" } },
  { "federation",
    { "rounds", "local_epochs", "finetune_rounds", "mu", "tau", "proxy_cap",
      "eval_beam_width", "cache_similarity", "track_proxy" } },
  { "train", { "lr", "batch_size", "beta1", "beta2", "epsilon" } },
  { "model",
    { "fp_dim", "embed_dim", "hidden_dim", "max_len", "position_embedding",
      "fp_radius", "fp_bits" } },
  { "contamination", { "fraction" } },
  { "metrics", { "ks", "beam_width", "roundtrip", "forward_epochs" } },
  { "run", { "seed", "modes", "out", "checkpoints" } },
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos)
    return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string &s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty())
      out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string &key, const std::string &text) {
  std::istringstream is(text);
  T v {};
  is >> v;
  if (!is || !(is >> std::ws).eof())
    throw ConfigError(key + ": cannot parse '" + text + "'");
  return v;
}

bool parse_bool(const std::string &key, const std::string &text) {
  if (text == "true" || text == "1" || text == "yes")
    return true;
  if (text == "false" || text == "0" || text == "no")
    return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

data::Family parse_family(const std::string &name) {
  for (int f = 0; f < data::kNumFamilies; ++f)
    if (name == data::family_name(static_cast<data::Family>(f)))
      return static_cast<data::Family>(f);
  throw ConfigError("unknown reaction family '" + name + "'");
}

const char *strategy_name(data::PartitionStrategy s) {
  switch (s) {
  case data::PartitionStrategy::kByClass:
    return "by_class";
  case data::PartitionStrategy::kByClassGroups:
    return "by_class_groups";
  case data::PartitionStrategy::kRandomDirichlet:
    return "random_dirichlet";
  }
  return "unknown";
}

data::PartitionStrategy parse_strategy(const std::string &s) {
  for (const auto v: { data::PartitionStrategy::kByClass,
                       data::PartitionStrategy::kByClassGroups,
                       data::PartitionStrategy::kRandomDirichlet })
    if (s == strategy_name(v))
      return v;
  throw ConfigError("unknown partition strategy '" + s + "'");
}

const char *policy_name(CheckpointPolicy p) {
  switch (p) {
  case CheckpointPolicy::kAll:
    return "all";
  case CheckpointPolicy::kFinal:
    return "final";
  case CheckpointPolicy::kNone:
    return "none";
  }
  return "unknown";
}

CheckpointPolicy parse_policy(const std::string &s) {
  for (const auto p: { CheckpointPolicy::kAll, CheckpointPolicy::kFinal,
                       CheckpointPolicy::kNone })
    if (s == policy_name(p))
      return p;
  throw ConfigError("run.checkpoints must be all, final or none");
}

std::vector<federation::Mode> parse_modes(const std::string &s) {
  std::vector<federation::Mode> out;
  for (const auto &m: split_list(s)) {
    try {
      out.push_back(federation::parse_mode(m));
    } catch (const federation::InvalidConfig &e) {
      throw ConfigError(e.what());
    }
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!synthetic && data_path.empty())
    throw ConfigError("data.path is required when data.source = file");
  if (synthetic) {
    if (families.empty())
      throw ConfigError("data.families must list at least one family");
    if (std::set<data::Family>(families.begin(), families.end()).size()
        != families.size())
      throw ConfigError("data.families lists a family twice");
    if (n_per_family < 1)
      throw ConfigError("data.n_per_family must be positive");
    if (max_scaffold_atoms < 1 || max_scaffold_atoms > 8)
      throw ConfigError("data.max_scaffold_atoms must be in [1, 8]");
  }
  const double total = split[0] + split[1] + split[2];
  if (split[0] < 0 || split[1] < 0 || split[2] < 0 || std::abs(total - 1.0) > 1e-9)
    throw ConfigError("data.split must be three non-negative fractions summing to 1");
  if (clients < 1)
    throw ConfigError("partition.clients must be positive");
  if (partition.strategy == data::PartitionStrategy::kByClassGroups
      && static_cast<int>(partition.groups.size()) != clients)
    throw ConfigError("partition.groups must list one group per client");
  if (!client_sizes.empty() && static_cast<int>(client_sizes.size()) != clients)
    throw ConfigError("partition.client_sizes must list one size per client");
  if (!(contamination >= 0.0 && contamination <= 1.0))
    throw ConfigError("contamination.fraction must be in [0, 1]");
  if (ks.empty())
    throw ConfigError("metrics.ks must not be empty");
  for (const int k: ks)
    if (k < 1 || k > beam_width)
      throw ConfigError("metrics.ks entries must be in [1, beam_width]");
  if (beam_width < 1)
    throw ConfigError("metrics.beam_width must be positive");
  if (forward_epochs < 1)
    throw ConfigError("metrics.forward_epochs must be positive");
  if (modes.empty())
    throw ConfigError("run.modes must not be empty");
  try {
    model.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  try {
    fed.validate(clients);
  } catch (const federation::InvalidConfig &e) {
    throw ConfigError(std::string("federation: ") + e.what());
  }
}

ExperimentConfig parse_config(std::istream &is) {
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error &e) {
    throw ConfigError(e.what());
  }

  for (const auto &[section, body]: tree) {
    const auto known = kKnownKeys.find(section);
    if (known == kKnownKeys.end())
      throw ConfigError("unknown section [" + section + "]");
    if (body.empty() && !body.data().empty())
      throw ConfigError("key '" + section + "' outside any section");
    for (const auto &[key, _]: body)
      if (!known->second.count(key))
        throw ConfigError("unknown key " + section + "." + key);
  }

  ExperimentConfig c;
  auto get = [&](const std::string &path) -> std::optional<std::string> {
    if (const auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.')))
      return trim(*v);
    return std::nullopt;
  };
  auto num = [&]<class T>(const std::string &path, T &target) {
    if (const auto v = get(path))
      target = parse_number<T>(path, *v);
  };
  auto flag = [&](const std::string &path, bool &target) {
    if (const auto v = get(path))
      target = parse_bool(path, *v);
  };

  if (const auto v = get("data.source")) {
    if (*v == "synthetic")
      c.synthetic = true;
    else if (*v == "file")
      c.synthetic = false;
    else
      throw ConfigError("data.source must be synthetic or file");
  }
  if (const auto v = get("data.path"))
    c.data_path = *v;
  if (const auto v = get("data.families")) {
    c.families.clear();
    for (const auto &name: split_list(*v))
      c.families.push_back(parse_family(name));
  }
  num("data.n_per_family", c.n_per_family);
  num("data.max_scaffold_atoms", c.max_scaffold_atoms);
  if (const auto v = get("data.split")) {
    const auto parts = split_list(*v);
    if (parts.size() != 3)
      throw ConfigError("data.split needs three fractions");
    for (int i = 0; i < 3; ++i)
      c.split[i] = parse_number<double>("data.split", parts[i]);
  }

  if (const auto v = get("partition.strategy"))
    c.partition.strategy = parse_strategy(*v);
  num("partition.clients", c.clients);
  if (const auto v = get("partition.groups")) {
    for (const auto &group: split_list(*v, '|')) {
      std::vector<int> classes;
      for (const auto &x: split_list(group))
        classes.push_back(parse_number<int>("partition.groups", x));
      c.partition.groups.push_back(std::move(classes));
    }
  }
  num("partition.alpha", c.partition.alpha);
  if (const auto v = get("partition.client_sizes"))
    for (const auto &x: split_list(*v))
      c.client_sizes.push_back(parse_number<std::size_t>("partition.client_sizes", x));

  num("federation.rounds", c.fed.rounds);
  num("federation.local_epochs", c.fed.local_epochs);
  num("federation.finetune_rounds", c.fed.finetune_rounds);
  if (const auto v = get("federation.mu"); v && !v->empty())
    c.fed.mu = parse_number<double>("federation.mu", *v);
  num("federation.tau", c.fed.tau);
  if (const auto v = get("federation.proxy_cap"); v && !v->empty())
    c.fed.proxy_cap = parse_number<std::size_t>("federation.proxy_cap", *v);
  num("federation.eval_beam_width", c.fed.eval_beam_width);
  flag("federation.cache_similarity", c.fed.cache_similarity);
  flag("federation.track_proxy", c.fed.track_proxy);

  num("train.lr", c.fed.train.lr);
  num("train.batch_size", c.fed.train.batch_size);
  num("train.beta1", c.fed.train.beta1);
  num("train.beta2", c.fed.train.beta2);
  num("train.epsilon", c.fed.train.epsilon);

  num("model.fp_dim", c.model.fp_dim);
  num("model.embed_dim", c.model.embed_dim);
  num("model.hidden_dim", c.model.hidden_dim);
  num("model.max_len", c.model.max_len);
  flag("model.position_embedding", c.model.position_embedding);
  num("model.fp_radius", c.model.fingerprint.radius);
  num("model.fp_bits", c.model.fingerprint.nbits);

  num("contamination.fraction", c.contamination);

  if (const auto v = get("metrics.ks")) {
    c.ks.clear();
    for (const auto &x: split_list(*v))
      c.ks.push_back(parse_number<int>("metrics.ks", x));
  }
  num("metrics.beam_width", c.beam_width);
  flag("metrics.roundtrip", c.roundtrip);
  num("metrics.forward_epochs", c.forward_epochs);

  num("run.seed", c.seed);
  if (const auto v = get("run.modes"))
    c.modes = parse_modes(*v);
  if (const auto v = get("run.out"))
    c.out_dir = *v;
  if (const auto v = get("run.checkpoints"))
    c.checkpoints = parse_policy(*v);

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string &path) {
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot open config " + path);
  return parse_config(is);
}

ordered_json config_echo(const ExperimentConfig &c) {
  ordered_json j;
  std::vector<std::string> families;
  for (const auto f: c.families)
    families.push_back(data::family_name(f));
  j["data"] = {
    { "source", c.synthetic ? "synthetic" : "file" },
    { "path", c.data_path },
    { "families", families },
    { "n_per_family", c.n_per_family },
    { "max_scaffold_atoms", c.max_scaffold_atoms },
    { "split", c.split },
  };
  j["partition"] = {
    { "strategy", strategy_name(c.partition.strategy) },
    { "clients", c.clients },
    { "groups", c.partition.groups },
    { "alpha", c.partition.alpha },
    { "client_sizes", c.client_sizes },
  };
  j["federation"] = {
    { "rounds", c.fed.rounds },
    { "local_epochs", c.fed.local_epochs },
    { "finetune_rounds", c.fed.finetune_rounds },
    { "mu", c.fed.self_weight(c.clients) },
    { "tau", c.fed.tau },
    { "proxy_cap", c.fed.proxy_cap ? ordered_json(*c.fed.proxy_cap) : ordered_json() },
    { "eval_beam_width", c.fed.eval_beam_width },
    { "cache_similarity", c.fed.cache_similarity },
    { "track_proxy", c.fed.track_proxy },
  };
  j["train"] = {
    { "lr", c.fed.train.lr },
    { "batch_size", c.fed.train.batch_size },
    { "beta1", c.fed.train.beta1 },
    { "beta2", c.fed.train.beta2 },
    { "epsilon", c.fed.train.epsilon },
  };
  j["model"] = {
    { "fp_dim", c.model.fp_dim },
    { "embed_dim", c.model.embed_dim },
    { "hidden_dim", c.model.hidden_dim },
    { "max_len", c.model.max_len },
    { "position_embedding", c.model.position_embedding },
    { "fp_radius", c.model.fingerprint.radius },
    { "fp_bits", c.model.fingerprint.nbits },
    { "vocab_size", c.model.vocab_size() },
    { "vocab_digest", learner::Vocabulary::global().fingerprint() },
  };
  j["contamination"] = { { "fraction", c.contamination } };
  j["metrics"] = {
    { "ks", c.ks },
    { "beam_width", c.beam_width },
    { "roundtrip", c.roundtrip },
    { "forward_epochs", c.forward_epochs },
  };
  std::vector<std::string> modes;
  for (const auto m: c.modes)
    modes.push_back(federation::mode_name(m));
  j["run"] = {
    { "seed", c.seed },
    { "modes", modes },
    { "checkpoints", policy_name(c.checkpoints) },
  };
  return j;
}

ExperimentConfig parse_echo(const ordered_json &j) {
  try {
    ExperimentConfig c;
    const auto &d = j.at("data");
    c.synthetic = d.at("source") == "synthetic";
    c.data_path = d.at("path");
    c.families.clear();
    for (const auto &f: d.at("families"))
      c.families.push_back(parse_family(f.get<std::string>()));
    c.n_per_family = d.at("n_per_family");
    c.max_scaffold_atoms = d.at("max_scaffold_atoms");
    c.split = d.at("split").get<std::array<double, 3>>();

    const auto &p = j.at("partition");
    c.partition.strategy = parse_strategy(p.at("strategy"));
    c.clients = p.at("clients");
    c.partition.groups = p.at("groups").get<std::vector<std::vector<int>>>();
    c.partition.alpha = p.at("alpha");
    c.client_sizes = p.at("client_sizes").get<std::vector<std::size_t>>();

    const auto &f = j.at("federation");
    c.fed.rounds = f.at("rounds");
    c.fed.local_epochs = f.at("local_epochs");
    c.fed.finetune_rounds = f.at("finetune_rounds");
    c.fed.mu = f.at("mu").get<double>();
    c.fed.tau = f.at("tau");
    if (!f.at("proxy_cap").is_null())
      c.fed.proxy_cap = f.at("proxy_cap").get<std::size_t>();
    c.fed.eval_beam_width = f.at("eval_beam_width");
    c.fed.cache_similarity = f.at("cache_similarity");
    c.fed.track_proxy = f.at("track_proxy");

    const auto &t = j.at("train");
    c.fed.train.lr = t.at("lr");
    c.fed.train.batch_size = t.at("batch_size");
    c.fed.train.beta1 = t.at("beta1");
    c.fed.train.beta2 = t.at("beta2");
    c.fed.train.epsilon = t.at("epsilon");

    const auto &m = j.at("model");
    c.model.fp_dim = m.at("fp_dim");
    c.model.embed_dim = m.at("embed_dim");
    c.model.hidden_dim = m.at("hidden_dim");
    c.model.max_len = m.at("max_len");
    c.model.position_embedding = m.at("position_embedding");
    c.model.fingerprint.radius = m.at("fp_radius");
    c.model.fingerprint.nbits = m.at("fp_bits");
    if (m.at("vocab_digest") != learner::Vocabulary::global().fingerprint())
      throw ManifestMismatch("checkpoint was written with a different vocabulary");

    c.contamination = j.at("contamination").at("fraction");

    const auto &mt = j.at("metrics");
    c.ks = mt.at("ks").get<std::vector<int>>();
    c.beam_width = mt.at("beam_width");
    c.roundtrip = mt.at("roundtrip");
    c.forward_epochs = mt.at("forward_epochs");

    const auto &r = j.at("run");
    c.seed = r.at("seed");
    c.modes.clear();
    for (const auto &x: r.at("modes"))
      c.modes.push_back(federation::parse_mode(x.get<std::string>()));
    c.checkpoints = parse_policy(r.at("checkpoints"));
    c.validate();
    return c;
  } catch (const nlohmann::json::exception &e) {
    throw ManifestMismatch(std::string("malformed configuration echo: ") + e.what());
  }
}

}  // namespace fedretro::cli
