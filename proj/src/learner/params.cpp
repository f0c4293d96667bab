//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

#include "fedretro/learner.hpp"
#include "fedretro/rng.hpp"

namespace fedretro::learner {

void ModelConfig::validate() const {
  if (fp_dim <= 0 || fingerprint.nbits % fp_dim != 0)
    throw std::invalid_argument("fp_dim must divide the fingerprint length");
  if (embed_dim <= 0 || hidden_dim <= 0)
    throw std::invalid_argument("embedding and hidden sizes must be positive");
  if (max_len < 2)
    throw std::invalid_argument("max_len must be at least 2");
  if (fingerprint.radius < 0 || fingerprint.radius > 4)
    throw std::invalid_argument("fingerprint radius must be in [0, 4]");
}

std::vector<Segment> make_layout(const ModelConfig &cfg) {
  cfg.validate();
  const std::size_t v = cfg.vocab_size(), h = cfg.hidden_dim,
                    d = cfg.embed_dim, f = cfg.fp_dim, l = cfg.max_len;
  std::vector<Segment> layout;
  std::size_t offset = 0;
  auto add = [&](const char *name, std::size_t rows, std::size_t cols,
                 bool bias) {
    layout.push_back({ name, offset, rows, cols, bias });
    offset += rows * cols;
  };
  add("fp_proj", h, f, false);
  add("embed", v, d, false);
  add("prev1_proj", h, d, false);
  add("prev2_proj", h, d, false);
  if (cfg.position_embedding)
    add("position", l, h, false);
  add("hidden_bias", 1, h, true);
  add("out_proj", v, h, false);
  add("out_bias", 1, v, true);
  return layout;
}

const Segment &ParamVector::segment(std::string_view name) const {
  for (const auto &s: layout)
    if (s.name == name)
      return s;
  throw ShapeMismatch("no parameter block named " + std::string(name));
}

std::span<double> ParamVector::block(std::string_view name) {
  const Segment &s = segment(name);
  return std::span<double>(values).subspan(s.offset, s.size());
}

std::span<const double> ParamVector::block(std::string_view name) const {
  const Segment &s = segment(name);
  return std::span<const double>(values).subspan(s.offset, s.size());
}

ParamVector init_params(const ModelConfig &cfg, std::uint64_t seed) {
  ParamVector p;
  p.layout = make_layout(cfg);
  const auto &last = p.layout.back();
  p.values.assign(last.offset + last.size(), 0.0);
  const std::uint64_t key = derive_seed(seed, 0x1a17);
  for (const auto &s: p.layout) {
    if (s.is_bias)
      continue;
    for (std::size_t i = s.offset; i < s.offset + s.size(); ++i)
      p.values[i] = -0.08 + 0.16 * counter_uniform(key, i);
  }
  return p;
}

ParamVector zeros_like(const ParamVector &p) {
  ParamVector z;
  z.layout = p.layout;
  z.values.assign(p.values.size(), 0.0);
  return z;
}

namespace {

constexpr char kMagic[4] = { 'F', 'R', 'P', 'V' };
constexpr std::uint32_t kFormatVersion = 1;

void put_u64(std::ostream &os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i)
    buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

std::uint64_t get_u64(std::istream &is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char *>(buf), 8))
    throw std::runtime_error("truncated parameter file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i)
    v = (v << 8) | buf[i];
  return v;
}

}  // namespace

void save_params(std::ostream &os, const ParamVector &p) {
  os.write(kMagic, 4);
  put_u64(os, kFormatVersion);
  put_u64(os, p.layout.size());
  for (const auto &s: p.layout) {
    put_u64(os, s.name.size());
    os.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
    put_u64(os, s.offset);
    put_u64(os, s.rows);
    put_u64(os, s.cols);
    put_u64(os, s.is_bias ? 1 : 0);
  }
  put_u64(os, p.values.size());
  for (const double v: p.values)
    put_u64(os, std::bit_cast<std::uint64_t>(v));
}

ParamVector load_params(std::istream &is) {
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic))
    throw std::runtime_error("not a parameter file");
  if (get_u64(is) != kFormatVersion)
    throw std::runtime_error("unsupported parameter file version");
  ParamVector p;
  const std::uint64_t nseg = get_u64(is);
  if (nseg > 1024)
    throw std::runtime_error("corrupt segment table");
  std::size_t expected = 0;
  for (std::uint64_t i = 0; i < nseg; ++i) {
    Segment s;
    const std::uint64_t len = get_u64(is);
    if (len > 256)
      throw std::runtime_error("corrupt segment name");
    s.name.resize(len);
    is.read(s.name.data(), static_cast<std::streamsize>(len));
    s.offset = get_u64(is);
    s.rows = get_u64(is);
    s.cols = get_u64(is);
    s.is_bias = get_u64(is) != 0;
    if (s.offset != expected)
      throw std::runtime_error("segment table is not contiguous");
    expected += s.size();
    p.layout.push_back(std::move(s));
  }
  const std::uint64_t n = get_u64(is);
  if (n != expected)
    throw std::runtime_error("parameter count does not match segment table");
  p.values.resize(n);
  for (auto &v: p.values)
    v = std::bit_cast<double>(get_u64(is));
  return p;
}

void save_params(const std::string &path, const ParamVector &p) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw std::runtime_error("cannot write " + path);
  save_params(os, p);
}

ParamVector load_params(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw std::runtime_error("cannot read " + path);
  return load_params(is);
}

std::vector<double> conditioning_vector(const smiles::MolGraph &mol,
                                        const ModelConfig &cfg) {
  const auto fp =
      fingerprint::ecfp(mol, cfg.fingerprint.radius, cfg.fingerprint.nbits);
  return fingerprint::fold(fp, cfg.fp_dim).values;
}

std::vector<double> conditioning_vector(std::string_view smiles,
                                        const ModelConfig &cfg) {
  try {
    return conditioning_vector(smiles::parse_smiles(smiles), cfg);
  } catch (const smiles::SmilesError &) {
    return std::vector<double>(cfg.fp_dim, 0.0);
  }
}

std::optional<Example> make_example(std::string_view input_smiles,
                                    std::string_view target_smiles,
                                    const ModelConfig &cfg) {
  Example ex;
  try {
    ex.tokens = Vocabulary::global().encode(smiles::tokenize(target_smiles));
  } catch (const smiles::TokenError &) {
    return std::nullopt;
  }
  if (ex.tokens.empty() || static_cast<int>(ex.tokens.size()) + 1 > cfg.max_len)
    return std::nullopt;
  ex.fp = conditioning_vector(input_smiles, cfg);
  return ex;
}

}  // namespace fedretro::learner
