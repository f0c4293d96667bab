//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "fedretro/fingerprint.hpp"

#include <random>
#include <set>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace fedretro::fingerprint {
namespace {

using smiles::parse_smiles;

BitFingerprint from_bits(std::initializer_list<int> bits, int nbits = 256) {
  BitFingerprint fp(nbits);
  for (int b: bits)
    fp.set(b);
  return fp;
}

TEST(BitFingerprint, PopcountTracksSetBits) {
  BitFingerprint fp(512);
  fp.set(3);
  fp.set(3);
  fp.set(511);
  EXPECT_EQ(fp.popcount(), 2);
  EXPECT_TRUE(fp.test(511));
  EXPECT_FALSE(fp.test(4));
  EXPECT_THROW(BitFingerprint(300), BadDimension);
}

TEST(Ecfp, InvariantToAtomOrder) {
  EXPECT_EQ(ecfp(parse_smiles("CCO"), 2, 2048), ecfp(parse_smiles("OCC"), 2, 2048));
}

TEST(Ecfp, SingleCarbonRadiusZero) {
  const auto mol = parse_smiles("C");
  const BitFingerprint fp = ecfp(mol, 0, 2048);
  EXPECT_EQ(fp.popcount(), 1);
  // The one set bit is the atom invariant modulo the length.
  EXPECT_TRUE(fp.test(static_cast<int>(atom_invariant(mol, 0) % 2048)));
}

TEST(Ecfp, DifferentHeteroatomsDiffer) {
  for (int r = 0; r <= 3; ++r)
    EXPECT_NE(ecfp(parse_smiles("CCO"), r, 2048), ecfp(parse_smiles("CCN"), r, 2048));
}

TEST(Ecfp, PermutationInvariance) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto m = testing::random_molecule(rng);
    const auto order = testing::random_permutation(rng, m.num_atoms());
    const auto other = parse_smiles(smiles::write_smiles(m, order));
    EXPECT_EQ(ecfp(m, 2, 1024), ecfp(other, 2, 1024));
  }
}

TEST(Ecfp, AddingFragmentNeverUnsetsBits) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto a = testing::random_molecule(rng, 10);
    const auto b = testing::random_molecule(rng, 10);
    const std::string joined = smiles::write_smiles(a) + "." + smiles::write_smiles(b);
    const auto fa = ecfp(a);
    const auto fj = ecfp(parse_smiles(joined));
    for (int bit: fa.on_bits())
      ASSERT_TRUE(fj.test(bit));
  }
}

TEST(Tanimoto, Examples) {
  const auto x = from_bits({ 1, 5, 9 });
  EXPECT_DOUBLE_EQ(tanimoto(x, x), 1.0);
  EXPECT_DOUBLE_EQ(tanimoto(from_bits({ 0 }), from_bits({ 1 })), 0.0);
  EXPECT_DOUBLE_EQ(tanimoto(from_bits({ 0, 1 }), from_bits({ 1, 2 })), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(tanimoto(BitFingerprint(256), BitFingerprint(256)), 1.0);
  EXPECT_THROW(tanimoto(BitFingerprint(256), BitFingerprint(512)), LengthMismatch);
}

TEST(Tanimoto, SymmetricBoundedAndOneOnlyWhenEqual) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 2000; ++i) {
    BitFingerprint a(256), b(256);
    const int na = testing::uniform(rng, 1, 20), nb = testing::uniform(rng, 1, 20);
    for (int k = 0; k < na; ++k)
      a.set(testing::uniform(rng, 0, 40));
    for (int k = 0; k < nb; ++k)
      b.set(testing::uniform(rng, 0, 40));
    const double t = tanimoto(a, b);
    EXPECT_EQ(t, tanimoto(b, a));
    EXPECT_GE(t, 0.0);
    EXPECT_LE(t, 1.0);
    EXPECT_EQ(t == 1.0, a == b);
  }
}

TEST(MoleculeSimilarity, Examples) {
  EXPECT_DOUBLE_EQ(molecule_similarity("OCC", "CCO"), 1.0);
  EXPECT_DOUBLE_EQ(molecule_similarity("((", "CCO"), 0.0);
  const double s = molecule_similarity("CCO", "CCN");
  EXPECT_GT(s, 0.0);
  EXPECT_LT(s, 1.0);
  EXPECT_DOUBLE_EQ(s, tanimoto(ecfp(parse_smiles("CCO")), ecfp(parse_smiles("CCN"))));
  EXPECT_THROW(molecule_similarity("CCO", "C1CC"), smiles::SmilesError);
}

TEST(Fold, Examples) {
  const FoldedVector zero = fold(BitFingerprint(2048), 256);
  EXPECT_EQ(zero.dim, 256);
  for (double v: zero.values)
    EXPECT_EQ(v, 0.0);

  const auto fp = from_bits({ 0, 17, 255 });
  const FoldedVector same = fold(fp, 256);
  for (int i = 0; i < 256; ++i)
    EXPECT_EQ(same.values[i], fp.test(i) ? 1.0 : 0.0);

  const FoldedVector f = fold(from_bits({ 300 }, 512), 256);
  EXPECT_EQ(f.values[44], 1.0);
  EXPECT_EQ(std::count(f.values.begin(), f.values.end(), 1.0), 1);

  EXPECT_THROW(fold(BitFingerprint(2048), 300), BadDimension);
}

}  // namespace
}  // namespace fedretro::fingerprint
