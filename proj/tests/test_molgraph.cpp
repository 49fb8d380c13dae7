#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "kgdiff/core/rng.hpp"
#include "kgdiff/mol/corpus.hpp"
#include "kgdiff/mol/quantize.hpp"

using namespace kgdiff;
using namespace kgdiff::mol;

namespace {

const AtomVocabulary& vocab() {
  static AtomVocabulary v = AtomVocabulary::qm9();
  return v;
}

MolecularGraph permute(const MolecularGraph& g, const std::vector<int>& perm) {
  const int n = g.num_atoms();
  MolecularGraph p;
  p.discrete = g.discrete;
  p.X = Mat(n, g.num_types());
  p.A = Mat(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < g.num_types(); ++j) p.X(perm[size_t(i)], j) = g.X(i, j);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p.A(perm[size_t(i)], perm[size_t(j)]) = g.A(i, j);
  return p;
}

}  // namespace

TEST(ParseSmiles, SingleAtom) {
  MolecularGraph g = parse_smiles("C", vocab());
  EXPECT_EQ(g.num_atoms(), 1);
  EXPECT_EQ(g.atom_type(0), 0);
  EXPECT_EQ(g.valence_used(0), 0.0);
}

TEST(ParseSmiles, Cyclopropane) {
  MolecularGraph g = parse_smiles("C1CC1", vocab());
  ASSERT_EQ(g.num_atoms(), 3);
  EXPECT_EQ(g.bond_order(0, 1), 1);
  EXPECT_EQ(g.bond_order(1, 2), 1);
  EXPECT_EQ(g.bond_order(2, 0), 1);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(g.valence_used(i), 2.0);
}

TEST(ParseSmiles, CarbonDioxide) {
  MolecularGraph g = parse_smiles("O=C=O", vocab());
  ASSERT_EQ(g.num_atoms(), 3);
  EXPECT_EQ(g.bond_order(0, 1), 2);
  EXPECT_EQ(g.bond_order(1, 2), 2);
  EXPECT_EQ(g.valence_used(1), 4.0);
  EXPECT_TRUE(validity_check(g, vocab()).valid);
}

TEST(ParseSmiles, BranchesAndTriple) {
  MolecularGraph g = parse_smiles("CC(C)(C)C#N", vocab());
  ASSERT_EQ(g.num_atoms(), 6);
  EXPECT_EQ(g.degree(1), 4);
  EXPECT_EQ(g.bond_order(4, 5), 3);
  EXPECT_TRUE(validity_check(g, vocab()).valid);
}

TEST(ParseSmiles, BenzeneKekulizes) {
  MolecularGraph g = parse_smiles("c1ccccc1", vocab());
  ASSERT_EQ(g.num_atoms(), 6);
  int doubles = 0, singles = 0;
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) {
      if (g.bond_order(i, j) == 2) ++doubles;
      if (g.bond_order(i, j) == 1) ++singles;
    }
  EXPECT_EQ(doubles, 3);
  EXPECT_EQ(singles, 3);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(g.valence_used(i), 3.0);  // one H each, implicit
  EXPECT_TRUE(validity_check(g, vocab()).valid);
}

TEST(ParseSmiles, PyridineAndPyrrole) {
  MolecularGraph pyridine = parse_smiles("c1ccncc1", vocab());
  EXPECT_TRUE(validity_check(pyridine, vocab()).valid);
  // pyridine nitrogen carries one double bond: valence 3, no implicit H
  for (int i = 0; i < pyridine.num_atoms(); ++i)
    if (pyridine.atom_type(i) == 1) EXPECT_EQ(pyridine.valence_used(i), 3.0);

  MolecularGraph pyrrole = parse_smiles("c1cc[nH]c1", vocab());
  EXPECT_TRUE(validity_check(pyrrole, vocab()).valid);
  // pyrrole nitrogen keeps two single ring bonds; the explicit H fills it
  for (int i = 0; i < pyrrole.num_atoms(); ++i)
    if (pyrrole.atom_type(i) == 1) EXPECT_EQ(pyrrole.valence_used(i), 2.0);
}

TEST(ParseSmiles, ErrorsCarryPositions) {
  auto expect_pos = [&](const std::string& smi, size_t pos) {
    try {
      parse_smiles(smi, vocab());
      FAIL() << smi;
    } catch (const SmilesError& e) {
      EXPECT_EQ(e.position(), pos) << smi << ": " << e.what();
    }
  };
  expect_pos("CZ", 1);          // unknown atom
  expect_pos("C(C", 1);         // unclosed '('
  expect_pos("CC)", 2);         // unmatched ')'
  expect_pos("C1CC", 1);        // unclosed ring digit
  expect_pos("C(F)(F)(F)(F)F", 0);  // valence overflow on first carbon
  expect_pos("C=", 1);          // dangling bond
}

TEST(ParseSmiles, RingClosureWithExplicitBond) {
  MolecularGraph g = parse_smiles("C=1CCCCC=1", vocab());
  EXPECT_EQ(g.bond_order(0, 5), 2);
  MolecularGraph g2 = parse_smiles("C1CCCCC=1", vocab());
  EXPECT_EQ(g2.bond_order(0, 5), 2);
  EXPECT_THROW(parse_smiles("C=1CCCCC#1", vocab()), SmilesError);
}

TEST(ParseSmiles, PercentRingDigits) {
  MolecularGraph a = parse_smiles("C%12CC%12", vocab());
  MolecularGraph b = parse_smiles("C1CC1", vocab());
  EXPECT_EQ(canonical_hash(a), canonical_hash(b));
}

TEST(WriteSmiles, SingleOxygen) {
  MolecularGraph g = make_molecule(4, {2}, {});
  EXPECT_EQ(write_smiles(g, vocab()), "O");
}

TEST(WriteSmiles, RoundTripCorpus) {
  const std::vector<std::string> corpus = {
      "C",          "O",           "N",          "C1CC1",      "O=C=O",     "CC(C)C",
      "c1ccccc1",   "c1ccncc1",    "c1cc[nH]c1", "CC(=O)O",    "C#N",       "CC(N)C(=O)O",
      "C1CCCCC1",   "C1CC1C(=O)N", "FC(F)F",     "COC",        "CC=CC#CC",  "C1CC2CC1C2",
      "c1ccc2ccccc2c1", "CN1CCCC1", "O=C1CCCCC1", "N#Cc1ccccc1"};
  for (const std::string& smi : corpus) {
    MolecularGraph g = parse_smiles(smi, vocab());
    const std::string out = write_smiles(g, vocab());
    MolecularGraph g2 = parse_smiles(out, vocab());
    EXPECT_EQ(canonical_form(g).certificate, canonical_form(g2).certificate)
        << smi << " -> " << out;
  }
}

TEST(WriteSmiles, CyclopropaneReParses) {
  MolecularGraph g = parse_smiles("C1CC1", vocab());
  MolecularGraph g2 = parse_smiles(write_smiles(g, vocab()), vocab());
  ASSERT_EQ(g2.num_atoms(), 3);
  EXPECT_EQ(g2.degree(0), 2);
  EXPECT_EQ(g2.degree(1), 2);
  EXPECT_EQ(g2.degree(2), 2);
}

TEST(WriteSmiles, RejectsFragmentedGraphs) {
  MolecularGraph g = make_molecule(4, {0, 0}, {});  // two disconnected carbons
  EXPECT_THROW(write_smiles(g, vocab()), std::invalid_argument);
}

TEST(Validity, OverbondedCarbonListsAtom) {
  MolecularGraph g = make_molecule(4, {0, 0, 0, 0, 0, 0},
                                   {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {0, 4, 1}, {0, 5, 1}});
  ValidityReport rep = validity_check(g, vocab());
  EXPECT_FALSE(rep.valid);
  ASSERT_FALSE(rep.violations.empty());
  EXPECT_NE(rep.violations[0].find("atom 0"), std::string::npos);
}

TEST(Validity, EmptyGraphInvalid) {
  MolecularGraph g;
  g.X = Mat(0, 4);
  g.A = Mat(0, 0);
  EXPECT_FALSE(validity_check(g, vocab()).valid);
}

TEST(Validity, FragmentReporting) {
  MolecularGraph g = make_molecule(4, {0, 0, 0}, {{0, 1, 1}});
  ValidityReport rep = validity_check(g, vocab());
  EXPECT_TRUE(rep.valid);
  EXPECT_FALSE(rep.connected);
  EXPECT_EQ(rep.largest_component_size, 2);
}

TEST(Fingerprint, IsomorphismInvariantAndDistinguishing) {
  MolecularGraph g = parse_smiles("CC(N)C(=O)O", vocab());
  BitVector fp = fingerprint(g);
  Rng rng(17);
  std::vector<int> perm(size_t(g.num_atoms()));
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 50; ++trial) {
    rng.shuffle(perm);
    EXPECT_TRUE(fp == fingerprint(permute(g, perm)));
  }

  BitVector methane = fingerprint(parse_smiles("C", vocab()));
  BitVector fluoromethane = fingerprint(parse_smiles("CF", vocab()));
  EXPECT_FALSE(methane == fluoromethane);
  EXPECT_LE(fp.popcount(), 1024);
}

TEST(Tanimoto, HandValues) {
  BitVector a(16), b(16), c(16), d(16);
  a.set(1);
  a.set(2);
  a.set(3);
  b.set(2);
  b.set(3);
  b.set(4);
  EXPECT_DOUBLE_EQ(tanimoto(a, a), 1.0);
  EXPECT_DOUBLE_EQ(tanimoto(a, b), 0.5);  // |{2,3}| / |{1,2,3,4}|
  c.set(7);
  d.set(9);
  EXPECT_DOUBLE_EQ(tanimoto(c, d), 0.0);
  EXPECT_DOUBLE_EQ(tanimoto(BitVector(16), BitVector(16)), 1.0);
  EXPECT_DOUBLE_EQ(tanimoto(a, b), tanimoto(b, a));
  EXPECT_THROW(tanimoto(a, BitVector(32)), std::invalid_argument);
}

TEST(CanonicalHash, PermutationInvariant) {
  MolecularGraph g = parse_smiles("CC1CC(N)C1C(=O)O", vocab());  // 9 heavy atoms
  const std::string h = canonical_hash(g);
  Rng rng(5);
  std::vector<int> perm(size_t(g.num_atoms()));
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 1000; ++trial) {
    rng.shuffle(perm);
    ASSERT_EQ(canonical_hash(permute(g, perm)), h);
  }
}

TEST(CanonicalHash, DistinctMoleculesDistinctHashes) {
  const std::vector<std::string> ten = {"C",      "CC",        "CCC",    "CCO",      "CC=O",
                                        "C1CC1",  "c1ccccc1",  "CC(C)C", "CC(N)C",   "FC(F)F"};
  std::unordered_set<std::string> hashes;
  for (const auto& s : ten) hashes.insert(canonical_hash(parse_smiles(s, vocab())));
  EXPECT_EQ(hashes.size(), ten.size());
  EXPECT_NE(canonical_hash(parse_smiles("C", vocab())), canonical_hash(parse_smiles("CC", vocab())));
}

TEST(Quantize, IdempotentOnDiscrete) {
  MolecularGraph g = parse_smiles("CC(=O)O", vocab());
  MolecularGraph q = quantize(g, vocab());
  EXPECT_EQ(max_abs_diff(q.X, g.X), 0.0);
  EXPECT_EQ(max_abs_diff(q.A, g.A), 0.0);
}

TEST(Quantize, BondThresholds) {
  MolecularGraph g;
  g.discrete = false;
  g.X = Mat(2, 4, {5, -5, -5, -5, 5, -5, -5, -5});  // confidently carbon
  g.A = Mat(2, 2);
  g.A(0, 1) = 1.49;
  g.A(1, 0) = 1.49;
  MolecularGraph q = quantize(g, vocab());
  EXPECT_EQ(q.bond_order(0, 1), 1);

  g.A(0, 1) = 1.51;
  g.A(1, 0) = 1.51;
  EXPECT_EQ(quantize(g, vocab()).bond_order(0, 1), 2);

  // half-integers round down; negatives clamp to none
  g.A(0, 1) = 1.5;
  g.A(1, 0) = 1.5;
  EXPECT_EQ(quantize(g, vocab()).bond_order(0, 1), 1);
  g.A(0, 1) = -0.7;
  g.A(1, 0) = -0.7;
  EXPECT_EQ(quantize(g, vocab()).num_atoms(), 1);  // bondless pair, largest component is one atom
}

TEST(Quantize, ArgmaxPicksAtomType) {
  MolecularGraph g;
  g.discrete = false;
  g.X = Mat(1, 4, {0.1, 0.7, 0.1, 0.1});
  g.A = Mat(1, 1);
  QuantizeOptions opts;
  opts.node_keep_threshold = 0.0;  // keep rule exercised separately
  MolecularGraph q = quantize(g, vocab(), opts);
  ASSERT_EQ(q.num_atoms(), 1);
  EXPECT_EQ(q.atom_type(0), 1);  // N
}

TEST(Quantize, UncertainNodesDropAndLargestComponentWins) {
  MolecularGraph g;
  g.discrete = false;
  // three confident atoms, one flat row
  g.X = Mat(4, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) g.X(i, j) = (j == 0) ? 2.0 : -2.0;
  for (int j = 0; j < 4; ++j) g.X(3, j) = 0.1;
  g.A = Mat(4, 4);
  auto bond = [&](int i, int j, double v) {
    g.A(i, j) = v;
    g.A(j, i) = v;
  };
  bond(0, 1, 1.1);
  bond(2, 3, 0.9);  // atom 2 only connects to the dropped atom
  MolecularGraph q = quantize(g, vocab());
  EXPECT_EQ(q.num_atoms(), 2);  // atoms 0-1 survive as the largest component

  // everything uncertain: empty graph, invalid
  MolecularGraph flat;
  flat.discrete = false;
  flat.X = Mat(2, 4, {0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1});
  flat.A = Mat(2, 2);
  MolecularGraph empty = quantize(flat, vocab());
  EXPECT_EQ(empty.num_atoms(), 0);
  EXPECT_FALSE(validity_check(empty, vocab()).valid);
}

TEST(Metrics, UniquenessAndNovelty) {
  std::vector<MolecularGraph> dup(100, parse_smiles("CCO", vocab()));
  GenerationMetrics m = generation_metrics(dup, vocab(), {});
  EXPECT_EQ(m.valid, 100);
  EXPECT_EQ(m.unique_among_valid, 1);
  EXPECT_DOUBLE_EQ(m.uniqueness(), 0.01);

  // training molecules themselves have novelty 0
  Corpus c;
  c.vocab = vocab();
  c.graphs = {parse_smiles("CCO", vocab()), parse_smiles("CCC", vocab())};
  auto fps = c.fingerprints();
  GenerationMetrics m2 = generation_metrics(c.graphs, vocab(), fps);
  EXPECT_EQ(m2.novel_among_valid, 0);
}
