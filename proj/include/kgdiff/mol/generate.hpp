#pragma once

// Synthetic desk-scale corpus: random valence-respecting molecules over the
// QM9 heavy-atom alphabet (tree growth, occasional ring closures, bond
// order upgrades), deduplicated by canonical hash and emitted as canonical
// SMILES. This is the bundled stand-in for a real QM9 subset; provenance is
// documented where the corpus ships.

#include <string>
#include <unordered_set>
#include <vector>

#include "kgdiff/core/rng.hpp"
#include "kgdiff/mol/canonical.hpp"
#include "kgdiff/mol/smiles.hpp"
#include "kgdiff/mol/validity.hpp"

namespace kgdiff::mol {

inline MolecularGraph random_molecule(const AtomVocabulary& vocab, int n_atoms, Rng& rng) {
  // C-heavy composition, fluorine rare, mirroring small-molecule corpora
  auto draw_type = [&]() {
    const double u = rng.uniform();
    if (u < 0.70) return 0;  // C
    if (u < 0.82) return 1;  // N
    if (u < 0.96) return 2;  // O
    return 3;                // F
  };

  std::vector<int> types;
  types.push_back(0);  // seed with carbon so attachment always has capacity
  for (int i = 1; i < n_atoms; ++i) types.push_back(draw_type());

  MolecularGraph g;
  g.discrete = true;
  g.X = Mat(n_atoms, vocab.size());
  g.A = Mat(n_atoms, n_atoms);
  for (int i = 0; i < n_atoms; ++i) g.X(i, types[size_t(i)]) = 1.0;

  auto capacity = [&](int i) { return double(vocab.max_valence(g.atom_type(i))) - g.valence_used(i); };

  // spanning tree: each new atom bonds to a random earlier atom with room
  for (int i = 1; i < n_atoms; ++i) {
    std::vector<int> hosts;
    for (int j = 0; j < i; ++j)
      if (capacity(j) >= 1.0) hosts.push_back(j);
    if (hosts.empty()) {
      // saturated prefix: re-type this atom as carbon bonded nowhere would
      // fragment, so retype atom i-1's neighbor choice instead by bonding
      // to the atom with the most recent free slot; give up gracefully via
      // a fresh carbon chain restart
      g.X(i, types[size_t(i)]) = 0.0;
      g.X(i, 0) = 1.0;
      hosts.push_back(i - 1);
      if (capacity(i - 1) < 1.0) {
        // truly stuck: leave the rest disconnected; caller filters by validity
        break;
      }
    }
    const int host = hosts[rng.uniform_index(hosts.size())];
    g.A(i, host) = 1.0;
    g.A(host, i) = 1.0;
  }

  // occasional ring closure between non-adjacent atoms with spare valence
  const int ring_attempts = int(rng.uniform_index(3));  // 0..2
  for (int k = 0; k < ring_attempts; ++k) {
    std::vector<std::pair<int, int>> options;
    for (int i = 0; i < n_atoms; ++i)
      for (int j = i + 2; j < n_atoms; ++j)
        if (g.A(i, j) == 0.0 && capacity(i) >= 1.0 && capacity(j) >= 1.0) options.emplace_back(i, j);
    if (options.empty()) break;
    auto [i, j] = options[rng.uniform_index(options.size())];
    g.A(i, j) = 1.0;
    g.A(j, i) = 1.0;
  }

  // bond order upgrades where both ends have room
  for (int i = 0; i < n_atoms; ++i)
    for (int j = i + 1; j < n_atoms; ++j) {
      if (g.A(i, j) == 0.0 || g.A(i, j) >= 3.0) continue;
      if (capacity(i) >= 1.0 && capacity(j) >= 1.0 && rng.uniform() < 0.25) {
        g.A(i, j) += 1.0;
        g.A(j, i) = g.A(i, j);
      }
    }

  return g;
}

// Distinct valid molecules as canonical SMILES strings.
inline std::vector<std::string> generate_corpus(const AtomVocabulary& vocab, int count, int min_atoms,
                                                int max_atoms, uint64_t seed) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  Rng root(seed);
  uint64_t attempt = 0;
  while (int(out.size()) < count) {
    Rng rng = root.substream("corpus-molecule", attempt++);
    const int n = min_atoms + int(rng.uniform_index(uint64_t(max_atoms - min_atoms + 1)));
    MolecularGraph g = random_molecule(vocab, n, rng);
    const ValidityReport rep = validity_check(g, vocab);
    if (!rep.valid || !rep.connected) continue;
    if (!seen.insert(canonical_hash(g)).second) continue;
    out.push_back(write_smiles(g, vocab));
    if (attempt > uint64_t(count) * 1000)
      throw std::runtime_error("generate_corpus: cannot reach the requested count; relax the size range");
  }
  return out;
}

}  // namespace kgdiff::mol
