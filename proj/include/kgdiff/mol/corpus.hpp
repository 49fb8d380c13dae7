#pragma once

// Molecule corpus handling: SMILES files (one molecule per line, '#'
// comments), the empirical atom-count distribution used when sampling
// molecule sizes, training-set fingerprints, and the validity /
// uniqueness / novelty metrics shared by the CLI and the reward terms.

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "kgdiff/core/rng.hpp"
#include "kgdiff/mol/canonical.hpp"
#include "kgdiff/mol/fingerprint.hpp"
#include "kgdiff/mol/smiles.hpp"
#include "kgdiff/mol/validity.hpp"

namespace kgdiff::mol {

struct Corpus {
  std::vector<std::string> smiles;
  std::vector<MolecularGraph> graphs;
  AtomVocabulary vocab;

  std::vector<int> size_histogram() const {
    std::vector<int> h;
    for (const auto& g : graphs) {
      if (int(h.size()) <= g.num_atoms()) h.resize(size_t(g.num_atoms()) + 1, 0);
      ++h[size_t(g.num_atoms())];
    }
    return h;
  }

  int sample_size(Rng& rng) const {
    const int total = int(graphs.size());
    if (total == 0) throw std::runtime_error("corpus: empty, cannot sample a molecule size");
    int pick = int(rng.uniform_index(uint64_t(total)));
    return graphs[size_t(pick)].num_atoms();
  }

  std::vector<BitVector> fingerprints(int radius = 2, int nbits = 1024) const {
    std::vector<BitVector> fps;
    fps.reserve(graphs.size());
    for (const auto& g : graphs) fps.push_back(fingerprint(g, radius, nbits));
    return fps;
  }
};

struct CorpusLoadIssue {
  int line = 0;
  std::string text;
  std::string error;
};

inline Corpus load_corpus(const std::string& path, const AtomVocabulary& vocab,
                          std::vector<CorpusLoadIssue>* issues = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  Corpus corpus;
  corpus.vocab = vocab;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    try {
      corpus.graphs.push_back(parse_smiles(line, vocab));
      corpus.smiles.push_back(line);
    } catch (const SmilesError& e) {
      if (issues) issues->push_back({line_no, line, e.what()});
    }
  }
  return corpus;
}

struct GenerationMetrics {
  int total = 0;
  int valid = 0;
  int unique_among_valid = 0;
  int novel_among_valid = 0;
  double validity() const { return total == 0 ? 0.0 : double(valid) / double(total); }
  double uniqueness() const { return valid == 0 ? 0.0 : double(unique_among_valid) / double(valid); }
  double novelty() const { return valid == 0 ? 0.0 : double(novel_among_valid) / double(valid); }
};

struct MoleculeFlags {
  bool valid = false;
  bool unique = false;  // first occurrence of its canonical hash among valid samples
  bool novel = false;   // max training-set Tanimoto < threshold
};

// uniqueness = distinct canonical hashes among valid samples / valid samples,
// novelty = fraction of valid samples with max training-set similarity < 0.4
inline GenerationMetrics generation_metrics(const std::vector<MolecularGraph>& samples,
                                            const AtomVocabulary& vocab,
                                            const std::vector<BitVector>& training_fps,
                                            std::vector<MoleculeFlags>* per_molecule = nullptr,
                                            double novelty_threshold = 0.4) {
  GenerationMetrics m;
  m.total = int(samples.size());
  std::unordered_set<std::string> hashes;
  for (const auto& g : samples) {
    MoleculeFlags flags;
    if (validity_check(g, vocab).valid) {
      flags.valid = true;
      ++m.valid;
      flags.unique = hashes.insert(canonical_hash(g)).second;
      if (flags.unique) ++m.unique_among_valid;
      const double sim = training_fps.empty() ? 0.0 : max_tanimoto(fingerprint(g), training_fps);
      flags.novel = sim < novelty_threshold;
      if (flags.novel) ++m.novel_among_valid;
    }
    if (per_molecule) per_molecule->push_back(flags);
  }
  return m;
}

}  // namespace kgdiff::mol
