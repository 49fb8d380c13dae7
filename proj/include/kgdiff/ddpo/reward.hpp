#pragma once

// Multi-term molecule reward: r = k1 Q + k2 S + k3 C for valid molecules,
// exactly -k4 for invalid ones. Q and S are reduced rule-based proxies
// (q_proxy / s_proxy) rather than full QED / SAScore, which need external
// descriptor machinery; C mixes a validity term with a novelty term that
// penalizes training-set similarity above 0.4.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgdiff/mol/fingerprint.hpp"
#include "kgdiff/mol/validity.hpp"

namespace kgdiff::ddpo {

struct RewardWeights {
  double kappa1 = 0.0;  // drug-likeness
  double kappa2 = 0.0;  // synthesizability
  double kappa3 = 1.0;  // custom chemical property C
  double kappa4 = 1.0;  // invalidity penalty, must stay > 0
  double c_validity_weight = 0.7;
  double c_novelty_weight = 0.2;

  void validate() const {
    for (double k : {kappa1, kappa2, kappa3}) {
      if (!(k >= 0.0) || !std::isfinite(k)) throw std::invalid_argument("reward: kappa1..3 must be >= 0");
    }
    if (!(kappa4 > 0.0)) throw std::invalid_argument("reward: kappa4 must be > 0");
  }

  // unconditional profile: k = (0, 0, 1, k4), C = 0.7 r_val + 0.2 r_nov
  static RewardWeights unconditional() {
    RewardWeights w;
    w.kappa1 = 0.0;
    w.kappa2 = 0.0;
    w.kappa3 = 1.0;
    w.c_validity_weight = 0.7;
    w.c_novelty_weight = 0.2;
    return w;
  }

  // targeted profile: k = (0.4, 0.3, 0.2, k4), C = 0.7 r_val + 0.3 r_nov
  static RewardWeights targeted() {
    RewardWeights w;
    w.kappa1 = 0.4;
    w.kappa2 = 0.3;
    w.kappa3 = 0.2;
    w.c_validity_weight = 0.7;
    w.c_novelty_weight = 0.3;
    return w;
  }

  static std::optional<RewardWeights> named_profile(const std::string& name) {
    if (name == "unconditional") return unconditional();
    if (name == "targeted") return targeted();
    return std::nullopt;
  }
};

// cyclomatic ring count: bonds - atoms + components
inline int ring_count(const mol::MolecularGraph& g) {
  int edges = 0;
  for (int i = 0; i < g.num_atoms(); ++i)
    for (int j = i + 1; j < g.num_atoms(); ++j)
      if (g.A(i, j) != 0.0) ++edges;
  int comps = 0;
  mol::connected_components(g, &comps);
  return edges - g.num_atoms() + comps;
}

namespace detail_reward {

// length of the smallest cycle through edge (u, v): 1 + shortest u-v path
// with the edge removed; 0 when (u, v) is a bridge
inline int min_cycle_through_edge(const mol::MolecularGraph& g, int u, int v) {
  const int n = g.num_atoms();
  std::vector<int> dist(static_cast<size_t>(n), -1);
  std::vector<int> queue{u};
  dist[size_t(u)] = 0;
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    const int x = queue[qi];
    for (int y = 0; y < n; ++y) {
      if (g.A(x, y) == 0.0 || dist[size_t(y)] >= 0) continue;
      if ((x == u && y == v) || (x == v && y == u)) continue;  // the removed edge
      dist[size_t(y)] = dist[size_t(x)] + 1;
      queue.push_back(y);
    }
  }
  return dist[size_t(v)] < 0 ? 0 : dist[size_t(v)] + 1;
}

}  // namespace detail_reward

// fractional count of rings larger than `threshold`: each qualifying edge
// contributes 1/len, so an isolated L-ring counts as one
inline double macrocycle_count(const mol::MolecularGraph& g, int threshold = 8) {
  double count = 0.0;
  for (int i = 0; i < g.num_atoms(); ++i)
    for (int j = i + 1; j < g.num_atoms(); ++j) {
      if (g.A(i, j) == 0.0) continue;
      const int len = detail_reward::min_cycle_through_edge(g, i, j);
      if (len > threshold) count += 1.0 / double(len);
    }
  return count;
}

// Reduced drug-likeness proxy: the fraction of four rule checks passed.
//   heavy atoms in [4, 30]; H-bond donors (N/O with implicit H) <= 5;
//   H-bond acceptors (N + O count) <= 10; rings <= 4.
inline double q_proxy(const mol::MolecularGraph& g, const mol::AtomVocabulary& vocab) {
  int donors = 0, acceptors = 0;
  for (int i = 0; i < g.num_atoms(); ++i) {
    const std::string& sym = vocab.symbol(g.atom_type(i));
    if (sym != "N" && sym != "O") continue;
    ++acceptors;
    const double implicit_h = double(vocab.max_valence(g.atom_type(i))) - g.valence_used(i);
    if (implicit_h >= 1.0) ++donors;
  }
  int passed = 0;
  if (g.num_atoms() >= 4 && g.num_atoms() <= 30) ++passed;
  if (donors <= 5) ++passed;
  if (acceptors <= 10) ++passed;
  if (ring_count(g) <= 4) ++passed;
  return double(passed) / 4.0;
}

// Reduced synthetic-accessibility proxy: 1 - clamped complexity, where
// complexity = 0.15 (rings beyond 2) + 0.1 (atoms of degree >= 4)
//            + 0.3 (rings of size > 8).
inline double s_proxy(const mol::MolecularGraph& g) {
  constexpr double w_ring = 0.15, w_branch = 0.1, w_macro = 0.3;
  const int rings = ring_count(g);
  int quaternary = 0;
  for (int i = 0; i < g.num_atoms(); ++i)
    if (g.degree(i) >= 4) ++quaternary;
  const double complexity = w_ring * std::max(0, rings - 2) + w_branch * double(quaternary) +
                            w_macro * macrocycle_count(g);
  return 1.0 - std::clamp(complexity, 0.0, 1.0);
}

// 1 below the similarity threshold, a soft 1 - max_sim penalty above it
inline double novelty_term(const mol::MolecularGraph& g, const std::vector<mol::BitVector>& training_fps,
                           double threshold = 0.4) {
  if (training_fps.empty()) return 1.0;
  const double max_sim = mol::max_tanimoto(mol::fingerprint(g), training_fps);
  return max_sim < threshold ? 1.0 : 1.0 - max_sim;
}

// r in [-kappa4, kappa1 + kappa2 + kappa3]; the invalid branch pays -kappa4
// exactly, with no weighting applied
inline double reward(const mol::MolecularGraph& g, const RewardWeights& w,
                     const mol::AtomVocabulary& vocab, const std::vector<mol::BitVector>& training_fps) {
  w.validate();
  if (!mol::validity_check(g, vocab).valid) return -w.kappa4;
  const double r_val = 1.0;  // the molecule reached this branch
  const double c_term = w.c_validity_weight * r_val + w.c_novelty_weight * novelty_term(g, training_fps);
  return w.kappa1 * q_proxy(g, vocab) + w.kappa2 * s_proxy(g) + w.kappa3 * c_term;
}

}  // namespace kgdiff::ddpo
