#pragma once

// Continuous <-> discrete bridging for the diffusion model.
//
// Encoding (the documented affine map): one-hot atom rows become +/-1
// (x -> 2x - 1); bond orders stay in raw units {0,1,2,3}. Decoding inverts
// this with argmax over atom rows and nearest-order thresholds at
// 0.5 / 1.5 / 2.5 (half-integers round down). Nodes whose softmaxed row is
// too uncertain (max probability < node_keep_threshold) are dropped, then
// the largest connected component is kept.

#include <cmath>
#include <vector>

#include "kgdiff/mol/graph.hpp"

namespace kgdiff::mol {

struct QuantizeOptions {
  double node_keep_threshold = 0.5;  // on softmax max-probability
};

inline MolecularGraph encode_continuous(const MolecularGraph& g) {
  MolecularGraph out = g;
  out.discrete = false;
  for (double& v : out.X.a) v = 2.0 * v - 1.0;
  return out;
}

inline int nearest_bond_order(double a) {
  if (a <= 0.5) return 0;
  if (a <= 1.5) return 1;
  if (a <= 2.5) return 2;
  return 3;
}

inline MolecularGraph quantize(const MolecularGraph& g, const AtomVocabulary& vocab,
                               const QuantizeOptions& opts = {}) {
  if (g.discrete) return g;  // idempotent on already-discrete graphs

  const int n = g.num_atoms();
  const int m = g.num_types();

  // node confidence: softmax over the row, drop rows under threshold
  std::vector<int> keep;
  std::vector<int> types;
  for (int i = 0; i < n; ++i) {
    double mx = g.X(i, 0);
    int arg = 0;
    for (int j = 1; j < m; ++j)
      if (g.X(i, j) > mx) {
        mx = g.X(i, j);
        arg = j;
      }
    double z = 0.0;
    for (int j = 0; j < m; ++j) z += std::exp(g.X(i, j) - mx);
    const double prob = 1.0 / z;  // softmax at the argmax
    if (prob >= opts.node_keep_threshold) {
      keep.push_back(i);
      types.push_back(arg);
    }
  }

  MolecularGraph d;
  d.discrete = true;
  const int k = int(keep.size());
  d.X = Mat(k, vocab.size());
  d.A = Mat(k, k);
  for (int i = 0; i < k; ++i) d.X(i, types[size_t(i)]) = 1.0;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      const double sym = 0.5 * (g.A(keep[size_t(i)], keep[size_t(j)]) + g.A(keep[size_t(j)], keep[size_t(i)]));
      const int order = nearest_bond_order(sym);
      d.A(i, j) = double(order);
      d.A(j, i) = double(order);
    }
  if (k == 0) return d;  // all nodes dropped; validity_check will reject
  return largest_component(d);
}

}  // namespace kgdiff::mol
