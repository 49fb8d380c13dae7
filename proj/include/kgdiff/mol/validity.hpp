#pragma once

// Valence-sum validity: a discrete graph is valid when it has at least one
// atom, no self-bonds, bond orders in {0,1,2,3}, and every atom's bond
// order sum stays within its vocabulary valence. Fragmentation is reported
// but only the largest connected component counts as the molecule.

#include <string>
#include <vector>

#include "kgdiff/mol/graph.hpp"

namespace kgdiff::mol {

struct ValidityReport {
  bool valid = false;
  std::vector<std::string> violations;
  int largest_component_size = 0;
  bool connected = true;
};

inline ValidityReport validity_check(const MolecularGraph& g, const AtomVocabulary& vocab) {
  ValidityReport rep;
  const int n = g.num_atoms();
  if (n == 0) {
    rep.violations.push_back("empty graph");
    return rep;
  }
  if (!g.discrete) {
    rep.violations.push_back("graph is not discrete");
    return rep;
  }
  if (g.X.cols != vocab.size()) {
    rep.violations.push_back("atom-type width does not match vocabulary");
    return rep;
  }

  for (int i = 0; i < n; ++i) {
    if (g.A(i, i) != 0.0) rep.violations.push_back("self-bond at atom " + std::to_string(i));
    for (int j = i + 1; j < n; ++j) {
      const double a = g.A(i, j);
      if (a != g.A(j, i)) rep.violations.push_back("asymmetric bond " + std::to_string(i) + "-" + std::to_string(j));
      if (a != 0.0 && a != 1.0 && a != 2.0 && a != 3.0)
        rep.violations.push_back("non-integral bond order at " + std::to_string(i) + "-" + std::to_string(j));
    }
  }

  for (int i = 0; i < n; ++i) {
    const int type = g.atom_type(i);
    const double used = g.valence_used(i);
    if (used > double(vocab.max_valence(type)))
      rep.violations.push_back("valence overflow at atom " + std::to_string(i) + " (" + vocab.symbol(type) +
                               ": " + std::to_string(int(used)) + " > " +
                               std::to_string(vocab.max_valence(type)) + ")");
  }

  int comp_count = 0;
  std::vector<int> comp = connected_components(g, &comp_count);
  std::vector<int> sizes(size_t(comp_count), 0);
  for (int c : comp) ++sizes[size_t(c)];
  for (int s : sizes) rep.largest_component_size = std::max(rep.largest_component_size, s);
  rep.connected = comp_count == 1;

  rep.valid = rep.violations.empty();
  return rep;
}

}  // namespace kgdiff::mol
