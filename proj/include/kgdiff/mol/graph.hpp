#pragma once

// Molecular graph data model: node feature matrix X (one-hot atom types
// when discrete) and a symmetric bond-order matrix A with entries in
// {0,1,2,3} = none/single/double/triple. Hydrogens are implicit. The same
// container carries continuous-valued (X, A) during diffusion.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgdiff/core/mat.hpp"

namespace kgdiff::mol {

struct AtomSpec {
  std::string symbol;
  int max_valence;
};

// Ordered atom alphabet with a valence table. Default covers the QM9 heavy
// atoms.
class AtomVocabulary {
 public:
  AtomVocabulary() = default;
  explicit AtomVocabulary(std::vector<AtomSpec> atoms) : atoms_(std::move(atoms)) {
    for (const auto& a : atoms_) {
      if (a.max_valence <= 0) throw std::invalid_argument("vocabulary valences must be positive");
      for (const auto& b : atoms_)
        if (&a != &b && a.symbol == b.symbol)
          throw std::invalid_argument("duplicate vocabulary symbol " + a.symbol);
    }
  }

  static AtomVocabulary qm9() {
    return AtomVocabulary({{"C", 4}, {"N", 3}, {"O", 2}, {"F", 1}});
  }

  int size() const { return int(atoms_.size()); }
  const std::string& symbol(int i) const { return atoms_.at(size_t(i)).symbol; }
  int max_valence(int i) const { return atoms_.at(size_t(i)).max_valence; }

  std::optional<int> find(const std::string& symbol) const {
    for (size_t i = 0; i < atoms_.size(); ++i)
      if (atoms_[i].symbol == symbol) return int(i);
    return std::nullopt;
  }

  // longest symbol matching the input at `pos`; vocabulary symbols are
  // stored in their bare (uppercase-first) form
  std::optional<int> match_longest(const std::string& s, size_t pos) const {
    int best = -1;
    size_t best_len = 0;
    for (size_t i = 0; i < atoms_.size(); ++i) {
      const std::string& sym = atoms_[i].symbol;
      if (sym.size() > best_len && s.compare(pos, sym.size(), sym) == 0) {
        best = int(i);
        best_len = sym.size();
      }
    }
    if (best < 0) return std::nullopt;
    return best;
  }

 private:
  std::vector<AtomSpec> atoms_;
};

struct MolecularGraph {
  Mat X;  // N x M
  Mat A;  // N x N, symmetric, zero diagonal
  bool discrete = true;

  int num_atoms() const { return X.rows; }
  int num_types() const { return X.cols; }

  // argmax of the one-hot row; only meaningful for discrete graphs
  int atom_type(int i) const {
    int best = 0;
    for (int j = 1; j < X.cols; ++j)
      if (X(i, j) > X(i, best)) best = j;
    return best;
  }

  int bond_order(int i, int j) const { return int(A(i, j)); }

  double valence_used(int i) const {
    double s = 0.0;
    for (int j = 0; j < A.cols; ++j) s += A(i, j);
    return s;
  }

  int degree(int i) const {
    int d = 0;
    for (int j = 0; j < A.cols; ++j)
      if (A(i, j) != 0.0) ++d;
    return d;
  }
};

inline MolecularGraph make_molecule(int num_types, const std::vector<int>& atom_types,
                                    const std::vector<std::tuple<int, int, int>>& bonds) {
  MolecularGraph g;
  const int n = int(atom_types.size());
  g.X = Mat(n, num_types);
  g.A = Mat(n, n);
  g.discrete = true;
  for (int i = 0; i < n; ++i) {
    if (atom_types[size_t(i)] < 0 || atom_types[size_t(i)] >= num_types)
      throw std::invalid_argument("atom type out of vocabulary range");
    g.X(i, atom_types[size_t(i)]) = 1.0;
  }
  for (auto [i, j, order] : bonds) {
    if (i == j) throw std::invalid_argument("self-bond");
    g.A(i, j) = double(order);
    g.A(j, i) = double(order);
  }
  return g;
}

// connected components over nonzero bonds; returns component id per atom
inline std::vector<int> connected_components(const MolecularGraph& g, int* count = nullptr) {
  const int n = g.num_atoms();
  std::vector<int> comp(size_t(n), -1);
  int c = 0;
  std::vector<int> stack;
  for (int start = 0; start < n; ++start) {
    if (comp[size_t(start)] >= 0) continue;
    stack.push_back(start);
    comp[size_t(start)] = c;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v)
        if (g.A(u, v) != 0.0 && comp[size_t(v)] < 0) {
          comp[size_t(v)] = c;
          stack.push_back(v);
        }
    }
    ++c;
  }
  if (count) *count = c;
  return comp;
}

// keep only the atoms whose indices are listed, in the given order
inline MolecularGraph induced_subgraph(const MolecularGraph& g, const std::vector<int>& keep) {
  MolecularGraph out;
  out.discrete = g.discrete;
  const int n = int(keep.size());
  out.X = Mat(n, g.X.cols);
  out.A = Mat(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < g.X.cols; ++j) out.X(i, j) = g.X(keep[size_t(i)], j);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.A(i, j) = g.A(keep[size_t(i)], keep[size_t(j)]);
  return out;
}

inline MolecularGraph largest_component(const MolecularGraph& g) {
  if (g.num_atoms() == 0) return g;
  int count = 0;
  std::vector<int> comp = connected_components(g, &count);
  std::vector<int> sizes(size_t(count), 0);
  for (int c : comp) ++sizes[size_t(c)];
  int best = 0;
  for (int c = 1; c < count; ++c)
    if (sizes[size_t(c)] > sizes[size_t(best)]) best = c;  // first-largest wins ties
  std::vector<int> keep;
  for (int i = 0; i < g.num_atoms(); ++i)
    if (comp[size_t(i)] == best) keep.push_back(i);
  return induced_subgraph(g, keep);
}

}  // namespace kgdiff::mol
