#pragma once

// SMILES subset for desk-scale molecule corpora: vocabulary atoms, -/=/#
// bonds, parenthesized branches, ring closures (digits and %nn), bracket
// atoms limited to [X] / [XHn] (no charges, isotopes, or stereo), and
// lowercase aromatic ring atoms which are kekulized to alternating
// single/double bonds at parse time. Hydrogens are implicit and never
// become nodes.
//
// The writer emits a canonical-ish kekulized form: depth-first from the
// lowest canonical-rank atom with ring-closure digits; output always
// re-parses to an isomorphic graph.

#include <cctype>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgdiff/mol/canonical.hpp"
#include "kgdiff/mol/graph.hpp"

namespace kgdiff::mol {

class SmilesError : public std::runtime_error {
 public:
  SmilesError(const std::string& msg, size_t pos)
      : std::runtime_error(msg + " at position " + std::to_string(pos)), pos_(pos) {}
  size_t position() const { return pos_; }

 private:
  size_t pos_;
};

namespace detail_smiles {

struct ParseAtom {
  int type = -1;
  bool aromatic = false;
  int explicit_h = 0;  // from bracket notation; counted against valence
  size_t src_pos = 0;
};

struct ParseBond {
  int u, v;
  int order;  // 1..3, or -1 = aromatic, resolved by kekulization
  size_t src_pos;
};

struct RingOpen {
  int atom;
  int pending_order;  // 0 = unspecified
  size_t src_pos;
};

// Assign double bonds on the aromatic subgraph: every aromatic atom with
// leftover valence capacity must take exactly one double bond, atoms with
// none must take none. Backtracking over the (small) aromatic components.
inline bool kekulize_match(const std::vector<std::vector<int>>& adj, const std::vector<bool>& must,
                           std::vector<int>& match, int u) {
  if (u == int(must.size())) return true;
  if (!must[size_t(u)] || match[size_t(u)] >= 0) return kekulize_match(adj, must, match, u + 1);
  for (int v : adj[size_t(u)]) {
    if (!must[size_t(v)] || match[size_t(v)] >= 0) continue;
    match[size_t(u)] = v;
    match[size_t(v)] = u;
    if (kekulize_match(adj, must, match, u + 1)) return true;
    match[size_t(u)] = -1;
    match[size_t(v)] = -1;
  }
  return false;
}

}  // namespace detail_smiles

inline MolecularGraph parse_smiles(const std::string& s, const AtomVocabulary& vocab) {
  using namespace detail_smiles;
  if (s.empty()) throw SmilesError("empty SMILES string", 0);

  std::vector<ParseAtom> atoms;
  std::vector<ParseBond> bonds;
  std::vector<std::pair<int, size_t>> branch_stack;  // (atom, '(' position)
  std::map<int, RingOpen> open_rings;

  int prev = -1;
  int pending_order = 0;  // explicit bond symbol awaiting its atom
  size_t pending_pos = 0;

  auto add_atom = [&](int type, bool aromatic, int explicit_h, size_t pos) {
    ParseAtom a;
    a.type = type;
    a.aromatic = aromatic;
    a.explicit_h = explicit_h;
    a.src_pos = pos;
    atoms.push_back(a);
    const int idx = int(atoms.size()) - 1;
    if (prev >= 0) {
      int order = pending_order;
      if (order == 0) order = (atoms[size_t(prev)].aromatic && aromatic) ? -1 : 1;
      bonds.push_back({prev, idx, order, pos});
    }
    pending_order = 0;
    prev = idx;
  };

  auto close_ring = [&](int digit, size_t pos) {
    if (prev < 0) throw SmilesError("ring closure before any atom", pos);
    auto it = open_rings.find(digit);
    if (it == open_rings.end()) {
      open_rings[digit] = {prev, pending_order, pos};
      pending_order = 0;
      return;
    }
    RingOpen open = it->second;
    open_rings.erase(it);
    if (open.atom == prev) throw SmilesError("ring closure bonds an atom to itself", pos);
    int order = 0;
    if (open.pending_order != 0 && pending_order != 0 && open.pending_order != pending_order)
      throw SmilesError("conflicting bond orders on ring closure " + std::to_string(digit), pos);
    order = open.pending_order != 0 ? open.pending_order : pending_order;
    if (order == 0)
      order = (atoms[size_t(open.atom)].aromatic && atoms[size_t(prev)].aromatic) ? -1 : 1;
    bonds.push_back({open.atom, prev, order, pos});
    pending_order = 0;
  };

  size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '-' || c == '=' || c == '#') {
      if (pending_order != 0) throw SmilesError("dangling bond symbol", i);
      pending_order = c == '-' ? 1 : (c == '=' ? 2 : 3);
      pending_pos = i;
      ++i;
    } else if (c == '(') {
      if (prev < 0) throw SmilesError("branch before any atom", i);
      if (pending_order != 0) throw SmilesError("bond symbol before branch open", i);
      branch_stack.emplace_back(prev, i);
      ++i;
    } else if (c == ')') {
      if (branch_stack.empty()) throw SmilesError("unmatched ')'", i);
      if (pending_order != 0) throw SmilesError("dangling bond symbol before ')'", pending_pos);
      prev = branch_stack.back().first;
      branch_stack.pop_back();
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      close_ring(c - '0', i);
      ++i;
    } else if (c == '%') {
      if (i + 2 >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
          !std::isdigit(static_cast<unsigned char>(s[i + 2])))
        throw SmilesError("'%' must be followed by two digits", i);
      close_ring((s[i + 1] - '0') * 10 + (s[i + 2] - '0'), i);
      i += 3;
    } else if (c == '[') {
      const size_t start = i;
      ++i;
      if (i >= s.size()) throw SmilesError("unterminated bracket atom", start);
      bool aromatic = false;
      std::string sym;
      if (std::islower(static_cast<unsigned char>(s[i]))) {
        aromatic = true;
        sym = std::string(1, char(std::toupper(static_cast<unsigned char>(s[i]))));
        ++i;
      } else if (std::isupper(static_cast<unsigned char>(s[i]))) {
        sym = std::string(1, s[i]);
        ++i;
        if (i < s.size() && std::islower(static_cast<unsigned char>(s[i])) && s[i] != 'h') {
          if (vocab.find(sym + s[i])) sym += s[i++];
        }
      } else {
        throw SmilesError("expected element symbol in bracket", i);
      }
      auto type = vocab.find(sym);
      if (!type) throw SmilesError("unknown atom symbol '" + sym + "'", start);
      int h = 0;
      if (i < s.size() && s[i] == 'H') {
        ++i;
        h = 1;
        if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
          h = s[i] - '0';
          ++i;
        }
      }
      if (i >= s.size() || s[i] != ']') throw SmilesError("expected ']'", i < s.size() ? i : s.size() - 1);
      ++i;
      add_atom(*type, aromatic, h, start);
    } else if (std::islower(static_cast<unsigned char>(c))) {
      std::string sym(1, char(std::toupper(static_cast<unsigned char>(c))));
      auto type = vocab.find(sym);
      if (!type) throw SmilesError("unknown aromatic atom symbol '" + std::string(1, c) + "'", i);
      add_atom(*type, true, 0, i);
      ++i;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      auto type = vocab.match_longest(s, i);
      if (!type) throw SmilesError("unknown atom symbol starting '" + std::string(1, c) + "'", i);
      const size_t len = vocab.symbol(*type).size();
      add_atom(*type, false, 0, i);
      i += len;
    } else {
      throw SmilesError("unsupported character '" + std::string(1, c) + "'", i);
    }
  }

  if (pending_order != 0) throw SmilesError("dangling bond symbol at end", pending_pos);
  if (!branch_stack.empty()) throw SmilesError("unclosed '('", branch_stack.back().second);
  if (!open_rings.empty()) {
    const auto& [digit, open] = *open_rings.begin();
    throw SmilesError("unclosed ring digit " + std::to_string(digit), open.src_pos);
  }

  const int n = int(atoms.size());

  // kekulize: capacity = max valence - (bonds with aromatic counted single)
  // - explicit hydrogens; capacity >= 1 marks atoms that must take exactly
  // one double bond
  std::vector<double> used(size_t(n), 0.0);
  for (const ParseBond& b : bonds) {
    const double o = b.order == -1 ? 1.0 : double(b.order);
    used[size_t(b.u)] += o;
    used[size_t(b.v)] += o;
  }
  std::vector<std::vector<int>> arom_adj(static_cast<size_t>(n));
  bool any_aromatic_bond = false;
  for (const ParseBond& b : bonds)
    if (b.order == -1) {
      arom_adj[size_t(b.u)].push_back(b.v);
      arom_adj[size_t(b.v)].push_back(b.u);
      any_aromatic_bond = true;
    }
  if (any_aromatic_bond) {
    std::vector<bool> must(size_t(n), false);
    for (int a = 0; a < n; ++a) {
      if (!atoms[size_t(a)].aromatic) continue;
      const double cap = double(vocab.max_valence(atoms[size_t(a)].type)) - used[size_t(a)] -
                         double(atoms[size_t(a)].explicit_h);
      must[size_t(a)] = cap >= 1.0 && !arom_adj[size_t(a)].empty();
    }
    std::vector<int> match(size_t(n), -1);
    if (!detail_smiles::kekulize_match(arom_adj, must, match, 0))
      throw SmilesError("kekulization failed: no alternating bond assignment exists",
                        atoms.empty() ? 0 : atoms[0].src_pos);
    for (ParseBond& b : bonds)
      if (b.order == -1) b.order = (match[size_t(b.u)] == b.v) ? 2 : 1;
  } else {
    for (ParseBond& b : bonds)
      if (b.order == -1) b.order = 1;
  }

  MolecularGraph g;
  g.discrete = true;
  g.X = Mat(n, vocab.size());
  g.A = Mat(n, n);
  for (int a = 0; a < n; ++a) g.X(a, atoms[size_t(a)].type) = 1.0;
  for (const ParseBond& b : bonds) {
    if (b.u == b.v) throw SmilesError("self-bond", b.src_pos);
    if (g.A(b.u, b.v) != 0.0) throw SmilesError("duplicate bond between atoms", b.src_pos);
    g.A(b.u, b.v) = double(b.order);
    g.A(b.v, b.u) = double(b.order);
  }

  // valence overflow reported against the atom's source position
  for (int a = 0; a < n; ++a) {
    const double total = g.valence_used(a) + double(atoms[size_t(a)].explicit_h);
    if (total > double(vocab.max_valence(atoms[size_t(a)].type)))
      throw SmilesError("valence overflow on atom '" + vocab.symbol(atoms[size_t(a)].type) + "'",
                        atoms[size_t(a)].src_pos);
  }
  return g;
}

inline std::string write_smiles(const MolecularGraph& g, const AtomVocabulary& vocab) {
  if (!g.discrete) throw std::invalid_argument("write_smiles: graph must be discrete");
  const int n = g.num_atoms();
  if (n == 0) throw std::invalid_argument("write_smiles: empty graph");
  int comp_count = 0;
  connected_components(g, &comp_count);
  if (comp_count != 1)
    throw std::invalid_argument("write_smiles: graph has " + std::to_string(comp_count) +
                                " fragments; take the largest component first");

  const CanonicalForm canon = canonical_form(g);

  // DFS from the atom with canonical rank 0, neighbors in rank order
  int root = 0;
  for (int i = 0; i < n; ++i)
    if (canon.ranks[size_t(i)] == 0) root = i;

  std::vector<std::vector<int>> children(static_cast<size_t>(n));
  std::vector<bool> visited(size_t(n), false);
  std::vector<std::pair<int, int>> ring_bonds;  // discovered back edges
  // iterative DFS to build the traversal tree
  {
    std::vector<int> stack{root};
    std::vector<int> parent(size_t(n), -1);
    visited[size_t(root)] = true;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      std::vector<int> nbrs;
      for (int v = 0; v < n; ++v)
        if (g.A(u, v) != 0.0) nbrs.push_back(v);
      std::sort(nbrs.begin(), nbrs.end(),
                [&](int a, int b) { return canon.ranks[size_t(a)] < canon.ranks[size_t(b)]; });
      for (int v : nbrs) {
        if (!visited[size_t(v)]) {
          visited[size_t(v)] = true;
          parent[size_t(v)] = u;
          children[size_t(u)].push_back(v);
          stack.push_back(v);
        } else if (v != parent[size_t(u)]) {
          if (u < v) ring_bonds.emplace_back(u, v);  // record each back edge once
        }
      }
    }
  }
  // stack-based DFS visits children LIFO; restore rank order for emission
  for (auto& c : children)
    std::sort(c.begin(), c.end(),
              [&](int a, int b) { return canon.ranks[size_t(a)] < canon.ranks[size_t(b)]; });

  // ring digits: open at the endpoint emitted first
  std::vector<std::vector<std::pair<int, int>>> ring_at(static_cast<size_t>(n));  // atom -> (other, bond index)
  for (size_t k = 0; k < ring_bonds.size(); ++k) {
    ring_at[size_t(ring_bonds[k].first)].emplace_back(ring_bonds[k].second, int(k));
    ring_at[size_t(ring_bonds[k].second)].emplace_back(ring_bonds[k].first, int(k));
  }
  std::vector<int> ring_digit(ring_bonds.size(), -1);
  std::vector<bool> digit_in_use(100, false);
  std::string out;

  auto bond_symbol = [](int order) -> const char* {
    switch (order) {
      case 2:
        return "=";
      case 3:
        return "#";
      default:
        return "";
    }
  };
  auto emit_ring_digit = [&](int digit) {
    if (digit < 10)
      out += char('0' + digit);
    else {
      out += '%';
      out += char('0' + digit / 10);
      out += char('0' + digit % 10);
    }
  };

  // recursive emitter; depth bounded by atom count
  auto emit = [&](auto&& self, int u) -> void {
    out += vocab.symbol(g.atom_type(u));
    for (auto [v, k] : ring_at[size_t(u)]) {
      if (ring_digit[size_t(k)] < 0) {
        int d = 1;
        while (d < 100 && digit_in_use[size_t(d)]) ++d;
        if (d >= 100) throw std::runtime_error("write_smiles: ring digit pool exhausted");
        ring_digit[size_t(k)] = d;
        digit_in_use[size_t(d)] = true;
        out += bond_symbol(g.bond_order(u, v));
        emit_ring_digit(d);
      } else {
        // closing occurrence: bond symbol already written at the opening
        emit_ring_digit(ring_digit[size_t(k)]);
        digit_in_use[size_t(ring_digit[size_t(k)])] = false;
      }
    }
    const auto& kids = children[size_t(u)];
    for (size_t idx = 0; idx < kids.size(); ++idx) {
      const int v = kids[idx];
      const bool last = idx + 1 == kids.size();
      if (!last) out += '(';
      out += bond_symbol(g.bond_order(u, v));
      self(self, v);
      if (!last) out += ')';
    }
  };
  emit(emit, root);
  return out;
}

}  // namespace kgdiff::mol
