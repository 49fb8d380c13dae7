#pragma once

// Canonical atom ranking by iterative neighborhood refinement with
// individualization on ties: refine Morgan-style ranks until stable, then
// branch over members of the first ambiguous cell and keep the
// lexicographically smallest certificate. Isomorphic graphs therefore
// produce identical certificates, and the hash is a 64-bit digest of that
// certificate.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "kgdiff/mol/graph.hpp"

namespace kgdiff::mol {

namespace detail_canon {

using Key = std::pair<int, std::vector<std::pair<int, int>>>;

inline void refine_ranks(const MolecularGraph& g, std::vector<int>& ranks) {
  const int n = g.num_atoms();
  int classes = 0;
  for (int r : ranks) classes = std::max(classes, r + 1);
  while (true) {
    std::vector<Key> keys(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      keys[size_t(i)].first = ranks[size_t(i)];
      for (int j = 0; j < n; ++j)
        if (g.A(i, j) != 0.0) keys[size_t(i)].second.emplace_back(int(g.A(i, j)), ranks[size_t(j)]);
      std::sort(keys[size_t(i)].second.begin(), keys[size_t(i)].second.end());
    }
    std::map<Key, int> order;
    for (const Key& k : keys) order.emplace(k, 0);
    int next = 0;
    for (auto& [k, v] : order) v = next++;
    for (int i = 0; i < n; ++i) ranks[size_t(i)] = order[keys[size_t(i)]];
    if (next == classes) return;
    classes = next;
  }
}

inline std::string certificate_from_ranks(const MolecularGraph& g, const std::vector<int>& ranks) {
  const int n = g.num_atoms();
  std::vector<int> atom_at(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) atom_at[size_t(ranks[size_t(i)])] = i;
  std::string cert = "n" + std::to_string(n) + "|";
  for (int p = 0; p < n; ++p) cert += std::to_string(g.atom_type(atom_at[size_t(p)])) + ",";
  cert += "|";
  std::vector<std::string> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (g.A(atom_at[size_t(i)], atom_at[size_t(j)]) != 0.0)
        edges.push_back(std::to_string(i) + "-" + std::to_string(j) + ":" +
                        std::to_string(int(g.A(atom_at[size_t(i)], atom_at[size_t(j)]))));
  std::sort(edges.begin(), edges.end());
  for (const std::string& e : edges) cert += e + ";";
  return cert;
}

struct SearchState {
  const MolecularGraph* g;
  std::string best_cert;
  std::vector<int> best_ranks;
  int budget = 20000;  // branch cap; molecules at desk scale never get close
};

inline void search(SearchState& st, std::vector<int> ranks) {
  if (st.budget-- <= 0) return;
  refine_ranks(*st.g, ranks);
  const int n = st.g->num_atoms();

  // find the first cell with a tie
  std::vector<int> count(size_t(n), 0);
  for (int r : ranks) ++count[size_t(r)];
  int tied_rank = -1;
  for (int r = 0; r < n; ++r)
    if (count[size_t(r)] > 1) {
      tied_rank = r;
      break;
    }

  if (tied_rank < 0) {
    std::string cert = certificate_from_ranks(*st.g, ranks);
    if (st.best_cert.empty() || cert < st.best_cert) {
      st.best_cert = std::move(cert);
      st.best_ranks = std::move(ranks);
    }
    return;
  }

  for (int a = 0; a < n; ++a) {
    if (ranks[size_t(a)] != tied_rank) continue;
    std::vector<int> child = ranks;
    for (int i = 0; i < n; ++i)
      child[size_t(i)] = 2 * child[size_t(i)] + (i == a ? 0 : 1);
    // densify
    std::vector<int> sorted = child;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (int& r : child)
      r = int(std::lower_bound(sorted.begin(), sorted.end(), r) - sorted.begin());
    search(st, std::move(child));
  }
}

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail_canon

struct CanonicalForm {
  std::vector<int> ranks;  // ranks[i] = canonical position of atom i
  std::string certificate;
};

inline CanonicalForm canonical_form(const MolecularGraph& g) {
  const int n = g.num_atoms();
  CanonicalForm out;
  if (n == 0) {
    out.certificate = "n0||";
    return out;
  }
  std::vector<detail_canon::Key> init(static_cast<size_t>(n));
  std::vector<int> ranks(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    init[size_t(i)].first = g.atom_type(i);
    init[size_t(i)].second = {{g.degree(i), int(g.valence_used(i))}};
  }
  std::map<detail_canon::Key, int> order;
  for (const auto& k : init) order.emplace(k, 0);
  int next = 0;
  for (auto& [k, v] : order) v = next++;
  for (int i = 0; i < n; ++i) ranks[size_t(i)] = order[init[size_t(i)]];

  detail_canon::SearchState st;
  st.g = &g;
  detail_canon::search(st, std::move(ranks));
  out.ranks = std::move(st.best_ranks);
  out.certificate = std::move(st.best_cert);
  return out;
}

inline std::string canonical_hash(const MolecularGraph& g) {
  const uint64_t h = detail_canon::fnv1a64(canonical_form(g).certificate);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace kgdiff::mol
