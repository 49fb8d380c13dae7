#pragma once

// Circular (Morgan-style) fingerprints: per-atom shell invariants are
// iteratively hashed with sorted (bond order, neighbor invariant) lists up
// to the requested radius, and each shell sets one bit. Deterministic and
// invariant under node relabeling.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "kgdiff/mol/graph.hpp"

namespace kgdiff::mol {

class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(int nbits) : nbits_(nbits), blocks_(size_t((nbits + 63) / 64), 0) {}

  int nbits() const { return nbits_; }
  void set(int i) { blocks_[size_t(i / 64)] |= 1ull << (i % 64); }
  bool test(int i) const { return (blocks_[size_t(i / 64)] >> (i % 64)) & 1ull; }

  int popcount() const {
    int c = 0;
    for (uint64_t b : blocks_) c += __builtin_popcountll(b);
    return c;
  }

  friend int intersection_count(const BitVector& a, const BitVector& b) {
    int c = 0;
    for (size_t i = 0; i < a.blocks_.size(); ++i) c += __builtin_popcountll(a.blocks_[i] & b.blocks_[i]);
    return c;
  }
  friend int union_count(const BitVector& a, const BitVector& b) {
    int c = 0;
    for (size_t i = 0; i < a.blocks_.size(); ++i) c += __builtin_popcountll(a.blocks_[i] | b.blocks_[i]);
    return c;
  }
  friend bool operator==(const BitVector&, const BitVector&) = default;

 private:
  int nbits_ = 0;
  std::vector<uint64_t> blocks_;
};

namespace detail_fp {
inline uint64_t mix(uint64_t h, uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  h *= 0xff51afd7ed558ccdull;
  return h ^ (h >> 33);
}
}  // namespace detail_fp

inline BitVector fingerprint(const MolecularGraph& g, int radius = 2, int nbits = 1024) {
  if (nbits <= 0) throw std::invalid_argument("fingerprint: nbits must be positive");
  const int n = g.num_atoms();
  BitVector fp(nbits);

  std::vector<uint64_t> inv(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    uint64_t h = detail_fp::mix(0x12345, uint64_t(g.atom_type(i)) + 1);
    h = detail_fp::mix(h, uint64_t(g.degree(i)));
    h = detail_fp::mix(h, uint64_t(g.valence_used(i)));
    inv[size_t(i)] = h;
    fp.set(int(h % uint64_t(nbits)));
  }

  for (int r = 0; r < radius; ++r) {
    std::vector<uint64_t> next(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<uint64_t, uint64_t>> shell;
      for (int j = 0; j < n; ++j)
        if (g.A(i, j) != 0.0) shell.emplace_back(uint64_t(g.A(i, j)), inv[size_t(j)]);
      std::sort(shell.begin(), shell.end());
      uint64_t h = detail_fp::mix(inv[size_t(i)], 0xabcdef);
      for (auto [order, nb] : shell) {
        h = detail_fp::mix(h, order);
        h = detail_fp::mix(h, nb);
      }
      next[size_t(i)] = h;
      fp.set(int(h % uint64_t(nbits)));
    }
    inv = std::move(next);
  }
  return fp;
}

// |intersection| / |union|; two all-zero vectors count as identical
inline double tanimoto(const BitVector& a, const BitVector& b) {
  if (a.nbits() != b.nbits()) throw std::invalid_argument("tanimoto: fingerprint lengths differ");
  const int u = union_count(a, b);
  if (u == 0) return 1.0;
  return double(intersection_count(a, b)) / double(u);
}

inline double max_tanimoto(const BitVector& fp, const std::vector<BitVector>& pool) {
  double best = 0.0;
  for (const BitVector& p : pool) best = std::max(best, tanimoto(fp, p));
  return best;
}

}  // namespace kgdiff::mol
