#pragma once

// Deterministic random source. All randomness in the pipeline flows from one
// master seed through named substreams: substream("dsm", 3) derives a child
// seed by hashing the parent seed with the label and index, so adding or
// reordering consumers never perturbs unrelated streams, and per-item
// substreams keep results independent of batch or worker layout.
//
// Normal variates come from Box-Muller on raw 64-bit draws rather than
// std::normal_distribution, which is implementation-defined.

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "kgdiff/core/mat.hpp"

namespace kgdiff {

namespace detail {
inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // warm up so nearby seeds decorrelate
    for (int i = 0; i < 4; ++i) detail::splitmix64(state_);
  }

  uint64_t seed_for(std::string_view label, uint64_t index = 0) const {
    uint64_t h = detail::fnv1a64(label);
    uint64_t s = state_ ^ h;
    s = s * 0x2545f4914f6cdd1dull + index * 0x9e3779b97f4a7c15ull;
    uint64_t tmp = s;
    return detail::splitmix64(tmp);
  }

  Rng substream(std::string_view label, uint64_t index = 0) const {
    return Rng(seed_for(label, index));
  }

  uint64_t next_u64() { return detail::splitmix64(state_); }

  // uniform in [0, 1)
  double uniform() {
    return double(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform in [0, n)
  uint64_t uniform_index(uint64_t n) {
    // rejection-free modulo is fine at desk scale; bias is < n / 2^64
    return next_u64() % n;
  }

  bool coin() { return (next_u64() & 1ull) != 0; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Mat normal_mat(int rows, int cols) {
    Mat m(rows, cols);
    for (double& v : m.a) v = normal();
    return m;
  }

  Mat uniform_mat(int rows, int cols, double lo, double hi) {
    Mat m(rows, cols);
    for (double& v : m.a) v = uniform(lo, hi);
    return m;
  }

  // Fisher-Yates; std::shuffle is implementation-defined across libraries
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace kgdiff
