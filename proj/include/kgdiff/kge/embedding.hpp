#pragma once

// Entity/relation embedding tables and triple scoring. Two model kinds:
//   TransE:  score(s,r,o) = -|| e_s + e_r - e_o ||_1
//   RotatE:  score(s,r,o) = -sum_i | e_s_i * r_i - e_o_i |  over d/2 complex
//            components, relation components constrained to unit modulus.
// Scores are <= 0; higher means more plausible. Constrained scoring maps
// signature-violating triples to -infinity, which is the rank-space
// equivalent of multiplying exp(score) by the indicator c_K.

#include <cmath>
#include <limits>
#include <stdexcept>

#include "kgdiff/core/mat.hpp"
#include "kgdiff/core/rng.hpp"
#include "kgdiff/kg/store.hpp"

namespace kgdiff::kge {

enum class ModelKind { TransE, RotatE };

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct EmbeddingTable {
  ModelKind kind = ModelKind::TransE;
  int dim = 0;
  Mat entities;   // entity_count x dim
  Mat relations;  // relation_count x dim; RotatE reads rows as d/2 (re, im) pairs

  int entity_count() const { return entities.rows; }
  int relation_count() const { return relations.rows; }
};

// Project every RotatE relation component back to unit modulus.
inline void normalize_relation_phases(EmbeddingTable& emb) {
  if (emb.kind != ModelKind::RotatE) return;
  for (int r = 0; r < emb.relations.rows; ++r) {
    for (int i = 0; i < emb.dim / 2; ++i) {
      double re = emb.relations(r, 2 * i);
      double im = emb.relations(r, 2 * i + 1);
      double mod = std::sqrt(re * re + im * im);
      if (mod < 1e-300) {
        emb.relations(r, 2 * i) = 1.0;
        emb.relations(r, 2 * i + 1) = 0.0;
      } else {
        emb.relations(r, 2 * i) = re / mod;
        emb.relations(r, 2 * i + 1) = im / mod;
      }
    }
  }
}

// Uniform [-6/sqrt(d), 6/sqrt(d)] init for entity and TransE relation
// vectors; RotatE relation phases drawn uniformly on the unit circle.
inline EmbeddingTable init_embeddings(ModelKind kind, int entity_count, int relation_count, int dim,
                                      Rng& rng) {
  if (dim <= 0) throw std::invalid_argument("embedding dim must be positive");
  if (kind == ModelKind::RotatE && dim % 2 != 0)
    throw std::invalid_argument("RotatE requires an even embedding dimension");
  EmbeddingTable emb;
  emb.kind = kind;
  emb.dim = dim;
  const double b = 6.0 / std::sqrt(double(dim));
  emb.entities = rng.uniform_mat(entity_count, dim, -b, b);
  if (kind == ModelKind::TransE) {
    emb.relations = rng.uniform_mat(relation_count, dim, -b, b);
  } else {
    emb.relations = Mat(relation_count, dim);
    for (int r = 0; r < relation_count; ++r)
      for (int i = 0; i < dim / 2; ++i) {
        double phase = rng.uniform(0.0, 2.0 * M_PI);
        emb.relations(r, 2 * i) = std::cos(phase);
        emb.relations(r, 2 * i + 1) = std::sin(phase);
      }
  }
  return emb;
}

inline double score_transe(const EmbeddingTable& emb, const kg::Triple& t) {
  double s = 0.0;
  for (int j = 0; j < emb.dim; ++j)
    s += std::abs(emb.entities(t.s, j) + emb.relations(t.r, j) - emb.entities(t.o, j));
  return -s;
}

inline double score_rotate(const EmbeddingTable& emb, const kg::Triple& t) {
  double s = 0.0;
  for (int i = 0; i < emb.dim / 2; ++i) {
    const double a = emb.entities(t.s, 2 * i), b = emb.entities(t.s, 2 * i + 1);
    const double c = emb.relations(t.r, 2 * i), d = emb.relations(t.r, 2 * i + 1);
    const double re = a * c - b * d - emb.entities(t.o, 2 * i);
    const double im = a * d + b * c - emb.entities(t.o, 2 * i + 1);
    s += std::sqrt(re * re + im * im);
  }
  return -s;
}

inline double score(const EmbeddingTable& emb, const kg::Triple& t) {
  return emb.kind == ModelKind::TransE ? score_transe(emb, t) : score_rotate(emb, t);
}

// phi(s,r,o): base score when c_K = 1, otherwise -inf (excluded from
// partition sums, ranked last).
inline double constrained_score(const EmbeddingTable& emb, const kg::Triple& t,
                                const kg::DomainConstraintSet& k) {
  if (!kg::constraint_indicator(t, k)) return kNegInf;
  return score(emb, t);
}

// d(phi)/d(embeddings) accumulated into same-shaped gradient tables,
// scaled by `weight`. Subgradient 0 at L1 kinks.
inline void accumulate_score_gradient(const EmbeddingTable& emb, const kg::Triple& t, double weight,
                                      Mat& grad_entities, Mat& grad_relations) {
  if (emb.kind == ModelKind::TransE) {
    for (int j = 0; j < emb.dim; ++j) {
      const double u = emb.entities(t.s, j) + emb.relations(t.r, j) - emb.entities(t.o, j);
      const double sg = u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
      grad_entities(t.s, j) -= weight * sg;
      grad_relations(t.r, j) -= weight * sg;
      grad_entities(t.o, j) += weight * sg;
    }
  } else {
    for (int i = 0; i < emb.dim / 2; ++i) {
      const double a = emb.entities(t.s, 2 * i), b = emb.entities(t.s, 2 * i + 1);
      const double c = emb.relations(t.r, 2 * i), d = emb.relations(t.r, 2 * i + 1);
      const double re = a * c - b * d - emb.entities(t.o, 2 * i);
      const double im = a * d + b * c - emb.entities(t.o, 2 * i + 1);
      const double mod = std::sqrt(re * re + im * im);
      if (mod < 1e-300) continue;
      const double gre = re / mod, gim = im / mod;
      // m = (a + ib)(c + id) - e_o; d|m| pushed through the product
      grad_entities(t.s, 2 * i) -= weight * (gre * c + gim * d);
      grad_entities(t.s, 2 * i + 1) -= weight * (-gre * d + gim * c);
      grad_relations(t.r, 2 * i) -= weight * (gre * a + gim * b);
      grad_relations(t.r, 2 * i + 1) -= weight * (-gre * b + gim * a);
      grad_entities(t.o, 2 * i) += weight * gre;
      grad_entities(t.o, 2 * i + 1) += weight * gim;
    }
  }
}

}  // namespace kgdiff::kge
