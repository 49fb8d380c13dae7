#pragma once

// Training losses for the embedding models: margin ranking on SLCWA
// negatives, and the exact MLE objective whose partition function is
// enumerated over the constrained triple space K. Exhaustive Z is the
// desk-scale substitute for the circuit-compiled evaluation of the
// large-scale setting; semantics are identical.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "kgdiff/kge/embedding.hpp"

namespace kgdiff::kge {

// max(0, pos + gamma - neg) on nonnegative distances
inline double margin_loss(double pos_dist, double neg_dist, double gamma) {
  return std::max(0.0, pos_dist + gamma - neg_dist);
}

// L2 translation distance used by the SLCWA margin objective for TransE.
inline double distance_transe_l2(const EmbeddingTable& emb, const kg::Triple& t) {
  double s = 0.0;
  for (int j = 0; j < emb.dim; ++j) {
    const double u = emb.entities(t.s, j) + emb.relations(t.r, j) - emb.entities(t.o, j);
    s += u * u;
  }
  return std::sqrt(s);
}

// Model distance for margin training: L2 translation for TransE, modulus
// sum (= -score) for RotatE.
inline double margin_distance(const EmbeddingTable& emb, const kg::Triple& t) {
  return emb.kind == ModelKind::TransE ? distance_transe_l2(emb, t) : -score_rotate(emb, t);
}

// d(margin_distance)/d(embeddings) scaled by weight.
inline void accumulate_margin_distance_gradient(const EmbeddingTable& emb, const kg::Triple& t,
                                                double weight, Mat& grad_entities, Mat& grad_relations) {
  if (emb.kind == ModelKind::TransE) {
    const double dist = distance_transe_l2(emb, t);
    if (dist < 1e-12) return;
    for (int j = 0; j < emb.dim; ++j) {
      const double u = emb.entities(t.s, j) + emb.relations(t.r, j) - emb.entities(t.o, j);
      const double g = weight * u / dist;
      grad_entities(t.s, j) += g;
      grad_relations(t.r, j) += g;
      grad_entities(t.o, j) -= g;
    }
  } else {
    // distance = -score, so flip the score gradient
    accumulate_score_gradient(emb, t, -weight, grad_entities, grad_relations);
  }
}

struct PartitionResult {
  double log_z = 0.0;
  double z = 0.0;
  int64_t terms_in_k = 0;  // triples with c_K = 1
};

// Z = sum_{(s,r,o) in K} exp(phi). Enumerated exhaustively with a term cap
// and computed through log-sum-exp; triples outside K contribute nothing.
inline PartitionResult log_partition_function(const EmbeddingTable& emb, const kg::KnowledgeGraph& kg,
                                              const kg::DomainConstraintSet& k,
                                              int64_t term_cap = 10'000'000) {
  const int64_t ents = kg.entity_count();
  const int64_t rels = kg.relation_count();
  const int64_t total = ents * ents * rels;
  if (total > term_cap)
    throw std::runtime_error("partition_function: " + std::to_string(total) +
                             " terms exceed the cap of " + std::to_string(term_cap) +
                             "; this exact evaluation is meant for desk-scale graphs");
  if (total == 0) throw std::runtime_error("partition_function: empty triple space");

  double max_phi = kNegInf;
  for (kg::RelationId r = 0; r < rels; ++r)
    for (kg::EntityId s = 0; s < ents; ++s)
      for (kg::EntityId o = 0; o < ents; ++o) {
        const double phi = constrained_score(emb, {s, r, o}, k);
        if (phi > max_phi) max_phi = phi;
      }
  if (max_phi == kNegInf)
    throw std::runtime_error("partition_function: constraint set K admits no triples");

  double acc = 0.0;
  int64_t in_k = 0;
  for (kg::RelationId r = 0; r < rels; ++r)
    for (kg::EntityId s = 0; s < ents; ++s)
      for (kg::EntityId o = 0; o < ents; ++o) {
        const double phi = constrained_score(emb, {s, r, o}, k);
        if (phi == kNegInf) continue;
        ++in_k;
        acc += std::exp(phi - max_phi);
      }

  PartitionResult res;
  res.log_z = max_phi + std::log(acc);
  res.z = std::exp(res.log_z);
  res.terms_in_k = in_k;
  return res;
}

inline double partition_function(const EmbeddingTable& emb, const kg::KnowledgeGraph& kg,
                                 const kg::DomainConstraintSet& k, int64_t term_cap = 10'000'000) {
  return log_partition_function(emb, kg, k, term_cap).z;
}

// loss = |G| log Z - sum_{t in G} phi(t), the negated MLE objective.
inline double mle_loss(const EmbeddingTable& emb, const kg::KnowledgeGraph& kg,
                       const kg::DomainConstraintSet& k, int64_t term_cap = 10'000'000) {
  const PartitionResult part = log_partition_function(emb, kg, k, term_cap);
  double sum_phi = 0.0;
  for (const kg::Triple& t : kg.triples) {
    const double phi = constrained_score(emb, t, k);
    if (phi == kNegInf)
      throw std::runtime_error("mle_loss: training triple (" + kg.entities.label(t.s) + ", " +
                               kg.relations.label(t.r) + ", " + kg.entities.label(t.o) +
                               ") violates the constraint set");
    sum_phi += phi;
  }
  return double(kg.triples.size()) * part.log_z - sum_phi;
}

// Analytic d(mle_loss)/d(embeddings): |G| * softmax-weighted score
// gradients over K minus score gradients over the training triples.
inline double mle_loss_gradient(const EmbeddingTable& emb, const kg::KnowledgeGraph& kg,
                                const kg::DomainConstraintSet& k, Mat& grad_entities,
                                Mat& grad_relations, int64_t term_cap = 10'000'000) {
  const PartitionResult part = log_partition_function(emb, kg, k, term_cap);
  const double n = double(kg.triples.size());

  grad_entities = Mat(emb.entities.rows, emb.entities.cols);
  grad_relations = Mat(emb.relations.rows, emb.relations.cols);

  const int64_t ents = kg.entity_count();
  const int64_t rels = kg.relation_count();
  for (kg::RelationId r = 0; r < rels; ++r)
    for (kg::EntityId s = 0; s < ents; ++s)
      for (kg::EntityId o = 0; o < ents; ++o) {
        const kg::Triple t{s, r, o};
        const double phi = constrained_score(emb, t, k);
        if (phi == kNegInf) continue;
        const double p = std::exp(phi - part.log_z);
        accumulate_score_gradient(emb, t, n * p, grad_entities, grad_relations);
      }

  double sum_phi = 0.0;
  for (const kg::Triple& t : kg.triples) {
    const double phi = constrained_score(emb, t, k);
    if (phi == kNegInf)
      throw std::runtime_error("mle_loss_gradient: training triple violates the constraint set");
    sum_phi += phi;
    accumulate_score_gradient(emb, t, -1.0, grad_entities, grad_relations);
  }
  return n * part.log_z - sum_phi;
}

}  // namespace kgdiff::kge
