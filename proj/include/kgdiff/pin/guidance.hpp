#pragma once

// Guidance gradient grad_G log p(c|G) for the conditional model
// p(c|G) = exp(-alpha ||c - P_phi(G)||^2) / Z. Z does not depend on G, so
// the gradient is 2 alpha J^T (c - P_phi(G)), obtained here by reverse-mode
// differentiation through the network. Also: extraction of context vectors
// from a trained embedding table, by entity label or by completing a
// (blank, r, o) / (s, r, blank) pattern.

#include <cmath>
#include <string>
#include <utility>

#include "kgdiff/diffusion/sample.hpp"
#include "kgdiff/kge/embedding.hpp"
#include "kgdiff/pin/network.hpp"

namespace kgdiff::pin {

// returns (grad_X, grad_A); grad_A is symmetrized with a zero diagonal
inline std::pair<Mat, Mat> guidance_gradient(const PinNet& net, const Mat& X, const Mat& A,
                                             const Mat& context, double alpha_theta = 1.0) {
  if (context.rows != 1 || context.cols != net.cfg.context_dim)
    throw std::invalid_argument("guidance_gradient: context must be 1 x context_dim");
  grad::Tape t;
  PinForward f = pin_forward_tape(t, net, X, A, false, true);
  auto residual = t.sub(t.constant(context), f.output);
  auto log_p = t.scale(t.sum_sq(residual), -alpha_theta);  // log p up to the G-free -log Z
  t.backward(log_p);
  Mat gx = t.grad(f.x_in);
  Mat ga = symmetrize(t.grad(f.a_in));
  zero_diagonal(ga);
  return {std::move(gx), std::move(ga)};
}

// Sampler adapter; the network must outlive the returned closure.
inline diffusion::Guidance pin_guidance(const PinNet& net, Mat context, double lambda,
                                        double alpha_theta = 1.0) {
  diffusion::Guidance g;
  g.lambda = lambda;
  g.grad_log_p = [&net, context = std::move(context), alpha_theta](const Mat& X, const Mat& A, int) {
    return guidance_gradient(net, X, A, context, alpha_theta);
  };
  return g;
}

struct ContextVector {
  Mat c;                   // 1 x d
  std::string provenance;  // entity label or completed-pattern description
};

struct ContextSpec {
  // exactly one of the two forms: a bare entity label, or a completion
  // pattern over relation `r` with the given fixed entity
  std::string entity_label;
  bool is_pattern = false;
  kg::Slot blank = kg::Slot::head;
  std::string relation_label;
  std::string fixed_label;
  bool composite = false;  // translate/rotate the fixed entity instead of
                           // looking up the top completion's embedding
};

inline Mat embedding_row(const kge::EmbeddingTable& emb, kg::EntityId e) {
  Mat row(1, emb.dim);
  for (int j = 0; j < emb.dim; ++j) row(0, j) = emb.entities(e, j);
  return row;
}

// target-slot composite: the point the relation maps the fixed entity to
// (TransE: e_o - e_r for a blank head, e_s + e_r for a blank tail;
//  RotatE: rotate by conj(r) / r respectively)
inline Mat composite_context(const kge::EmbeddingTable& emb, kg::Slot blank, kg::RelationId r,
                             kg::EntityId fixed) {
  Mat out(1, emb.dim);
  if (emb.kind == kge::ModelKind::TransE) {
    for (int j = 0; j < emb.dim; ++j) {
      const double rel = emb.relations(r, j);
      out(0, j) = blank == kg::Slot::head ? emb.entities(fixed, j) - rel : emb.entities(fixed, j) + rel;
    }
  } else {
    for (int i = 0; i < emb.dim / 2; ++i) {
      const double a = emb.entities(fixed, 2 * i), b = emb.entities(fixed, 2 * i + 1);
      double c = emb.relations(r, 2 * i), d = emb.relations(r, 2 * i + 1);
      if (blank == kg::Slot::head) d = -d;  // conjugate undoes the rotation
      out(0, 2 * i) = a * c - b * d;
      out(0, 2 * i + 1) = a * d + b * c;
    }
  }
  return out;
}

inline ContextVector context_from_kge(const kge::EmbeddingTable& emb, const kg::KnowledgeGraph& graph,
                                      const ContextSpec& spec) {
  ContextVector out;
  if (!spec.is_pattern) {
    auto e = graph.entities.find(spec.entity_label);
    if (!e) throw std::runtime_error("context_from_kge: unknown entity '" + spec.entity_label + "'");
    out.c = embedding_row(emb, *e);
    out.provenance = spec.entity_label;
    return out;
  }

  auto r = graph.relations.find(spec.relation_label);
  if (!r) throw std::runtime_error("context_from_kge: unknown relation '" + spec.relation_label + "'");
  auto fixed = graph.entities.find(spec.fixed_label);
  if (!fixed) throw std::runtime_error("context_from_kge: unknown entity '" + spec.fixed_label + "'");

  if (spec.composite) {
    out.c = composite_context(emb, spec.blank, *r, *fixed);
    out.provenance = "composite(" + spec.relation_label + ", " + spec.fixed_label + ")";
    return out;
  }

  kg::CompletionPattern pattern{spec.blank, *r, *fixed};
  auto ranked = kg::complete_triple(
      graph, [&](const kg::Triple& t) { return kge::constrained_score(emb, t, graph.constraints); },
      pattern, 1);
  if (ranked.empty())
    throw std::runtime_error("context_from_kge: completion for relation '" + spec.relation_label +
                             "' returned no constraint-satisfying candidate");
  out.c = embedding_row(emb, ranked[0].entity);
  out.provenance = graph.entities.label(ranked[0].entity);
  return out;
}

}  // namespace kgdiff::pin
