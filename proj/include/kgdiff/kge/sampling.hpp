#pragma once

// SLCWA negative sampling: corrupt the head or the tail of an observed
// triple with a uniformly drawn entity. Corruptions reproducing a known
// positive are resampled (bounded), since unfiltered negatives corrupt
// evaluation on tiny graphs.

#include <stdexcept>
#include <vector>

#include "kgdiff/kg/store.hpp"

namespace kgdiff::kge {

// Per-relation candidate entity lists for constraint-respecting corruption.
struct SlotCandidates {
  std::vector<std::vector<kg::EntityId>> heads;  // indexed by relation
  std::vector<std::vector<kg::EntityId>> tails;

  static SlotCandidates build(const kg::KnowledgeGraph& kg) {
    SlotCandidates c;
    c.heads.resize(size_t(kg.relation_count()));
    c.tails.resize(size_t(kg.relation_count()));
    for (kg::RelationId r = 0; r < kg.relation_count(); ++r)
      for (kg::EntityId e = 0; e < kg.entity_count(); ++e) {
        if (kg.constraints.subject_allowed(r, e)) c.heads[size_t(r)].push_back(e);
        if (kg.constraints.object_allowed(r, e)) c.tails[size_t(r)].push_back(e);
      }
    return c;
  }
};

struct NegativeSample {
  kg::Triple triple;
  bool known_positive = false;  // set when 100 attempts failed to avoid a positive
};

inline NegativeSample negative_sample_slcwa(const kg::Triple& t, const kg::KnowledgeGraph& kg, Rng& rng,
                                            bool respect_constraints,
                                            const SlotCandidates* candidates = nullptr) {
  constexpr int kMaxAttempts = 100;
  NegativeSample out;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const bool corrupt_head = rng.coin();
    kg::Triple cand = t;
    kg::EntityId replacement;
    if (respect_constraints) {
      if (candidates == nullptr)
        throw std::invalid_argument("negative_sample_slcwa: candidates required with constraints");
      const auto& pool = corrupt_head ? candidates->heads[size_t(t.r)] : candidates->tails[size_t(t.r)];
      if (pool.empty())
        throw std::runtime_error("negative_sample_slcwa: empty candidate set for relation " +
                                 kg.relations.label(t.r));
      replacement = pool[rng.uniform_index(pool.size())];
    } else {
      replacement = kg::EntityId(rng.uniform_index(uint64_t(kg.entity_count())));
    }
    (corrupt_head ? cand.s : cand.o) = replacement;
    out.triple = cand;
    if (!kg.contains(cand)) return out;
  }
  out.known_positive = true;  // saturated neighborhood; caller may downweight
  return out;
}

}  // namespace kgdiff::kge
