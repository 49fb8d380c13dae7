#pragma once

// Knowledge graph storage: bidirectional label dictionaries, triple set,
// relation signature constraints, deterministic splitting, and ranked
// triple completion. Graphs are immutable after load and safe to share
// across threads read-only.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgdiff/core/rng.hpp"

namespace kgdiff::kg {

using EntityId = int32_t;
using RelationId = int32_t;
using TypeId = int32_t;

constexpr TypeId kUntyped = -1;
constexpr TypeId kUnconstrained = -1;

struct Triple {
  EntityId s = 0;
  RelationId r = 0;
  EntityId o = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripleHash {
  size_t operator()(const Triple& t) const {
    uint64_t h = uint64_t(uint32_t(t.s));
    h = h * 0x100000001b3ull ^ uint64_t(uint32_t(t.r));
    h = h * 0x100000001b3ull ^ uint64_t(uint32_t(t.o));
    return size_t(h);
  }
};

// Dense id <-> label bijection, ids assigned in first-appearance order.
class Dictionary {
 public:
  int32_t intern(const std::string& label) {
    auto it = index_.find(label);
    if (it != index_.end()) return it->second;
    int32_t id = int32_t(labels_.size());
    index_.emplace(label, id);
    labels_.push_back(label);
    return id;
  }

  std::optional<int32_t> find(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& label(int32_t id) const { return labels_.at(size_t(id)); }
  int32_t size() const { return int32_t(labels_.size()); }

  // order-sensitive content hash, used to bind checkpoints to dictionaries
  uint64_t content_hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& l : labels_) {
      h = detail::fnv1a64(l, h);
      h = detail::fnv1a64("\x1f", h);
    }
    return h;
  }

 private:
  std::unordered_map<std::string, int32_t> index_;
  std::vector<std::string> labels_;
};

// Relation signatures over entity-type tags. S_r and O_r are the sets of
// entities carrying the relation's declared subject/object type; either
// side may be unconstrained ('*').
class DomainConstraintSet {
 public:
  Dictionary& type_dict() { return types_; }
  const Dictionary& type_dict() const { return types_; }

  void set_entity_type(EntityId e, TypeId t) {
    if (size_t(e) >= entity_type_.size()) entity_type_.resize(size_t(e) + 1, kUntyped);
    entity_type_[size_t(e)] = t;
  }

  TypeId entity_type(EntityId e) const {
    if (e < 0 || size_t(e) >= entity_type_.size()) return kUntyped;
    return entity_type_[size_t(e)];
  }

  void set_relation_signature(RelationId r, TypeId subject_type, TypeId object_type) {
    if (size_t(r) >= signatures_.size())
      signatures_.resize(size_t(r) + 1, {kUnconstrained, kUnconstrained});
    signatures_[size_t(r)] = {subject_type, object_type};
  }

  std::pair<TypeId, TypeId> relation_signature(RelationId r) const {
    if (r < 0 || size_t(r) >= signatures_.size()) return {kUnconstrained, kUnconstrained};
    return signatures_[size_t(r)];
  }

  bool subject_allowed(RelationId r, EntityId s) const {
    TypeId want = relation_signature(r).first;
    return want == kUnconstrained || entity_type(s) == want;
  }

  bool object_allowed(RelationId r, EntityId o) const {
    TypeId want = relation_signature(r).second;
    return want == kUnconstrained || entity_type(o) == want;
  }

  bool empty() const { return signatures_.empty(); }

 private:
  Dictionary types_;
  std::vector<TypeId> entity_type_;
  std::vector<std::pair<TypeId, TypeId>> signatures_;
};

// Indicator c_K: 1 iff the triple satisfies its relation's signature.
inline bool constraint_indicator(const Triple& t, const DomainConstraintSet& k) {
  return k.subject_allowed(t.r, t.s) && k.object_allowed(t.r, t.o);
}

struct KnowledgeGraph {
  Dictionary entities;
  Dictionary relations;
  std::vector<Triple> triples;  // load order, duplicates collapsed
  std::unordered_set<Triple, TripleHash> triple_set;
  DomainConstraintSet constraints;

  int32_t entity_count() const { return entities.size(); }
  int32_t relation_count() const { return relations.size(); }
  bool contains(const Triple& t) const { return triple_set.count(t) > 0; }

  void add_triple(const Triple& t) {
    if (triple_set.insert(t).second) triples.push_back(t);
  }

  uint64_t dict_hash() const {
    uint64_t h = entities.content_hash();
    h ^= relations.content_hash() * 0x9e3779b97f4a7c15ull;
    return h;
  }
};

struct LoadReport {
  int64_t lines_read = 0;
  int64_t duplicates_collapsed = 0;
  int64_t constraint_rejections = 0;
  std::vector<std::string> warnings;
};

namespace detail_kg {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t tab = line.find('\t', pos);
    if (tab == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return out;
}

inline bool skip_line(const std::string& line) {
  return line.empty() || line[0] == '#';
}

}  // namespace detail_kg

// entity_label<TAB>type_tag, one per line
inline void load_entity_types(KnowledgeGraph& kg, const std::string& path, LoadReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open type file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail_kg::skip_line(line)) continue;
    auto f = detail_kg::split_tabs(line);
    if (f.size() != 2)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 2 tab-separated fields, got " +
                               std::to_string(f.size()));
    auto ent = kg.entities.find(f[0]);
    if (!ent) {
      if (report)
        report->warnings.push_back(path + ":" + std::to_string(line_no) + ": unknown entity '" + f[0] +
                                   "', left untyped");
      continue;
    }
    TypeId t = kg.constraints.type_dict().intern(f[1]);
    kg.constraints.set_entity_type(*ent, t);
  }
}

// relation<TAB>subject_type<TAB>object_type with '*' meaning unconstrained
inline void load_constraints(KnowledgeGraph& kg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open constraint file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail_kg::skip_line(line)) continue;
    auto f = detail_kg::split_tabs(line);
    if (f.size() != 3)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                               std::to_string(f.size()));
    auto rel = kg.relations.find(f[0]);
    if (!rel) continue;  // constraint on an absent relation is inert
    TypeId st = f[1] == "*" ? kUnconstrained : kg.constraints.type_dict().intern(f[1]);
    TypeId ot = f[2] == "*" ? kUnconstrained : kg.constraints.type_dict().intern(f[2]);
    kg.constraints.set_relation_signature(*rel, st, ot);
  }
}

// Triple file: subject<TAB>relation<TAB>object, '#' comments, duplicates
// collapsed. With typing + constraint files supplied, triples violating
// their relation signature are rejected and counted in the report; the
// stored graph always satisfies its declared constraints.
inline KnowledgeGraph load_triples(const std::string& triple_path,
                                   const std::string& typing_path = "",
                                   const std::string& constraint_path = "",
                                   LoadReport* report = nullptr) {
  std::ifstream in(triple_path);
  if (!in) throw std::runtime_error("cannot open triple file: " + triple_path);

  KnowledgeGraph kg;
  LoadReport local;
  LoadReport& rep = report ? *report : local;

  std::vector<Triple> raw;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    ++rep.lines_read;
    if (detail_kg::skip_line(line)) continue;
    auto f = detail_kg::split_tabs(line);
    if (f.size() != 3)
      throw std::runtime_error(triple_path + ":" + std::to_string(line_no) +
                               ": expected 3 tab-separated fields, got " + std::to_string(f.size()));
    Triple t;
    t.s = kg.entities.intern(f[0]);
    t.r = kg.relations.intern(f[1]);
    t.o = kg.entities.intern(f[2]);
    raw.push_back(t);
  }

  if (!typing_path.empty()) load_entity_types(kg, typing_path, &rep);
  if (!constraint_path.empty()) load_constraints(kg, constraint_path);

  for (const Triple& t : raw) {
    if (!kg.constraints.empty() && !constraint_indicator(t, kg.constraints)) {
      ++rep.constraint_rejections;
      rep.warnings.push_back("rejected constraint-violating triple: (" + kg.entities.label(t.s) + ", " +
                             kg.relations.label(t.r) + ", " + kg.entities.label(t.o) + ")");
      continue;
    }
    if (kg.contains(t))
      ++rep.duplicates_collapsed;
    else
      kg.add_triple(t);
  }
  return kg;
}

struct Splits {
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  int64_t reassigned_to_train = 0;
};

// Deterministic disjoint partition. Triples in valid/test whose entity or
// relation never occurs in train are reassigned to train so evaluation
// never ranks an untrained id; the count is reported.
inline Splits split(const KnowledgeGraph& kg, double train_frac, double valid_frac, uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0) || !(valid_frac > 0.0 && valid_frac < 1.0) ||
      !(train_frac + valid_frac < 1.0))
    throw std::invalid_argument("split: fractions must lie in (0,1) with sum < 1");

  const size_t n = kg.triples.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const size_t n_train = size_t(train_frac * double(n));
  const size_t n_valid = size_t(valid_frac * double(n));
  const size_t n_test = n - n_train - n_valid;
  if (n_valid == 0 || n_test == 0)
    throw std::invalid_argument("split: requested split leaves valid or test empty");

  Splits out;
  for (size_t i = 0; i < n_train; ++i) out.train.push_back(kg.triples[order[i]]);

  std::unordered_set<EntityId> seen_e;
  std::unordered_set<RelationId> seen_r;
  for (const Triple& t : out.train) {
    seen_e.insert(t.s);
    seen_e.insert(t.o);
    seen_r.insert(t.r);
  }

  auto place = [&](const Triple& t, std::vector<Triple>& dest) {
    if (seen_e.count(t.s) && seen_e.count(t.o) && seen_r.count(t.r)) {
      dest.push_back(t);
    } else {
      out.train.push_back(t);
      seen_e.insert(t.s);
      seen_e.insert(t.o);
      seen_r.insert(t.r);
      ++out.reassigned_to_train;
    }
  };
  for (size_t i = n_train; i < n_train + n_valid; ++i) place(kg.triples[order[i]], out.valid);
  for (size_t i = n_train + n_valid; i < n; ++i) place(kg.triples[order[i]], out.test);

  if (out.valid.empty() || out.test.empty())
    throw std::invalid_argument("split: coverage reassignment left valid or test empty");
  return out;
}

enum class Slot { head, tail };

struct CompletionPattern {
  Slot blank = Slot::head;
  RelationId r = 0;
  EntityId fixed = 0;  // the non-blank entity
};

using TripleScorer = std::function<double(const Triple&)>;

struct ScoredEntity {
  EntityId entity;
  double score;
};

// Candidates violating the constraint set are excluded entirely; the rest
// are ranked by descending score, ties broken by ascending entity id.
inline std::vector<ScoredEntity> complete_triple(const KnowledgeGraph& kg, const TripleScorer& model,
                                                 const CompletionPattern& pattern, int top_k) {
  std::vector<ScoredEntity> out;
  if (top_k <= 0) return out;
  for (EntityId e = 0; e < kg.entity_count(); ++e) {
    Triple t = pattern.blank == Slot::head ? Triple{e, pattern.r, pattern.fixed}
                                           : Triple{pattern.fixed, pattern.r, e};
    if (!constraint_indicator(t, kg.constraints)) continue;
    out.push_back({e, model(t)});
  }
  std::stable_sort(out.begin(), out.end(), [](const ScoredEntity& a, const ScoredEntity& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entity < b.entity;
  });
  if (int(out.size()) > top_k) out.resize(size_t(top_k));
  return out;
}

}  // namespace kgdiff::kg
