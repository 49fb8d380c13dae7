#pragma once

// Rank-based link prediction evaluation: realistic ranks under ties,
// filtered or unfiltered candidate sets, head/tail corruption pooling, and
// multi-seed aggregation into a structured report.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgdiff/kge/embedding.hpp"

namespace kgdiff::kge {

struct RankResult {
  int64_t rank = 0;             // realistic rank: mean of optimistic and pessimistic, half rounded up
  int64_t candidate_count = 0;  // size of the constrained (and filtered) candidate set
};

// Rank the true entity of `t` in the given slot against every candidate
// allowed by the constraints. In the filtered setting, candidates forming
// a known positive other than t itself are removed. Ties resolve to the
// realistic rank (optimistic + pessimistic) / 2, rounded half up.
inline RankResult rank_true_entity(const EmbeddingTable& emb, const kg::KnowledgeGraph& filter,
                                   const kg::Triple& t, kg::Slot slot, const kg::DomainConstraintSet& k,
                                   bool filtered = true) {
  const kg::EntityId true_entity = slot == kg::Slot::head ? t.s : t.o;
  const double true_score = constrained_score(emb, t, k);
  if (true_score == kNegInf)
    throw std::runtime_error(
        "rank_true_entity: the true entity violates the constraint set; constraint file is inconsistent "
        "with the data");

  int64_t better = 0, ties = 0, candidates = 1;  // the true entity is always a candidate
  for (kg::EntityId e = 0; e < filter.entity_count(); ++e) {
    if (e == true_entity) continue;
    const kg::Triple cand = slot == kg::Slot::head ? kg::Triple{e, t.r, t.o} : kg::Triple{t.s, t.r, e};
    if (!kg::constraint_indicator(cand, k)) continue;
    if (filtered && filter.contains(cand)) continue;
    ++candidates;
    const double s = score(emb, cand);
    if (s > true_score)
      ++better;
    else if (s == true_score)
      ++ties;
  }

  const int64_t optimistic = better + 1;
  const int64_t pessimistic = better + ties + 1;
  RankResult res;
  res.rank = (optimistic + pessimistic + 1) / 2;  // round half up
  res.candidate_count = candidates;
  return res;
}

inline double mrr(const std::vector<int64_t>& ranks) {
  if (ranks.empty()) throw std::invalid_argument("mrr: empty rank list");
  double s = 0.0;
  for (int64_t r : ranks) s += 1.0 / double(r);
  return s / double(ranks.size());
}

inline double hits_at_k(const std::vector<int64_t>& ranks, int64_t k) {
  if (k < 1) throw std::invalid_argument("hits_at_k: k must be >= 1");
  if (ranks.empty()) return 0.0;
  int64_t hits = 0;
  for (int64_t r : ranks)
    if (r <= k) ++hits;
  return double(hits) / double(ranks.size());
}

// AMR = mean rank / expected mean rank of a uniformly random scorer,
// where E[rank | c candidates] = (c + 1) / 2. Near 1.0 means chance level.
inline double adjusted_mean_rank(const std::vector<int64_t>& ranks,
                                 const std::vector<int64_t>& candidate_counts) {
  if (ranks.size() != candidate_counts.size())
    throw std::invalid_argument("adjusted_mean_rank: ranks and candidate counts misaligned");
  if (ranks.empty()) throw std::invalid_argument("adjusted_mean_rank: empty rank list");
  double mean_rank = 0.0, mean_expected = 0.0;
  for (size_t i = 0; i < ranks.size(); ++i) {
    if (candidate_counts[i] < 1) throw std::invalid_argument("adjusted_mean_rank: candidate count < 1");
    mean_rank += double(ranks[i]);
    mean_expected += (double(candidate_counts[i]) + 1.0) / 2.0;
  }
  return mean_rank / mean_expected;
}

struct MetricSummary {
  double amr = 0.0;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits10 = 0.0;
};

struct EvalReport {
  std::string dataset;
  std::string model;
  bool filtered = true;
  std::vector<uint64_t> seeds;
  std::vector<MetricSummary> per_seed;
  MetricSummary mean;
  MetricSummary stddev;  // population std; 0 for a single seed
};

// Head- and tail-corruption ranks pooled over the test triples.
inline MetricSummary evaluate_single(const EmbeddingTable& emb, const kg::KnowledgeGraph& filter,
                                     const std::vector<kg::Triple>& test, const kg::DomainConstraintSet& k,
                                     bool filtered = true) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  std::vector<int64_t> ranks, counts;
  ranks.reserve(test.size() * 2);
  for (const kg::Triple& t : test)
    for (kg::Slot slot : {kg::Slot::head, kg::Slot::tail}) {
      const RankResult r = rank_true_entity(emb, filter, t, slot, k, filtered);
      ranks.push_back(r.rank);
      counts.push_back(r.candidate_count);
    }
  MetricSummary m;
  m.amr = adjusted_mean_rank(ranks, counts);
  m.mrr = mrr(ranks);
  m.hits1 = hits_at_k(ranks, 1);
  m.hits10 = hits_at_k(ranks, 10);
  return m;
}

inline EvalReport evaluate(const std::vector<EmbeddingTable>& tables, const std::vector<uint64_t>& seeds,
                           const kg::KnowledgeGraph& filter, const std::vector<kg::Triple>& test,
                           const kg::DomainConstraintSet& k, bool filtered = true) {
  if (tables.empty() || tables.size() != seeds.size())
    throw std::invalid_argument("evaluate: one embedding table per seed required");
  EvalReport rep;
  rep.filtered = filtered;
  rep.seeds = seeds;
  for (const EmbeddingTable& emb : tables)
    rep.per_seed.push_back(evaluate_single(emb, filter, test, k, filtered));

  auto agg = [&](auto field) {
    double m = 0.0;
    for (const MetricSummary& s : rep.per_seed) m += s.*field;
    m /= double(rep.per_seed.size());
    double var = 0.0;
    for (const MetricSummary& s : rep.per_seed) var += (s.*field - m) * (s.*field - m);
    var /= double(rep.per_seed.size());
    return std::pair<double, double>(m, std::sqrt(var));
  };
  std::tie(rep.mean.amr, rep.stddev.amr) = agg(&MetricSummary::amr);
  std::tie(rep.mean.mrr, rep.stddev.mrr) = agg(&MetricSummary::mrr);
  std::tie(rep.mean.hits1, rep.stddev.hits1) = agg(&MetricSummary::hits1);
  std::tie(rep.mean.hits10, rep.stddev.hits10) = agg(&MetricSummary::hits10);
  return rep;
}

inline nlohmann::json report_to_json(const EvalReport& rep) {
  auto metric = [&](auto field) {
    nlohmann::json per;
    for (const MetricSummary& s : rep.per_seed) per.push_back(s.*field);
    return nlohmann::json{{"mean", rep.mean.*field}, {"std", rep.stddev.*field}, {"per_seed", per}};
  };
  return nlohmann::json{{"dataset", rep.dataset},
                        {"model", rep.model},
                        {"filtered", rep.filtered},
                        {"seeds", rep.seeds},
                        {"amr", metric(&MetricSummary::amr)},
                        {"mrr", metric(&MetricSummary::mrr)},
                        {"hits_at_1", metric(&MetricSummary::hits1)},
                        {"hits_at_10", metric(&MetricSummary::hits10)}};
}

}  // namespace kgdiff::kge
