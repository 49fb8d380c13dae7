#include <gtest/gtest.h>

#include <cmath>

#include "kgdiff/kge/embedding.hpp"
#include "kgdiff/kge/loss.hpp"
#include "kgdiff/kge/sampling.hpp"
#include "kgdiff/kge/train.hpp"

using namespace kgdiff;
using namespace kgdiff::kge;

namespace {

kg::KnowledgeGraph make_graph(int n_entities, int n_relations) {
  kg::KnowledgeGraph g;
  for (int i = 0; i < n_entities; ++i) g.entities.intern("e" + std::to_string(i));
  for (int i = 0; i < n_relations; ++i) g.relations.intern("r" + std::to_string(i));
  return g;
}

// naive oracle: sum exp(phi) directly over the whole triple space
double naive_partition(const EmbeddingTable& emb, const kg::KnowledgeGraph& g,
                       const kg::DomainConstraintSet& k) {
  double z = 0.0;
  for (kg::RelationId r = 0; r < g.relation_count(); ++r)
    for (kg::EntityId s = 0; s < g.entity_count(); ++s)
      for (kg::EntityId o = 0; o < g.entity_count(); ++o) {
        double phi = constrained_score(emb, {s, r, o}, k);
        if (phi != kNegInf) z += std::exp(phi);
      }
  return z;
}

}  // namespace

TEST(TransE, PerfectTranslationScoresZero) {
  EmbeddingTable emb;
  emb.kind = ModelKind::TransE;
  emb.dim = 2;
  emb.entities = Mat(2, 2, {1.0, 0.5, 1.5, 1.5});  // e0 + r = e1
  emb.relations = Mat(1, 2, {0.5, 1.0});
  EXPECT_DOUBLE_EQ(score_transe(emb, {0, 0, 1}), 0.0);
}

TEST(TransE, HandComputedL1) {
  EmbeddingTable emb;
  emb.kind = ModelKind::TransE;
  emb.dim = 2;
  emb.entities = Mat(2, 2, {1.0, 0.0, 0.0, 0.0});
  emb.relations = Mat(1, 2, {0.0, 1.0});
  // e_s + e_r - e_o = (1, 1) -> score -2
  EXPECT_DOUBLE_EQ(score_transe(emb, {0, 0, 1}), -2.0);
}

TEST(TransE, TranslationInvariantAndNonpositive) {
  Rng rng(5);
  EmbeddingTable emb = init_embeddings(ModelKind::TransE, 6, 2, 8, rng);
  EmbeddingTable shifted = emb;
  Mat delta = rng.normal_mat(1, 8);
  for (int e = 0; e < 6; ++e)
    for (int j = 0; j < 8; ++j) shifted.entities(e, j) += delta(0, j);
  for (int s = 0; s < 6; ++s)
    for (int o = 0; o < 6; ++o) {
      double a = score_transe(emb, {s, 0, o});
      EXPECT_LE(a, 0.0);
      EXPECT_NEAR(a, score_transe(shifted, {s, 0, o}), 1e-12);
    }
}

TEST(RotatE, IdentityAndQuarterTurn) {
  EmbeddingTable emb;
  emb.kind = ModelKind::RotatE;
  emb.dim = 2;
  emb.entities = Mat(2, 2, {1.0, 0.0, 0.0, 1.0});  // e0 = 1+0i, e1 = 0+1i
  emb.relations = Mat(2, 2, {1.0, 0.0, 0.0, 1.0});  // r0 = identity, r1 = i

  EXPECT_DOUBLE_EQ(score_rotate(emb, {0, 0, 0}), 0.0);  // identity keeps e0
  EXPECT_DOUBLE_EQ(score_rotate(emb, {0, 1, 1}), 0.0);  // 90 degrees maps 1 -> i
  EXPECT_LT(score_rotate(emb, {0, 0, 1}), 0.0);
}

TEST(RotatE, ConjugateUndoesRotation) {
  Rng rng(9);
  EmbeddingTable emb = init_embeddings(ModelKind::RotatE, 3, 2, 16, rng);
  // rotate e0 by r0, then by conj(r0): recovers e0
  std::vector<double> ro(16);
  for (int i = 0; i < 8; ++i) {
    double a = emb.entities(0, 2 * i), b = emb.entities(0, 2 * i + 1);
    double c = emb.relations(0, 2 * i), d = emb.relations(0, 2 * i + 1);
    double re = a * c - b * d, im = a * d + b * c;
    ro[2 * i] = re * c + im * d;        // multiply by conj: (re + i im)(c - i d)
    ro[2 * i + 1] = -re * d + im * c;
  }
  for (int j = 0; j < 16; ++j) EXPECT_NEAR(ro[j], emb.entities(0, j), 1e-9);
}

TEST(RotatE, OddDimensionRejected) {
  Rng rng(1);
  EXPECT_THROW(init_embeddings(ModelKind::RotatE, 2, 1, 3, rng), std::invalid_argument);
}

TEST(ConstrainedScore, SentinelAndEquality) {
  kg::KnowledgeGraph g = make_graph(3, 1);
  g.constraints.type_dict().intern("drug");
  g.constraints.type_dict().intern("protein");
  g.constraints.set_entity_type(0, 0);
  g.constraints.set_entity_type(1, 1);
  g.constraints.set_entity_type(2, 1);
  g.constraints.set_relation_signature(0, 0, 1);

  Rng rng(2);
  EmbeddingTable emb = init_embeddings(ModelKind::TransE, 3, 1, 4, rng);
  EXPECT_DOUBLE_EQ(constrained_score(emb, {0, 0, 1}, g.constraints), score_transe(emb, {0, 0, 1}));
  EXPECT_EQ(constrained_score(emb, {1, 0, 0}, g.constraints), kNegInf);
}

TEST(MarginLoss, HandValues) {
  EXPECT_DOUBLE_EQ(margin_loss(0.1, 0.5, 0.2), 0.0);
  EXPECT_DOUBLE_EQ(margin_loss(0.5, 0.5, 0.2), 0.2);
  EXPECT_DOUBLE_EQ(margin_loss(1.0, 0.3, 0.2), 0.9);
}

TEST(NegativeSampling, DeterministicAndConstraintRespecting) {
  kg::KnowledgeGraph g = make_graph(6, 1);
  g.constraints.type_dict().intern("drug");
  g.constraints.type_dict().intern("protein");
  for (int i = 0; i < 3; ++i) g.constraints.set_entity_type(i, 0);
  for (int i = 3; i < 6; ++i) g.constraints.set_entity_type(i, 1);
  g.constraints.set_relation_signature(0, 0, 1);
  g.add_triple({0, 0, 3});
  g.add_triple({1, 0, 4});

  SlotCandidates cands = SlotCandidates::build(g);
  Rng r1(11), r2(11);
  for (int i = 0; i < 50; ++i) {
    NegativeSample a = negative_sample_slcwa({0, 0, 3}, g, r1, true, &cands);
    NegativeSample b = negative_sample_slcwa({0, 0, 3}, g, r2, true, &cands);
    EXPECT_EQ(a.triple, b.triple);
    EXPECT_FALSE(a.known_positive);
    // corrupted slot stays inside its type
    EXPECT_TRUE(kg::constraint_indicator(a.triple, g.constraints));
    EXPECT_FALSE(g.contains(a.triple));
  }
}

TEST(NegativeSampling, SaturatedGraphFlagsKnownPositive) {
  // 2 entities, both orderings present: every corruption is a known positive
  kg::KnowledgeGraph g = make_graph(2, 1);
  g.add_triple({0, 0, 1});
  g.add_triple({1, 0, 0});
  g.add_triple({0, 0, 0});
  g.add_triple({1, 0, 1});
  Rng rng(3);
  NegativeSample s = negative_sample_slcwa({0, 0, 1}, g, rng, false);
  EXPECT_TRUE(s.known_positive);
}

TEST(Partition, UniformScoresCountTripleSpace) {
  kg::KnowledgeGraph g = make_graph(3, 2);
  EmbeddingTable emb;
  emb.kind = ModelKind::TransE;
  emb.dim = 4;
  emb.entities = Mat(3, 4);
  emb.relations = Mat(2, 4);
  // all-zero embeddings: every score is 0, no constraints
  EXPECT_NEAR(partition_function(emb, g, g.constraints), 3.0 * 3.0 * 2.0, 1e-9);
}

TEST(Partition, HandSumWithConstraints) {
  // 3 entities typed so K holds exactly 2 triples, scores {0, -ln 2}:
  // Z = exp(0) + exp(-ln 2) = 1.5
  kg::KnowledgeGraph g = make_graph(3, 1);
  g.constraints.type_dict().intern("src");
  g.constraints.type_dict().intern("dst");
  g.constraints.set_entity_type(0, 0);
  g.constraints.set_entity_type(1, 1);
  g.constraints.set_entity_type(2, 1);
  g.constraints.set_relation_signature(0, 0, 1);

  EmbeddingTable emb;
  emb.kind = ModelKind::TransE;
  emb.dim = 1;
  emb.entities = Mat(3, 1, {0.0, 0.0, std::log(2.0)});
  emb.relations = Mat(1, 1, {0.0});
  // K = {(0,0,1), (0,0,2)}, scores 0 and -ln 2
  EXPECT_NEAR(partition_function(emb, g, g.constraints), 1.5, 1e-12);
}

TEST(Partition, LogSumExpMatchesNaiveOracle) {
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    kg::KnowledgeGraph g = make_graph(5, 2);
    // type half the entities and constrain r0 only
    g.constraints.type_dict().intern("a");
    g.constraints.type_dict().intern("b");
    for (int i = 0; i < 5; ++i) g.constraints.set_entity_type(i, i % 2);
    g.constraints.set_relation_signature(0, 0, 1);

    Rng rng(seed);
    for (ModelKind kind : {ModelKind::TransE, ModelKind::RotatE}) {
      EmbeddingTable emb = init_embeddings(kind, 5, 2, 8, rng);
      double z = partition_function(emb, g, g.constraints);
      double z_naive = naive_partition(emb, g, g.constraints);
      EXPECT_NEAR(z, z_naive, 1e-9 * std::max(1.0, z_naive));

      // and without constraints
      kg::DomainConstraintSet none;
      double z2 = partition_function(emb, g, none);
      double z2_naive = naive_partition(emb, g, none);
      EXPECT_NEAR(z2, z2_naive, 1e-9 * std::max(1.0, z2_naive));
    }
  }
}

TEST(Partition, TermCapEnforced) {
  kg::KnowledgeGraph g = make_graph(4, 2);
  Rng rng(1);
  EmbeddingTable emb = init_embeddings(ModelKind::TransE, 4, 2, 4, rng);
  EXPECT_THROW(partition_function(emb, g, g.constraints, 10), std::runtime_error);
}

TEST(MleLoss, SingleTripleSoleMemberOfK) {
  kg::KnowledgeGraph g = make_graph(2, 1);
  g.constraints.type_dict().intern("s");
  g.constraints.type_dict().intern("o");
  g.constraints.set_entity_type(0, 0);
  g.constraints.set_entity_type(1, 1);
  g.constraints.set_relation_signature(0, 0, 1);
  g.add_triple({0, 0, 1});  // the only member of K

  for (uint64_t seed : {4ull, 5ull}) {
    Rng rng(seed);
    EmbeddingTable emb = init_embeddings(ModelKind::TransE, 2, 1, 6, rng);
    EXPECT_NEAR(mle_loss(emb, g, g.constraints), 0.0, 1e-12);
  }
}

TEST(MleLoss, UniformScoresHandValue) {
  // |K| = 2 drugs x 5 proteins = 10, |G| = 2, all-zero embeddings:
  // loss = 2 ln 10
  kg::KnowledgeGraph g = make_graph(7, 1);
  g.constraints.type_dict().intern("drug");
  g.constraints.type_dict().intern("protein");
  g.constraints.set_entity_type(0, 0);
  g.constraints.set_entity_type(1, 0);
  for (int i = 2; i < 7; ++i) g.constraints.set_entity_type(i, 1);
  g.constraints.set_relation_signature(0, 0, 1);
  g.add_triple({0, 0, 2});
  g.add_triple({1, 0, 3});

  EmbeddingTable emb;
  emb.kind = ModelKind::TransE;
  emb.dim = 4;
  emb.entities = Mat(7, 4);
  emb.relations = Mat(1, 4);
  EXPECT_NEAR(mle_loss(emb, g, g.constraints), 2.0 * std::log(10.0), 1e-12);
}

TEST(MleLoss, TrainingTripleOutsideKErrors) {
  kg::KnowledgeGraph g = make_graph(2, 1);
  g.constraints.type_dict().intern("s");
  g.constraints.set_entity_type(0, 0);
  g.constraints.set_relation_signature(0, 0, kg::kUnconstrained);
  g.add_triple({1, 0, 0});  // entity 1 untyped, violates subject constraint
  Rng rng(1);
  EmbeddingTable emb = init_embeddings(ModelKind::TransE, 2, 1, 4, rng);
  EXPECT_THROW(mle_loss(emb, g, g.constraints), std::runtime_error);
}

TEST(MleLoss, GradientMatchesFiniteDifferences) {
  kg::KnowledgeGraph g = make_graph(4, 2);
  g.constraints.type_dict().intern("a");
  g.constraints.type_dict().intern("b");
  for (int i = 0; i < 4; ++i) g.constraints.set_entity_type(i, i < 2 ? 0 : 1);
  g.constraints.set_relation_signature(0, 0, 1);
  g.add_triple({0, 0, 2});
  g.add_triple({1, 0, 3});
  g.add_triple({2, 1, 1});

  for (ModelKind kind : {ModelKind::TransE, ModelKind::RotatE}) {
    Rng rng(kind == ModelKind::TransE ? 21 : 22);
    EmbeddingTable emb = init_embeddings(kind, 4, 2, 6, rng);
    Mat ge, gr;
    mle_loss_gradient(emb, g, g.constraints, ge, gr);

    const double h = 1e-6;
    double max_rel = 0.0;
    auto check_table = [&](Mat& table, const Mat& analytic) {
      for (size_t i = 0; i < table.a.size(); ++i) {
        const double orig = table.a[i];
        table.a[i] = orig + h;
        const double up = mle_loss(emb, g, g.constraints);
        table.a[i] = orig - h;
        const double dn = mle_loss(emb, g, g.constraints);
        table.a[i] = orig;
        const double fd = (up - dn) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(analytic.a[i]), 1e-8});
        max_rel = std::max(max_rel, std::abs(fd - analytic.a[i]) / denom);
      }
    };
    check_table(emb.entities, ge);
    check_table(emb.relations, gr);
    EXPECT_LT(max_rel, 1e-4) << (kind == ModelKind::TransE ? "TransE" : "RotatE");
  }
}

namespace {

kg::KnowledgeGraph chain_graph(int n) {
  kg::KnowledgeGraph g = make_graph(n, 1);
  for (int i = 0; i + 1 < n; ++i) g.add_triple({i, 0, i + 1});
  return g;
}

}  // namespace

TEST(TrainKge, MarginLossImproves) {
  kg::KnowledgeGraph g = chain_graph(21);  // 20 triples
  KgeConfig cfg;
  cfg.kind = ModelKind::TransE;
  cfg.mode = TrainingMode::slcwa_margin;
  cfg.dim = 8;
  cfg.learning_rate = 0.01;
  cfg.epochs = 200;
  cfg.batch_size = 8;
  cfg.seed = 3;
  KgeTrainResult res = train_kge(g, g.triples, cfg);
  EXPECT_LT(res.loss_trace.back(), res.loss_trace.front());
}

TEST(TrainKge, ZeroLearningRateKeepsInit) {
  kg::KnowledgeGraph g = chain_graph(8);
  KgeConfig cfg;
  cfg.dim = 4;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  cfg.seed = 12;
  KgeTrainResult res = train_kge(g, g.triples, cfg);

  Rng root(cfg.seed);
  Rng init_rng = root.substream("kge-init");
  EmbeddingTable init = init_embeddings(cfg.kind, g.entity_count(), g.relation_count(), cfg.dim, init_rng);
  EXPECT_EQ(max_abs_diff(res.table.entities, init.entities), 0.0);
  EXPECT_EQ(max_abs_diff(res.table.relations, init.relations), 0.0);
}

TEST(TrainKge, BitReproducibleTrace) {
  kg::KnowledgeGraph g = chain_graph(15);
  KgeConfig cfg;
  cfg.dim = 8;
  cfg.learning_rate = 0.005;
  cfg.epochs = 30;
  cfg.seed = 77;
  KgeTrainResult a = train_kge(g, g.triples, cfg);
  KgeTrainResult b = train_kge(g, g.triples, cfg);
  ASSERT_EQ(a.loss_trace.size(), b.loss_trace.size());
  for (size_t i = 0; i < a.loss_trace.size(); ++i) EXPECT_EQ(a.loss_trace[i], b.loss_trace[i]);
  EXPECT_EQ(max_abs_diff(a.table.entities, b.table.entities), 0.0);
}

TEST(TrainKge, RotatePhasesStayUnitModulus) {
  kg::KnowledgeGraph g = chain_graph(10);
  KgeConfig cfg;
  cfg.kind = ModelKind::RotatE;
  cfg.dim = 8;
  cfg.learning_rate = 0.02;
  cfg.epochs = 50;
  cfg.seed = 5;
  KgeTrainResult res = train_kge(g, g.triples, cfg);
  for (int r = 0; r < res.table.relations.rows; ++r)
    for (int i = 0; i < cfg.dim / 2; ++i) {
      double re = res.table.relations(r, 2 * i), im = res.table.relations(r, 2 * i + 1);
      EXPECT_NEAR(std::sqrt(re * re + im * im), 1.0, 1e-6);
    }
}

TEST(TrainKge, ExactMleModeImproves) {
  kg::KnowledgeGraph g = chain_graph(6);
  KgeConfig cfg;
  cfg.mode = TrainingMode::exact_mle;
  cfg.dim = 4;
  cfg.learning_rate = 0.05;
  cfg.epochs = 40;
  cfg.seed = 8;
  KgeTrainResult res = train_kge(g, g.triples, cfg);
  EXPECT_LT(res.loss_trace.back(), res.loss_trace.front());
}
