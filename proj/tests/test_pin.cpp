#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "kgdiff/kge/train.hpp"
#include "kgdiff/mol/quantize.hpp"
#include "kgdiff/mol/smiles.hpp"
#include "kgdiff/pin/guidance.hpp"
#include "kgdiff/pin/train.hpp"

using namespace kgdiff;
using namespace kgdiff::pin;

namespace {

PinConfig tiny_cfg() {
  PinConfig c;
  c.atom_types = 4;
  c.hidden = 8;
  c.attention_layers = 2;
  c.context_dim = 4;
  return c;
}

Mat permute_rows(const Mat& m, const std::vector<int>& perm) {
  Mat out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out(perm[size_t(i)], j) = m(i, j);
  return out;
}

Mat permute_both(const Mat& m, const std::vector<int>& perm) {
  Mat out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out(perm[size_t(i)], perm[size_t(j)]) = m(i, j);
  return out;
}

diffusion::GraphState encode(const char* smi) {
  mol::MolecularGraph g = mol::encode_continuous(mol::parse_smiles(smi, mol::AtomVocabulary::qm9()));
  return {std::move(g.X), std::move(g.A)};
}

}  // namespace

TEST(PinForward, PermutationInvariantPooling) {
  Rng rng(3);
  PinNet net = PinNet::init(tiny_cfg(), rng);
  diffusion::GraphState g = encode("CC(N)C(=O)O");
  Mat out = pin_forward(net, g.X, g.A);
  EXPECT_EQ(out.rows, 1);
  EXPECT_EQ(out.cols, 4);

  std::vector<int> perm(size_t(g.X.rows));
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 20; ++trial) {
    rng.shuffle(perm);
    Mat out_p = pin_forward(net, permute_rows(g.X, perm), permute_both(g.A, perm));
    EXPECT_LT(max_abs_diff(out, out_p), 1e-10);
  }
}

TEST(PinForward, SingleNodeFiniteAndZeroWeightsZero) {
  Rng rng(4);
  PinNet net = PinNet::init(tiny_cfg(), rng);
  Mat x(1, 4, {1, -1, -1, -1});
  Mat a(1, 1);
  Mat out = pin_forward(net, x, a);
  EXPECT_TRUE(out.all_finite());

  for (Mat* p : net.param_tables()) p->fill(0.0);
  Mat zero_out = pin_forward(net, x, a);
  EXPECT_EQ(frobenius_norm(zero_out), 0.0);
}

TEST(PinForward, AttentionRowsSumToOne) {
  Rng rng(5);
  PinNet net = PinNet::init(tiny_cfg(), rng);
  diffusion::GraphState g = encode("C1CC1CO");
  // also probe a noised (continuous) graph
  diffusion::DiffusionSchedule sched(100);
  Rng noise(7);
  diffusion::GraphState gt = diffusion::forward_noise(g, 5, sched, noise);

  for (const auto& state : {g, gt}) {
    grad::Tape t;
    PinForward f = pin_forward_tape(t, net, state.X, state.A, false, false);
    ASSERT_EQ(f.attention.size(), 2u);
    for (auto alpha : f.attention) {
      const Mat& a = t.val(alpha);
      for (int i = 0; i < a.rows; ++i) {
        double s = 0;
        for (int j = 0; j < a.cols; ++j) {
          s += a(i, j);
          EXPECT_GE(a(i, j), 0.0);
        }
        EXPECT_NEAR(s, 1.0, 1e-6);
      }
    }
  }
}

TEST(Guidance, ZeroResidualZeroGradient) {
  Rng rng(6);
  PinNet net = PinNet::init(tiny_cfg(), rng);
  diffusion::GraphState g = encode("CCO");
  Mat c = pin_forward(net, g.X, g.A);
  auto [gx, ga] = guidance_gradient(net, g.X, g.A, c, 1.0);
  EXPECT_LT(frobenius_norm(gx), 1e-12);
  EXPECT_LT(frobenius_norm(ga), 1e-12);
}

TEST(Guidance, MatchesFiniteDifferencesOnTwoNodeGraph) {
  Rng rng(8);
  PinNet net = PinNet::init(tiny_cfg(), rng);
  Mat X = rng.normal_mat(2, 4);
  Mat A(2, 2);
  A(0, 1) = A(1, 0) = 0.8;
  Mat c = rng.normal_mat(1, 4);
  const double alpha = 0.7;

  auto [gx, ga] = guidance_gradient(net, X, A, c, alpha);

  auto log_p = [&](const Mat& xx, const Mat& aa) {
    Mat out = pin_forward(net, xx, aa);
    double s = 0;
    for (int j = 0; j < 4; ++j) s += (c(0, j) - out(0, j)) * (c(0, j) - out(0, j));
    return -alpha * s;
  };

  const double h = 1e-6;
  double max_rel = 0.0;
  for (size_t i = 0; i < X.a.size(); ++i) {
    Mat xp = X, xm = X;
    xp.a[i] += h;
    xm.a[i] -= h;
    const double fd = (log_p(xp, A) - log_p(xm, A)) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(gx.a[i]), 1e-8});
    max_rel = std::max(max_rel, std::abs(fd - gx.a[i]) / denom);
  }
  // A is symmetric: perturb both (i,j) and (j,i) together; the symmetrized
  // gradient entry is the per-side share of that joint direction
  for (int i = 0; i < 2; ++i)
    for (int j = i + 1; j < 2; ++j) {
      Mat ap = A, am = A;
      ap(i, j) += h;
      ap(j, i) += h;
      am(i, j) -= h;
      am(j, i) -= h;
      const double fd = (log_p(X, ap) - log_p(X, am)) / (2 * h) / 2.0;
      const double denom = std::max({std::abs(fd), std::abs(ga(i, j)), 1e-8});
      max_rel = std::max(max_rel, std::abs(fd - ga(i, j)) / denom);
    }
  EXPECT_LT(max_rel, 1e-4);
}

TEST(Guidance, LinearInAlpha) {
  Rng rng(9);
  PinNet net = PinNet::init(tiny_cfg(), rng);
  diffusion::GraphState g = encode("CC=O");
  Mat c = rng.normal_mat(1, 4);
  auto [gx1, ga1] = guidance_gradient(net, g.X, g.A, c, 1.0);
  auto [gx10, ga10] = guidance_gradient(net, g.X, g.A, c, 10.0);
  EXPECT_LT(max_abs_diff(gx10, gx1 * 10.0), 1e-9);
  EXPECT_LT(max_abs_diff(ga10, ga1 * 10.0), 1e-9);
}

TEST(Context, EntityLookupAndCompletion) {
  kg::KnowledgeGraph g;
  g.entities.intern("d0");
  g.entities.intern("d1");
  g.entities.intern("p0");
  g.relations.intern("targets");
  auto& types = g.constraints.type_dict();
  int drug_t = types.intern("drug"), prot_t = types.intern("protein");
  g.constraints.set_entity_type(0, drug_t);
  g.constraints.set_entity_type(1, drug_t);
  g.constraints.set_entity_type(2, prot_t);
  g.constraints.set_relation_signature(0, drug_t, prot_t);
  g.add_triple({0, 0, 2});

  Rng rng(10);
  kge::EmbeddingTable emb = kge::init_embeddings(kge::ModelKind::TransE, 3, 1, 6, rng);

  ContextSpec by_label;
  by_label.entity_label = "d1";
  ContextVector cv = context_from_kge(emb, g, by_label);
  for (int j = 0; j < 6; ++j) EXPECT_EQ(cv.c(0, j), emb.entities(1, j));

  ContextSpec by_pattern;
  by_pattern.is_pattern = true;
  by_pattern.blank = kg::Slot::head;
  by_pattern.relation_label = "targets";
  by_pattern.fixed_label = "p0";
  ContextVector cv2 = context_from_kge(emb, g, by_pattern);
  EXPECT_TRUE(cv2.provenance == "d0" || cv2.provenance == "d1");  // only drugs qualify

  ContextSpec bad;
  bad.entity_label = "ghost";
  EXPECT_THROW(context_from_kge(emb, g, bad), std::runtime_error);
}

TEST(Context, TransEAndRotatECompositeIdentities) {
  kg::KnowledgeGraph g;
  g.entities.intern("s");
  g.entities.intern("o");
  g.relations.intern("r");
  g.add_triple({0, 0, 1});

  for (auto kind : {kge::ModelKind::TransE, kge::ModelKind::RotatE}) {
    Rng rng(kind == kge::ModelKind::TransE ? 11 : 12);
    kge::EmbeddingTable emb = kge::init_embeddings(kind, 2, 1, 8, rng);

    ContextSpec spec;
    spec.is_pattern = true;
    spec.composite = true;
    spec.blank = kg::Slot::head;
    spec.relation_label = "r";
    spec.fixed_label = "o";
    ContextVector cv = context_from_kge(emb, g, spec);

    // placing the composite at the head slot makes the triple score 0
    kge::EmbeddingTable with_comp = emb;
    for (int j = 0; j < 8; ++j) with_comp.entities(0, j) = cv.c(0, j);
    EXPECT_NEAR(kge::score(with_comp, {0, 0, 1}), 0.0, 1e-9);
  }
}

TEST(PinTrain, NoiseLevelBoundAndLearning) {
  EXPECT_EQ(max_pin_noise_level(200), 10);
  EXPECT_EQ(max_pin_noise_level(1000), 50);

  diffusion::DiffusionSchedule sched(100);
  Rng rng(13);
  std::vector<PinExample> pairs;
  int idx = 0;
  for (const char* smi : {"CCO", "CCC", "CC=O", "C1CC1", "CCN", "COC"}) {
    PinExample ex;
    ex.g0 = encode(smi);
    ex.context = Mat(1, 4);
    ex.context(0, idx % 4) = 1.0;  // distinct fixed targets
    ++idx;
    pairs.push_back(std::move(ex));
  }

  PinTrainConfig cfg;
  cfg.net = tiny_cfg();
  cfg.net.hidden = 16;
  cfg.steps = 1200;
  cfg.batch_size = 6;
  cfg.learning_rate = 3e-3;
  cfg.seed = 5;
  PinTrainResult res = pin_train(pairs, sched, cfg);

  double lead = 0, trail = 0;
  for (int i = 0; i < 50; ++i) {
    lead += res.loss_trace[size_t(i)];
    trail += res.loss_trace[res.loss_trace.size() - 1 - size_t(i)];
  }
  EXPECT_LT(trail, 0.5 * lead);
}

TEST(PinTrain, ZeroLearningRateKeepsInit) {
  diffusion::DiffusionSchedule sched(100);
  std::vector<PinExample> pairs;
  PinExample ex;
  ex.g0 = encode("CCO");
  ex.context = Mat(1, 4);
  pairs.push_back(ex);

  PinTrainConfig cfg;
  cfg.net = tiny_cfg();
  cfg.steps = 10;
  cfg.batch_size = 2;
  cfg.learning_rate = 0.0;
  cfg.seed = 3;
  PinTrainResult res = pin_train(pairs, sched, cfg);

  Rng root(3);
  Rng init_rng = root.substream("pin-init");
  PinNet init = PinNet::init(cfg.net, init_rng);
  auto a = res.net.param_tables();
  auto b = init.param_tables();
  for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(max_abs_diff(*a[i], *b[i]), 0.0);
}

TEST(PinTrain, DimensionMismatchRejected) {
  diffusion::DiffusionSchedule sched(100);
  std::vector<PinExample> pairs;
  PinExample ex;
  ex.g0 = encode("CCO");
  ex.context = Mat(1, 7);  // wrong width
  pairs.push_back(ex);
  PinTrainConfig cfg;
  cfg.net = tiny_cfg();
  EXPECT_THROW(pin_train(pairs, sched, cfg), std::invalid_argument);
}
