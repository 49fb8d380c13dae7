#include <gtest/gtest.h>

#include "kgdiff/core/adam.hpp"
#include "kgdiff/core/mat.hpp"
#include "kgdiff/core/rng.hpp"

using namespace kgdiff;

TEST(Mat, MatmulTranspose) {
  Mat a(2, 3, {1, 2, 3, 4, 5, 6});
  Mat b(3, 2, {7, 8, 9, 10, 11, 12});
  Mat c = matmul(a, b);
  EXPECT_DOUBLE_EQ(c(0, 0), 58);
  EXPECT_DOUBLE_EQ(c(0, 1), 64);
  EXPECT_DOUBLE_EQ(c(1, 0), 139);
  EXPECT_DOUBLE_EQ(c(1, 1), 154);
  Mat at = transpose(a);
  EXPECT_EQ(at.rows, 3);
  EXPECT_DOUBLE_EQ(at(2, 1), 6);
}

TEST(Mat, SymmetrizeZeroDiag) {
  Mat m(2, 2, {1, 2, 4, 3});
  Mat s = symmetrize(m);
  EXPECT_DOUBLE_EQ(s(0, 1), 3.0);
  EXPECT_DOUBLE_EQ(s(1, 0), 3.0);
  zero_diagonal(s);
  EXPECT_DOUBLE_EQ(s(0, 0), 0.0);
}

TEST(Rng, DeterministicAndSubstreamIndependent) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());

  Rng root(7);
  Rng s1 = root.substream("alpha");
  Rng s2 = root.substream("beta");
  Rng s1_again = root.substream("alpha");
  EXPECT_EQ(s1.next_u64(), s1_again.next_u64());
  // different labels should decorrelate immediately
  Rng t1 = root.substream("alpha");
  Rng t2 = root.substream("beta");
  EXPECT_NE(t1.next_u64(), t2.next_u64());

  // indexed substreams differ
  Rng u0 = root.substream("mol", 0);
  Rng u1 = root.substream("mol", 1);
  EXPECT_NE(u0.next_u64(), u1.next_u64());
}

TEST(Rng, NormalMoments) {
  Rng rng(123);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(Adam, ZeroGradientIsNoOp) {
  Mat p(2, 2, {1, 2, 3, 4});
  Mat g(2, 2);
  AdamState st;
  AdamConfig cfg;
  Mat before = p;
  adam_step({&p}, {&g}, st, cfg);
  EXPECT_EQ(max_abs_diff(p, before), 0.0);
  for (double v : st.m[0].a) EXPECT_EQ(v, 0.0);
  for (double v : st.v[0].a) EXPECT_EQ(v, 0.0);
}

TEST(Adam, FirstStepHasLearningRateMagnitude) {
  // bias correction makes the first update -lr * sign(g)
  Mat p(1, 3, {0, 0, 0});
  Mat g(1, 3, {0.5, -2.0, 1e-3});
  AdamState st;
  AdamConfig cfg;
  cfg.lr = 0.01;
  adam_step({&p}, {&g}, st, cfg);
  EXPECT_NEAR(p(0, 0), -0.01, 1e-6);
  EXPECT_NEAR(p(0, 1), 0.01, 1e-6);
  EXPECT_NEAR(p(0, 2), -0.01, 1e-4);
}

TEST(Adam, TablesStayIndependent) {
  Mat p1(1, 2, {1, 1}), p2(1, 2, {1, 1});
  Mat g1(1, 2, {1, 1}), g2(1, 2, {0, 0});
  AdamState st;
  AdamConfig cfg;
  adam_step({&p1, &p2}, {&g1, &g2}, st, cfg);
  EXPECT_NE(p1(0, 0), 1.0);
  EXPECT_EQ(p2(0, 0), 1.0);  // zero-gradient table untouched
}
