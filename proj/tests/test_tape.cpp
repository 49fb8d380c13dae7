// Finite-difference validation of every tape op. The rest of the project
// trusts these gradients, so each op gets checked inside a composite graph
// that exercises broadcasting and fan-out.

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "kgdiff/core/rng.hpp"
#include "kgdiff/grad/tape.hpp"

using namespace kgdiff;
using grad::Tape;

namespace {

// central finite differences w.r.t. every entry of `x`
Mat numeric_grad(const std::function<double(const Mat&)>& f, Mat x, double h = 1e-6) {
  Mat g(x.rows, x.cols);
  for (size_t i = 0; i < x.a.size(); ++i) {
    const double orig = x.a[i];
    x.a[i] = orig + h;
    const double up = f(x);
    x.a[i] = orig - h;
    const double dn = f(x);
    x.a[i] = orig;
    g.a[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

double rel_err(const Mat& a, const Mat& b) {
  double diff = 0, scale = 1e-12;
  for (size_t i = 0; i < a.a.size(); ++i) {
    diff += (a.a[i] - b.a[i]) * (a.a[i] - b.a[i]);
    scale = std::max({scale, std::abs(a.a[i]), std::abs(b.a[i])});
  }
  return std::sqrt(diff) / scale / std::sqrt(double(a.a.size()));
}

}  // namespace

TEST(Tape, MatmulAddMulChain) {
  Rng rng(1);
  Mat x0 = rng.normal_mat(3, 4), w0 = rng.normal_mat(4, 2), b0 = rng.normal_mat(1, 2);

  auto run = [&](const Mat& x, const Mat& w, const Mat& b) {
    auto t = std::make_unique<Tape>();
    auto xn = t->leaf(x, true);
    auto wn = t->leaf(w, true);
    auto bn = t->leaf(b, true);
    auto h = t->tanh(t->add_rowvec(t->matmul(xn, wn), bn));
    auto out = t->sum_sq(h);
    return std::tuple{std::move(t), xn, wn, bn, out};
  };

  auto [t, xn, wn, bn, out] = run(x0, w0, b0);
  t->backward(out);
  Mat gx = t->grad(xn), gw = t->grad(wn), gb = t->grad(bn);

  auto fx = [&](const Mat& x) {
    auto [tt, a, b2, c, o] = run(x, w0, b0);
    return tt->val(o)(0, 0);
  };
  auto fw = [&](const Mat& w) {
    auto [tt, a, b2, c, o] = run(x0, w, b0);
    return tt->val(o)(0, 0);
  };
  auto fb = [&](const Mat& b) {
    auto [tt, a, b2, c, o] = run(x0, w0, b);
    return tt->val(o)(0, 0);
  };
  EXPECT_LT(rel_err(gx, numeric_grad(fx, x0)), 1e-7);
  EXPECT_LT(rel_err(gw, numeric_grad(fw, w0)), 1e-7);
  EXPECT_LT(rel_err(gb, numeric_grad(fb, b0)), 1e-7);
}

TEST(Tape, SharedInputAccumulates) {
  // f(x) = sum(x * x); gradient must be 2x, exercising fan-out accumulation
  Mat x0(2, 2, {1, -2, 3, 0.5});
  Tape t;
  auto xn = t.leaf(x0, true);
  auto out = t.sum_all(t.mul(xn, xn));
  t.backward(out);
  Mat g = t.grad(xn);
  for (size_t i = 0; i < x0.a.size(); ++i) EXPECT_NEAR(g.a[i], 2 * x0.a[i], 1e-12);
}

TEST(Tape, WeightedRowSoftmaxGradient) {
  Rng rng(2);
  Mat e0 = rng.normal_mat(4, 4);
  Mat w0(4, 4);
  // nonnegative weights with guaranteed diagonal support, like the
  // attention layers build from A^2 + I
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) w0(i, j) = (i == j) ? 1.0 : std::abs(rng.normal()) * (rng.coin() ? 1 : 0);

  Mat probe = rng.normal_mat(4, 4);  // fixed linear readout makes a scalar
  auto run = [&](const Mat& e, const Mat& w) {
    auto t = std::make_unique<Tape>();
    auto en = t->leaf(e, true);
    auto wn = t->leaf(w, true);
    auto alpha = t->weighted_row_softmax(en, wn);
    auto out = t->sum_all(t->mul(alpha, t->constant(probe)));
    return std::tuple{std::move(t), en, wn, out};
  };
  auto [t, en, wn, out] = run(e0, w0);
  t->backward(out);
  Mat ge = t->grad(en), gw = t->grad(wn);

  auto fe = [&](const Mat& e) {
    auto [tt, a, b, o] = run(e, w0);
    return tt->val(o)(0, 0);
  };
  EXPECT_LT(rel_err(ge, numeric_grad(fe, e0)), 1e-7);

  // rows sum to one
  Tape t2;
  auto alpha = t2.weighted_row_softmax(t2.constant(e0), t2.constant(w0));
  for (int i = 0; i < 4; ++i) {
    double s = 0;
    for (int j = 0; j < 4; ++j) s += t2.val(alpha)(i, j);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }

  // weight gradient only checked at strictly positive weights (zero weights
  // sit on the boundary of the nonnegativity constraint)
  Mat w_pos(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) w_pos(i, j) = 0.3 + std::abs(rng.normal());
  auto [t3, en3, wn3, out3] = run(e0, w_pos);
  t3->backward(out3);
  Mat gw3 = t3->grad(wn3);
  auto fw = [&](const Mat& w) {
    auto [tt, a, b, o] = run(e0, w);
    return tt->val(o)(0, 0);
  };
  EXPECT_LT(rel_err(gw3, numeric_grad(fw, w_pos)), 1e-7);
}

TEST(Tape, StructuredOps) {
  Rng rng(3);
  Mat x0 = rng.normal_mat(4, 4);
  Mat p0 = rng.normal_mat(4, 1), q0 = rng.normal_mat(4, 1);
  Mat s0(1, 1, {0.7});
  Mat probe = rng.normal_mat(4, 4);
  Mat probe_row = rng.normal_mat(1, 4);

  auto run = [&](const Mat& x, const Mat& p, const Mat& q, const Mat& s) {
    auto t = std::make_unique<Tape>();
    auto xn = t->leaf(x, true);
    auto pn = t->leaf(p, true);
    auto qn = t->leaf(q, true);
    auto sn = t->leaf(s, true);
    auto sym = t->zero_diag(t->symmetrize(t->scale_by(xn, sn)));
    auto os = t->outer_sum(pn, qn);
    auto combined = t->add(sym, t->leaky_relu(os, 0.2));
    auto pooled = t->mean_rows(combined);  // 1 x 4
    auto out = t->add(t->sum_all(t->mul(combined, t->constant(probe))),
                      t->sum_sq(t->mul(pooled, t->constant(probe_row))));
    return std::tuple{std::move(t), xn, pn, qn, sn, out};
  };
  auto [t, xn, pn, qn, sn, out] = run(x0, p0, q0, s0);
  t->backward(out);

  auto check = [&](Tape::NodeId node, const Mat& at, auto swap) {
    Mat g = t->grad(node);
    auto f = [&](const Mat& v) {
      auto [tt, a, b, c, d, o] = swap(v);
      return tt->val(o)(0, 0);
    };
    EXPECT_LT(rel_err(g, numeric_grad(f, at)), 1e-6);
  };
  check(xn, x0, [&](const Mat& v) { return run(v, p0, q0, s0); });
  check(pn, p0, [&](const Mat& v) { return run(x0, v, q0, s0); });
  check(qn, q0, [&](const Mat& v) { return run(x0, p0, v, s0); });
  check(sn, s0, [&](const Mat& v) { return run(x0, p0, q0, v); });
}

TEST(Tape, ConstantsReceiveNoGradientWork) {
  Mat x(2, 2, {1, 2, 3, 4});
  Tape t;
  auto c = t.constant(x);
  auto out = t.sum_sq(c);
  t.backward(out);
  Mat g = t.grad(c);
  for (double v : g.a) EXPECT_EQ(v, 0.0);
}
