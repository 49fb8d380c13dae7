#pragma once

// Score network over (X, A): K message-passing layers where node states mix
// a linear self-term with A-weighted neighbor aggregation, a sinusoidal
// time embedding projected into every layer, an X head producing N x M node
// scores, and an edge head scoring pairs bilinearly from node states plus a
// learned gate on A_t itself. The A output is symmetrized with a zero
// diagonal, and every block is permutation-equivariant by construction.
//
// tanh keeps the whole network smooth, which the finite-difference oracles
// rely on.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "kgdiff/core/mat.hpp"
#include "kgdiff/core/rng.hpp"
#include "kgdiff/grad/tape.hpp"

namespace kgdiff::diffusion {

struct ScoreNetConfig {
  int atom_types = 4;
  int hidden = 32;
  int layers = 3;
  int time_dim = 16;
  int edge_hidden = 16;
};

inline Mat time_embedding(int step, int dim) {
  Mat e(1, dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
    e(0, 2 * i) = std::sin(double(step) * freq);
    e(0, 2 * i + 1) = std::cos(double(step) * freq);
  }
  return e;
}

struct ScoreNet {
  ScoreNetConfig cfg;
  Mat w_in, b_in, wt_in;
  struct Layer {
    Mat w_self, w_nbr, b, w_time;
  };
  std::vector<Layer> layers;
  Mat w_x, b_x;      // X head
  Mat w_e1, w_e2;    // edge head projections
  Mat a_gain;        // 1x1 gate on A_t in the edge head

  static ScoreNet init(const ScoreNetConfig& cfg, Rng& rng) {
    auto glorot = [&rng](int rows, int cols) {
      const double b = std::sqrt(6.0 / double(rows + cols));
      return rng.uniform_mat(rows, cols, -b, b);
    };
    ScoreNet n;
    n.cfg = cfg;
    n.w_in = glorot(cfg.atom_types, cfg.hidden);
    n.b_in = Mat(1, cfg.hidden);
    n.wt_in = glorot(cfg.time_dim, cfg.hidden);
    for (int l = 0; l < cfg.layers; ++l) {
      Layer lay;
      lay.w_self = glorot(cfg.hidden, cfg.hidden);
      lay.w_nbr = glorot(cfg.hidden, cfg.hidden);
      lay.b = Mat(1, cfg.hidden);
      lay.w_time = glorot(cfg.time_dim, cfg.hidden);
      n.layers.push_back(std::move(lay));
    }
    n.w_x = glorot(cfg.hidden, cfg.atom_types);
    n.b_x = Mat(1, cfg.atom_types);
    n.w_e1 = glorot(cfg.hidden, cfg.edge_hidden);
    n.w_e2 = glorot(cfg.hidden, cfg.edge_hidden);
    n.a_gain = Mat(1, 1);
    n.a_gain(0, 0) = 0.1;
    return n;
  }

  std::vector<Mat*> param_tables() {
    std::vector<Mat*> p{&w_in, &b_in, &wt_in};
    for (Layer& l : layers) {
      p.push_back(&l.w_self);
      p.push_back(&l.w_nbr);
      p.push_back(&l.b);
      p.push_back(&l.w_time);
    }
    p.push_back(&w_x);
    p.push_back(&b_x);
    p.push_back(&w_e1);
    p.push_back(&w_e2);
    p.push_back(&a_gain);
    return p;
  }
  std::vector<const Mat*> param_tables() const {
    return const_cast<ScoreNet*>(this)->const_tables();
  }

 private:
  std::vector<const Mat*> const_tables() {
    std::vector<const Mat*> out;
    for (Mat* m : param_tables()) out.push_back(m);
    return out;
  }
};

struct ScoreForward {
  grad::Tape::NodeId x_in = -1, a_in = -1;
  grad::Tape::NodeId score_x = -1, score_a = -1;
  std::vector<grad::Tape::NodeId> params;
};

// Builds the forward pass on the tape. Gradients can flow to the parameters
// (training) and/or the inputs (not used by DSM, but free to request).
//
// `noise_std` is sqrt(1 - alpha_bar_t): the heads predict the O(1) noise
// direction and the score is that output divided by the perturbation
// standard deviation, which is what the true score scales like.
inline ScoreForward score_forward_tape(grad::Tape& t, const ScoreNet& net, const Mat& X, const Mat& A,
                                       int step, double noise_std = 1.0, bool params_need_grad = true,
                                       bool inputs_need_grad = false) {
  if (X.cols != net.cfg.atom_types)
    throw std::invalid_argument("score_forward: atom-type width mismatch");
  if (A.rows != X.rows || A.cols != X.rows)
    throw std::invalid_argument("score_forward: adjacency shape mismatch");
  if (!X.all_finite() || !A.all_finite())
    throw std::invalid_argument("score_forward: non-finite input");

  ScoreForward f;
  f.x_in = t.leaf(X, inputs_need_grad);
  f.a_in = t.leaf(A, inputs_need_grad);
  for (const Mat* p : net.param_tables()) f.params.push_back(t.leaf(*p, params_need_grad));

  size_t pi = 0;
  auto next_param = [&]() { return f.params[pi++]; };
  const auto w_in = next_param(), b_in = next_param(), wt_in = next_param();

  const auto temb = t.constant(time_embedding(step, net.cfg.time_dim));
  const auto a_sym = t.symmetrize(f.a_in);

  auto h = t.tanh(t.add_rowvec(t.add_rowvec(t.matmul(f.x_in, w_in), b_in), t.matmul(temb, wt_in)));
  for (int l = 0; l < net.cfg.layers; ++l) {
    const auto w_self = next_param(), w_nbr = next_param(), b = next_param(), w_time = next_param();
    auto neighbor = t.matmul(a_sym, t.matmul(h, w_nbr));
    auto pre = t.add(t.matmul(h, w_self), neighbor);
    pre = t.add_rowvec(t.add_rowvec(pre, b), t.matmul(temb, w_time));
    h = t.tanh(pre);
  }

  const auto w_x = next_param(), b_x = next_param();
  const double inv_std = 1.0 / noise_std;
  f.score_x = t.scale(t.add_rowvec(t.matmul(h, w_x), b_x), inv_std);

  const auto w_e1 = next_param(), w_e2 = next_param(), a_gain = next_param();
  auto pair = t.matmul(t.matmul(h, w_e1), t.transpose(t.matmul(h, w_e2)));
  auto edge = t.add(pair, t.scale_by(a_sym, a_gain));
  f.score_a = t.scale(t.zero_diag(t.symmetrize(edge)), inv_std);
  return f;
}

// Plain evaluation without gradients.
inline std::pair<Mat, Mat> score_forward(const ScoreNet& net, const Mat& X, const Mat& A, int step,
                                         double noise_std = 1.0) {
  grad::Tape t;
  ScoreForward f = score_forward_tape(t, net, X, A, step, noise_std, false, false);
  return {t.val(f.score_x), t.val(f.score_a)};
}

// copy tape gradients back out in param_tables() order
inline std::vector<Mat> collect_param_grads(const grad::Tape& t, const ScoreForward& f) {
  std::vector<Mat> g;
  g.reserve(f.params.size());
  for (auto id : f.params) g.push_back(t.grad(id));
  return g;
}

}  // namespace kgdiff::diffusion
