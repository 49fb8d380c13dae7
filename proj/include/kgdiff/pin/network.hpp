#pragma once

// Property Inference Network P_phi: aggregation layer H1 = sigma(A X W0)
// with self-loops, a stack of graph-attention layers whose neighborhoods
// are the bonded atoms plus self, mean pooling, and a projection to the
// KGE context dimension. sigma is the leaky rectifier with slope 0.2.
//
// Attention support uses A^2 + I as nonnegative edge weights inside a
// weighted softmax: on a discrete graph that is exactly "bonded neighbors
// plus self", and on noised continuous graphs it is a smooth relaxation,
// which keeps the whole map differentiable in both X and A for guidance.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "kgdiff/core/mat.hpp"
#include "kgdiff/core/rng.hpp"
#include "kgdiff/grad/tape.hpp"

namespace kgdiff::pin {

struct PinConfig {
  int atom_types = 4;
  int hidden = 64;
  int attention_layers = 3;
  int context_dim = 8;  // must equal the paired KGE embedding dimension
  double leaky_slope = 0.2;
};

struct PinNet {
  PinConfig cfg;
  Mat w0;  // aggregation weights, M x h
  struct AttLayer {
    Mat w;      // h x h
    Mat a_src;  // h x 1, scores the source half of [Wh_i (+) Wh_j]
    Mat a_dst;  // h x 1
  };
  std::vector<AttLayer> layers;
  Mat w_out;  // h x context_dim

  static PinNet init(const PinConfig& cfg, Rng& rng) {
    auto glorot = [&rng](int rows, int cols) {
      const double b = std::sqrt(6.0 / double(rows + cols));
      return rng.uniform_mat(rows, cols, -b, b);
    };
    PinNet n;
    n.cfg = cfg;
    n.w0 = glorot(cfg.atom_types, cfg.hidden);
    for (int l = 0; l < cfg.attention_layers; ++l)
      n.layers.push_back({glorot(cfg.hidden, cfg.hidden), glorot(cfg.hidden, 1), glorot(cfg.hidden, 1)});
    n.w_out = glorot(cfg.hidden, cfg.context_dim);
    return n;
  }

  std::vector<Mat*> param_tables() {
    std::vector<Mat*> p{&w0};
    for (AttLayer& l : layers) {
      p.push_back(&l.w);
      p.push_back(&l.a_src);
      p.push_back(&l.a_dst);
    }
    p.push_back(&w_out);
    return p;
  }
  std::vector<const Mat*> param_tables() const {
    std::vector<const Mat*> out;
    for (Mat* m : const_cast<PinNet*>(this)->param_tables()) out.push_back(m);
    return out;
  }
};

struct PinForward {
  grad::Tape::NodeId x_in = -1, a_in = -1;
  grad::Tape::NodeId output = -1;  // 1 x context_dim
  std::vector<grad::Tape::NodeId> params;
  std::vector<grad::Tape::NodeId> attention;  // per layer, rows sum to 1
};

inline PinForward pin_forward_tape(grad::Tape& t, const PinNet& net, const Mat& X, const Mat& A,
                                   bool params_need_grad = true, bool inputs_need_grad = false) {
  if (X.rows < 1) throw std::invalid_argument("pin_forward: graph must have at least one node");
  if (X.cols != net.cfg.atom_types) throw std::invalid_argument("pin_forward: atom-type width mismatch");
  if (A.rows != X.rows || A.cols != X.rows)
    throw std::invalid_argument("pin_forward: adjacency shape mismatch");

  PinForward f;
  f.x_in = t.leaf(X, inputs_need_grad);
  f.a_in = t.leaf(A, inputs_need_grad);
  for (const Mat* p : net.param_tables()) f.params.push_back(t.leaf(*p, params_need_grad));

  const int n = X.rows;
  Mat eye(n, n);
  for (int i = 0; i < n; ++i) eye(i, i) = 1.0;
  const auto identity = t.constant(eye);

  size_t pi = 0;
  auto next_param = [&]() { return f.params[pi++]; };

  // H1 = sigma((A + I) X W0): self-loops keep isolated nodes alive
  const auto a_aug = t.add(f.a_in, identity);
  auto h = t.leaky_relu(t.matmul(t.matmul(a_aug, f.x_in), next_param()), net.cfg.leaky_slope);

  // attention support: A*A + I, exactly graph-local on discrete graphs
  const auto support = t.add(t.mul(f.a_in, f.a_in), identity);

  for (int l = 0; l < net.cfg.attention_layers; ++l) {
    const auto w = next_param(), a_src = next_param(), a_dst = next_param();
    const auto hw = t.matmul(h, w);  // N x h
    const auto logits = t.leaky_relu(t.outer_sum(t.matmul(hw, a_src), t.matmul(hw, a_dst)),
                                     net.cfg.leaky_slope);
    const auto alpha = t.weighted_row_softmax(logits, support);
    f.attention.push_back(alpha);
    h = t.matmul(alpha, hw);
  }

  f.output = t.matmul(t.mean_rows(h), next_param());
  return f;
}

// Plain evaluation: c_hat as a 1 x context_dim row.
inline Mat pin_forward(const PinNet& net, const Mat& X, const Mat& A) {
  grad::Tape t;
  PinForward f = pin_forward_tape(t, net, X, A, false, false);
  return t.val(f.output);
}

}  // namespace kgdiff::pin
