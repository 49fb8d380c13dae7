#pragma once

// Reverse-mode autodiff over Mat. A Tape is built fresh per forward pass;
// ops append nodes that remember how to push gradients back to their
// parents. Creation order is a topological order, so backward() is a single
// reverse sweep. Desk-scale graphs make std::function dispatch a non-issue.
//
// Gradients flow to any leaf marked differentiable, which is what lets the
// same network code serve parameter training (grads w.r.t. weights) and
// guidance (grads w.r.t. the input graph).

#include <cassert>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kgdiff/core/mat.hpp"

namespace kgdiff::grad {

class Tape {
 public:
  using NodeId = int;

  NodeId leaf(Mat v, bool needs_grad) {
    return push(std::move(v), needs_grad, {});
  }
  NodeId constant(Mat v) { return leaf(std::move(v), false); }

  const Mat& val(NodeId id) const { return nodes_[id].val; }

  // Zero Mat if no gradient reached the node.
  Mat grad(NodeId id) const {
    if (grads_[id].empty()) return Mat(nodes_[id].val.rows, nodes_[id].val.cols);
    return grads_[id];
  }

  NodeId add(NodeId x, NodeId y) {
    assert(val(x).same_shape(val(y)));
    Mat z = val(x) + val(y);
    return push(std::move(z), needs(x) || needs(y), [x, y](Tape& t, const Mat& g) {
      t.accum(x, g);
      t.accum(y, g);
    });
  }

  NodeId sub(NodeId x, NodeId y) {
    assert(val(x).same_shape(val(y)));
    Mat z = val(x) - val(y);
    return push(std::move(z), needs(x) || needs(y), [x, y](Tape& t, const Mat& g) {
      t.accum(x, g);
      Mat neg = g;
      neg *= -1.0;
      t.accum(y, neg);
    });
  }

  // x: r x c, b: 1 x c, broadcast over rows
  NodeId add_rowvec(NodeId x, NodeId b) {
    const Mat& xv = val(x);
    const Mat& bv = val(b);
    assert(bv.rows == 1 && bv.cols == xv.cols);
    Mat z = xv;
    for (int i = 0; i < z.rows; ++i)
      for (int j = 0; j < z.cols; ++j) z(i, j) += bv(0, j);
    return push(std::move(z), needs(x) || needs(b), [x, b](Tape& t, const Mat& g) {
      t.accum(x, g);
      Mat gb(1, g.cols);
      for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < g.cols; ++j) gb(0, j) += g(i, j);
      t.accum(b, gb);
    });
  }

  NodeId mul(NodeId x, NodeId y) {
    Mat z = hadamard(val(x), val(y));
    return push(std::move(z), needs(x) || needs(y), [x, y](Tape& t, const Mat& g) {
      t.accum(x, hadamard(g, t.val(y)));
      t.accum(y, hadamard(g, t.val(x)));
    });
  }

  NodeId scale(NodeId x, double c) {
    Mat z = val(x) * c;
    return push(std::move(z), needs(x), [x, c](Tape& t, const Mat& g) {
      t.accum(x, g * c);
    });
  }

  // z = s * x with s a 1x1 node
  NodeId scale_by(NodeId x, NodeId s) {
    assert(val(s).rows == 1 && val(s).cols == 1);
    const double sv = val(s)(0, 0);
    Mat z = val(x) * sv;
    return push(std::move(z), needs(x) || needs(s), [x, s, sv](Tape& t, const Mat& g) {
      t.accum(x, g * sv);
      Mat gs(1, 1);
      gs(0, 0) = dot(g, t.val(x));
      t.accum(s, gs);
    });
  }

  NodeId matmul(NodeId x, NodeId y) {
    Mat z = kgdiff::matmul(val(x), val(y));
    return push(std::move(z), needs(x) || needs(y), [x, y](Tape& t, const Mat& g) {
      t.accum(x, kgdiff::matmul(g, kgdiff::transpose(t.val(y))));
      t.accum(y, kgdiff::matmul(kgdiff::transpose(t.val(x)), g));
    });
  }

  NodeId transpose(NodeId x) {
    Mat z = kgdiff::transpose(val(x));
    return push(std::move(z), needs(x), [x](Tape& t, const Mat& g) {
      t.accum(x, kgdiff::transpose(g));
    });
  }

  NodeId tanh(NodeId x) {
    Mat z = val(x);
    for (double& v : z.a) v = std::tanh(v);
    NodeId id = push(std::move(z), needs(x), {});
    nodes_[id].back = [x, id](Tape& t, const Mat& g) {
      const Mat& zz = t.val(id);
      Mat gx = g;
      for (size_t i = 0; i < gx.a.size(); ++i) gx.a[i] *= 1.0 - zz.a[i] * zz.a[i];
      t.accum(x, gx);
    };
    return id;
  }

  NodeId leaky_relu(NodeId x, double slope) {
    Mat z = val(x);
    for (double& v : z.a) v = v > 0.0 ? v : slope * v;
    return push(std::move(z), needs(x), [x, slope](Tape& t, const Mat& g) {
      const Mat& xv = t.val(x);
      Mat gx = g;
      for (size_t i = 0; i < gx.a.size(); ++i)
        if (xv.a[i] <= 0.0) gx.a[i] *= slope;
      t.accum(x, gx);
    });
  }

  // z_ij = p_i + q_j from two N x 1 columns
  NodeId outer_sum(NodeId p, NodeId q) {
    const Mat& pv = val(p);
    const Mat& qv = val(q);
    assert(pv.cols == 1 && qv.cols == 1 && pv.rows == qv.rows);
    const int n = pv.rows;
    Mat z(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) z(i, j) = pv(i, 0) + qv(j, 0);
    return push(std::move(z), needs(p) || needs(q), [p, q, n](Tape& t, const Mat& g) {
      Mat gp(n, 1), gq(n, 1);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          gp(i, 0) += g(i, j);
          gq(j, 0) += g(i, j);
        }
      t.accum(p, gp);
      t.accum(q, gq);
    });
  }

  // alpha_ij = w_ij exp(e_ij) / sum_k w_ik exp(e_ik), rows sum to 1.
  // Weights must be nonnegative with at least one strictly positive entry
  // per row (callers guarantee this with a unit self-weight).
  NodeId weighted_row_softmax(NodeId e, NodeId w) {
    const Mat& ev = val(e);
    const Mat& wv = val(w);
    assert(ev.same_shape(wv));
    const int n = ev.rows, m = ev.cols;
    Mat phi(n, m);  // exp(e_ij - rowmax) / S_i
    Mat alpha(n, m);
    for (int i = 0; i < n; ++i) {
      double mx = -1e300;
      for (int j = 0; j < m; ++j)
        if (wv(i, j) > 0.0) mx = std::max(mx, ev(i, j));
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += wv(i, j) * std::exp(ev(i, j) - mx);
      if (!(s > 0.0)) throw std::runtime_error("weighted_row_softmax: empty row support");
      for (int j = 0; j < m; ++j) {
        phi(i, j) = std::exp(ev(i, j) - mx) / s;
        alpha(i, j) = wv(i, j) * phi(i, j);
      }
    }
    NodeId id = push(std::move(alpha), needs(e) || needs(w), {});
    nodes_[id].back = [e, w, id, phi](Tape& t, const Mat& g) {
      const Mat& av = t.val(id);
      const int nn = av.rows, mm = av.cols;
      Mat ge(nn, mm), gw(nn, mm);
      for (int i = 0; i < nn; ++i) {
        double ti = 0.0;
        for (int j = 0; j < mm; ++j) ti += g(i, j) * av(i, j);
        for (int j = 0; j < mm; ++j) {
          ge(i, j) = av(i, j) * (g(i, j) - ti);
          gw(i, j) = phi(i, j) * (g(i, j) - ti);
        }
      }
      t.accum(e, ge);
      t.accum(w, gw);
    };
    return id;
  }

  NodeId symmetrize(NodeId x) {
    Mat z = kgdiff::symmetrize(val(x));
    return push(std::move(z), needs(x), [x](Tape& t, const Mat& g) {
      t.accum(x, kgdiff::symmetrize(g));
    });
  }

  NodeId zero_diag(NodeId x) {
    Mat z = val(x);
    zero_diagonal(z);
    return push(std::move(z), needs(x), [x](Tape& t, const Mat& g) {
      Mat gx = g;
      zero_diagonal(gx);
      t.accum(x, gx);
    });
  }

  // column means over rows: r x c -> 1 x c
  NodeId mean_rows(NodeId x) {
    const Mat& xv = val(x);
    Mat z(1, xv.cols);
    for (int i = 0; i < xv.rows; ++i)
      for (int j = 0; j < xv.cols; ++j) z(0, j) += xv(i, j) / xv.rows;
    const int r = xv.rows;
    return push(std::move(z), needs(x), [x, r](Tape& t, const Mat& g) {
      Mat gx(r, g.cols);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < g.cols; ++j) gx(i, j) = g(0, j) / r;
      t.accum(x, gx);
    });
  }

  NodeId sum_all(NodeId x) {
    double s = 0.0;
    for (double v : val(x).a) s += v;
    Mat z(1, 1);
    z(0, 0) = s;
    return push(std::move(z), needs(x), [x](Tape& t, const Mat& g) {
      Mat gx(t.val(x).rows, t.val(x).cols, g(0, 0));
      t.accum(x, gx);
    });
  }

  NodeId sum_sq(NodeId x) {
    double s = 0.0;
    for (double v : val(x).a) s += v * v;
    Mat z(1, 1);
    z(0, 0) = s;
    return push(std::move(z), needs(x), [x](Tape& t, const Mat& g) {
      Mat gx = t.val(x);
      gx *= 2.0 * g(0, 0);
      t.accum(x, gx);
    });
  }

  // Seeds d(out)/d(out) = 1; out must be scalar (1x1).
  void backward(NodeId out) {
    if (!(val(out).rows == 1 && val(out).cols == 1))
      throw std::invalid_argument("backward: output must be 1x1");
    grads_.assign(nodes_.size(), Mat());
    Mat seed(1, 1);
    seed(0, 0) = 1.0;
    grads_[out] = seed;
    for (NodeId id = out; id >= 0; --id) {
      if (grads_[id].empty() || !nodes_[id].back || !nodes_[id].needs_grad) continue;
      nodes_[id].back(*this, grads_[id]);
    }
  }

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat val;
    bool needs_grad = false;
    std::function<void(Tape&, const Mat&)> back;
  };

  bool needs(NodeId id) const { return nodes_[id].needs_grad; }

  NodeId push(Mat v, bool needs_grad, std::function<void(Tape&, const Mat&)> back) {
    nodes_.push_back(Node{std::move(v), needs_grad, std::move(back)});
    grads_.emplace_back();
    return NodeId(nodes_.size()) - 1;
  }

  void accum(NodeId id, const Mat& g) {
    if (!nodes_[id].needs_grad) return;
    if (grads_[id].empty())
      grads_[id] = g;
    else
      grads_[id] += g;
  }

  std::vector<Node> nodes_;
  std::vector<Mat> grads_;
};

}  // namespace kgdiff::grad
