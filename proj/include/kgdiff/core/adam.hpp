#pragma once

// Bias-corrected Adam over one or more parameter tables. Each table gets its
// own moment buffers; one step() call may update several tables at once
// (entity + relation embeddings, say) without any cross-talk.

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "kgdiff/core/mat.hpp"

namespace kgdiff {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Mat> m;  // first moments, one per table
  std::vector<Mat> v;  // second moments
  long step_count = 0;
};

// One Adam update over matched (params, grads) tables. State is created
// lazily on the first call and must keep the same shapes afterwards.
inline void adam_step(std::vector<Mat*> params, const std::vector<const Mat*>& grads,
                      AdamState& state, const AdamConfig& cfg) {
  assert(params.size() == grads.size());
  if (state.m.empty()) {
    for (const Mat* p : params) {
      state.m.emplace_back(p->rows, p->cols);
      state.v.emplace_back(p->rows, p->cols);
    }
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state/table count mismatch");

  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step_count));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step_count));

  for (size_t k = 0; k < params.size(); ++k) {
    Mat& p = *params[k];
    const Mat& g = *grads[k];
    Mat& m = state.m[k];
    Mat& v = state.v[k];
    if (!p.same_shape(g) || !p.same_shape(m))
      throw std::invalid_argument("adam_step: shape mismatch");
    for (size_t i = 0; i < p.a.size(); ++i) {
      m.a[i] = cfg.beta1 * m.a[i] + (1.0 - cfg.beta1) * g.a[i];
      v.a[i] = cfg.beta2 * v.a[i] + (1.0 - cfg.beta2) * g.a[i] * g.a[i];
      const double mhat = m.a[i] / bc1;
      const double vhat = v.a[i] / bc2;
      p.a[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace kgdiff
