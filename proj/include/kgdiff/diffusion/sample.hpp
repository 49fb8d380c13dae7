#pragma once

// Forward noising and reverse-time Euler-Maruyama sampling over (X, A).
// Noise on A is always symmetrized with unit per-entry variance and a zero
// diagonal, so symmetry is preserved along the whole trajectory. Guidance
// adds lambda * grad log p(c | G_t) to the score before each reverse step.

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "kgdiff/core/rng.hpp"
#include "kgdiff/diffusion/schedule.hpp"
#include "kgdiff/diffusion/score_net.hpp"
#include "kgdiff/mol/corpus.hpp"
#include "kgdiff/mol/quantize.hpp"

namespace kgdiff::diffusion {

// (X_t, A_t, t) -> (score_X, score_A); adapters exist for the network and
// for analytic oracles in tests
using ScoreFn = std::function<std::pair<Mat, Mat>(const Mat&, const Mat&, int)>;

inline ScoreFn network_score_fn(const ScoreNet& net, const DiffusionSchedule& sched) {
  return [&net, &sched](const Mat& X, const Mat& A, int t) {
    return score_forward(net, X, A, t, std::sqrt(1.0 - sched.alpha_bar_at(t)));
  };
}

// grad log p(c | G_t) evaluated at (X_t, A_t, t)
using GuidanceGradFn = std::function<std::pair<Mat, Mat>(const Mat&, const Mat&, int)>;

struct Guidance {
  double lambda = 1.0;
  GuidanceGradFn grad_log_p;
  // joint norm cap on the returned gradient; an imperfect inference network
  // evaluated far off-manifold can emit gradients that blow up the state
  double max_norm = 10.0;
};

inline std::pair<Mat, Mat> clipped_guidance(const Guidance& g, const Mat& X, const Mat& A, int t) {
  auto [gx, ga] = g.grad_log_p(X, A, t);
  if (g.max_norm > 0.0) {
    const double norm = std::sqrt(dot(gx, gx) + dot(ga, ga));
    if (norm > g.max_norm) {
      gx *= g.max_norm / norm;
      ga *= g.max_norm / norm;
    }
  }
  return {std::move(gx), std::move(ga)};
}

// unit-variance symmetric noise with zero diagonal: one draw per pair
inline Mat symmetric_noise(int n, Rng& rng) {
  Mat z(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = rng.normal();
      z(i, j) = v;
      z(j, i) = v;
    }
  return z;
}

struct GraphState {
  Mat X;
  Mat A;
};

// X_t = sqrt(abar_t) X_0 + sqrt(1 - abar_t) eps, same for A with symmetric eps
inline GraphState forward_noise(const GraphState& g0, int t, const Mat& eps_x, const Mat& eps_a,
                                const DiffusionSchedule& sched) {
  if (t < 1 || t > sched.T) throw std::out_of_range("forward_noise: t outside [1, T]");
  const double abar = sched.alpha_bar_at(t);
  const double keep = std::sqrt(abar), mix = std::sqrt(1.0 - abar);
  GraphState g;
  g.X = g0.X * keep + eps_x * mix;
  g.A = g0.A * keep + eps_a * mix;
  return g;
}

inline GraphState forward_noise(const GraphState& g0, int t, const DiffusionSchedule& sched, Rng& rng) {
  const Mat eps_x = rng.normal_mat(g0.X.rows, g0.X.cols);
  const Mat eps_a = symmetric_noise(g0.A.rows, rng);
  return forward_noise(g0, t, eps_x, eps_a, sched);
}

struct ReverseStepOptions {
  bool noise_at_final_step = false;  // the default leaves the last denoise deterministic
};

// One Euler-Maruyama step of the reverse SDE:
//   G_{t-1} = (1 + beta_t/2) G_t + beta_t * score + sqrt(beta_t) z
inline GraphState reverse_step(const GraphState& g_t, int t, const ScoreFn& score,
                               const DiffusionSchedule& sched, Rng& rng,
                               const std::optional<Guidance>& guidance = std::nullopt,
                               const ReverseStepOptions& opts = {}) {
  if (t < 1) throw std::invalid_argument("reverse_step: t must be >= 1");
  const double beta = sched.beta_at(t);
  auto [sx, sa] = score(g_t.X, g_t.A, t);
  if (guidance && guidance->lambda != 0.0) {
    auto [gx, ga] = clipped_guidance(*guidance, g_t.X, g_t.A, t);
    sx += gx * guidance->lambda;
    sa += ga * guidance->lambda;
  }
  GraphState g;
  g.X = g_t.X * (1.0 + 0.5 * beta) + sx * beta;
  g.A = g_t.A * (1.0 + 0.5 * beta) + sa * beta;
  if (t > 1 || opts.noise_at_final_step) {
    const double w = std::sqrt(beta);
    g.X += rng.normal_mat(g.X.rows, g.X.cols) * w;
    g.A += symmetric_noise(g.A.rows, rng) * w;
  }
  g.A = symmetrize(g.A);
  zero_diagonal(g.A);
  return g;
}

struct SampleOptions {
  int fixed_atoms = 0;             // > 0 pins the node count, otherwise draw from the corpus sizes
  double prior_noise_scale = 1.0;  // out-of-distribution knob: scales the t=T prior draw
  bool keep_trajectories = false;
  ReverseStepOptions step;
};

struct SampleResult {
  std::vector<mol::MolecularGraph> molecules;            // quantized terminal graphs
  std::vector<GraphState> terminal_states;               // continuous G_0
  std::vector<std::vector<GraphState>> trajectories;     // G_T..G_0 when requested
};

// Each molecule runs on its own named substream, so results do not depend
// on how sampling work is laid out across workers.
inline SampleResult sample(const ScoreFn& score, int n_molecules, const DiffusionSchedule& sched,
                           const mol::AtomVocabulary& vocab, const std::vector<int>& size_pool,
                           Rng& root, const std::optional<Guidance>& guidance = std::nullopt,
                           const SampleOptions& opts = {}) {
  SampleResult out;
  for (int m = 0; m < n_molecules; ++m) {
    Rng rng = root.substream("sample-molecule", uint64_t(m));
    int n = opts.fixed_atoms;
    if (n <= 0) {
      if (size_pool.empty()) throw std::invalid_argument("sample: no size pool and no fixed atom count");
      n = size_pool[rng.uniform_index(size_pool.size())];
    }
    GraphState g;
    g.X = rng.normal_mat(n, vocab.size()) * opts.prior_noise_scale;
    g.A = symmetric_noise(n, rng) * opts.prior_noise_scale;

    std::vector<GraphState> traj;
    if (opts.keep_trajectories) traj.push_back(g);
    for (int t = sched.T; t >= 1; --t) {
      g = reverse_step(g, t, score, sched, rng, guidance, opts.step);
      if (opts.keep_trajectories) traj.push_back(g);
    }

    mol::MolecularGraph cont;
    cont.discrete = false;
    cont.X = g.X;
    cont.A = g.A;
    out.molecules.push_back(mol::quantize(cont, vocab));
    out.terminal_states.push_back(g);
    if (opts.keep_trajectories) out.trajectories.push_back(std::move(traj));
  }
  return out;
}

}  // namespace kgdiff::diffusion
