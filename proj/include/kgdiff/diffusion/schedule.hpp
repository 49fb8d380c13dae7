#pragma once

// Variance-preserving noise schedule. The continuous-time VP-SDE
// dG = -1/2 beta(s) G ds + sqrt(beta(s)) dw is discretized at T steps with
// beta_t = [beta_min + (t-1)/(T-1) (beta_max - beta_min)] * (T_ref / T),
// so the total injected noise (and hence alpha_bar_T) is independent of T.
// At the reference T of 1000 this is exactly the familiar linear
// 1e-4 -> 0.02 schedule. Drift f_t = -1/2 beta_t G, diffusion g_t = sqrt(beta_t).

#include <cmath>
#include <stdexcept>
#include <vector>

namespace kgdiff::diffusion {

struct DiffusionSchedule {
  int T = 0;
  std::vector<double> beta;       // beta[t-1] for t in 1..T
  std::vector<double> alpha_bar;  // alpha_bar[t] for t in 0..T, alpha_bar[0] = 1

  DiffusionSchedule() = default;
  DiffusionSchedule(int steps, double beta_min = 1e-4, double beta_max = 0.02, int reference_T = 1000) {
    if (steps < 1) throw std::invalid_argument("schedule: T must be >= 1");
    if (!(beta_min > 0.0 && beta_max >= beta_min))
      throw std::invalid_argument("schedule: need 0 < beta_min <= beta_max");
    T = steps;
    beta.resize(size_t(T));
    const double scale = double(reference_T) / double(T);
    for (int t = 1; t <= T; ++t) {
      const double frac = T == 1 ? 0.0 : double(t - 1) / double(T - 1);
      beta[size_t(t - 1)] = (beta_min + frac * (beta_max - beta_min)) * scale;
      if (beta[size_t(t - 1)] >= 1.0)
        throw std::invalid_argument("schedule: beta_t >= 1; raise T or lower beta_max");
    }
    alpha_bar.resize(size_t(T) + 1);
    alpha_bar[0] = 1.0;
    for (int t = 1; t <= T; ++t) alpha_bar[size_t(t)] = alpha_bar[size_t(t - 1)] * (1.0 - beta[size_t(t - 1)]);
    for (int t = 1; t <= T; ++t)
      if (!(alpha_bar[size_t(t)] < alpha_bar[size_t(t - 1)]))
        throw std::logic_error("schedule: alpha_bar must decrease strictly");
    if (alpha_bar[size_t(T)] >= 0.01)
      throw std::invalid_argument("schedule: alpha_bar_T >= 0.01, terminal state is not close to the prior");
  }

  double beta_at(int t) const {
    if (t < 1 || t > T) throw std::out_of_range("schedule: t outside [1, T]");
    return beta[size_t(t - 1)];
  }
  double alpha_bar_at(int t) const {
    if (t < 0 || t > T) throw std::out_of_range("schedule: t outside [0, T]");
    return alpha_bar[size_t(t)];
  }
};

}  // namespace kgdiff::diffusion
