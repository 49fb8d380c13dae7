#pragma once

// PIN training: each molecule is paired with its context vector and the
// network sees both the clean graph and forward-noised copies for
// t <= floor(0.05 * S), S the generation step count, all labeled with the
// same context — the estimator only needs to hold in the neighborhood of
// the data manifold where guidance acts late in sampling.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "kgdiff/core/adam.hpp"
#include "kgdiff/diffusion/sample.hpp"
#include "kgdiff/pin/network.hpp"

namespace kgdiff::pin {

struct PinTrainConfig {
  PinConfig net;
  int steps = 2000;
  int batch_size = 16;
  double learning_rate = 1e-3;
  uint64_t seed = 0;
};

struct PinExample {
  diffusion::GraphState g0;  // continuous-encoded clean graph
  Mat context;               // 1 x context_dim
};

inline int max_pin_noise_level(int generation_steps) { return int(0.05 * double(generation_steps)); }

struct PinTrainResult {
  PinNet net;
  std::vector<double> loss_trace;
};

inline PinTrainResult pin_train(const std::vector<PinExample>& pairs,
                                const diffusion::DiffusionSchedule& sched, const PinTrainConfig& cfg) {
  if (pairs.empty()) throw std::invalid_argument("pin_train: no training pairs");
  for (const PinExample& p : pairs)
    if (p.context.rows != 1 || p.context.cols != cfg.net.context_dim)
      throw std::invalid_argument("pin_train: context dimension does not match the network output");

  Rng root(cfg.seed);
  Rng init_rng = root.substream("pin-init");
  Rng batch_rng = root.substream("pin-batches");
  Rng noise_rng = root.substream("pin-noise");

  PinTrainResult out;
  out.net = PinNet::init(cfg.net, init_rng);

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.learning_rate;
  AdamState adam;

  const int t_max = max_pin_noise_level(sched.T);

  for (int step = 1; step <= cfg.steps; ++step) {
    double loss_sum = 0.0;
    std::vector<Mat> grads;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const PinExample& ex = pairs[batch_rng.uniform_index(pairs.size())];
      const int t_noise = int(noise_rng.uniform_index(uint64_t(t_max) + 1));  // 0 = clean
      diffusion::GraphState g = ex.g0;
      if (t_noise >= 1) g = diffusion::forward_noise(ex.g0, t_noise, sched, noise_rng);

      grad::Tape tape;
      PinForward f = pin_forward_tape(tape, out.net, g.X, g.A, true, false);
      auto loss = tape.sum_sq(tape.sub(tape.constant(ex.context), f.output));
      tape.backward(loss);
      loss_sum += tape.val(loss)(0, 0);

      std::vector<Mat> g_here;
      for (auto id : f.params) g_here.push_back(tape.grad(id));
      if (grads.empty())
        grads = std::move(g_here);
      else
        for (size_t i = 0; i < grads.size(); ++i) grads[i] += g_here[i];
    }
    const double inv = 1.0 / double(cfg.batch_size);
    for (Mat& g : grads) g *= inv;
    loss_sum *= inv;
    if (!std::isfinite(loss_sum))
      throw std::runtime_error("pin_train: non-finite loss at step " + std::to_string(step));

    std::vector<const Mat*> gp;
    for (const Mat& g : grads) gp.push_back(&g);
    adam_step(out.net.param_tables(), gp, adam, adam_cfg);
    out.loss_trace.push_back(loss_sum);
  }
  return out;
}

}  // namespace kgdiff::pin
