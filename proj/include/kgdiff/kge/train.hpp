#pragma once

// Embedding training. Two modes:
//   slcwa_margin — minibatch SGD over margin-ranked (positive, corrupted)
//                  pairs with Adam, the standard large-scale recipe;
//   exact_mle    — full-batch descent on the exact constrained MLE loss,
//                  viable at desk scale where Z is enumerable.
// Training is single-threaded and bit-reproducible for a fixed seed.
// RotatE relation phases are re-projected to unit modulus after every step.
//
// Default learning rate follows the prose hyperparameters (1e-4); the
// pseudocode variant of the same recipe states 0.005, so the value is a
// config knob rather than a constant.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgdiff/core/adam.hpp"
#include "kgdiff/kge/loss.hpp"
#include "kgdiff/kge/sampling.hpp"

namespace kgdiff::kge {

enum class TrainingMode { slcwa_margin, exact_mle };

struct KgeConfig {
  ModelKind kind = ModelKind::TransE;
  TrainingMode mode = TrainingMode::slcwa_margin;
  int dim = 32;              // desk-scale default; 256 targets full datasets
  double learning_rate = 1e-4;
  double margin = 0.2;
  int epochs = 100;
  int batch_size = 256;      // desk-scale default; 16384 targets full datasets
  int negatives_per_positive = 1;
  bool respect_constraints = true;
  uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int64_t partition_term_cap = 10'000'000;

  void validate() const {
    if (dim <= 0) throw std::invalid_argument("kge: dim must be positive");
    if (margin < 0) throw std::invalid_argument("kge: margin must be >= 0");
    if (epochs < 1) throw std::invalid_argument("kge: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("kge: batch_size must be >= 1");
    if (negatives_per_positive < 1) throw std::invalid_argument("kge: negatives_per_positive must be >= 1");
  }
};

struct KgeTrainResult {
  EmbeddingTable table;
  std::vector<double> loss_trace;  // one entry per epoch
};

// `train` carries the training triples; `full` is the graph whose positive
// set filters negative corruptions (typically the unsplit graph).
inline KgeTrainResult train_kge(const kg::KnowledgeGraph& full, const std::vector<kg::Triple>& train,
                                const KgeConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("train_kge: empty training set");

  Rng root(cfg.seed);
  Rng init_rng = root.substream("kge-init");
  Rng sample_rng = root.substream("kge-negatives");
  Rng shuffle_rng = root.substream("kge-shuffle");

  KgeTrainResult out;
  out.table = init_embeddings(cfg.kind, full.entity_count(), full.relation_count(), cfg.dim, init_rng);
  EmbeddingTable& emb = out.table;

  AdamConfig adam_cfg{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  AdamState adam;

  const bool constrained = cfg.respect_constraints && !full.constraints.empty();
  SlotCandidates candidates;
  if (constrained) candidates = SlotCandidates::build(full);

  Mat grad_e(emb.entities.rows, emb.entities.cols);
  Mat grad_r(emb.relations.rows, emb.relations.cols);

  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  kg::KnowledgeGraph train_view;  // dictionaries shared by copy, triples = train split
  if (cfg.mode == TrainingMode::exact_mle) {
    train_view.entities = full.entities;
    train_view.relations = full.relations;
    train_view.constraints = full.constraints;
    for (const kg::Triple& t : train) train_view.add_triple(t);
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;

    if (cfg.mode == TrainingMode::slcwa_margin) {
      shuffle_rng.shuffle(order);
      size_t samples = 0;
      for (size_t begin = 0; begin < order.size(); begin += size_t(cfg.batch_size)) {
        const size_t end = std::min(order.size(), begin + size_t(cfg.batch_size));
        grad_e.fill(0.0);
        grad_r.fill(0.0);
        double batch_loss = 0.0;
        int batch_terms = 0;
        for (size_t i = begin; i < end; ++i) {
          const kg::Triple& pos = train[order[i]];
          const double pos_dist = margin_distance(emb, pos);
          for (int nneg = 0; nneg < cfg.negatives_per_positive; ++nneg) {
            const NegativeSample neg =
                negative_sample_slcwa(pos, full, sample_rng, constrained, constrained ? &candidates : nullptr);
            if (neg.known_positive) continue;  // saturated graph, skip the pair
            const double neg_dist = margin_distance(emb, neg.triple);
            const double loss = margin_loss(pos_dist, neg_dist, cfg.margin);
            batch_loss += loss;
            ++batch_terms;
            if (loss > 0.0) {
              accumulate_margin_distance_gradient(emb, pos, 1.0, grad_e, grad_r);
              accumulate_margin_distance_gradient(emb, neg.triple, -1.0, grad_e, grad_r);
            }
          }
        }
        if (batch_terms > 0) {
          const double inv = 1.0 / double(batch_terms);
          grad_e *= inv;
          grad_r *= inv;
          adam_step({&emb.entities, &emb.relations}, {&grad_e, &grad_r}, adam, adam_cfg);
          normalize_relation_phases(emb);
        }
        epoch_loss += batch_loss;
        samples += size_t(batch_terms);
      }
      epoch_loss = samples > 0 ? epoch_loss / double(samples) : 0.0;
    } else {
      epoch_loss = mle_loss_gradient(emb, train_view, full.constraints, grad_e, grad_r,
                                     cfg.partition_term_cap);
      adam_step({&emb.entities, &emb.relations}, {&grad_e, &grad_r}, adam, adam_cfg);
      normalize_relation_phases(emb);
    }

    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("train_kge: non-finite loss at epoch " + std::to_string(epoch) +
                               " (value " + std::to_string(epoch_loss) + "); lower the learning rate");
    out.loss_trace.push_back(epoch_loss);
  }
  return out;
}

}  // namespace kgdiff::kge
