#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "simsig/loss.hpp"
#include "simsig/model.hpp"
#include "simsig/rng.hpp"
#include "simsig/signal.hpp"

namespace simsig {

struct TrainConfig {
  LossName loss = LossName::nt_xent_multi;
  int batch_size = 512;
  int epochs = 50;
  double learning_rate = 1e-3;
  double tau = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables clipping
  bool multi_include_self = false;
  uint64_t seed = 1;
  std::filesystem::path checkpoint_dir = "checkpoints";

  void validate() const;
};

// Row selections for one minibatch: (patient index, segment index) per row,
// plus the anchor pairing in nt_xent mode.
struct MinibatchIndex {
  std::vector<std::pair<int, int>> rows;
  Pairing pairing;
};

// nt_xent: K/2 distinct individuals contributing an id-matched pair each.
// nt_xent_multi: every included individual contributes at least 2 segments
// and at least 2 individuals appear, so each anchor has a positive and a
// negative.
MinibatchIndex sample_minibatch(const Dataset& ds, const TrainConfig& cfg, Rng& rng);

// Z-scored segment batch plus row ids, ready for the encoder and the loss.
std::pair<MatF, std::vector<std::string>> assemble_batch(const Dataset& ds,
                                                         const MinibatchIndex& idx);

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::vector<double> epoch_mean_loss;  // per-anchor mean, one entry per epoch
};

// Runs the optimization loop, writing one checkpoint per epoch plus final.ckpt
// and loss_history.csv under cfg.checkpoint_dir. When `resume_from` is given,
// continues from that checkpoint's epoch with its Adam state.
TrainResult train(const Dataset& ds, const EncoderConfig& enc, const ProjectionConfig& proj,
                  const TrainConfig& cfg,
                  const std::filesystem::path* resume_from = nullptr);

}  // namespace simsig
