#include "simsig/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "simsig/kernels.hpp"

namespace simsig {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (batch_size < 4) throw std::invalid_argument("train config: batch_size must be >= 4");
  if (loss == LossName::nt_xent && batch_size % 2 != 0)
    throw std::invalid_argument("train config: batch_size must be even for nt_xent");
  if (!(learning_rate > 0)) throw std::invalid_argument("train config: learning_rate must be > 0");
  if (!(tau > 0)) throw std::invalid_argument("train config: tau must be > 0");
}

namespace {

std::vector<int> eligible_patients(const Dataset& ds) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(ds.patients.size()); ++i)
    if (ds.patients[i].segments.size() >= 2) out.push_back(i);
  return out;
}

// `count` distinct segment indices of patient p, order randomized.
std::vector<int> draw_segments(const PatientRecord& p, int count, Rng& rng) {
  std::vector<int> idx(p.segments.size());
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  idx.resize(count);
  return idx;
}

MinibatchIndex sample_pairs(const Dataset& ds, int k, Rng& rng) {
  auto pool = eligible_patients(ds);
  const int need = k / 2;
  if (static_cast<int>(pool.size()) < need)
    throw std::runtime_error("sample_minibatch: need " + std::to_string(need) +
                             " individuals with >= 2 segments, dataset has " +
                             std::to_string(pool.size()));
  rng.shuffle(pool);
  MinibatchIndex out;
  for (int i = 0; i < need; ++i) {
    const auto segs = draw_segments(ds.patients[pool[i]], 2, rng);
    out.rows.emplace_back(pool[i], segs[0]);
    out.rows.emplace_back(pool[i], segs[1]);
    out.pairing.emplace_back(2 * i, 2 * i + 1);
  }
  return out;
}

MinibatchIndex sample_multi(const Dataset& ds, int k, Rng& rng) {
  auto pool = eligible_patients(ds);
  if (pool.size() < 2)
    throw std::runtime_error("sample_minibatch: nt_xent_multi needs >= 2 individuals "
                             "with >= 2 segments");
  int capacity = 0;
  for (int p : pool) capacity += static_cast<int>(ds.patients[p].segments.size());
  if (capacity < k)
    throw std::runtime_error("sample_minibatch: batch size " + std::to_string(k) +
                             " exceeds the " + std::to_string(capacity) +
                             " segments available from eligible individuals");
  rng.shuffle(pool);

  MinibatchIndex out;
  std::vector<int> taken(ds.patients.size(), 0);
  std::vector<int> used;  // patients already in the batch
  size_t next = 0;
  int filled = 0;
  while (filled < k) {
    int remaining = k - filled;
    int pi = -1, can = 0;
    if (next < pool.size()) {
      pi = pool[next++];
      can = static_cast<int>(ds.patients[pi].segments.size());
    } else {
      // Pool exhausted: widen an already-included individual.
      for (int cand : used) {
        const int avail = static_cast<int>(ds.patients[cand].segments.size()) - taken[cand];
        if (avail > 0) {
          pi = cand;
          can = taken[cand] + avail;
          break;
        }
      }
      if (pi < 0) throw std::runtime_error("sample_minibatch: ran out of segments");
      const int more = std::min(remaining, can - taken[pi]);
      auto all = draw_segments(ds.patients[pi], static_cast<int>(ds.patients[pi].segments.size()), rng);
      int added = 0;
      for (int s : all) {
        bool dup = false;
        for (const auto& r : out.rows)
          if (r.first == pi && r.second == s) dup = true;
        if (dup) continue;
        out.rows.emplace_back(pi, s);
        ++taken[pi];
        ++added;
        if (added == more) break;
      }
      filled += added;
      continue;
    }

    // 2..8 segments per individual; never strand a single trailing slot and
    // keep room for a second individual on the first pick.
    int hi = std::min({8, can, remaining});
    if (used.empty()) hi = std::min(hi, k - 2);
    int take = hi <= 2 ? hi : rng.uniform_int(2, hi);
    if (take < 2) continue;  // individual cannot contribute a pair here
    if (remaining - take == 1) {
      if (take + 1 <= std::min(can, remaining))
        ++take;
      else
        --take;
    }
    if (take < 2) continue;
    for (int s : draw_segments(ds.patients[pi], take, rng)) out.rows.emplace_back(pi, s);
    taken[pi] = take;
    used.push_back(pi);
    filled += take;
  }
  if (used.size() < 2 && out.rows.size() >= 2) {
    // Could only happen with a degenerate pool; re-check the guarantee.
    int distinct = 0;
    std::vector<char> seen(ds.patients.size(), 0);
    for (auto& r : out.rows)
      if (!seen[r.first]) {
        seen[r.first] = 1;
        ++distinct;
      }
    if (distinct < 2)
      throw std::runtime_error("sample_minibatch: could not place 2 distinct individuals");
  }
  return out;
}

}  // namespace

MinibatchIndex sample_minibatch(const Dataset& ds, const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  return cfg.loss == LossName::nt_xent ? sample_pairs(ds, cfg.batch_size, rng)
                                       : sample_multi(ds, cfg.batch_size, rng);
}

std::pair<MatF, std::vector<std::string>> assemble_batch(const Dataset& ds,
                                                         const MinibatchIndex& idx) {
  const int k = static_cast<int>(idx.rows.size());
  MatF batch(k, ds.segment_length);
  std::vector<std::string> ids(k);
  for (int i = 0; i < k; ++i) {
    const auto& [pi, si] = idx.rows[i];
    const auto& seg = ds.patients[pi].segments[si];
    std::copy(seg.samples.begin(), seg.samples.end(), batch.row(i));
    zscore(batch.row_span(i));
    ids[i] = ds.patients[pi].patient_id;
  }
  return {std::move(batch), std::move(ids)};
}

namespace {

void adam_step(std::span<float> params, std::span<const float> grads, OptimizerState& opt,
               const TrainConfig& cfg) {
  ++opt.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(opt.step));
  const double lr = cfg.learning_rate, eps = cfg.adam_eps;
  const bool par = kernels::backend() == kernels::Backend::openmp;
  const int64_t n = static_cast<int64_t>(params.size());
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < n; ++i) {
    const double g = grads[i];
    const double m = b1 * opt.m[i] + (1.0 - b1) * g;
    const double v = b2 * opt.v[i] + (1.0 - b2) * g * g;
    opt.m[i] = static_cast<float>(m);
    opt.v[i] = static_cast<float>(v);
    params[i] -= static_cast<float>(lr * (m / bc1) / (std::sqrt(v / bc2) + eps));
  }
}

double grad_norm(std::span<const float> grads) {
  double acc = 0;
  for (float g : grads) acc += static_cast<double>(g) * g;
  return std::sqrt(acc);
}

std::filesystem::path epoch_checkpoint_path(const std::filesystem::path& dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch);
  return dir / name;
}

void write_loss_history(const std::filesystem::path& dir, const std::vector<double>& history) {
  std::ofstream out(dir / "loss_history.csv");
  out.precision(17);
  out << "epoch,mean_loss\n";
  for (size_t i = 0; i < history.size(); ++i) out << (i + 1) << "," << history[i] << "\n";
}

}  // namespace

TrainResult train(const Dataset& ds, const EncoderConfig& enc, const ProjectionConfig& proj,
                  const TrainConfig& cfg, const std::filesystem::path* resume_from) {
  cfg.validate();
  validate_dataset(ds);
  if (ds.segment_length != enc.input_length)
    throw std::invalid_argument("train: dataset segment length " +
                                std::to_string(ds.segment_length) +
                                " does not match encoder input length " +
                                std::to_string(enc.input_length));

  OptimizerState opt;
  CheckpointMeta resume_meta;
  int start_epoch = 0;
  std::vector<double> history;
  Model model = [&] {
    if (resume_from) return Model::load_checkpoint(*resume_from, &resume_meta, &opt);
    return Model(enc, proj, cfg.seed);
  }();
  if (resume_from) {
    start_epoch = resume_meta.epochs_trained;
    if (start_epoch >= cfg.epochs)
      throw std::invalid_argument("resume: checkpoint already trained for " +
                                  std::to_string(start_epoch) + " epochs");
    // Keep whatever history exists for the completed epochs.
    std::ifstream hist(cfg.checkpoint_dir / "loss_history.csv");
    std::string line;
    while (hist && std::getline(hist, line)) {
      if (line.rfind("epoch", 0) == 0 || line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      const int e = std::stoi(line.substr(0, comma));
      if (e <= start_epoch) history.push_back(std::stod(line.substr(comma + 1)));
    }
  }
  if (opt.empty()) {
    opt.m.assign(model.param_count(), 0.0f);
    opt.v.assign(model.param_count(), 0.0f);
  }

  std::filesystem::create_directories(cfg.checkpoint_dir);

  const int steps_per_epoch =
      std::max(1, (ds.total_segments() + cfg.batch_size - 1) / cfg.batch_size);
  std::vector<float> grads(model.param_count());

  for (int epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(Rng::mix(cfg.seed, static_cast<uint64_t>(epoch)));
    double loss_sum = 0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      const auto idx = sample_minibatch(ds, cfg, rng);
      auto [batch, ids] = assemble_batch(ds, idx);

      Model::TrainPass pass;
      MatF z = model.forward_train(batch, pass);

      LossBatch lb{matrix_cast<double>(z), std::move(ids), cfg.tau};
      const LossValue lv = cfg.loss == LossName::nt_xent
                               ? nt_xent_loss(lb, idx.pairing, true)
                               : nt_xent_multi_loss(lb, true, {cfg.multi_include_self});
      const int k = lb.z.rows;
      const double step_loss = lv.total / k;
      if (!std::isfinite(step_loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", step " + std::to_string(step + 1));
      loss_sum += step_loss;

      // Optimize the per-anchor mean.
      MatF dz(z.rows, z.cols);
      for (size_t i = 0; i < dz.data.size(); ++i)
        dz.data[i] = static_cast<float>(lv.grad.data[i] / k);

      std::fill(grads.begin(), grads.end(), 0.0f);
      model.backward(dz, pass, grads);

      if (cfg.clip_norm > 0) {
        const double gn = grad_norm(grads);
        if (gn > cfg.clip_norm) {
          const float scale = static_cast<float>(cfg.clip_norm / gn);
          for (float& g : grads) g *= scale;
        }
      }
      adam_step(model.params(), grads, opt, cfg);
    }
    history.push_back(loss_sum / steps_per_epoch);

    CheckpointMeta meta{cfg.seed, epoch, to_string(cfg.loss), cfg.tau};
    model.save_checkpoint(epoch_checkpoint_path(cfg.checkpoint_dir, epoch), meta, &opt);
    write_loss_history(cfg.checkpoint_dir, history);
  }

  TrainResult result;
  result.epoch_mean_loss = history;
  result.final_checkpoint = cfg.checkpoint_dir / "final.ckpt";
  CheckpointMeta meta{cfg.seed, cfg.epochs, to_string(cfg.loss), cfg.tau};
  model.save_checkpoint(result.final_checkpoint, meta, &opt);
  return result;
}

}  // namespace simsig
