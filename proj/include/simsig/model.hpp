#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "simsig/layers.hpp"
#include "simsig/matrix.hpp"

namespace simsig {

enum class Architecture { resnext50_1d, small_cnn };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

struct EncoderConfig {
  Architecture architecture = Architecture::small_cnn;
  int input_length = 800;
  int embedding_dim = 1024;

  void validate() const;
};

struct ProjectionConfig {
  int hidden_dim = 1024;
  int output_dim = 128;

  void validate() const;
};

// Bookkeeping carried next to the weights.
struct CheckpointMeta {
  uint64_t seed = 0;
  int epochs_trained = 0;
  std::string loss_name = "nt_xent_multi";
  double tau = 0.5;
};

// Adam moments, persisted so training can resume exactly.
struct OptimizerState {
  int64_t step = 0;
  std::vector<float> m, v;

  bool empty() const { return m.empty(); }
};

// Encoder f plus projection head g over one flat parameter array.
class Model {
 public:
  Model(const EncoderConfig& enc, const ProjectionConfig& proj, uint64_t seed);

  const EncoderConfig& encoder_config() const { return enc_; }
  const ProjectionConfig& projection_config() const { return proj_; }

  // batch rows are segments of length input_length; evaluation mode.
  MatF encode(const MatF& batch) const;
  // h rows are embedding_dim wide; evaluation mode.
  MatF project(const MatF& h) const;

  struct TrainPass {
    std::vector<LayerCache> encoder_caches, head_caches;
  };
  // Training-mode forward through encoder and head; returns z.
  MatF forward_train(const MatF& batch, TrainPass& pass);
  // dz is d loss / d z; accumulates into `grads` (size param_count()).
  void backward(const MatF& dz, const TrainPass& pass, std::span<float> grads);

  size_t param_count() const { return params_.size(); }
  std::span<float> params() { return params_; }
  std::span<const float> params() const { return params_; }
  std::span<const float> state() const { return state_; }

  void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                       const OptimizerState* opt = nullptr) const;
  static Model load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr,
                               OptimizerState* opt = nullptr);

 private:
  Model() = default;
  void build();

  EncoderConfig enc_;
  ProjectionConfig proj_;
  uint64_t init_seed_ = 0;
  Network encoder_, head_;
  size_t enc_params_ = 0, enc_state_ = 0;
  std::vector<float> params_, state_;
};

// FNV-1a over the file bytes, hex-encoded; identifies a checkpoint.
std::string file_fingerprint(const std::filesystem::path& path);

}  // namespace simsig
