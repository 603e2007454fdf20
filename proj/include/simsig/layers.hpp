#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "simsig/kernels.hpp"
#include "simsig/rng.hpp"

namespace simsig {

// Activations in NCT layout.
struct Tensor3 {
  int b = 0, c = 0, t = 0;
  std::vector<float> v;

  Tensor3() = default;
  Tensor3(int b_, int c_, int t_)
      : b(b_), c(c_), t(t_),
        v(static_cast<size_t>(b_) * static_cast<size_t>(c_) * static_cast<size_t>(t_), 0.0f) {}

  float* plane(int bi, int ci) { return v.data() + (static_cast<size_t>(bi) * c + ci) * t; }
  const float* plane(int bi, int ci) const {
    return v.data() + (static_cast<size_t>(bi) * c + ci) * t;
  }
  size_t size() const { return v.size(); }
};

// Whatever a layer's backward pass needs from its forward pass.
struct LayerCache {
  Tensor3 input;
  std::vector<int> indices;      // maxpool argmax positions
  std::vector<float> scalars;    // batchnorm per-channel stats, pool sizes
  Tensor3 aux;                   // batchnorm normalized activations
  std::vector<LayerCache> children;
  std::vector<Tensor3> tensors;  // composite intermediates
};

// Layers are stateless descriptors; trainable parameters and persistent state
// (batchnorm running stats) live in flat arrays owned by the model, sliced
// per layer by the enclosing Network.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor3 forward(const Tensor3& x, std::span<const float> params,
                          std::span<const float> state) const = 0;
  virtual Tensor3 forward_train(const Tensor3& x, std::span<const float> params,
                                std::span<float> state, LayerCache& cache) const = 0;
  // Accumulates parameter grads into `grads`, returns d loss / d input.
  virtual Tensor3 backward(const Tensor3& gy, const LayerCache& cache,
                           std::span<const float> params, std::span<float> grads) const = 0;

  virtual size_t param_count() const { return 0; }
  virtual size_t state_count() const { return 0; }
  virtual void init(std::span<float> params, std::span<float> state, Rng& rng) const;
  virtual std::string describe() const = 0;
};

class Conv1d : public Layer {
 public:
  Conv1d(int in_ch, int out_ch, int kernel, int stride, int pad, int groups = 1, bool bias = true);

  Tensor3 forward(const Tensor3& x, std::span<const float> params,
                  std::span<const float> state) const override;
  Tensor3 forward_train(const Tensor3& x, std::span<const float> params, std::span<float> state,
                        LayerCache& cache) const override;
  Tensor3 backward(const Tensor3& gy, const LayerCache& cache, std::span<const float> params,
                   std::span<float> grads) const override;
  size_t param_count() const override;
  void init(std::span<float> params, std::span<float> state, Rng& rng) const override;
  std::string describe() const override;

 private:
  kernels::Conv1dShape shape_for(const Tensor3& x) const;
  int in_ch_, out_ch_, kernel_, stride_, pad_, groups_;
  bool bias_;
};

class BatchNorm1d : public Layer {
 public:
  explicit BatchNorm1d(int channels, double momentum = 0.1, double eps = 1e-5);

  Tensor3 forward(const Tensor3& x, std::span<const float> params,
                  std::span<const float> state) const override;
  Tensor3 forward_train(const Tensor3& x, std::span<const float> params, std::span<float> state,
                        LayerCache& cache) const override;
  Tensor3 backward(const Tensor3& gy, const LayerCache& cache, std::span<const float> params,
                   std::span<float> grads) const override;
  size_t param_count() const override { return 2 * static_cast<size_t>(channels_); }
  size_t state_count() const override { return 2 * static_cast<size_t>(channels_); }
  void init(std::span<float> params, std::span<float> state, Rng& rng) const override;
  std::string describe() const override;

 private:
  int channels_;
  double momentum_, eps_;
};

class ReLU : public Layer {
 public:
  Tensor3 forward(const Tensor3& x, std::span<const float> params,
                  std::span<const float> state) const override;
  Tensor3 forward_train(const Tensor3& x, std::span<const float> params, std::span<float> state,
                        LayerCache& cache) const override;
  Tensor3 backward(const Tensor3& gy, const LayerCache& cache, std::span<const float> params,
                   std::span<float> grads) const override;
  std::string describe() const override { return "relu"; }
};

class MaxPool1d : public Layer {
 public:
  MaxPool1d(int kernel, int stride, int pad = 0);

  Tensor3 forward(const Tensor3& x, std::span<const float> params,
                  std::span<const float> state) const override;
  Tensor3 forward_train(const Tensor3& x, std::span<const float> params, std::span<float> state,
                        LayerCache& cache) const override;
  Tensor3 backward(const Tensor3& gy, const LayerCache& cache, std::span<const float> params,
                   std::span<float> grads) const override;
  std::string describe() const override;

 private:
  int kernel_, stride_, pad_;
};

class GlobalAvgPool1d : public Layer {
 public:
  Tensor3 forward(const Tensor3& x, std::span<const float> params,
                  std::span<const float> state) const override;
  Tensor3 forward_train(const Tensor3& x, std::span<const float> params, std::span<float> state,
                        LayerCache& cache) const override;
  Tensor3 backward(const Tensor3& gy, const LayerCache& cache, std::span<const float> params,
                   std::span<float> grads) const override;
  std::string describe() const override { return "gap"; }
};

// Fully connected layer on (b, features, 1) tensors.
class Dense : public Layer {
 public:
  Dense(int in_features, int out_features);

  Tensor3 forward(const Tensor3& x, std::span<const float> params,
                  std::span<const float> state) const override;
  Tensor3 forward_train(const Tensor3& x, std::span<const float> params, std::span<float> state,
                        LayerCache& cache) const override;
  Tensor3 backward(const Tensor3& gy, const LayerCache& cache, std::span<const float> params,
                   std::span<float> grads) const override;
  size_t param_count() const override {
    return static_cast<size_t>(in_) * out_ + static_cast<size_t>(out_);
  }
  void init(std::span<float> params, std::span<float> state, Rng& rng) const override;
  std::string describe() const override;

 private:
  int in_, out_;
};

// Grouped-convolution residual block: 1x1 reduce, k3 grouped conv, 1x1 expand,
// identity or projected skip, ReLU after the sum.
class Bottleneck1d : public Layer {
 public:
  Bottleneck1d(int in_ch, int width, int out_ch, int cardinality, int stride);

  Tensor3 forward(const Tensor3& x, std::span<const float> params,
                  std::span<const float> state) const override;
  Tensor3 forward_train(const Tensor3& x, std::span<const float> params, std::span<float> state,
                        LayerCache& cache) const override;
  Tensor3 backward(const Tensor3& gy, const LayerCache& cache, std::span<const float> params,
                   std::span<float> grads) const override;
  size_t param_count() const override;
  size_t state_count() const override;
  void init(std::span<float> params, std::span<float> state, Rng& rng) const override;
  std::string describe() const override;

 private:
  struct Slices;
  std::vector<std::unique_ptr<Layer>> mods_;  // conv1,bn1,conv2,bn2,conv3,bn3[,proj,proj_bn]
  bool has_proj_;
};

// An ordered layer stack operating on flat parameter/state arrays.
class Network {
 public:
  Network() = default;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  void add(std::unique_ptr<Layer> layer);

  size_t param_count() const { return param_count_; }
  size_t state_count() const { return state_count_; }

  void init(std::span<float> params, std::span<float> state, Rng& rng) const;
  Tensor3 forward(const Tensor3& x, std::span<const float> params,
                  std::span<const float> state) const;
  Tensor3 forward_train(const Tensor3& x, std::span<const float> params, std::span<float> state,
                        std::vector<LayerCache>& caches) const;
  Tensor3 backward(const Tensor3& gy, const std::vector<LayerCache>& caches,
                   std::span<const float> params, std::span<float> grads) const;

  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<size_t> param_offsets_, state_offsets_;
  size_t param_count_ = 0, state_count_ = 0;
};

}  // namespace simsig
