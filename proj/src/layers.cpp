#include "simsig/layers.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace simsig {

namespace {

bool parallel() { return kernels::backend() == kernels::Backend::openmp; }

}  // namespace

void Layer::init(std::span<float>, std::span<float>, Rng&) const {}

// ---------------------------------------------------------------------------
// Conv1d
// ---------------------------------------------------------------------------

Conv1d::Conv1d(int in_ch, int out_ch, int kernel, int stride, int pad, int groups, bool bias)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
      groups_(groups), bias_(bias) {
  if (in_ch % groups != 0 || out_ch % groups != 0)
    throw std::invalid_argument("conv1d: channels not divisible by groups");
}

kernels::Conv1dShape Conv1d::shape_for(const Tensor3& x) const {
  if (x.c != in_ch_)
    throw std::runtime_error("conv1d: expected " + std::to_string(in_ch_) + " channels, got " +
                             std::to_string(x.c));
  kernels::Conv1dShape s;
  s.batch = x.b;
  s.in_ch = in_ch_;
  s.out_ch = out_ch_;
  s.t_in = x.t;
  s.kernel = kernel_;
  s.stride = stride_;
  s.pad = pad_;
  s.groups = groups_;
  if (s.t_out() < 1)
    throw std::runtime_error("conv1d: input length " + std::to_string(x.t) +
                             " too short for kernel " + std::to_string(kernel_));
  return s;
}

size_t Conv1d::param_count() const {
  return static_cast<size_t>(out_ch_) * (in_ch_ / groups_) * kernel_ +
         (bias_ ? static_cast<size_t>(out_ch_) : 0);
}

void Conv1d::init(std::span<float> params, std::span<float>, Rng& rng) const {
  const size_t wn = static_cast<size_t>(out_ch_) * (in_ch_ / groups_) * kernel_;
  const double fan_in = static_cast<double>(in_ch_ / groups_) * kernel_;
  const double std = std::sqrt(2.0 / fan_in);
  for (size_t i = 0; i < wn; ++i) params[i] = static_cast<float>(std * rng.normal());
  if (bias_)
    for (size_t i = wn; i < params.size(); ++i) params[i] = 0.0f;
}

Tensor3 Conv1d::forward(const Tensor3& x, std::span<const float> params,
                        std::span<const float>) const {
  const auto s = shape_for(x);
  Tensor3 y(x.b, out_ch_, s.t_out());
  const size_t wn = static_cast<size_t>(out_ch_) * (in_ch_ / groups_) * kernel_;
  kernels::conv1d_forward(s, x.v.data(), params.data(), bias_ ? params.data() + wn : nullptr,
                          y.v.data());
  return y;
}

Tensor3 Conv1d::forward_train(const Tensor3& x, std::span<const float> params,
                              std::span<float> state, LayerCache& cache) const {
  cache.input = x;
  return forward(x, params, state);
}

Tensor3 Conv1d::backward(const Tensor3& gy, const LayerCache& cache,
                         std::span<const float> params, std::span<float> grads) const {
  const auto s = shape_for(cache.input);
  const size_t wn = static_cast<size_t>(out_ch_) * (in_ch_ / groups_) * kernel_;
  kernels::conv1d_grad_params(s, gy.v.data(), cache.input.v.data(), grads.data(),
                              bias_ ? grads.data() + wn : nullptr);
  Tensor3 gx(cache.input.b, cache.input.c, cache.input.t);
  kernels::conv1d_grad_input(s, gy.v.data(), params.data(), gx.v.data());
  return gx;
}

std::string Conv1d::describe() const {
  return "conv1d(" + std::to_string(in_ch_) + "->" + std::to_string(out_ch_) + ",k" +
         std::to_string(kernel_) + ",s" + std::to_string(stride_) + ",g" +
         std::to_string(groups_) + ")";
}

// ---------------------------------------------------------------------------
// BatchNorm1d: params [gamma, beta], state [running_mean, running_var]
// ---------------------------------------------------------------------------

BatchNorm1d::BatchNorm1d(int channels, double momentum, double eps)
    : channels_(channels), momentum_(momentum), eps_(eps) {}

void BatchNorm1d::init(std::span<float> params, std::span<float> state, Rng&) const {
  for (int c = 0; c < channels_; ++c) {
    params[c] = 1.0f;                // gamma
    params[channels_ + c] = 0.0f;    // beta
    state[c] = 0.0f;                 // running mean
    state[channels_ + c] = 1.0f;     // running var
  }
}

Tensor3 BatchNorm1d::forward(const Tensor3& x, std::span<const float> params,
                             std::span<const float> state) const {
  if (x.c != channels_) throw std::runtime_error("batchnorm: channel mismatch");
  Tensor3 y(x.b, x.c, x.t);
  const bool par = parallel();
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int b = 0; b < x.b; ++b)
    for (int c = 0; c < x.c; ++c) {
      const float inv = 1.0f / std::sqrt(state[channels_ + c] + static_cast<float>(eps_));
      const float g = params[c], be = params[channels_ + c], mu = state[c];
      const float* xp = x.plane(b, c);
      float* yp = y.plane(b, c);
      for (int t = 0; t < x.t; ++t) yp[t] = g * (xp[t] - mu) * inv + be;
    }
  return y;
}

Tensor3 BatchNorm1d::forward_train(const Tensor3& x, std::span<const float> params,
                                   std::span<float> state, LayerCache& cache) const {
  if (x.c != channels_) throw std::runtime_error("batchnorm: channel mismatch");
  const int n = x.b * x.t;
  if (n < 2) throw std::runtime_error("batchnorm: training needs batch*time >= 2");

  cache.scalars.assign(2 * static_cast<size_t>(channels_), 0.0f);  // [mean, inv_std]
  cache.aux = Tensor3(x.b, x.c, x.t);                              // xhat
  Tensor3 y(x.b, x.c, x.t);
  const bool par = parallel();

#pragma omp parallel for schedule(static) if (par)
  for (int c = 0; c < channels_; ++c) {
    double mean = 0;
    for (int b = 0; b < x.b; ++b) {
      const float* xp = x.plane(b, c);
      for (int t = 0; t < x.t; ++t) mean += xp[t];
    }
    mean /= n;
    double var = 0;
    for (int b = 0; b < x.b; ++b) {
      const float* xp = x.plane(b, c);
      for (int t = 0; t < x.t; ++t) {
        const double d = xp[t] - mean;
        var += d * d;
      }
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps_);
    cache.scalars[c] = static_cast<float>(mean);
    cache.scalars[channels_ + c] = static_cast<float>(inv);
    const float g = params[c], be = params[channels_ + c];
    for (int b = 0; b < x.b; ++b) {
      const float* xp = x.plane(b, c);
      float* hp = cache.aux.plane(b, c);
      float* yp = y.plane(b, c);
      for (int t = 0; t < x.t; ++t) {
        const float h = static_cast<float>((xp[t] - mean) * inv);
        hp[t] = h;
        yp[t] = g * h + be;
      }
    }
    // running stats keep the unbiased variance
    const double unbiased = n > 1 ? var * n / (n - 1.0) : var;
    state[c] = static_cast<float>((1.0 - momentum_) * state[c] + momentum_ * mean);
    state[channels_ + c] =
        static_cast<float>((1.0 - momentum_) * state[channels_ + c] + momentum_ * unbiased);
  }
  return y;
}

Tensor3 BatchNorm1d::backward(const Tensor3& gy, const LayerCache& cache,
                              std::span<const float> params, std::span<float> grads) const {
  const int n = gy.b * gy.t;
  Tensor3 gx(gy.b, gy.c, gy.t);
  const bool par = parallel();

#pragma omp parallel for schedule(static) if (par)
  for (int c = 0; c < channels_; ++c) {
    const float g = params[c];
    const float inv = cache.scalars[channels_ + c];
    double sum_gy = 0, sum_gy_h = 0;
    for (int b = 0; b < gy.b; ++b) {
      const float* gp = gy.plane(b, c);
      const float* hp = cache.aux.plane(b, c);
      for (int t = 0; t < gy.t; ++t) {
        sum_gy += gp[t];
        sum_gy_h += static_cast<double>(gp[t]) * hp[t];
      }
    }
    grads[c] += static_cast<float>(sum_gy_h);              // dgamma
    grads[channels_ + c] += static_cast<float>(sum_gy);    // dbeta
    const double k1 = sum_gy / n, k2 = sum_gy_h / n;
    for (int b = 0; b < gy.b; ++b) {
      const float* gp = gy.plane(b, c);
      const float* hp = cache.aux.plane(b, c);
      float* op = gx.plane(b, c);
      for (int t = 0; t < gy.t; ++t)
        op[t] = static_cast<float>(g * inv * (gp[t] - k1 - hp[t] * k2));
    }
  }
  return gx;
}

std::string BatchNorm1d::describe() const { return "batchnorm(" + std::to_string(channels_) + ")"; }

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

Tensor3 ReLU::forward(const Tensor3& x, std::span<const float>, std::span<const float>) const {
  Tensor3 y = x;
  const bool par = parallel();
  const int64_t total = static_cast<int64_t>(y.v.size());
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < total; ++i)
    if (y.v[i] < 0) y.v[i] = 0;
  return y;
}

Tensor3 ReLU::forward_train(const Tensor3& x, std::span<const float> p, std::span<float>,
                            LayerCache& cache) const {
  cache.input = x;
  return forward(x, p, {});
}

Tensor3 ReLU::backward(const Tensor3& gy, const LayerCache& cache, std::span<const float>,
                       std::span<float>) const {
  Tensor3 gx = gy;
  const bool par = parallel();
  const int64_t total = static_cast<int64_t>(gx.v.size());
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < total; ++i)
    if (cache.input.v[i] <= 0) gx.v[i] = 0;
  return gx;
}

// ---------------------------------------------------------------------------
// MaxPool1d
// ---------------------------------------------------------------------------

MaxPool1d::MaxPool1d(int kernel, int stride, int pad) : kernel_(kernel), stride_(stride), pad_(pad) {}

Tensor3 MaxPool1d::forward(const Tensor3& x, std::span<const float>, std::span<const float>) const {
  LayerCache scratch;
  return forward_train(x, {}, {}, scratch);
}

Tensor3 MaxPool1d::forward_train(const Tensor3& x, std::span<const float>, std::span<float>,
                                 LayerCache& cache) const {
  const int to = (x.t + 2 * pad_ - kernel_) / stride_ + 1;
  if (to < 1) throw std::runtime_error("maxpool: input too short");
  Tensor3 y(x.b, x.c, to);
  cache.indices.assign(y.v.size(), -1);
  cache.scalars = {static_cast<float>(x.t)};
  const bool par = parallel();
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int b = 0; b < x.b; ++b)
    for (int c = 0; c < x.c; ++c) {
      const float* xp = x.plane(b, c);
      float* yp = y.plane(b, c);
      int* ip = cache.indices.data() + (static_cast<size_t>(b) * x.c + c) * to;
      for (int ot = 0; ot < to; ++ot) {
        float best = -std::numeric_limits<float>::infinity();
        int best_t = -1;
        const int start = ot * stride_ - pad_;
        for (int kk = 0; kk < kernel_; ++kk) {
          const int t = start + kk;
          if (t < 0 || t >= x.t) continue;
          if (xp[t] > best) {
            best = xp[t];
            best_t = t;
          }
        }
        yp[ot] = best;
        ip[ot] = best_t;
      }
    }
  return y;
}

Tensor3 MaxPool1d::backward(const Tensor3& gy, const LayerCache& cache, std::span<const float>,
                            std::span<float>) const {
  const int t_in = static_cast<int>(cache.scalars[0]);
  Tensor3 gx(gy.b, gy.c, t_in);
  const bool par = parallel();
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int b = 0; b < gy.b; ++b)
    for (int c = 0; c < gy.c; ++c) {
      const float* gp = gy.plane(b, c);
      float* op = gx.plane(b, c);
      const int* ip = cache.indices.data() + (static_cast<size_t>(b) * gy.c + c) * gy.t;
      for (int ot = 0; ot < gy.t; ++ot)
        if (ip[ot] >= 0) op[ip[ot]] += gp[ot];
    }
  return gx;
}

std::string MaxPool1d::describe() const {
  return "maxpool(k" + std::to_string(kernel_) + ",s" + std::to_string(stride_) + ")";
}

// ---------------------------------------------------------------------------
// GlobalAvgPool1d
// ---------------------------------------------------------------------------

Tensor3 GlobalAvgPool1d::forward(const Tensor3& x, std::span<const float>,
                                 std::span<const float>) const {
  Tensor3 y(x.b, x.c, 1);
  const bool par = parallel();
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int b = 0; b < x.b; ++b)
    for (int c = 0; c < x.c; ++c) {
      const float* xp = x.plane(b, c);
      double acc = 0;
      for (int t = 0; t < x.t; ++t) acc += xp[t];
      y.plane(b, c)[0] = static_cast<float>(acc / x.t);
    }
  return y;
}

Tensor3 GlobalAvgPool1d::forward_train(const Tensor3& x, std::span<const float> p,
                                       std::span<float>, LayerCache& cache) const {
  cache.scalars = {static_cast<float>(x.t)};
  return forward(x, p, {});
}

Tensor3 GlobalAvgPool1d::backward(const Tensor3& gy, const LayerCache& cache,
                                  std::span<const float>, std::span<float>) const {
  const int t_in = static_cast<int>(cache.scalars[0]);
  Tensor3 gx(gy.b, gy.c, t_in);
  const float inv = 1.0f / t_in;
  const bool par = parallel();
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int b = 0; b < gy.b; ++b)
    for (int c = 0; c < gy.c; ++c) {
      const float gv = gy.plane(b, c)[0] * inv;
      float* op = gx.plane(b, c);
      for (int t = 0; t < t_in; ++t) op[t] = gv;
    }
  return gx;
}

// ---------------------------------------------------------------------------
// Dense: params [W(out x in), b(out)], input (b, in, 1)
// ---------------------------------------------------------------------------

Dense::Dense(int in_features, int out_features) : in_(in_features), out_(out_features) {}

void Dense::init(std::span<float> params, std::span<float>, Rng& rng) const {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
  for (size_t i = 0; i < params.size(); ++i)
    params[i] = static_cast<float>(rng.uniform(-bound, bound));
}

Tensor3 Dense::forward(const Tensor3& x, std::span<const float> params,
                       std::span<const float>) const {
  if (x.c != in_ || x.t != 1)
    throw std::runtime_error("dense: expected (" + std::to_string(in_) + ", 1) features, got (" +
                             std::to_string(x.c) + ", " + std::to_string(x.t) + ")");
  Tensor3 y(x.b, out_, 1);
  kernels::matmul_nt(x.v.data(), params.data(), y.v.data(), x.b, in_, out_);
  const float* bias = params.data() + static_cast<size_t>(in_) * out_;
  const bool par = parallel();
#pragma omp parallel for schedule(static) if (par)
  for (int b = 0; b < x.b; ++b) {
    float* yp = y.v.data() + static_cast<size_t>(b) * out_;
    for (int o = 0; o < out_; ++o) yp[o] += bias[o];
  }
  return y;
}

Tensor3 Dense::forward_train(const Tensor3& x, std::span<const float> params, std::span<float>,
                             LayerCache& cache) const {
  cache.input = x;
  return forward(x, params, {});
}

Tensor3 Dense::backward(const Tensor3& gy, const LayerCache& cache, std::span<const float> params,
                        std::span<float> grads) const {
  const int b = gy.b;
  // dW += gy^T * x ; db += column sums of gy ; dx = gy * W
  std::vector<float> scratch(static_cast<size_t>(out_) * in_);
  kernels::matmul_tn(gy.v.data(), cache.input.v.data(), scratch.data(), b, out_, in_);
  for (size_t i = 0; i < scratch.size(); ++i) grads[i] += scratch[i];
  float* gb = grads.data() + static_cast<size_t>(in_) * out_;
  for (int i = 0; i < b; ++i) {
    const float* gp = gy.v.data() + static_cast<size_t>(i) * out_;
    for (int o = 0; o < out_; ++o) gb[o] += gp[o];
  }
  Tensor3 gx(b, in_, 1);
  kernels::matmul_nn(gy.v.data(), params.data(), gx.v.data(), b, out_, in_);
  return gx;
}

std::string Dense::describe() const {
  return "dense(" + std::to_string(in_) + "->" + std::to_string(out_) + ")";
}

// ---------------------------------------------------------------------------
// Bottleneck1d
// ---------------------------------------------------------------------------

Bottleneck1d::Bottleneck1d(int in_ch, int width, int out_ch, int cardinality, int stride) {
  mods_.push_back(std::make_unique<Conv1d>(in_ch, width, 1, 1, 0, 1, false));
  mods_.push_back(std::make_unique<BatchNorm1d>(width));
  mods_.push_back(std::make_unique<Conv1d>(width, width, 3, stride, 1, cardinality, false));
  mods_.push_back(std::make_unique<BatchNorm1d>(width));
  mods_.push_back(std::make_unique<Conv1d>(width, out_ch, 1, 1, 0, 1, false));
  mods_.push_back(std::make_unique<BatchNorm1d>(out_ch));
  has_proj_ = (in_ch != out_ch) || (stride != 1);
  if (has_proj_) {
    mods_.push_back(std::make_unique<Conv1d>(in_ch, out_ch, 1, stride, 0, 1, false));
    mods_.push_back(std::make_unique<BatchNorm1d>(out_ch));
  }
}

size_t Bottleneck1d::param_count() const {
  size_t n = 0;
  for (const auto& m : mods_) n += m->param_count();
  return n;
}

size_t Bottleneck1d::state_count() const {
  size_t n = 0;
  for (const auto& m : mods_) n += m->state_count();
  return n;
}

void Bottleneck1d::init(std::span<float> params, std::span<float> state, Rng& rng) const {
  size_t po = 0, so = 0;
  for (const auto& m : mods_) {
    m->init(params.subspan(po, m->param_count()), state.subspan(so, m->state_count()), rng);
    po += m->param_count();
    so += m->state_count();
  }
}

namespace {

inline void relu_inplace(Tensor3& x) {
  const bool par = parallel();
  const int64_t total = static_cast<int64_t>(x.v.size());
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < total; ++i)
    if (x.v[i] < 0) x.v[i] = 0;
}

}  // namespace

Tensor3 Bottleneck1d::forward(const Tensor3& x, std::span<const float> params,
                              std::span<const float> state) const {
  size_t po = 0, so = 0;
  auto run = [&](int idx, const Tensor3& in) {
    const auto& m = mods_[idx];
    auto out = m->forward(in, params.subspan(po, m->param_count()),
                          state.subspan(so, m->state_count()));
    po += m->param_count();
    so += m->state_count();
    return out;
  };
  Tensor3 h = run(0, x);
  h = run(1, h);
  relu_inplace(h);
  h = run(2, h);
  h = run(3, h);
  relu_inplace(h);
  h = run(4, h);
  h = run(5, h);
  Tensor3 skip;
  if (has_proj_) {
    skip = run(6, x);
    skip = run(7, skip);
  } else {
    skip = x;
  }
  for (size_t i = 0; i < h.v.size(); ++i) h.v[i] += skip.v[i];
  relu_inplace(h);
  return h;
}

Tensor3 Bottleneck1d::forward_train(const Tensor3& x, std::span<const float> params,
                                    std::span<float> state, LayerCache& cache) const {
  cache.children.assign(mods_.size(), LayerCache{});
  cache.tensors.clear();
  size_t po = 0, so = 0;
  auto run = [&](int idx, const Tensor3& in) {
    const auto& m = mods_[idx];
    auto out = m->forward_train(in, params.subspan(po, m->param_count()),
                                state.subspan(so, m->state_count()), cache.children[idx]);
    po += m->param_count();
    so += m->state_count();
    return out;
  };
  Tensor3 h = run(0, x);
  h = run(1, h);
  cache.tensors.push_back(h);  // pre-relu1
  relu_inplace(h);
  h = run(2, h);
  h = run(3, h);
  cache.tensors.push_back(h);  // pre-relu2
  relu_inplace(h);
  h = run(4, h);
  h = run(5, h);
  Tensor3 skip;
  if (has_proj_) {
    skip = run(6, x);
    skip = run(7, skip);
  } else {
    skip = x;
  }
  for (size_t i = 0; i < h.v.size(); ++i) h.v[i] += skip.v[i];
  cache.tensors.push_back(h);  // pre-relu3 (the sum)
  relu_inplace(h);
  return h;
}

Tensor3 Bottleneck1d::backward(const Tensor3& gy, const LayerCache& cache,
                               std::span<const float> params, std::span<float> grads) const {
  // Parameter/grad slices per submodule.
  std::vector<size_t> po(mods_.size() + 1, 0);
  for (size_t i = 0; i < mods_.size(); ++i) po[i + 1] = po[i] + mods_[i]->param_count();
  auto back = [&](int idx, const Tensor3& g) {
    const auto& m = mods_[idx];
    return m->backward(g, cache.children[idx],
                       params.subspan(po[idx], m->param_count()),
                       grads.subspan(po[idx], m->param_count()));
  };

  Tensor3 gsum = gy;
  const Tensor3& pre3 = cache.tensors[2];
  for (size_t i = 0; i < gsum.v.size(); ++i)
    if (pre3.v[i] <= 0) gsum.v[i] = 0;

  // main branch
  Tensor3 g = back(5, gsum);
  g = back(4, g);
  const Tensor3& pre2 = cache.tensors[1];
  for (size_t i = 0; i < g.v.size(); ++i)
    if (pre2.v[i] <= 0) g.v[i] = 0;
  g = back(3, g);
  g = back(2, g);
  const Tensor3& pre1 = cache.tensors[0];
  for (size_t i = 0; i < g.v.size(); ++i)
    if (pre1.v[i] <= 0) g.v[i] = 0;
  g = back(1, g);
  Tensor3 gx = back(0, g);

  // skip branch
  if (has_proj_) {
    Tensor3 gs = back(7, gsum);
    gs = back(6, gs);
    for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gs.v[i];
  } else {
    for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gsum.v[i];
  }
  return gx;
}

std::string Bottleneck1d::describe() const {
  return std::string("bottleneck") + (has_proj_ ? "(proj)" : "");
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

void Network::add(std::unique_ptr<Layer> layer) {
  param_offsets_.push_back(param_count_);
  state_offsets_.push_back(state_count_);
  param_count_ += layer->param_count();
  state_count_ += layer->state_count();
  layers_.push_back(std::move(layer));
}

void Network::init(std::span<float> params, std::span<float> state, Rng& rng) const {
  for (size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->init(params.subspan(param_offsets_[i], layers_[i]->param_count()),
                     state.subspan(state_offsets_[i], layers_[i]->state_count()), rng);
}

Tensor3 Network::forward(const Tensor3& x, std::span<const float> params,
                         std::span<const float> state) const {
  Tensor3 cur = x;
  for (size_t i = 0; i < layers_.size(); ++i)
    cur = layers_[i]->forward(cur, params.subspan(param_offsets_[i], layers_[i]->param_count()),
                              state.subspan(state_offsets_[i], layers_[i]->state_count()));
  return cur;
}

Tensor3 Network::forward_train(const Tensor3& x, std::span<const float> params,
                               std::span<float> state, std::vector<LayerCache>& caches) const {
  caches.assign(layers_.size(), LayerCache{});
  Tensor3 cur = x;
  for (size_t i = 0; i < layers_.size(); ++i)
    cur = layers_[i]->forward_train(
        cur, params.subspan(param_offsets_[i], layers_[i]->param_count()),
        state.subspan(state_offsets_[i], layers_[i]->state_count()), caches[i]);
  return cur;
}

Tensor3 Network::backward(const Tensor3& gy, const std::vector<LayerCache>& caches,
                          std::span<const float> params, std::span<float> grads) const {
  Tensor3 cur = gy;
  for (size_t i = layers_.size(); i-- > 0;)
    cur = layers_[i]->backward(cur, caches[i],
                               params.subspan(param_offsets_[i], layers_[i]->param_count()),
                               grads.subspan(param_offsets_[i], layers_[i]->param_count()));
  return cur;
}

}  // namespace simsig
