#include "simsig/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace simsig {

using nlohmann::json;

std::string to_string(Architecture a) {
  return a == Architecture::resnext50_1d ? "resnext50_1d" : "small_cnn";
}

Architecture architecture_from_string(const std::string& s) {
  if (s == "resnext50_1d" || s == "resnext50-1d") return Architecture::resnext50_1d;
  if (s == "small_cnn" || s == "small-cnn") return Architecture::small_cnn;
  throw std::invalid_argument("unknown architecture '" + s + "'");
}

void EncoderConfig::validate() const {
  if (input_length < 8) throw std::invalid_argument("encoder config: input_length must be >= 8");
  if (embedding_dim < 1) throw std::invalid_argument("encoder config: embedding_dim must be >= 1");
}

void ProjectionConfig::validate() const {
  if (hidden_dim < 1 || output_dim < 1)
    throw std::invalid_argument("projection config: dims must be >= 1");
}

namespace {

Network build_small_cnn(int embedding_dim) {
  Network net;
  net.add(std::make_unique<Conv1d>(1, 16, 7, 2, 3));
  net.add(std::make_unique<ReLU>());
  net.add(std::make_unique<MaxPool1d>(2, 2));
  net.add(std::make_unique<Conv1d>(16, 32, 5, 2, 2));
  net.add(std::make_unique<ReLU>());
  net.add(std::make_unique<MaxPool1d>(2, 2));
  net.add(std::make_unique<Conv1d>(32, 64, 3, 1, 1));
  net.add(std::make_unique<ReLU>());
  net.add(std::make_unique<GlobalAvgPool1d>());
  net.add(std::make_unique<Dense>(64, embedding_dim));
  return net;
}

// ResNeXt-50 (32x4d) with every convolution taken along time.
Network build_resnext50_1d(int embedding_dim) {
  Network net;
  net.add(std::make_unique<Conv1d>(1, 64, 7, 2, 3, 1, false));
  net.add(std::make_unique<BatchNorm1d>(64));
  net.add(std::make_unique<ReLU>());
  net.add(std::make_unique<MaxPool1d>(3, 2, 1));
  const int depths[4] = {3, 4, 6, 3};
  const int widths[4] = {128, 256, 512, 1024};
  const int outs[4] = {256, 512, 1024, 2048};
  int in_ch = 64;
  for (int stage = 0; stage < 4; ++stage) {
    for (int blk = 0; blk < depths[stage]; ++blk) {
      const int stride = (stage > 0 && blk == 0) ? 2 : 1;
      net.add(std::make_unique<Bottleneck1d>(in_ch, widths[stage], outs[stage], 32, stride));
      in_ch = outs[stage];
    }
  }
  net.add(std::make_unique<GlobalAvgPool1d>());
  net.add(std::make_unique<Dense>(2048, embedding_dim));
  return net;
}

Network build_head(int embedding_dim, const ProjectionConfig& proj) {
  Network net;
  net.add(std::make_unique<Dense>(embedding_dim, proj.hidden_dim));
  net.add(std::make_unique<ReLU>());
  net.add(std::make_unique<Dense>(proj.hidden_dim, proj.output_dim));
  return net;
}

Tensor3 rows_to_tensor(const MatF& m, int channels) {
  Tensor3 x(m.rows, channels, m.cols / channels);
  x.v = m.data;
  return x;
}

MatF tensor_to_rows(const Tensor3& x) {
  MatF m(x.b, x.c * x.t);
  m.data = x.v;
  return m;
}

}  // namespace

Model::Model(const EncoderConfig& enc, const ProjectionConfig& proj, uint64_t seed)
    : enc_(enc), proj_(proj), init_seed_(seed) {
  enc_.validate();
  proj_.validate();
  build();
  Rng rng(init_seed_);
  encoder_.init(std::span<float>(params_).subspan(0, enc_params_),
                std::span<float>(state_).subspan(0, enc_state_), rng);
  head_.init(std::span<float>(params_).subspan(enc_params_),
             std::span<float>(state_).subspan(enc_state_), rng);
  for (float p : params_)
    if (!std::isfinite(p)) throw std::runtime_error("model init produced non-finite parameter");
}

void Model::build() {
  encoder_ = enc_.architecture == Architecture::resnext50_1d
                 ? build_resnext50_1d(enc_.embedding_dim)
                 : build_small_cnn(enc_.embedding_dim);
  head_ = build_head(enc_.embedding_dim, proj_);
  enc_params_ = encoder_.param_count();
  enc_state_ = encoder_.state_count();
  params_.assign(enc_params_ + head_.param_count(), 0.0f);
  state_.assign(enc_state_ + head_.state_count(), 0.0f);
}

MatF Model::encode(const MatF& batch) const {
  if (batch.cols != enc_.input_length)
    throw std::runtime_error("encode: expected segment length " +
                             std::to_string(enc_.input_length) + ", got " +
                             std::to_string(batch.cols));
  if (batch.rows < 1) throw std::runtime_error("encode: empty batch");
  auto x = rows_to_tensor(batch, 1);
  auto h = encoder_.forward(x, std::span<const float>(params_).subspan(0, enc_params_),
                            std::span<const float>(state_).subspan(0, enc_state_));
  return tensor_to_rows(h);
}

MatF Model::project(const MatF& h) const {
  if (h.cols != enc_.embedding_dim)
    throw std::runtime_error("project: expected embedding dim " +
                             std::to_string(enc_.embedding_dim) + ", got " +
                             std::to_string(h.cols));
  auto x = rows_to_tensor(h, h.cols);
  auto z = head_.forward(x, std::span<const float>(params_).subspan(enc_params_),
                         std::span<const float>(state_).subspan(enc_state_));
  return tensor_to_rows(z);
}

MatF Model::forward_train(const MatF& batch, TrainPass& pass) {
  if (batch.cols != enc_.input_length)
    throw std::runtime_error("encode: expected segment length " +
                             std::to_string(enc_.input_length) + ", got " +
                             std::to_string(batch.cols));
  auto x = rows_to_tensor(batch, 1);
  auto h = encoder_.forward_train(x, std::span<const float>(params_).subspan(0, enc_params_),
                                  std::span<float>(state_).subspan(0, enc_state_),
                                  pass.encoder_caches);
  auto z = head_.forward_train(h, std::span<const float>(params_).subspan(enc_params_),
                               std::span<float>(state_).subspan(enc_state_), pass.head_caches);
  return tensor_to_rows(z);
}

void Model::backward(const MatF& dz, const TrainPass& pass, std::span<float> grads) {
  if (grads.size() != params_.size())
    throw std::invalid_argument("backward: grads size mismatch");
  auto gz = rows_to_tensor(dz, dz.cols);
  auto gh = head_.backward(gz, pass.head_caches,
                           std::span<const float>(params_).subspan(enc_params_),
                           grads.subspan(enc_params_));
  encoder_.backward(gh, pass.encoder_caches,
                    std::span<const float>(params_).subspan(0, enc_params_),
                    grads.subspan(0, enc_params_));
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
//
// Layout: magic, u32 version, u64 json length, config json, u64 param count,
// params f32, u64 state count, state f32, u8 optimizer flag, then optionally
// i64 step + m f32 + v f32. All little-endian.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'I', 'M', 'S', 'I', 'G', 'C', 'K'};
constexpr uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void read_pod(std::istream& in, T& v, const char* what) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error(std::string("corrupt checkpoint: truncated at ") + what);
}

void write_floats(std::ostream& out, const std::vector<float>& v) {
  write_pod(out, static_cast<uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> read_floats(std::istream& in, const char* what) {
  uint64_t n = 0;
  read_pod(in, n, what);
  if (n > (1ULL << 34))
    throw std::runtime_error(std::string("corrupt checkpoint: absurd array size in ") + what);
  std::vector<float> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) throw std::runtime_error(std::string("corrupt checkpoint: truncated at ") + what);
  return v;
}

}  // namespace

void Model::save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                            const OptimizerState* opt) const {
  json cfg;
  cfg["architecture"] = to_string(enc_.architecture);
  cfg["input_length"] = enc_.input_length;
  cfg["embedding_dim"] = enc_.embedding_dim;
  cfg["hidden_dim"] = proj_.hidden_dim;
  cfg["output_dim"] = proj_.output_dim;
  cfg["seed"] = init_seed_;
  cfg["epochs_trained"] = meta.epochs_trained;
  cfg["loss_name"] = meta.loss_name;
  cfg["tau"] = meta.tau;
  const std::string body = cfg.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, static_cast<uint64_t>(body.size()));
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  write_floats(out, params_);
  write_floats(out, state_);
  const uint8_t has_opt = opt && !opt->empty() ? 1 : 0;
  write_pod(out, has_opt);
  if (has_opt) {
    write_pod(out, opt->step);
    write_floats(out, opt->m);
    write_floats(out, opt->v);
  }
  if (!out) throw std::runtime_error("write failed for checkpoint '" + path.string() + "'");
  out.close();

  // Sidecar for humans and external tools.
  std::ofstream side(path.string() + ".json");
  side << cfg.dump(2) << "\n";
}

Model Model::load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta,
                             OptimizerState* opt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("corrupt checkpoint '" + path.string() + "': bad magic");
  uint32_t version = 0;
  read_pod(in, version, "version");
  if (version != kVersion)
    throw std::runtime_error("checkpoint '" + path.string() + "': unsupported version " +
                             std::to_string(version));
  uint64_t json_len = 0;
  read_pod(in, json_len, "header length");
  if (json_len > (1ULL << 24))
    throw std::runtime_error("corrupt checkpoint '" + path.string() + "': absurd header size");
  std::string body(json_len, '\0');
  in.read(body.data(), static_cast<std::streamsize>(json_len));
  if (!in) throw std::runtime_error("corrupt checkpoint '" + path.string() + "': truncated header");

  json cfg;
  try {
    cfg = json::parse(body);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("corrupt checkpoint '" + path.string() + "': " + e.what());
  }

  Model model;
  model.enc_.architecture = architecture_from_string(cfg.at("architecture").get<std::string>());
  model.enc_.input_length = cfg.at("input_length").get<int>();
  model.enc_.embedding_dim = cfg.at("embedding_dim").get<int>();
  model.proj_.hidden_dim = cfg.at("hidden_dim").get<int>();
  model.proj_.output_dim = cfg.at("output_dim").get<int>();
  model.init_seed_ = cfg.at("seed").get<uint64_t>();
  model.build();

  auto params = read_floats(in, "parameters");
  auto state = read_floats(in, "state");
  if (params.size() != model.params_.size() || state.size() != model.state_.size())
    throw std::runtime_error("corrupt checkpoint '" + path.string() +
                             "': parameter payload does not match architecture");
  model.params_ = std::move(params);
  model.state_ = std::move(state);

  uint8_t has_opt = 0;
  read_pod(in, has_opt, "optimizer flag");
  if (has_opt) {
    OptimizerState tmp;
    read_pod(in, tmp.step, "optimizer step");
    tmp.m = read_floats(in, "optimizer m");
    tmp.v = read_floats(in, "optimizer v");
    if (tmp.m.size() != model.params_.size() || tmp.v.size() != model.params_.size())
      throw std::runtime_error("corrupt checkpoint '" + path.string() +
                               "': optimizer payload size mismatch");
    if (opt) *opt = std::move(tmp);
  } else if (opt) {
    *opt = OptimizerState{};
  }

  if (meta) {
    meta->seed = model.init_seed_;
    meta->epochs_trained = cfg.at("epochs_trained").get<int>();
    meta->loss_name = cfg.at("loss_name").get<std::string>();
    meta->tau = cfg.at("tau").get<double>();
  }
  return model;
}

std::string file_fingerprint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for fingerprinting");
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    const auto got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace simsig
