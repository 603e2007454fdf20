#include "simsig/signal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "segment files are little-endian float32; big-endian hosts are unsupported");

namespace simsig {

using nlohmann::json;

std::string to_string(Label l) { return l == Label::af ? "AF" : "NonAF"; }

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

std::string to_string(Quality q) {
  switch (q) {
    case Quality::poor: return "Poor";
    case Quality::good: return "Good";
    case Quality::excellent: return "Excellent";
  }
  return "Good";
}

namespace {

Split split_from_string(const std::string& s, const std::string& context) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw std::runtime_error(context + ": unknown split '" + s + "'");
}

Quality quality_from_string(const std::string& s, const std::string& context) {
  if (s == "Poor") return Quality::poor;
  if (s == "Good") return Quality::good;
  if (s == "Excellent") return Quality::excellent;
  throw std::runtime_error(context + ": unknown quality label '" + s + "'");
}

}  // namespace

int Dataset::total_segments() const {
  int n = 0;
  for (const auto& p : patients) n += static_cast<int>(p.segments.size());
  return n;
}

const PatientRecord* Dataset::find(const std::string& patient_id) const {
  for (const auto& p : patients)
    if (p.patient_id == patient_id) return &p;
  return nullptr;
}

void validate_dataset(const Dataset& ds) {
  if (ds.segment_length < 1) throw std::runtime_error("dataset: segment length must be >= 1");
  std::set<std::string> ids;
  for (const auto& p : ds.patients) {
    if (!ids.insert(p.patient_id).second)
      throw std::runtime_error("dataset: duplicate patient id '" + p.patient_id + "'");
    if (p.segments.empty())
      throw std::runtime_error("dataset: patient '" + p.patient_id + "' has no segments");
    for (const auto& seg : p.segments) {
      if (seg.patient_id != p.patient_id)
        throw std::runtime_error("dataset: segment of patient '" + p.patient_id +
                                 "' carries id '" + seg.patient_id + "'");
      if (static_cast<int>(seg.samples.size()) != ds.segment_length)
        throw std::runtime_error("dataset: segment " + std::to_string(seg.segment_index) +
                                 " of patient '" + p.patient_id + "' has length " +
                                 std::to_string(seg.samples.size()) + ", expected " +
                                 std::to_string(ds.segment_length));
      for (float v : seg.samples)
        if (!std::isfinite(v))
          throw std::runtime_error("dataset: non-finite sample in segment " +
                                   std::to_string(seg.segment_index) + " of patient '" +
                                   p.patient_id + "'");
    }
  }
}

void check_split_disjoint(const std::vector<const Dataset*>& sets) {
  std::set<std::string> seen;
  for (const Dataset* ds : sets) {
    for (const auto& p : ds->patients) {
      if (!seen.insert(p.patient_id).second)
        throw std::runtime_error("split leak: patient '" + p.patient_id +
                                 "' appears in more than one split");
    }
  }
}

// ---------------------------------------------------------------------------
// Manifest I/O
// ---------------------------------------------------------------------------

namespace {

std::vector<float> read_f32_file(const std::filesystem::path& path, int n_segments, int length,
                                 const std::string& patient_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open segments file '" + path.string() + "'");
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<uint64_t>(in.tellg());
  const uint64_t expected =
      static_cast<uint64_t>(n_segments) * static_cast<uint64_t>(length) * sizeof(float);
  if (bytes != expected)
    throw std::runtime_error("segments file '" + path.string() + "' for patient '" + patient_id +
                             "': expected " + std::to_string(n_segments) + " x " +
                             std::to_string(length) + " float32 (" + std::to_string(expected) +
                             " bytes), found " + std::to_string(bytes) + " bytes");
  in.seekg(0, std::ios::beg);
  std::vector<float> values(static_cast<size_t>(n_segments) * length);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(expected));
  if (!in) throw std::runtime_error("short read on segments file '" + path.string() + "'");
  return values;
}

// Sidecar rows: segment_index,start_timestamp,quality (either field may be empty).
void apply_sidecar(const std::filesystem::path& csv_path, PatientRecord& rec) {
  std::ifstream in(csv_path);
  if (!in) return;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("segment_index", 0) == 0) continue;
    std::stringstream ss(line);
    std::string idx_s, ts_s, q_s;
    std::getline(ss, idx_s, ',');
    std::getline(ss, ts_s, ',');
    std::getline(ss, q_s, ',');
    const std::string ctx = csv_path.string() + ":" + std::to_string(lineno);
    int idx;
    try {
      idx = std::stoi(idx_s);
    } catch (const std::exception&) {
      throw std::runtime_error(ctx + ": bad segment_index '" + idx_s + "'");
    }
    if (idx < 0 || idx >= static_cast<int>(rec.segments.size()))
      throw std::runtime_error(ctx + ": segment_index " + std::to_string(idx) + " out of range");
    if (!ts_s.empty()) rec.segments[idx].start_timestamp = std::stod(ts_s);
    if (!q_s.empty()) rec.segments[idx].quality = quality_from_string(q_s, ctx);
  }
}

template <class T>
T require(const json& j, const char* key, const std::string& context) {
  if (!j.contains(key))
    throw std::runtime_error(context + ": missing field '" + std::string(key) + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::runtime_error(context + ": bad field '" + std::string(key) + "': " + e.what());
  }
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest '" + manifest_path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("manifest '" + manifest_path.string() + "': " + e.what());
  }
  const std::string ctx = "manifest '" + manifest_path.string() + "'";

  Dataset ds;
  ds.split = split_from_string(require<std::string>(doc, "split", ctx), ctx);
  ds.segment_length = require<int>(doc, "l", ctx);
  if (ds.segment_length < 1) throw std::runtime_error(ctx + ": 'l' must be >= 1");
  if (!doc.contains("patients") || !doc["patients"].is_array())
    throw std::runtime_error(ctx + ": missing or non-array field 'patients'");

  const auto base = manifest_path.parent_path();
  for (const auto& pj : doc["patients"]) {
    PatientRecord rec;
    rec.patient_id = require<std::string>(pj, "id", ctx);
    const int label = require<int>(pj, "label", ctx);
    if (label != 0 && label != 1)
      throw std::runtime_error(ctx + ": patient '" + rec.patient_id + "': label must be 0 or 1");
    rec.label = label == 1 ? Label::af : Label::non_af;
    const auto file = require<std::string>(pj, "segments_file", ctx);
    const int n_segments = require<int>(pj, "n_segments", ctx);
    if (n_segments < 1)
      throw std::runtime_error(ctx + ": patient '" + rec.patient_id + "': n_segments must be >= 1");

    auto seg_path = std::filesystem::path(file);
    if (seg_path.is_relative()) seg_path = base / seg_path;
    auto values = read_f32_file(seg_path, n_segments, ds.segment_length, rec.patient_id);
    rec.segments.resize(n_segments);
    for (int i = 0; i < n_segments; ++i) {
      auto& seg = rec.segments[i];
      seg.patient_id = rec.patient_id;
      seg.segment_index = i;
      seg.samples.assign(values.begin() + static_cast<size_t>(i) * ds.segment_length,
                         values.begin() + static_cast<size_t>(i + 1) * ds.segment_length);
    }
    apply_sidecar(seg_path.string() + ".csv", rec);
    ds.patients.push_back(std::move(rec));
  }

  validate_dataset(ds);

  if (doc.contains("siblings")) {
    std::set<std::string> own;
    for (const auto& p : ds.patients) own.insert(p.patient_id);
    for (const auto& sj : doc["siblings"]) {
      auto sib_path = std::filesystem::path(sj.get<std::string>());
      if (sib_path.is_relative()) sib_path = base / sib_path;
      std::ifstream sin(sib_path);
      if (!sin) throw std::runtime_error(ctx + ": cannot open sibling '" + sib_path.string() + "'");
      json sdoc;
      try {
        sdoc = json::parse(sin);
      } catch (const json::parse_error& e) {
        throw std::runtime_error("sibling manifest '" + sib_path.string() + "': " + e.what());
      }
      for (const auto& pj : sdoc["patients"]) {
        const auto id = pj.at("id").get<std::string>();
        if (own.count(id))
          throw std::runtime_error("split leak: patient '" + id + "' appears in both '" +
                                   manifest_path.string() + "' and '" + sib_path.string() + "'");
      }
    }
  }

  return ds;
}

std::filesystem::path save_dataset(const Dataset& ds, const std::filesystem::path& dir,
                                   const std::string& stem) {
  validate_dataset(ds);
  std::filesystem::create_directories(dir);

  json doc;
  doc["split"] = to_string(ds.split);
  doc["l"] = ds.segment_length;
  doc["patients"] = json::array();

  for (const auto& p : ds.patients) {
    const std::string fname = stem + "_" + p.patient_id + ".f32";
    const auto fpath = dir / fname;
    {
      std::ofstream out(fpath, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write '" + fpath.string() + "'");
      for (const auto& seg : p.segments)
        out.write(reinterpret_cast<const char*>(seg.samples.data()),
                  static_cast<std::streamsize>(seg.samples.size() * sizeof(float)));
    }
    bool any_meta = false;
    for (const auto& seg : p.segments)
      if (seg.start_timestamp || seg.quality) any_meta = true;
    if (any_meta) {
      std::ofstream csv(fpath.string() + ".csv");
      csv << "segment_index,start_timestamp,quality\n";
      for (const auto& seg : p.segments) {
        csv << seg.segment_index << ",";
        if (seg.start_timestamp) csv << *seg.start_timestamp;
        csv << ",";
        if (seg.quality) csv << to_string(*seg.quality);
        csv << "\n";
      }
    }
    json pj;
    pj["id"] = p.patient_id;
    pj["label"] = p.label == Label::af ? 1 : 0;
    pj["segments_file"] = fname;
    pj["n_segments"] = static_cast<int>(p.segments.size());
    doc["patients"].push_back(pj);
  }

  const auto manifest_path = dir / (stem + ".json");
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot write '" + manifest_path.string() + "'");
  out << doc.dump(2) << "\n";
  return manifest_path;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

void zscore(std::span<float> samples) {
  if (samples.empty()) return;
  double mean = 0.0;
  for (float v : samples) mean += v;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (float v : samples) {
    const double d = v - mean;
    var += d * d;
  }
  var /= static_cast<double>(samples.size());
  const double std = std::sqrt(var);
  if (std < 1e-12) {
    std::fill(samples.begin(), samples.end(), 0.0f);
    return;
  }
  for (float& v : samples) v = static_cast<float>((v - mean) / std);
}

SignalSegment normalize_segment(const SignalSegment& seg) {
  for (float v : seg.samples)
    if (!std::isfinite(v))
      throw std::runtime_error("normalize_segment: non-finite sample in segment " +
                               std::to_string(seg.segment_index) + " of patient '" +
                               seg.patient_id + "'");
  SignalSegment out = seg;
  zscore(out.samples);
  return out;
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

void SyntheticConfig::validate() const {
  if (n_af_patients < 1 || n_nonaf_patients < 1)
    throw std::invalid_argument("synthetic config: patient counts must be >= 1");
  if (segments_per_patient < 1)
    throw std::invalid_argument("synthetic config: segments_per_patient must be >= 1");
  if (segment_length < 8) throw std::invalid_argument("synthetic config: l must be >= 8");
  if (base_heart_rate_hz <= 0) throw std::invalid_argument("synthetic config: heart rate must be > 0");
  if (nsr_interval_jitter < 0 || af_interval_jitter < 0)
    throw std::invalid_argument("synthetic config: jitters must be >= 0");
  if (!(af_interval_jitter > nsr_interval_jitter))
    throw std::invalid_argument("synthetic config: af_interval_jitter must exceed nsr_interval_jitter");
  if (noise_std < 0) throw std::invalid_argument("synthetic config: noise_std must be >= 0");
}

namespace synth {

PulseTrain make_segment(const PatientTraits& traits, int length, double sample_rate_hz,
                        double noise_std, Rng& rng) {
  PulseTrain out;
  const double duration = length / sample_rate_hz;
  out.samples.assign(static_cast<size_t>(length), 0.0f);

  // Pulse locations: mean interval perturbed per beat by the patient's CV.
  // Intervals are floored at 30% of the mean so they stay positive.
  double t = rng.uniform(0.0, traits.interval_mean_s);
  while (t < duration) {
    out.pulse_times.push_back(t);
    double iv = traits.interval_mean_s * (1.0 + traits.interval_cv * rng.normal());
    iv = std::max(iv, 0.3 * traits.interval_mean_s);
    t += iv;
  }

  const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double sigma = traits.pulse_width_s;
  const double cutoff = 4.0 * sigma;
  std::vector<double> acc(static_cast<size_t>(length), 0.0);

  for (double pt : out.pulse_times) {
    const int lo = std::max(0, static_cast<int>((pt - cutoff) * sample_rate_hz));
    const int hi = std::min(length - 1, static_cast<int>((pt + cutoff) * sample_rate_hz) + 1);
    for (int i = lo; i <= hi; ++i) {
      const double dt = i / sample_rate_hz - pt;
      acc[i] += traits.pulse_amp * std::exp(-0.5 * dt * dt / (sigma * sigma));
    }
  }
  for (int i = 0; i < length; ++i) {
    const double ts = i / sample_rate_hz;
    acc[i] += traits.baseline_amp * std::sin(2.0 * 3.14159265358979323846 * traits.baseline_freq_hz * ts + phase);
    if (noise_std > 0) acc[i] += noise_std * rng.normal();
    out.samples[static_cast<size_t>(i)] = static_cast<float>(acc[i]);
  }
  return out;
}

}  // namespace synth

namespace {

synth::PatientTraits draw_traits(const SyntheticConfig& cfg, double interval_cv, Rng& rng) {
  synth::PatientTraits t;
  const double hr = cfg.base_heart_rate_hz * (1.0 + 0.04 * rng.normal());
  t.interval_mean_s = 1.0 / std::max(hr, 0.2);
  t.interval_cv = interval_cv;
  t.pulse_width_s = 0.09 * (1.0 + 0.10 * rng.normal());
  t.pulse_amp = 1.0 * (1.0 + 0.10 * rng.normal());
  t.baseline_amp = 0.15 * (1.0 + 0.20 * rng.uniform01());
  t.baseline_freq_hz = 0.18 * (1.0 + 0.15 * rng.normal());
  return t;
}

}  // namespace

SynthesizedDataset synthesize_dataset_detailed(const SyntheticConfig& cfg, Split split) {
  cfg.validate();
  SynthesizedDataset out;
  out.dataset.split = split;
  out.dataset.segment_length = cfg.segment_length;

  Rng rng(cfg.rng_seed);
  const double seg_duration = cfg.segment_length / kSampleRateHz;
  const int total = cfg.n_af_patients + cfg.n_nonaf_patients;

  for (int p = 0; p < total; ++p) {
    const bool af = p < cfg.n_af_patients;
    PatientRecord rec;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "%s_%03d", af ? "af" : "nsr", af ? p : p - cfg.n_af_patients);
    rec.patient_id = idbuf;
    rec.label = af ? Label::af : Label::non_af;

    const double cv = af ? cfg.af_interval_jitter : cfg.nsr_interval_jitter;
    const auto traits = draw_traits(cfg, cv, rng);

    std::vector<std::vector<double>> patient_pulses;
    for (int s = 0; s < cfg.segments_per_patient; ++s) {
      auto train = synth::make_segment(traits, cfg.segment_length, kSampleRateHz, cfg.noise_std, rng);
      SignalSegment seg;
      seg.patient_id = rec.patient_id;
      seg.segment_index = s;
      seg.samples = std::move(train.samples);
      seg.start_timestamp = s * seg_duration;
      rec.segments.push_back(std::move(seg));
      patient_pulses.push_back(std::move(train.pulse_times));
    }
    out.dataset.patients.push_back(std::move(rec));
    out.pulse_times.push_back(std::move(patient_pulses));
  }

  validate_dataset(out.dataset);
  return out;
}

Dataset synthesize_dataset(const SyntheticConfig& cfg, Split split) {
  return synthesize_dataset_detailed(cfg, split).dataset;
}

}  // namespace simsig
