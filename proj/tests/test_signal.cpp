#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "simsig/signal.hpp"

using namespace simsig;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("simsig_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Dataset tiny_dataset(int n_patients, int segs, int l) {
  Dataset ds;
  ds.segment_length = l;
  for (int p = 0; p < n_patients; ++p) {
    PatientRecord rec;
    rec.patient_id = "p" + std::to_string(p);
    rec.label = p % 2 ? Label::af : Label::non_af;
    for (int s = 0; s < segs; ++s) {
      SignalSegment seg;
      seg.patient_id = rec.patient_id;
      seg.segment_index = s;
      seg.samples.resize(l);
      for (int i = 0; i < l; ++i)
        seg.samples[i] = static_cast<float>(std::sin(0.1 * i + p) + 0.01 * s);
      rec.segments.push_back(std::move(seg));
    }
    ds.patients.push_back(std::move(rec));
  }
  return ds;
}

// CV of inter-pulse intervals pooled over one patient's segments
double interval_cv(const std::vector<std::vector<double>>& segments) {
  std::vector<double> intervals;
  for (const auto& pulses : segments)
    for (size_t i = 1; i < pulses.size(); ++i) intervals.push_back(pulses[i] - pulses[i - 1]);
  REQUIRE(intervals.size() > 10);
  const double mean =
      std::accumulate(intervals.begin(), intervals.end(), 0.0) / intervals.size();
  double var = 0;
  for (double v : intervals) var += (v - mean) * (v - mean);
  var /= intervals.size();
  return std::sqrt(var) / mean;
}

}  // namespace

TEST_CASE("normalize_segment: constant input maps to zeros") {
  SignalSegment seg;
  seg.patient_id = "p";
  seg.samples.assign(100, 1.0f);
  const auto out = normalize_segment(seg);
  for (float v : out.samples) CHECK(v == 0.0f);
}

TEST_CASE("normalize_segment: two-level signal lands on mean 0 / std 1 exactly") {
  SignalSegment seg;
  seg.patient_id = "p";
  for (int i = 0; i < 100; ++i) seg.samples.push_back(i % 2 ? 2.0f : 0.0f);
  const auto out = normalize_segment(seg);
  for (int i = 0; i < 100; ++i) CHECK(out.samples[i] == (i % 2 ? 1.0f : -1.0f));
}

TEST_CASE("normalize_segment: random segment recomputes to mean ~0, std ~1") {
  Rng rng(1);
  SignalSegment seg;
  seg.patient_id = "p";
  for (int i = 0; i < 801; ++i) seg.samples.push_back(static_cast<float>(rng.normal(3.0, 2.5)));
  const auto out = normalize_segment(seg);
  double mean = 0;
  for (float v : out.samples) mean += v;
  mean /= out.samples.size();
  double var = 0;
  for (float v : out.samples) var += (v - mean) * (v - mean);
  var /= out.samples.size();
  CHECK(std::abs(mean) < 1e-6);  // float32 storage, so not 1e-9 of the double path
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("normalize_segment rejects non-finite samples") {
  SignalSegment seg;
  seg.patient_id = "p";
  seg.samples = {1.0f, std::nanf(""), 2.0f};
  CHECK_THROWS(normalize_segment(seg));
}

TEST_CASE("synthesize_dataset is a pure function of its config") {
  SyntheticConfig cfg;
  cfg.n_af_patients = 3;
  cfg.n_nonaf_patients = 3;
  cfg.segments_per_patient = 4;
  cfg.segment_length = 256;
  cfg.rng_seed = 7;
  const auto a = synthesize_dataset(cfg);
  const auto b = synthesize_dataset(cfg);
  REQUIRE(a.patients.size() == b.patients.size());
  for (size_t p = 0; p < a.patients.size(); ++p) {
    CHECK(a.patients[p].patient_id == b.patients[p].patient_id);
    for (size_t s = 0; s < a.patients[p].segments.size(); ++s)
      CHECK(a.patients[p].segments[s].samples == b.patients[p].segments[s].samples);
  }
  const auto c = [&] {
    auto cfg2 = cfg;
    cfg2.rng_seed = 8;
    return synthesize_dataset(cfg2);
  }();
  CHECK(c.patients[0].segments[0].samples != a.patients[0].segments[0].samples);
}

TEST_CASE("zero jitter and zero noise give strictly periodic pulse trains") {
  SyntheticConfig cfg;
  cfg.n_af_patients = 1;
  cfg.n_nonaf_patients = 3;
  cfg.segments_per_patient = 3;
  cfg.segment_length = 512;
  cfg.nsr_interval_jitter = 0.0;
  cfg.af_interval_jitter = 0.25;
  cfg.noise_std = 0.0;
  const auto out = synthesize_dataset_detailed(cfg);
  for (size_t p = 0; p < out.dataset.patients.size(); ++p) {
    if (out.dataset.patients[p].label == Label::af) continue;
    for (const auto& pulses : out.pulse_times[p]) {
      REQUIRE(pulses.size() >= 3);
      const double iv = pulses[1] - pulses[0];
      for (size_t i = 1; i < pulses.size(); ++i)
        CHECK(pulses[i] - pulses[i - 1] == doctest::Approx(iv).epsilon(1e-12));
    }
  }
}

TEST_CASE("measured interval CVs track the configured jitters, AF above NSR") {
  SyntheticConfig cfg;
  cfg.n_af_patients = 10;
  cfg.n_nonaf_patients = 10;
  cfg.segments_per_patient = 20;
  cfg.segment_length = 256;
  cfg.rng_seed = 123;
  const auto out = synthesize_dataset_detailed(cfg);

  double af_cv = 0, nsr_cv = 0;
  int af_n = 0, nsr_n = 0;
  for (size_t p = 0; p < out.dataset.patients.size(); ++p) {
    const double cv = interval_cv(out.pulse_times[p]);
    if (out.dataset.patients[p].label == Label::af) {
      af_cv += cv;
      ++af_n;
    } else {
      nsr_cv += cv;
      ++nsr_n;
    }
  }
  af_cv /= af_n;
  nsr_cv /= nsr_n;
  CHECK(af_cv > nsr_cv);
  // the interval floor clips the widest AF draws, so allow a generous band
  CHECK(af_cv == doctest::Approx(cfg.af_interval_jitter).epsilon(0.35));
  CHECK(nsr_cv == doctest::Approx(cfg.nsr_interval_jitter).epsilon(0.35));
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig cfg;
  cfg.nsr_interval_jitter = 0.3;
  cfg.af_interval_jitter = 0.2;
  CHECK_THROWS(cfg.validate());
  cfg = SyntheticConfig{};
  cfg.n_af_patients = 0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("dataset totals add up and ids stay unique") {
  auto ds = tiny_dataset(4, 3, 64);
  CHECK(ds.total_segments() == 12);
  CHECK_NOTHROW(validate_dataset(ds));
  ds.patients[1].patient_id = ds.patients[0].patient_id;
  for (auto& s : ds.patients[1].segments) s.patient_id = ds.patients[0].patient_id;
  CHECK_THROWS_WITH(validate_dataset(ds), doctest::Contains("duplicate patient id"));
}

TEST_CASE("manifest round-trip: 2 patients x 3 segments") {
  const auto dir = temp_dir("manifest_rt");
  auto ds = tiny_dataset(2, 3, 800);
  ds.patients[0].segments[1].start_timestamp = 25.0;
  ds.patients[0].segments[1].quality = Quality::excellent;
  const auto manifest = save_dataset(ds, dir, "train");

  const auto loaded = load_dataset(manifest);
  CHECK(loaded.patients.size() == 2);
  CHECK(loaded.total_segments() == 6);
  CHECK(loaded.segment_length == 800);
  CHECK(loaded.patients[0].patient_id == ds.patients[0].patient_id);
  CHECK(loaded.patients[0].segments[1].samples == ds.patients[0].segments[1].samples);
  REQUIRE(loaded.patients[0].segments[1].start_timestamp.has_value());
  CHECK(*loaded.patients[0].segments[1].start_timestamp == 25.0);
  REQUIRE(loaded.patients[0].segments[1].quality.has_value());
  CHECK(*loaded.patients[0].segments[1].quality == Quality::excellent);
  CHECK(!loaded.patients[0].segments[0].quality.has_value());
}

TEST_CASE("segment file with one missing sample is a validation error naming the patient") {
  const auto dir = temp_dir("manifest_short");
  auto ds = tiny_dataset(2, 3, 800);
  const auto manifest = save_dataset(ds, dir, "train");
  // chop 4 bytes (one float) off the end of patient p1's file
  const auto f32 = dir / "train_p1.f32";
  std::filesystem::resize_file(f32, std::filesystem::file_size(f32) - 4);
  CHECK_THROWS_WITH(load_dataset(manifest), doctest::Contains("p1"));
}

TEST_CASE("malformed manifest reports the parse position") {
  const auto dir = temp_dir("manifest_bad");
  std::ofstream(dir / "bad.json") << "{\"split\": \"train\", \"l\": }";
  CHECK_THROWS_WITH(load_dataset(dir / "bad.json"), doctest::Contains("bad.json"));
}

TEST_CASE("manifest missing a field names the field") {
  const auto dir = temp_dir("manifest_missing");
  std::ofstream(dir / "m.json") << R"({"split": "train", "patients": []})";
  CHECK_THROWS_WITH(load_dataset(dir / "m.json"), doctest::Contains("'l'"));
}

TEST_CASE("sibling manifests enforce split disjointness") {
  const auto dir = temp_dir("siblings");
  auto train = tiny_dataset(3, 2, 64);
  auto test = tiny_dataset(2, 2, 64);  // shares p0, p1 with train
  save_dataset(train, dir, "train");
  save_dataset(test, dir, "test");

  // rewrite the train manifest with a sibling reference
  auto text = [&] {
    std::ifstream in(dir / "train.json");
    return std::string(std::istreambuf_iterator<char>(in), {});
  }();
  text.insert(text.find_last_of('}'), ", \"siblings\": [\"test.json\"]");
  std::ofstream(dir / "train.json") << text;
  CHECK_THROWS_WITH(load_dataset(dir / "train.json"), doctest::Contains("split leak"));
}

TEST_CASE("check_split_disjoint catches shared ids") {
  const auto a = tiny_dataset(3, 2, 64);
  auto b = tiny_dataset(2, 2, 64);
  CHECK_THROWS(check_split_disjoint({&a, &b}));
  for (auto& p : b.patients) {
    p.patient_id = "q" + p.patient_id;
    for (auto& s : p.segments) s.patient_id = p.patient_id;
  }
  CHECK_NOTHROW(check_split_disjoint({&a, &b}));
}
