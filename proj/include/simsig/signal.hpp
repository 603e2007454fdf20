#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simsig/rng.hpp"

namespace simsig {

enum class Label { non_af = 0, af = 1 };
enum class Quality { poor, good, excellent };
enum class Split { train, validation, test };

std::string to_string(Label l);
std::string to_string(Split s);
std::string to_string(Quality q);

// One fixed-length window of a patient's signal.
struct SignalSegment {
  std::string patient_id;
  int segment_index = 0;
  std::vector<float> samples;
  std::optional<double> start_timestamp;  // seconds
  std::optional<Quality> quality;         // pass-through metadata, never filters
};

struct PatientRecord {
  std::string patient_id;
  Label label = Label::non_af;
  std::vector<SignalSegment> segments;
};

struct Dataset {
  Split split = Split::train;
  int segment_length = 0;  // every segment has exactly this many samples
  std::vector<PatientRecord> patients;

  int total_segments() const;
  const PatientRecord* find(const std::string& patient_id) const;
};

// Throws if patient ids collide, a segment has the wrong length, any sample
// is non-finite, or a patient has no segments.
void validate_dataset(const Dataset& ds);

// Patient-id sets across splits must not intersect.
void check_split_disjoint(const std::vector<const Dataset*>& sets);

// ---------------------------------------------------------------------------
// Manifest I/O.
//
// Manifest: JSON {"split", "l", "patients": [{"id", "label", "segments_file",
// "n_segments"}]}. Each segments_file holds raw little-endian float32,
// row-major n_segments x l, no header. An optional per-patient sidecar at
// "<segments_file>.csv" carries segment_index,start_timestamp,quality rows.
// An optional "siblings" list of manifest paths triggers a split-disjointness
// check on load.
// ---------------------------------------------------------------------------

Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes <stem>.json plus one <stem>_<patient>.f32 per patient (and a sidecar
// when timestamps or quality labels are present).
std::filesystem::path save_dataset(const Dataset& ds, const std::filesystem::path& dir,
                                   const std::string& stem);

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

// Z-score to mean 0 / unit population std; constant input maps to all zeros.
SignalSegment normalize_segment(const SignalSegment& seg);
void zscore(std::span<float> samples);

// ---------------------------------------------------------------------------
// Synthetic PPG-like data. Gaussian pulses on a slow baseline; the AF and
// NSR populations differ only in the pulse-to-pulse interval variability.
// ---------------------------------------------------------------------------

struct SyntheticConfig {
  int n_af_patients = 10;
  int n_nonaf_patients = 10;
  int segments_per_patient = 20;
  int segment_length = 800;  // 25 s at 32 Hz
  double base_heart_rate_hz = 1.25;
  double nsr_interval_jitter = 0.03;  // CV of inter-pulse intervals
  double af_interval_jitter = 0.25;
  double noise_std = 0.05;
  uint64_t rng_seed = 1;

  void validate() const;
};

constexpr double kSampleRateHz = 32.0;

namespace synth {

// Per-patient morphology. Trait spreads are kept small so that interval
// variability stays the dominant cue separating the two populations.
struct PatientTraits {
  double interval_mean_s = 0.8;
  double interval_cv = 0.03;
  double pulse_width_s = 0.09;
  double pulse_amp = 1.0;
  double baseline_amp = 0.15;
  double baseline_freq_hz = 0.18;
};

struct PulseTrain {
  std::vector<double> pulse_times;  // seconds, within the segment window
  std::vector<float> samples;
};

PulseTrain make_segment(const PatientTraits& traits, int length, double sample_rate_hz,
                        double noise_std, Rng& rng);

}  // namespace synth

struct SynthesizedDataset {
  Dataset dataset;
  // pulse_times[p][s] = ground-truth pulse locations of patient p, segment s
  std::vector<std::vector<std::vector<double>>> pulse_times;
};

SynthesizedDataset synthesize_dataset_detailed(const SyntheticConfig& cfg,
                                               Split split = Split::train);
Dataset synthesize_dataset(const SyntheticConfig& cfg, Split split = Split::train);

}  // namespace simsig
