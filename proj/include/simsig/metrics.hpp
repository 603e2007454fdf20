#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "simsig/neighbors.hpp"
#include "simsig/patient_db.hpp"

namespace simsig {

struct ConfusionMatrix {
  int tp = 0, tn = 0, fp = 0, fn = 0;

  int total() const { return tp + tn + fp + fn; }
};

// AF is the positive class. A 0/0 ratio is reported as 0 with its flag set.
struct MetricsReport {
  double sensitivity = 0, specificity = 0, precision = 0, f1 = 0, accuracy = 0;
  bool sensitivity_undefined = false;
  bool specificity_undefined = false;
  bool precision_undefined = false;
  bool f1_undefined = false;

  bool any_undefined() const {
    return sensitivity_undefined || specificity_undefined || precision_undefined || f1_undefined;
  }
};

MetricsReport compute_metrics(const ConfusionMatrix& cm);

std::string format_metrics(const MetricsReport& m);  // 3 decimals

struct PatientVerdict {
  std::string patient_id;
  Label true_label = Label::non_af;
  NeighborVerdict verdict;
};

struct EvalResult {
  ConfusionMatrix cm;
  MetricsReport metrics;
  std::vector<PatientVerdict> verdicts;
};

// Classifies every patient of the eval split against the database. Refuses
// to run when a patient id appears on both sides.
EvalResult evaluate_split(const PatientDatabase& db, const Model& model, const Dataset& eval_ds,
                          const SelectionConfig& cfg);

struct SweepConfig {
  std::vector<int> ks{3, 5, 7, 9, 11};
  std::vector<Metric> metrics{Metric::overall_min, Metric::average_min, Metric::pct_min};
  double radius = 0.15;
};

struct SweepRow {
  Metric metric = Metric::average_min;
  int k = 0;
  ConfusionMatrix cm;
  MetricsReport report;
};

// One row per (metric, k); duplicate k values are dropped. Query embeddings
// and distances are computed once and shared across rows.
std::vector<SweepRow> sweep(const PatientDatabase& db, const Model& model,
                            const Dataset& eval_ds, const SweepConfig& cfg);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
std::string format_sweep_table(const std::vector<SweepRow>& rows);

void write_eval_csv(const EvalResult& result, const SelectionConfig& cfg,
                    const std::filesystem::path& path);

}  // namespace simsig
