#pragma once

#include <string>
#include <vector>

#include "simsig/matrix.hpp"
#include "simsig/patient_db.hpp"

namespace simsig {

enum class Metric { overall_min, average_min, weighted_average_min, pct_min };

std::string to_string(Metric m);
Metric metric_from_string(const std::string& s);

struct SelectionConfig {
  Metric metric = Metric::average_min;
  int k = 7;
  double radius = 0.15;       // pct_min only
  double weight_power = 2.0;  // weighted_average_min vote weights: 1 / d^power

  void validate(int database_patients) const;
};

// One cosine-distance matrix (n_i x M) per database patient, in float64.
struct PairwiseDistances {
  std::vector<Mat> per_patient;
};

struct NeighborScore {
  std::string patient_id;
  Label label = Label::non_af;
  double score = 0.0;  // distance d_i, or count C_i for pct_min
};

struct NeighborVerdict {
  Label predicted = Label::non_af;
  std::vector<NeighborScore> neighbors;  // best first, length k
  int af_votes = 0;
  int nonaf_votes = 0;
};

PairwiseDistances pairwise_distances(const PatientDatabase& db, const QueryPatient& q);

// d_i = min over all segment pairs.
std::vector<NeighborScore> score_overall_min(const PatientDatabase& db,
                                             const PairwiseDistances& dists);
// d_i = mean over all segment pairs.
std::vector<NeighborScore> score_average_min(const PatientDatabase& db,
                                             const PairwiseDistances& dists);
// C_i = |{(j, m): d <= r}| / M, ranked descending.
std::vector<NeighborScore> score_pct_min(const PatientDatabase& db,
                                         const PairwiseDistances& dists, double radius);

// Top-k by the configured criterion, then majority vote (ties resolve to
// NonAF). weighted_average_min ranks like average_min but votes with weights
// 1/d^2.
NeighborVerdict classify(const PatientDatabase& db, const QueryPatient& q,
                         const SelectionConfig& cfg);

// Rank + vote over precomputed scores; classify() is pairwise_distances
// followed by this.
NeighborVerdict verdict_from_scores(std::vector<NeighborScore> scores, const SelectionConfig& cfg);

// Baseline-style aggregation: AF iff strictly more than half of the segment
// predictions are AF.
Label segment_majority_aggregate(const std::vector<Label>& segment_predictions);

}  // namespace simsig
