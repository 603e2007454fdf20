#include "simsig/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "simsig/kernels.hpp"

namespace simsig {

std::string to_string(Metric m) {
  switch (m) {
    case Metric::overall_min: return "overall_min";
    case Metric::average_min: return "average_min";
    case Metric::weighted_average_min: return "weighted_average_min";
    case Metric::pct_min: return "pct_min";
  }
  return "average_min";
}

Metric metric_from_string(const std::string& s) {
  if (s == "overall_min" || s == "overall-min") return Metric::overall_min;
  if (s == "average_min" || s == "average-min") return Metric::average_min;
  if (s == "weighted_average_min" || s == "weighted-average-min")
    return Metric::weighted_average_min;
  if (s == "pct_min" || s == "pct-min") return Metric::pct_min;
  throw std::invalid_argument("unknown metric '" + s + "'");
}

void SelectionConfig::validate(int database_patients) const {
  if (k < 1) throw std::invalid_argument("selection config: k must be >= 1");
  if (k > database_patients)
    throw std::invalid_argument("selection config: k = " + std::to_string(k) +
                                " exceeds database size " + std::to_string(database_patients));
  if (metric == Metric::pct_min && !(radius > 0))
    throw std::invalid_argument("selection config: pct_min requires radius > 0");
}

namespace {

void check_nonzero_rows(const MatF& m, const std::string& who) {
  for (int i = 0; i < m.rows; ++i) {
    double norm = 0;
    for (int j = 0; j < m.cols; ++j) norm += static_cast<double>(m.at(i, j)) * m.at(i, j);
    if (norm <= 0.0)
      throw std::runtime_error("pairwise_distances: zero-norm embedding row " +
                               std::to_string(i) + " (" + who + ")");
  }
}

}  // namespace

PairwiseDistances pairwise_distances(const PatientDatabase& db, const QueryPatient& q) {
  if (q.embeddings.rows < 1) throw std::invalid_argument("pairwise_distances: empty query");
  if (q.embeddings.cols != db.embedding_dim)
    throw std::invalid_argument("pairwise_distances: query dim " +
                                std::to_string(q.embeddings.cols) + " != database dim " +
                                std::to_string(db.embedding_dim));
  check_nonzero_rows(q.embeddings, "query '" + q.patient_id + "'");

  PairwiseDistances out;
  out.per_patient.reserve(db.entries.size());
  for (const auto& e : db.entries) {
    check_nonzero_rows(e.embeddings, "database patient '" + e.patient_id + "'");
    Mat d(e.embeddings.rows, q.embeddings.rows);
    kernels::pairwise_cosine_distance(e.embeddings.data.data(), e.embeddings.rows,
                                      q.embeddings.data.data(), q.embeddings.rows,
                                      db.embedding_dim, d.data.data());
    out.per_patient.push_back(std::move(d));
  }
  return out;
}

std::vector<NeighborScore> score_overall_min(const PatientDatabase& db,
                                             const PairwiseDistances& dists) {
  std::vector<NeighborScore> scores(db.entries.size());
  for (size_t i = 0; i < db.entries.size(); ++i) {
    const auto& d = dists.per_patient[i];
    double best = d.data[0];
    for (double v : d.data) best = std::min(best, v);
    scores[i] = {db.entries[i].patient_id, db.entries[i].label, best};
  }
  return scores;
}

std::vector<NeighborScore> score_average_min(const PatientDatabase& db,
                                             const PairwiseDistances& dists) {
  std::vector<NeighborScore> scores(db.entries.size());
  for (size_t i = 0; i < db.entries.size(); ++i) {
    const auto& d = dists.per_patient[i];
    double acc = 0;
    for (double v : d.data) acc += v;
    scores[i] = {db.entries[i].patient_id, db.entries[i].label,
                 acc / static_cast<double>(d.data.size())};
  }
  return scores;
}

std::vector<NeighborScore> score_pct_min(const PatientDatabase& db,
                                         const PairwiseDistances& dists, double radius) {
  if (!(radius > 0)) throw std::invalid_argument("score_pct_min: radius must be > 0");
  std::vector<NeighborScore> scores(db.entries.size());
  for (size_t i = 0; i < db.entries.size(); ++i) {
    const auto& d = dists.per_patient[i];
    int count = 0;
    for (double v : d.data)
      if (v <= radius) ++count;
    scores[i] = {db.entries[i].patient_id, db.entries[i].label,
                 static_cast<double>(count) / d.cols};
  }
  return scores;
}

NeighborVerdict verdict_from_scores(std::vector<NeighborScore> scores,
                                    const SelectionConfig& cfg) {
  cfg.validate(static_cast<int>(scores.size()));
  const bool descending = cfg.metric == Metric::pct_min;
  std::sort(scores.begin(), scores.end(), [&](const NeighborScore& a, const NeighborScore& b) {
    if (a.score != b.score) return descending ? a.score > b.score : a.score < b.score;
    return a.patient_id < b.patient_id;
  });
  NeighborVerdict v;
  v.neighbors.assign(scores.begin(), scores.begin() + cfg.k);
  for (const auto& n : v.neighbors)
    (n.label == Label::af ? v.af_votes : v.nonaf_votes)++;

  if (cfg.metric == Metric::weighted_average_min) {
    double af_w = 0, non_w = 0;
    for (const auto& n : v.neighbors) {
      const double w = 1.0 / (std::pow(n.score, cfg.weight_power) + 1e-12);
      (n.label == Label::af ? af_w : non_w) += w;
    }
    v.predicted = af_w > non_w ? Label::af : Label::non_af;
  } else {
    v.predicted = 2 * v.af_votes > cfg.k ? Label::af : Label::non_af;
  }
  return v;
}

NeighborVerdict classify(const PatientDatabase& db, const QueryPatient& q,
                         const SelectionConfig& cfg) {
  cfg.validate(static_cast<int>(db.entries.size()));
  const auto dists = pairwise_distances(db, q);
  std::vector<NeighborScore> scores;
  switch (cfg.metric) {
    case Metric::overall_min: scores = score_overall_min(db, dists); break;
    case Metric::average_min:
    case Metric::weighted_average_min: scores = score_average_min(db, dists); break;
    case Metric::pct_min: scores = score_pct_min(db, dists, cfg.radius); break;
  }
  return verdict_from_scores(std::move(scores), cfg);
}

Label segment_majority_aggregate(const std::vector<Label>& segment_predictions) {
  if (segment_predictions.empty())
    throw std::invalid_argument("segment_majority_aggregate: empty prediction list");
  int af = 0;
  for (Label l : segment_predictions)
    if (l == Label::af) ++af;
  return 2 * af > static_cast<int>(segment_predictions.size()) ? Label::af : Label::non_af;
}

}  // namespace simsig
