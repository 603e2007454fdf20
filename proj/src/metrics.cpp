#include "simsig/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace simsig {

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  if (cm.tp < 0 || cm.tn < 0 || cm.fp < 0 || cm.fn < 0)
    throw std::invalid_argument("compute_metrics: negative count");
  if (cm.total() == 0) throw std::invalid_argument("compute_metrics: all-zero confusion matrix");

  MetricsReport m;
  if (cm.tp + cm.fn > 0)
    m.sensitivity = static_cast<double>(cm.tp) / (cm.tp + cm.fn);
  else
    m.sensitivity_undefined = true;
  if (cm.tn + cm.fp > 0)
    m.specificity = static_cast<double>(cm.tn) / (cm.tn + cm.fp);
  else
    m.specificity_undefined = true;
  if (cm.tp + cm.fp > 0)
    m.precision = static_cast<double>(cm.tp) / (cm.tp + cm.fp);
  else
    m.precision_undefined = true;
  if (m.precision + m.sensitivity > 0 && !m.precision_undefined && !m.sensitivity_undefined)
    m.f1 = 2.0 * m.precision * m.sensitivity / (m.precision + m.sensitivity);
  else
    m.f1_undefined = true;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / cm.total();
  return m;
}

std::string format_metrics(const MetricsReport& m) {
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "sensitivity %.3f%s  specificity %.3f%s  precision %.3f%s  f1 %.3f%s  "
                "accuracy %.3f",
                m.sensitivity, m.sensitivity_undefined ? "*" : "", m.specificity,
                m.specificity_undefined ? "*" : "", m.precision,
                m.precision_undefined ? "*" : "", m.f1, m.f1_undefined ? "*" : "", m.accuracy);
  std::string out = buf;
  if (m.any_undefined()) out += "  (* = 0/0, reported as 0)";
  return out;
}

namespace {

void guard_disjoint(const PatientDatabase& db, const Dataset& eval_ds) {
  std::set<std::string> db_ids;
  for (const auto& e : db.entries) db_ids.insert(e.patient_id);
  for (const auto& p : eval_ds.patients)
    if (db_ids.count(p.patient_id))
      throw std::runtime_error("evaluate: patient '" + p.patient_id +
                               "' is in both the database and the eval split");
}

void tally(ConfusionMatrix& cm, Label truth, Label predicted) {
  if (truth == Label::af)
    (predicted == Label::af ? cm.tp : cm.fn)++;
  else
    (predicted == Label::af ? cm.fp : cm.tn)++;
}

}  // namespace

EvalResult evaluate_split(const PatientDatabase& db, const Model& model, const Dataset& eval_ds,
                          const SelectionConfig& cfg) {
  validate_dataset(eval_ds);
  guard_disjoint(db, eval_ds);
  cfg.validate(static_cast<int>(db.entries.size()));

  EvalResult result;
  for (const auto& p : eval_ds.patients) {
    const auto q = embed_query(model, p);
    PatientVerdict pv;
    pv.patient_id = p.patient_id;
    pv.true_label = p.label;
    pv.verdict = classify(db, q, cfg);
    tally(result.cm, pv.true_label, pv.verdict.predicted);
    result.verdicts.push_back(std::move(pv));
  }
  result.metrics = compute_metrics(result.cm);
  return result;
}

std::vector<SweepRow> sweep(const PatientDatabase& db, const Model& model,
                            const Dataset& eval_ds, const SweepConfig& cfg) {
  if (cfg.ks.empty() || cfg.metrics.empty())
    throw std::invalid_argument("sweep: k list and metric list must be non-empty");
  validate_dataset(eval_ds);
  guard_disjoint(db, eval_ds);

  std::vector<int> ks;
  for (int k : cfg.ks)
    if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);

  // All verdicts derive from one distance computation per eval patient.
  std::vector<PairwiseDistances> dists;
  std::vector<Label> truths;
  for (const auto& p : eval_ds.patients) {
    const auto q = embed_query(model, p);
    dists.push_back(pairwise_distances(db, q));
    truths.push_back(p.label);
  }

  std::vector<SweepRow> rows;
  for (Metric metric : cfg.metrics) {
    std::vector<std::vector<NeighborScore>> scores;
    scores.reserve(dists.size());
    for (const auto& d : dists) {
      switch (metric) {
        case Metric::overall_min: scores.push_back(score_overall_min(db, d)); break;
        case Metric::average_min:
        case Metric::weighted_average_min: scores.push_back(score_average_min(db, d)); break;
        case Metric::pct_min: scores.push_back(score_pct_min(db, d, cfg.radius)); break;
      }
    }
    for (int k : ks) {
      SelectionConfig sel;
      sel.metric = metric;
      sel.k = k;
      sel.radius = cfg.radius;
      SweepRow row;
      row.metric = metric;
      row.k = k;
      for (size_t i = 0; i < scores.size(); ++i) {
        const auto verdict = verdict_from_scores(scores[i], sel);
        tally(row.cm, truths[i], verdict.predicted);
      }
      row.report = compute_metrics(row.cm);
      rows.push_back(row);
    }
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "metric,k,tp,tn,fp,fn,sensitivity,specificity,precision,f1,accuracy\n";
  out.precision(17);
  for (const auto& r : rows)
    out << to_string(r.metric) << "," << r.k << "," << r.cm.tp << "," << r.cm.tn << ","
        << r.cm.fp << "," << r.cm.fn << "," << r.report.sensitivity << ","
        << r.report.specificity << "," << r.report.precision << "," << r.report.f1 << ","
        << r.report.accuracy << "\n";
}

std::string format_sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-22s %4s %6s %6s %6s %6s %6s\n", "metric", "k", "sens",
                "spec", "prec", "f1", "acc");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-22s %4d %6.3f %6.3f %6.3f %6.3f %6.3f\n",
                  to_string(r.metric).c_str(), r.k, r.report.sensitivity, r.report.specificity,
                  r.report.precision, r.report.f1, r.report.accuracy);
    out << line;
  }
  return out.str();
}

void write_eval_csv(const EvalResult& result, const SelectionConfig& cfg,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "metric,k,tp,tn,fp,fn,sensitivity,specificity,precision,f1,accuracy\n";
  out.precision(17);
  out << to_string(cfg.metric) << "," << cfg.k << "," << result.cm.tp << "," << result.cm.tn
      << "," << result.cm.fp << "," << result.cm.fn << "," << result.metrics.sensitivity << ","
      << result.metrics.specificity << "," << result.metrics.precision << ","
      << result.metrics.f1 << "," << result.metrics.accuracy << "\n";
}

}  // namespace simsig
