#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "simsig/metrics.hpp"
#include "simsig/rng.hpp"

using namespace simsig;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("simsig_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Model tiny_model(uint64_t seed = 1) {
  EncoderConfig enc;
  enc.architecture = Architecture::small_cnn;
  enc.input_length = 64;
  enc.embedding_dim = 24;
  return Model(enc, ProjectionConfig{16, 8}, seed);
}

Dataset corpus(int af, int nonaf, int segs, uint64_t seed, const std::string& prefix) {
  SyntheticConfig cfg;
  cfg.n_af_patients = af;
  cfg.n_nonaf_patients = nonaf;
  cfg.segments_per_patient = segs;
  cfg.segment_length = 64;
  cfg.rng_seed = seed;
  auto ds = synthesize_dataset(cfg);
  for (auto& p : ds.patients) {
    p.patient_id = prefix + p.patient_id;
    for (auto& s : p.segments) s.patient_id = p.patient_id;
  }
  return ds;
}

}  // namespace

TEST_CASE("compute_metrics reproduces the published comparison row to 3 decimals") {
  // 14 AF / 9 Non-AF test individuals; counts recovered from the reported rates
  const ConfusionMatrix cm{13, 6, 3, 1};
  const auto m = compute_metrics(cm);
  CHECK(std::abs(m.sensitivity - 0.929) <= 5e-4 + 1e-12);
  CHECK(std::abs(m.specificity - 0.667) <= 5e-4 + 1e-12);
  CHECK(std::abs(m.precision - 0.813) <= 5e-4 + 1e-12);
  CHECK(std::abs(m.f1 - 0.867) <= 5e-4 + 1e-12);
  CHECK(std::abs(m.accuracy - 0.826) <= 5e-4 + 1e-12);
  CHECK(!m.any_undefined());
}

TEST_CASE("perfect classifier scores 1.0 everywhere") {
  const auto m = compute_metrics(ConfusionMatrix{10, 0, 0, 0});
  CHECK(m.sensitivity == 1.0);
  CHECK(m.precision == 1.0);
  CHECK(m.f1 == 1.0);
  CHECK(m.accuracy == 1.0);
  CHECK(m.specificity_undefined);  // no negatives to be specific about
  CHECK(m.specificity == 0.0);
}

TEST_CASE("all-negative classifier: sensitivity 0, specificity 1, accuracy 0.5") {
  const auto m = compute_metrics(ConfusionMatrix{0, 5, 0, 5});
  CHECK(m.sensitivity == 0.0);
  CHECK(!m.sensitivity_undefined);
  CHECK(m.specificity == 1.0);
  CHECK(m.accuracy == 0.5);
  CHECK(m.precision == 0.0);
  CHECK(m.precision_undefined);  // TP + FP == 0
  CHECK(m.f1_undefined);
}

TEST_CASE("all-zero confusion matrix is an error") {
  CHECK_THROWS(compute_metrics(ConfusionMatrix{}));
  CHECK_THROWS(compute_metrics(ConfusionMatrix{-1, 1, 0, 0}));
}

TEST_CASE("accuracy and f1 identities hold on random confusion matrices") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    ConfusionMatrix cm{static_cast<int>(rng.below(20)), static_cast<int>(rng.below(20)),
                       static_cast<int>(rng.below(20)), static_cast<int>(rng.below(20))};
    if (cm.total() == 0) continue;
    const auto m = compute_metrics(cm);
    CHECK(m.accuracy ==
          doctest::Approx(static_cast<double>(cm.tp + cm.tn) / cm.total()).epsilon(1e-12));
    if (!m.f1_undefined) {
      const double harm = 2.0 * m.precision * m.sensitivity / (m.precision + m.sensitivity);
      CHECK(std::abs(m.f1 - harm) <= 5e-4);
    }
    CHECK(m.sensitivity >= 0.0);
    CHECK(m.sensitivity <= 1.0);
    CHECK(m.accuracy <= 1.0);
  }
}

TEST_CASE("format_metrics renders 3 decimals and flags undefined ratios") {
  const auto s = format_metrics(compute_metrics(ConfusionMatrix{13, 6, 3, 1}));
  CHECK(s.find("0.929") != std::string::npos);
  CHECK(s.find("0.826") != std::string::npos);
  const auto u = format_metrics(compute_metrics(ConfusionMatrix{0, 5, 0, 5}));
  CHECK(u.find("*") != std::string::npos);
}

TEST_CASE("evaluate_split: verdict count, confusion totals, split-leak guard") {
  const auto model = tiny_model();
  const auto train_ds = corpus(4, 4, 3, 100, "tr_");
  const auto eval_ds = corpus(3, 2, 3, 200, "ev_");
  const auto db = build_database(model, "f", train_ds);

  SelectionConfig cfg;
  cfg.metric = Metric::average_min;
  cfg.k = 3;
  const auto result = evaluate_split(db, model, eval_ds, cfg);
  CHECK(result.verdicts.size() == eval_ds.patients.size());
  CHECK(result.cm.total() == static_cast<int>(eval_ds.patients.size()));
  for (const auto& v : result.verdicts) CHECK(v.verdict.neighbors.size() == 3);

  // a patient present on both sides trips the guard
  auto leaky = eval_ds;
  leaky.patients[0].patient_id = train_ds.patients[0].patient_id;
  for (auto& s : leaky.patients[0].segments) s.patient_id = leaky.patients[0].patient_id;
  CHECK_THROWS_WITH(evaluate_split(db, model, leaky, cfg), doctest::Contains("both"));
}

TEST_CASE("sweep: cardinality, dedupe, and agreement with evaluate_split") {
  const auto model = tiny_model(3);
  const auto train_ds = corpus(4, 4, 3, 101, "tr_");
  const auto eval_ds = corpus(2, 3, 3, 202, "ev_");
  const auto db = build_database(model, "f", train_ds);

  SweepConfig sc;
  sc.ks = {3, 5, 7, 5, 3};  // dupes collapse
  sc.metrics = {Metric::overall_min, Metric::average_min, Metric::pct_min};
  sc.radius = 0.3;
  const auto rows = sweep(db, model, eval_ds, sc);
  CHECK(rows.size() == 9);

  for (const auto& row : rows) {
    SelectionConfig cfg;
    cfg.metric = row.metric;
    cfg.k = row.k;
    cfg.radius = sc.radius;
    const auto single = evaluate_split(db, model, eval_ds, cfg);
    CHECK(single.cm.tp == row.cm.tp);
    CHECK(single.cm.tn == row.cm.tn);
    CHECK(single.cm.fp == row.cm.fp);
    CHECK(single.cm.fn == row.cm.fn);
  }

  const auto dir = temp_dir("sweep_out");
  write_sweep_csv(rows, dir / "sweep.csv");
  std::ifstream in(dir / "sweep.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "metric,k,tp,tn,fp,fn,sensitivity,specificity,precision,f1,accuracy");
  int count = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++count;
  CHECK(count == 9);

  const auto table = format_sweep_table(rows);
  CHECK(table.find("overall_min") != std::string::npos);
  CHECK(table.find("pct_min") != std::string::npos);

  SweepConfig bad;
  bad.ks = {};
  CHECK_THROWS(sweep(db, model, eval_ds, bad));
}
