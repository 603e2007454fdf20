// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Every tolerance is pinned in code next to the check it gates.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "simsig/kernels.hpp"
#include "simsig/loss.hpp"
#include "simsig/metrics.hpp"
#include "simsig/neighbors.hpp"
#include "simsig/patient_db.hpp"
#include "simsig/train.hpp"
#include "support/loss_oracle.hpp"
#include "support/naive_neighbors.hpp"

using namespace simsig;

namespace {

constexpr double kLog2 = 0.6931471805599453;

struct Criterion {
  int checks = 0;
  std::vector<std::string> failures;
  std::string note;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok) failures.push_back(what);
  }
};

int g_failed = 0;

void run(int number, const std::string& name, const std::function<void(Criterion&)>& body) {
  Criterion c;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (c.failures.empty()) {
    std::printf("[PASS] criterion %d: %s (%d checks%s%s, %.1f s)\n", number, name.c_str(),
                c.checks, c.note.empty() ? "" : ", ", c.note.c_str(), secs);
  } else {
    ++g_failed;
    std::printf("[FAIL] criterion %d: %s (%zu of %d checks failed, %.1f s)\n", number,
                name.c_str(), c.failures.size(), c.checks, secs);
    for (size_t i = 0; i < c.failures.size() && i < 5; ++i)
      std::printf("       %s\n", c.failures[i].c_str());
  }
  std::fflush(stdout);
}

LossBatch random_pair_batch(int k, int dim, double tau, Rng& rng) {
  LossBatch b;
  b.z = Mat(k, dim);
  b.tau = tau;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < dim; ++j) b.z.at(i, j) = rng.normal();
    b.ids.push_back("ind" + std::to_string(i / 2));
  }
  return b;
}

Pairing consecutive_pairing(int k) {
  Pairing p;
  for (int i = 0; i < k; i += 2) p.emplace_back(i, i + 1);
  return p;
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-6);
}

double grad_relative_error(const Mat& analytic, const Mat& fd) {
  double num = 0, da = 0, df = 0;
  for (size_t i = 0; i < analytic.data.size(); ++i) {
    const double d = analytic.data[i] - fd.data[i];
    num += d * d;
    da += analytic.data[i] * analytic.data[i];
    df += fd.data[i] * fd.data[i];
  }
  return std::sqrt(num) / std::max({std::sqrt(da), std::sqrt(df), 1e-300});
}

template <class LossFn>
Mat finite_difference_grad(LossBatch batch, LossFn&& fn, double h = 1e-4) {
  Mat g(batch.z.rows, batch.z.cols);
  for (int i = 0; i < batch.z.rows; ++i)
    for (int j = 0; j < batch.z.cols; ++j) {
      const double orig = batch.z.at(i, j);
      batch.z.at(i, j) = orig + h;
      const double up = fn(batch);
      batch.z.at(i, j) = orig - h;
      const double dn = fn(batch);
      batch.z.at(i, j) = orig;
      g.at(i, j) = (up - dn) / (2.0 * h);
    }
  return g;
}

PatientDatabase random_db(int patients, int max_segs, int dim, Rng& rng) {
  PatientDatabase db;
  db.embedding_dim = dim;
  db.encoder_fingerprint = "test";
  for (int p = 0; p < patients; ++p) {
    PatientEmbeddingSet e;
    e.patient_id = "p" + std::to_string(p);
    e.label = rng.below(2) ? Label::af : Label::non_af;
    e.embeddings = MatF(1 + static_cast<int>(rng.below(max_segs)), dim);
    for (auto& v : e.embeddings.data) v = static_cast<float>(rng.normal());
    db.entries.push_back(std::move(e));
  }
  return db;
}

QueryPatient random_query(int max_segs, int dim, Rng& rng) {
  QueryPatient q;
  q.patient_id = "q";
  q.embeddings = MatF(1 + static_cast<int>(rng.below(max_segs)), dim);
  for (auto& v : q.embeddings.data) v = static_cast<float>(rng.normal());
  return q;
}

Dataset synth_corpus(int af, int nonaf, int segs, int l, uint64_t seed,
                     const std::string& prefix) {
  SyntheticConfig cfg;
  cfg.n_af_patients = af;
  cfg.n_nonaf_patients = nonaf;
  cfg.segments_per_patient = segs;
  cfg.segment_length = l;
  cfg.af_interval_jitter = 0.25;
  cfg.nsr_interval_jitter = 0.03;
  cfg.rng_seed = seed;
  auto ds = synthesize_dataset(cfg);
  for (auto& p : ds.patients) {
    p.patient_id = prefix + p.patient_id;
    for (auto& s : p.segments) s.patient_id = p.patient_id;
  }
  return ds;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::filesystem::path work_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "simsig_acceptance";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------

void criterion1_loss_oracles(Criterion& c) {
  Rng rng(1001);
  const double taus[3] = {0.1, 0.5, 1.0};
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 * rng.uniform_int(2, 16);  // 4..32
    const int dim = rng.uniform_int(2, 16);
    const double tau = taus[rng.below(3)];
    const auto batch = random_pair_batch(k, dim, tau, rng);
    const auto pairing = consecutive_pairing(k);

    const double got_x = nt_xent_loss(batch, pairing).total;
    const double want_x = oracle::nt_xent<double>(batch.z, pairing, tau);
    worst = std::max(worst, rel_err(got_x, want_x));
    c.expect(rel_err(got_x, want_x) <= 1e-6, "nt_xent trial " + std::to_string(trial));

    const double got_m = nt_xent_multi_loss(batch).total;
    const double want_m = oracle::nt_xent_multi<double>(batch.z, batch.ids, tau);
    worst = std::max(worst, rel_err(got_m, want_m));
    c.expect(rel_err(got_m, want_m) <= 1e-6, "nt_xent_multi trial " + std::to_string(trial));
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "max rel err %.2e", worst);
  c.note = buf;
}

void criterion2_gradients(Criterion& c) {
  Rng rng(2002);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 * rng.uniform_int(2, 4);  // 4..8
    const int dim = rng.uniform_int(2, 6);
    const auto batch = random_pair_batch(k, dim, 0.5, rng);
    const auto pairing = consecutive_pairing(k);

    const auto vx = nt_xent_loss(batch, pairing, true);
    const auto fdx = finite_difference_grad(
        batch, [&](const LossBatch& b) { return nt_xent_loss(b, pairing).total; });
    const double ex = grad_relative_error(vx.grad, fdx);
    worst = std::max(worst, ex);
    c.expect(ex <= 1e-4, "nt_xent gradient trial " + std::to_string(trial));

    const auto vm = nt_xent_multi_loss(batch, true);
    const auto fdm = finite_difference_grad(
        batch, [&](const LossBatch& b) { return nt_xent_multi_loss(b).total; });
    const double em = grad_relative_error(vm.grad, fdm);
    worst = std::max(worst, em);
    c.expect(em <= 1e-4, "nt_xent_multi gradient trial " + std::to_string(trial));
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "max rel err %.2e", worst);
  c.note = buf;
}

void criterion3_closed_forms(Criterion& c) {
  LossBatch equal;
  equal.z = Mat(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) equal.z.at(i, j) = 0.4;
  equal.ids = {"a", "a", "b", "b"};
  equal.tau = 0.5;
  const auto pairing = consecutive_pairing(4);
  c.expect(std::abs(nt_xent_loss(equal, pairing).total - 4 * kLog2) <= 1e-9,
           "nt_xent all-equal batch != 4 log 2");
  c.expect(std::abs(nt_xent_multi_loss(equal).total - 4 * kLog2) <= 1e-9,
           "nt_xent_multi all-equal batch != 4 log 2");

  LossBatch ortho;
  ortho.z = Mat(4, 2);
  ortho.z.at(0, 0) = ortho.z.at(1, 0) = 1.0;
  ortho.z.at(2, 1) = ortho.z.at(3, 1) = 1.0;
  ortho.ids = {"a", "a", "b", "b"};
  ortho.tau = 0.5;
  c.expect(std::abs(nt_xent_multi_loss(ortho).total - 4 * (kLog2 - 2.0)) <= 1e-9,
           "nt_xent_multi orthogonal pairs != 4 (log 2 - 2)");
}

void criterion4_neighbor_oracle(Criterion& c) {
  Rng rng(4004);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 6 + static_cast<int>(rng.below(5));  // N <= 10
    const int dim = 2 + static_cast<int>(rng.below(7));
    const auto db = random_db(n, 6, dim, rng);
    const auto q = random_query(6, dim, rng);
    for (Metric metric : {Metric::overall_min, Metric::average_min,
                          Metric::weighted_average_min, Metric::pct_min}) {
      for (int k : {1, 3, 5}) {
        SelectionConfig cfg;
        cfg.metric = metric;
        cfg.k = k;
        cfg.radius = 0.5;
        const auto got = classify(db, q, cfg).predicted;
        const auto want = naive::classify(db, q, metric, k, 0.5);
        c.expect(got == want, "trial " + std::to_string(trial) + " metric " + to_string(metric) +
                                  " k=" + std::to_string(k));
      }
    }
  }
}

void criterion5_metrics_row(Criterion& c) {
  const auto m = compute_metrics(ConfusionMatrix{13, 6, 3, 1});
  const auto close3 = [](double got, double want) { return std::abs(got - want) <= 5e-4 + 1e-12; };
  c.expect(close3(m.sensitivity, 0.929), "sensitivity");
  c.expect(close3(m.specificity, 0.667), "specificity");
  c.expect(close3(m.precision, 0.813), "precision");
  c.expect(close3(m.f1, 0.867), "f1");
  c.expect(close3(m.accuracy, 0.826), "accuracy");
}

void criterion6_end_to_end(Criterion& c) {
  const auto dir = work_dir() / "train";
  const auto train_ds = synth_corpus(10, 10, 20, 256, 61001, "tr_");
  const auto test_ds = synth_corpus(5, 5, 20, 256, 61002, "te_");

  EncoderConfig enc;
  enc.architecture = Architecture::small_cnn;
  enc.input_length = 256;
  enc.embedding_dim = 1024;
  ProjectionConfig proj;  // 1024 hidden, 128 out

  TrainConfig cfg;
  cfg.loss = LossName::nt_xent_multi;
  cfg.batch_size = 64;
  cfg.epochs = 15;  // within the <= 20 budget
  cfg.learning_rate = 1e-3;
  cfg.tau = 0.5;
  cfg.seed = 606;
  cfg.checkpoint_dir = dir;

  const auto result = train(train_ds, enc, proj, cfg);
  c.expect(result.epoch_mean_loss.back() < result.epoch_mean_loss.front(),
           "mean loss did not decrease over training");

  const Model model = Model::load_checkpoint(result.final_checkpoint);
  const auto db =
      build_database(model, file_fingerprint(result.final_checkpoint), train_ds);

  SelectionConfig sel;
  sel.metric = Metric::average_min;
  sel.k = 7;
  const auto eval = evaluate_split(db, model, test_ds, sel);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "f1 %.3f (tp %d fn %d fp %d tn %d)", eval.metrics.f1,
                eval.cm.tp, eval.cm.fn, eval.cm.fp, eval.cm.tn);
  c.note = buf;
  c.expect(eval.metrics.f1 >= 0.9, std::string("test F1 below 0.9: ") + buf);
}

void criterion7_invariances(Criterion& c) {
  Rng rng(7007);

  // losses: per-row power-of-two scaling is exactly invisible
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 * rng.uniform_int(2, 8);
    const int dim = rng.uniform_int(2, 10);
    auto b = random_pair_batch(k, dim, 0.5, rng);
    auto scaled = b;
    for (int i = 0; i < k; ++i) {
      const double s = std::ldexp(1.0, static_cast<int>(rng.below(7)) - 3);
      for (int j = 0; j < dim; ++j) scaled.z.at(i, j) *= s;
    }
    const auto pairing = consecutive_pairing(k);
    c.expect(nt_xent_loss(b, pairing).total == nt_xent_loss(scaled, pairing).total,
             "nt_xent scale invariance");
    c.expect(nt_xent_multi_loss(b).total == nt_xent_multi_loss(scaled).total,
             "nt_xent_multi scale invariance");

    // permutation equivariance
    std::vector<int> perm(k), inv(k);
    for (int i = 0; i < k; ++i) perm[i] = i;
    rng.shuffle(perm);
    for (int i = 0; i < k; ++i) inv[perm[i]] = i;
    LossBatch pb;
    pb.z = Mat(k, dim);
    pb.tau = b.tau;
    pb.ids.resize(k);
    for (int i = 0; i < k; ++i) {
      pb.ids[i] = b.ids[perm[i]];
      for (int j = 0; j < dim; ++j) pb.z.at(i, j) = b.z.at(perm[i], j);
    }
    Pairing mapped;
    for (auto [x, y] : pairing) mapped.emplace_back(inv[x], inv[y]);
    c.expect(rel_err(nt_xent_loss(pb, mapped).total, nt_xent_loss(b, pairing).total) <= 1e-12,
             "nt_xent permutation equivariance");
    c.expect(rel_err(nt_xent_multi_loss(pb).total, nt_xent_multi_loss(b).total) <= 1e-12,
             "nt_xent_multi permutation equivariance");
  }

  // verdicts: global power-of-two scaling changes nothing, bit for bit
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 2 + static_cast<int>(rng.below(7));
    auto db = random_db(8, 5, dim, rng);
    const auto q = random_query(5, dim, rng);
    auto db2 = db;
    auto q2 = q;
    const float s = std::ldexp(1.0f, static_cast<int>(rng.below(5)) - 2);
    for (auto& e : db2.entries)
      for (auto& v : e.embeddings.data) v *= s;
    for (auto& v : q2.embeddings.data) v *= s;
    for (Metric metric : {Metric::overall_min, Metric::average_min,
                          Metric::weighted_average_min, Metric::pct_min}) {
      SelectionConfig cfg;
      cfg.metric = metric;
      cfg.k = 3;
      cfg.radius = 0.4;
      const auto a = classify(db, q, cfg);
      const auto b = classify(db2, q2, cfg);
      bool same = a.predicted == b.predicted;
      for (int i = 0; i < cfg.k; ++i)
        same = same && a.neighbors[i].patient_id == b.neighbors[i].patient_id &&
               a.neighbors[i].score == b.neighbors[i].score;
      c.expect(same, "verdict scale invariance, metric " + to_string(metric));
    }

    // min <= mean monotonicity
    const auto dists = pairwise_distances(db, q);
    const auto mins = score_overall_min(db, dists);
    const auto avgs = score_average_min(db, dists);
    for (size_t i = 0; i < mins.size(); ++i)
      c.expect(mins[i].score <= avgs[i].score, "overall_min exceeded average_min");
  }
}

void criterion8_persistence(Criterion& c) {
  const auto dir = work_dir() / "persist";
  std::filesystem::create_directories(dir);
  Rng rng(8008);

  // database round-trip
  auto db = random_db(6, 5, 32, rng);
  const auto db1 = dir / "a.db";
  const auto db2 = dir / "b.db";
  save_database(db, db1);
  const auto loaded = load_database(db1);
  save_database(loaded, db2);
  c.expect(file_bytes(db1) == file_bytes(db2), "database save->load->save changed bytes");
  bool equal = loaded.entries.size() == db.entries.size();
  for (size_t i = 0; equal && i < db.entries.size(); ++i)
    equal = loaded.entries[i].patient_id == db.entries[i].patient_id &&
            loaded.entries[i].label == db.entries[i].label &&
            loaded.entries[i].embeddings.data == db.entries[i].embeddings.data;
  c.expect(equal, "database round-trip lost content");

  // checkpoint round-trip
  EncoderConfig enc;
  enc.architecture = Architecture::small_cnn;
  enc.input_length = 64;
  enc.embedding_dim = 32;
  Model model(enc, ProjectionConfig{24, 12}, 88);
  OptimizerState opt;
  opt.step = 7;
  opt.m.assign(model.param_count(), 0.25f);
  opt.v.assign(model.param_count(), 0.75f);
  const auto ck1 = dir / "a.ckpt";
  const auto ck2 = dir / "b.ckpt";
  model.save_checkpoint(ck1, CheckpointMeta{88, 2, "nt_xent", 0.5}, &opt);
  CheckpointMeta meta;
  OptimizerState opt2;
  Model rt = Model::load_checkpoint(ck1, &meta, &opt2);
  rt.save_checkpoint(ck2, meta, &opt2);
  c.expect(file_bytes(ck1) == file_bytes(ck2), "checkpoint save->load->save changed bytes");

  // corruption: truncated and garbage files raise structured errors
  const auto db_trunc = dir / "trunc.db";
  save_database(db, db_trunc);
  std::filesystem::resize_file(db_trunc, std::filesystem::file_size(db_trunc) - 8);
  bool threw = false;
  try {
    load_database(db_trunc);
  } catch (const std::exception&) {
    threw = true;
  }
  c.expect(threw, "truncated database loaded without error");

  const auto ck_trunc = dir / "trunc.ckpt";
  model.save_checkpoint(ck_trunc, CheckpointMeta{});
  std::filesystem::resize_file(ck_trunc, std::filesystem::file_size(ck_trunc) / 3);
  threw = false;
  try {
    Model::load_checkpoint(ck_trunc);
  } catch (const std::exception&) {
    threw = true;
  }
  c.expect(threw, "truncated checkpoint loaded without error");

  std::ofstream(dir / "junk.db", std::ios::binary) << "junk";
  threw = false;
  try {
    load_database(dir / "junk.db");
  } catch (const std::exception&) {
    threw = true;
  }
  c.expect(threw, "garbage database loaded without error");
}

}  // namespace

int main() {
  run(1, "loss-oracle equivalence (200 random batches)", criterion1_loss_oracles);
  run(2, "analytic gradients vs central differences", criterion2_gradients);
  run(3, "closed-form loss values", criterion3_closed_forms);
  run(4, "neighbor selection vs naive implementation", criterion4_neighbor_oracle);
  run(5, "metric formulas on the published comparison row", criterion5_metrics_row);
  run(6, "end-to-end synthetic training reaches F1 >= 0.9", criterion6_end_to_end);
  run(7, "scale/permutation/monotonicity invariances", criterion7_invariances);
  run(8, "persistence round-trips and corruption handling", criterion8_persistence);

  if (g_failed == 0) {
    std::printf("all acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d criteria failed\n", g_failed);
  return 1;
}
