#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "simsig/kernels.hpp"
#include "simsig/metrics.hpp"
#include "simsig/neighbors.hpp"
#include "simsig/patient_db.hpp"
#include "simsig/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace simsig;

namespace {

struct SynthOptions {
  fs::path out = "data";
  uint64_t seed = 1;
  int l = 256;
  int segments = 20;
  int train_af = 10, train_nonaf = 10;
  int val_af = 0, val_nonaf = 0;
  int test_af = 5, test_nonaf = 5;
  double nsr_jitter = 0.03, af_jitter = 0.25, noise = 0.05, heart_rate = 1.25;
};

Dataset synth_split(const SynthOptions& o, Split split, int af, int nonaf, uint64_t sub_seed) {
  SyntheticConfig cfg;
  cfg.n_af_patients = af;
  cfg.n_nonaf_patients = nonaf;
  cfg.segments_per_patient = o.segments;
  cfg.segment_length = o.l;
  cfg.base_heart_rate_hz = o.heart_rate;
  cfg.nsr_interval_jitter = o.nsr_jitter;
  cfg.af_interval_jitter = o.af_jitter;
  cfg.noise_std = o.noise;
  cfg.rng_seed = sub_seed;
  auto ds = synthesize_dataset(cfg, split);
  const auto prefix = to_string(split) + "_";
  for (auto& p : ds.patients) {
    p.patient_id = prefix + p.patient_id;
    for (auto& s : p.segments) s.patient_id = p.patient_id;
  }
  return ds;
}

int run_synth(const SynthOptions& o) {
  std::vector<Dataset> splits;
  if (o.train_af + o.train_nonaf > 0)
    splits.push_back(synth_split(o, Split::train, o.train_af, o.train_nonaf, Rng::mix(o.seed, 0)));
  if (o.val_af + o.val_nonaf > 0)
    splits.push_back(
        synth_split(o, Split::validation, o.val_af, o.val_nonaf, Rng::mix(o.seed, 1)));
  if (o.test_af + o.test_nonaf > 0)
    splits.push_back(synth_split(o, Split::test, o.test_af, o.test_nonaf, Rng::mix(o.seed, 2)));
  if (splits.empty()) throw std::runtime_error("synth: every split is empty");

  std::vector<const Dataset*> ptrs;
  for (const auto& ds : splits) ptrs.push_back(&ds);
  check_split_disjoint(ptrs);

  for (const auto& ds : splits) {
    const auto manifest = save_dataset(ds, o.out, to_string(ds.split));
    std::cout << to_string(ds.split) << ": " << ds.patients.size() << " patients, "
              << ds.total_segments() << " segments -> " << manifest.string() << "\n";
  }
  return 0;
}

MatF read_raw_segments(const fs::path& path, int l) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open segments file '" + path.string() + "'");
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<uint64_t>(in.tellg());
  const uint64_t row_bytes = static_cast<uint64_t>(l) * sizeof(float);
  if (bytes == 0 || bytes % row_bytes != 0)
    throw std::runtime_error("segments file '" + path.string() + "' is " + std::to_string(bytes) +
                             " bytes, not a multiple of " + std::to_string(row_bytes) +
                             " (l = " + std::to_string(l) + ")");
  in.seekg(0, std::ios::beg);
  MatF m(static_cast<int>(bytes / row_bytes), l);
  in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(bytes));
  return m;
}

json verdict_to_json(const NeighborVerdict& v) {
  json out;
  out["label"] = to_string(v.predicted);
  out["neighbors"] = json::array();
  for (const auto& n : v.neighbors)
    out["neighbors"].push_back(
        {{"id", n.patient_id}, {"label", to_string(n.label)}, {"score", n.score}});
  out["tally"] = {{"af", v.af_votes}, {"nonaf", v.nonaf_votes}};
  return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

std::vector<Metric> parse_metric_list(const std::string& csv) {
  std::vector<Metric> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(metric_from_string(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simsig: contrastive patient-similarity pipeline for physiological signals"};
  app.require_subcommand(1);
  bool serial = false;
  app.add_flag("--serial", serial, "run compute kernels on the serial backend");

  // ---- synth ----
  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "generate a synthetic PPG-like corpus");
  synth->add_option("--out", so.out, "output directory");
  synth->add_option("--seed", so.seed, "master seed");
  synth->add_option("--l", so.l, "segment length in samples");
  synth->add_option("--segments", so.segments, "segments per patient");
  synth->add_option("--train-af", so.train_af);
  synth->add_option("--train-nonaf", so.train_nonaf);
  synth->add_option("--val-af", so.val_af);
  synth->add_option("--val-nonaf", so.val_nonaf);
  synth->add_option("--test-af", so.test_af);
  synth->add_option("--test-nonaf", so.test_nonaf);
  synth->add_option("--nsr-jitter", so.nsr_jitter, "NSR inter-pulse interval CV");
  synth->add_option("--af-jitter", so.af_jitter, "AF inter-pulse interval CV");
  synth->add_option("--noise", so.noise, "additive noise std");
  synth->add_option("--heart-rate", so.heart_rate, "base heart rate in Hz");

  // ---- train ----
  fs::path tr_manifest, tr_out = "checkpoints", tr_resume;
  std::string tr_loss = "nt-xent-multi", tr_encoder = "small-cnn";
  TrainConfig tc;
  EncoderConfig tr_enc;
  ProjectionConfig tr_proj;
  bool tr_no_clip = false;
  auto* train_cmd = app.add_subcommand("train", "train an encoder with a contrastive objective");
  train_cmd->add_option("--manifest", tr_manifest, "training manifest")->required();
  train_cmd->add_option("--loss", tr_loss, "nt-xent | nt-xent-multi");
  train_cmd->add_option("--batch-size", tc.batch_size);
  train_cmd->add_option("--epochs", tc.epochs);
  train_cmd->add_option("--lr", tc.learning_rate);
  train_cmd->add_option("--tau", tc.tau);
  train_cmd->add_option("--encoder", tr_encoder, "resnext50-1d | small-cnn");
  train_cmd->add_option("--seed", tc.seed);
  train_cmd->add_option("--out", tr_out, "checkpoint directory");
  train_cmd->add_option("--embedding-dim", tr_enc.embedding_dim);
  train_cmd->add_option("--hidden-dim", tr_proj.hidden_dim);
  train_cmd->add_option("--output-dim", tr_proj.output_dim);
  train_cmd->add_option("--resume", tr_resume, "checkpoint to continue from");
  train_cmd->add_flag("--no-clip", tr_no_clip, "disable gradient clipping");
  train_cmd->add_flag("--include-self", tc.multi_include_self,
                      "keep the literal self term in the multi-loss numerator");

  // ---- build-db ----
  fs::path db_ckpt, db_manifest, db_out;
  auto* build = app.add_subcommand("build-db", "embed a split into a patient database");
  build->add_option("--checkpoint", db_ckpt)->required();
  build->add_option("--manifest", db_manifest)->required();
  build->add_option("--out", db_out, "database file")->required();

  // ---- classify ----
  fs::path cl_db, cl_ckpt, cl_segments;
  std::string cl_metric = "average-min";
  SelectionConfig cl_cfg;
  auto* classify_cmd = app.add_subcommand("classify", "label one query individual");
  classify_cmd->add_option("--db", cl_db)->required();
  classify_cmd->add_option("--checkpoint", cl_ckpt)->required();
  classify_cmd->add_option("--segments", cl_segments, "raw float32 segment rows")->required();
  classify_cmd->add_option("--metric", cl_metric,
                           "overall-min | average-min | weighted-average-min | pct-min");
  classify_cmd->add_option("--k", cl_cfg.k);
  classify_cmd->add_option("--radius", cl_cfg.radius, "pct-min radius");

  // ---- evaluate ----
  fs::path ev_db, ev_ckpt, ev_manifest, ev_out, ev_verdicts;
  std::string ev_metric = "average-min";
  SelectionConfig ev_cfg;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score a whole eval split");
  evaluate_cmd->add_option("--db", ev_db)->required();
  evaluate_cmd->add_option("--checkpoint", ev_ckpt)->required();
  evaluate_cmd->add_option("--manifest", ev_manifest)->required();
  evaluate_cmd->add_option("--metric", ev_metric);
  evaluate_cmd->add_option("--k", ev_cfg.k);
  evaluate_cmd->add_option("--radius", ev_cfg.radius);
  evaluate_cmd->add_option("--out", ev_out, "metrics CSV");
  evaluate_cmd->add_option("--verdicts", ev_verdicts, "per-patient verdict CSV");

  // ---- sweep ----
  fs::path sw_db, sw_ckpt, sw_manifest, sw_out;
  std::string sw_ks = "3,5,7,9,11";
  std::string sw_metrics = "overall-min,average-min,pct-min";
  double sw_radius = 0.15;
  auto* sweep_cmd = app.add_subcommand("sweep", "evaluate a (metric, k) grid");
  sweep_cmd->add_option("--db", sw_db)->required();
  sweep_cmd->add_option("--checkpoint", sw_ckpt)->required();
  sweep_cmd->add_option("--manifest", sw_manifest)->required();
  sweep_cmd->add_option("--k", sw_ks, "comma-separated k values");
  sweep_cmd->add_option("--metrics", sw_metrics, "comma-separated metric names");
  sweep_cmd->add_option("--radius", sw_radius);
  sweep_cmd->add_option("--out", sw_out, "sweep CSV");

  // ---- metrics ----
  ConfusionMatrix mc;
  auto* metrics_cmd = app.add_subcommand("metrics", "evaluate the metric formulas directly");
  metrics_cmd->add_option("--tp", mc.tp)->required();
  metrics_cmd->add_option("--tn", mc.tn)->required();
  metrics_cmd->add_option("--fp", mc.fp)->required();
  metrics_cmd->add_option("--fn", mc.fn)->required();

  CLI11_PARSE(app, argc, argv);

  if (serial) kernels::set_backend(kernels::Backend::serial);

  try {
    if (*synth) return run_synth(so);

    if (*train_cmd) {
      tc.loss = loss_from_string(tr_loss);
      tc.checkpoint_dir = tr_out;
      if (tr_no_clip) tc.clip_norm = 0.0;
      tr_enc.architecture = architecture_from_string(tr_encoder);
      const auto ds = load_dataset(tr_manifest);
      tr_enc.input_length = ds.segment_length;
      const fs::path* resume = tr_resume.empty() ? nullptr : &tr_resume;
      const auto result = train(ds, tr_enc, tr_proj, tc, resume);
      std::cout << "final checkpoint: " << result.final_checkpoint.string() << "\n";
      for (size_t e = 0; e < result.epoch_mean_loss.size(); ++e)
        std::cout << "epoch " << (e + 1) << " mean loss " << result.epoch_mean_loss[e] << "\n";
      return 0;
    }

    if (*build) {
      const auto ds = load_dataset(db_manifest);
      const auto db = build_database(db_ckpt, ds);
      save_database(db, db_out);
      std::cout << "database: " << db.entries.size() << " patients, dim " << db.embedding_dim
                << " -> " << db_out.string() << "\n";
      return 0;
    }

    if (*classify_cmd) {
      const auto model = Model::load_checkpoint(cl_ckpt);
      const auto fp = file_fingerprint(cl_ckpt);
      const auto db = load_database(cl_db, &fp);
      auto raw = read_raw_segments(cl_segments, model.encoder_config().input_length);
      std::vector<SignalSegment> segments(raw.rows);
      for (int i = 0; i < raw.rows; ++i) {
        segments[i].patient_id = "query";
        segments[i].segment_index = i;
        segments[i].samples.assign(raw.row(i), raw.row(i) + raw.cols);
      }
      cl_cfg.metric = metric_from_string(cl_metric);
      const auto q = embed_query(model, "query", segments);
      const auto verdict = classify(db, q, cl_cfg);
      std::cout << verdict_to_json(verdict).dump(2) << "\n";
      return 0;
    }

    if (*evaluate_cmd) {
      const auto model = Model::load_checkpoint(ev_ckpt);
      const auto fp = file_fingerprint(ev_ckpt);
      const auto db = load_database(ev_db, &fp);
      const auto ds = load_dataset(ev_manifest);
      ev_cfg.metric = metric_from_string(ev_metric);
      const auto result = evaluate_split(db, model, ds, ev_cfg);
      std::cout << to_string(ev_cfg.metric) << " k=" << ev_cfg.k << ": "
                << format_metrics(result.metrics) << "\n";
      if (!ev_out.empty()) write_eval_csv(result, ev_cfg, ev_out);
      if (!ev_verdicts.empty()) {
        std::ofstream out(ev_verdicts);
        out << "patient_id,true_label,predicted,af_votes,nonaf_votes\n";
        for (const auto& v : result.verdicts)
          out << v.patient_id << "," << to_string(v.true_label) << ","
              << to_string(v.verdict.predicted) << "," << v.verdict.af_votes << ","
              << v.verdict.nonaf_votes << "\n";
      }
      return 0;
    }

    if (*sweep_cmd) {
      const auto model = Model::load_checkpoint(sw_ckpt);
      const auto fp = file_fingerprint(sw_ckpt);
      const auto db = load_database(sw_db, &fp);
      const auto ds = load_dataset(sw_manifest);
      SweepConfig sc;
      sc.ks = parse_int_list(sw_ks);
      sc.metrics = parse_metric_list(sw_metrics);
      sc.radius = sw_radius;
      const auto rows = sweep(db, model, ds, sc);
      std::cout << format_sweep_table(rows);
      if (!sw_out.empty()) write_sweep_csv(rows, sw_out);
      return 0;
    }

    if (*metrics_cmd) {
      std::cout << format_metrics(compute_metrics(mc)) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
