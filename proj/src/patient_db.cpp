#include "simsig/patient_db.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "json.hpp"

namespace simsig {

using nlohmann::json;

const PatientEmbeddingSet* PatientDatabase::find(const std::string& patient_id) const {
  for (const auto& e : entries)
    if (e.patient_id == patient_id) return &e;
  return nullptr;
}

namespace {

constexpr char kMagic[8] = {'S', 'I', 'M', 'S', 'I', 'G', 'D', 'B'};
constexpr uint32_t kVersion = 1;
constexpr int kEncodeChunk = 256;

MatF encode_segments(const Model& model, const std::vector<SignalSegment>& segments) {
  const int l = model.encoder_config().input_length;
  const int n = static_cast<int>(segments.size());
  MatF out(n, model.encoder_config().embedding_dim);
  for (int base = 0; base < n; base += kEncodeChunk) {
    const int count = std::min(kEncodeChunk, n - base);
    MatF batch(count, l);
    for (int i = 0; i < count; ++i) {
      const auto& seg = segments[base + i];
      if (static_cast<int>(seg.samples.size()) != l)
        throw std::runtime_error("embed: segment " + std::to_string(seg.segment_index) +
                                 " of patient '" + seg.patient_id + "' has length " +
                                 std::to_string(seg.samples.size()) + ", expected " +
                                 std::to_string(l));
      std::copy(seg.samples.begin(), seg.samples.end(), batch.row(i));
      zscore(batch.row_span(i));
    }
    MatF h = model.encode(batch);
    std::copy(h.data.begin(), h.data.end(), out.row(base));
  }
  return out;
}

void check_rows(const MatF& m, const std::string& patient_id) {
  for (int i = 0; i < m.rows; ++i) {
    double norm = 0;
    for (int j = 0; j < m.cols; ++j) {
      if (!std::isfinite(m.at(i, j)))
        throw std::runtime_error("embedding row " + std::to_string(i) + " of patient '" +
                                 patient_id + "' is non-finite");
      norm += static_cast<double>(m.at(i, j)) * m.at(i, j);
    }
    if (norm <= 0.0)
      throw std::runtime_error("embedding row " + std::to_string(i) + " of patient '" +
                               patient_id + "' has zero norm");
  }
}

}  // namespace

PatientDatabase build_database(const Model& model, const std::string& fingerprint,
                               const Dataset& ds) {
  validate_dataset(ds);
  PatientDatabase db;
  db.embedding_dim = model.encoder_config().embedding_dim;
  db.encoder_fingerprint = fingerprint;
  for (const auto& p : ds.patients) {
    PatientEmbeddingSet entry;
    entry.patient_id = p.patient_id;
    entry.label = p.label;
    entry.embeddings = encode_segments(model, p.segments);
    check_rows(entry.embeddings, entry.patient_id);
    db.entries.push_back(std::move(entry));
  }
  return db;
}

PatientDatabase build_database(const std::filesystem::path& checkpoint, const Dataset& ds) {
  const Model model = Model::load_checkpoint(checkpoint);
  return build_database(model, file_fingerprint(checkpoint), ds);
}

QueryPatient embed_query(const Model& model, const std::string& patient_id,
                         const std::vector<SignalSegment>& segments,
                         std::optional<Label> true_label) {
  if (segments.empty())
    throw std::invalid_argument("embed_query: patient '" + patient_id + "' has no segments");
  QueryPatient q;
  q.patient_id = patient_id;
  q.true_label = true_label;
  q.embeddings = encode_segments(model, segments);
  check_rows(q.embeddings, patient_id);
  return q;
}

QueryPatient embed_query(const Model& model, const PatientRecord& patient) {
  return embed_query(model, patient.patient_id, patient.segments, patient.label);
}

void save_database(const PatientDatabase& db, const std::filesystem::path& path) {
  if (db.entries.empty()) throw std::invalid_argument("save_database: refusing to save empty database");
  if (db.embedding_dim < 1) throw std::invalid_argument("save_database: embedding_dim not set");

  json header;
  header["embedding_dim"] = db.embedding_dim;
  header["encoder_fingerprint"] = db.encoder_fingerprint;
  header["entries"] = json::array();
  uint64_t offset = 0;
  for (const auto& e : db.entries) {
    if (e.embeddings.cols != db.embedding_dim)
      throw std::invalid_argument("save_database: entry '" + e.patient_id +
                                  "' has embedding dim " + std::to_string(e.embeddings.cols));
    if (e.embeddings.rows < 1)
      throw std::invalid_argument("save_database: entry '" + e.patient_id + "' is empty");
    json ej;
    ej["id"] = e.patient_id;
    ej["label"] = e.label == Label::af ? 1 : 0;
    ej["n_i"] = e.embeddings.rows;
    ej["offset"] = offset;
    header["entries"].push_back(ej);
    offset += static_cast<uint64_t>(e.embeddings.rows);
  }
  const std::string body = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write database '" + path.string() + "'");
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  const uint64_t body_len = body.size();
  out.write(reinterpret_cast<const char*>(&body_len), sizeof(body_len));
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  for (const auto& e : db.entries)
    out.write(reinterpret_cast<const char*>(e.embeddings.data.data()),
              static_cast<std::streamsize>(e.embeddings.data.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed for database '" + path.string() + "'");
}

PatientDatabase load_database(const std::filesystem::path& path,
                              const std::string* expected_fingerprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open database '" + path.string() + "'");

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("corrupt database '" + path.string() + "': bad magic");
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kVersion)
    throw std::runtime_error("database '" + path.string() + "': unsupported version");
  uint64_t body_len = 0;
  in.read(reinterpret_cast<char*>(&body_len), sizeof(body_len));
  if (!in || body_len > (1ULL << 28))
    throw std::runtime_error("corrupt database '" + path.string() + "': bad header length");
  std::string body(body_len, '\0');
  in.read(body.data(), static_cast<std::streamsize>(body_len));
  if (!in) throw std::runtime_error("corrupt database '" + path.string() + "': truncated header");

  json header;
  try {
    header = json::parse(body);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("corrupt database '" + path.string() + "': " + e.what());
  }

  PatientDatabase db;
  try {
    db.embedding_dim = header.at("embedding_dim").get<int>();
    db.encoder_fingerprint = header.at("encoder_fingerprint").get<std::string>();
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt database '" + path.string() + "': " + e.what());
  }
  if (db.embedding_dim < 1)
    throw std::runtime_error("corrupt database '" + path.string() + "': bad embedding_dim");

  struct RawEntry {
    std::string id;
    int label;
    int n;
    uint64_t offset;
  };
  std::vector<RawEntry> raw;
  uint64_t total_rows = 0;
  for (const auto& ej : header.at("entries")) {
    RawEntry e;
    try {
      e.id = ej.at("id").get<std::string>();
      e.label = ej.at("label").get<int>();
      e.n = ej.at("n_i").get<int>();
      e.offset = ej.at("offset").get<uint64_t>();
    } catch (const json::exception& ex) {
      throw std::runtime_error("corrupt database '" + path.string() + "': " + ex.what());
    }
    if (e.n < 1)
      throw std::runtime_error("corrupt database '" + path.string() + "': entry '" + e.id +
                               "' has n_i < 1");
    raw.push_back(e);
    total_rows = std::max(total_rows, e.offset + static_cast<uint64_t>(e.n));
  }
  if (raw.empty())
    throw std::runtime_error("corrupt database '" + path.string() + "': no entries");

  const uint64_t expected_bytes =
      total_rows * static_cast<uint64_t>(db.embedding_dim) * sizeof(float);
  const auto header_end = in.tellg();
  in.seekg(0, std::ios::end);
  const uint64_t block_bytes = static_cast<uint64_t>(in.tellg() - header_end);
  if (block_bytes != expected_bytes)
    throw std::runtime_error("corrupt database '" + path.string() + "': expected " +
                             std::to_string(expected_bytes) + " bytes of embeddings, found " +
                             std::to_string(block_bytes));
  in.seekg(header_end);

  std::vector<float> block(total_rows * static_cast<uint64_t>(db.embedding_dim));
  in.read(reinterpret_cast<char*>(block.data()), static_cast<std::streamsize>(expected_bytes));
  if (!in) throw std::runtime_error("corrupt database '" + path.string() + "': truncated block");

  for (const auto& e : raw) {
    PatientEmbeddingSet entry;
    entry.patient_id = e.id;
    entry.label = e.label == 1 ? Label::af : Label::non_af;
    entry.embeddings = MatF(e.n, db.embedding_dim);
    std::memcpy(entry.embeddings.data.data(),
                block.data() + e.offset * static_cast<uint64_t>(db.embedding_dim),
                static_cast<size_t>(e.n) * db.embedding_dim * sizeof(float));
    db.entries.push_back(std::move(entry));
  }

  if (expected_fingerprint && *expected_fingerprint != db.encoder_fingerprint)
    std::cerr << "warning: database '" << path.string() << "' was built with encoder "
              << db.encoder_fingerprint << ", not the provided checkpoint ("
              << *expected_fingerprint << ")\n";
  return db;
}

}  // namespace simsig
