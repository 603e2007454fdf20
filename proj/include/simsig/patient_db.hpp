#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "simsig/matrix.hpp"
#include "simsig/model.hpp"
#include "simsig/signal.hpp"

namespace simsig {

struct PatientEmbeddingSet {
  std::string patient_id;
  Label label = Label::non_af;
  MatF embeddings;  // n_i x embedding_dim
};

// The similarity-search corpus: per-patient embedding matrices computed from
// the training split, tied to the producing checkpoint by fingerprint.
struct PatientDatabase {
  int embedding_dim = 0;
  std::string encoder_fingerprint;
  std::vector<PatientEmbeddingSet> entries;

  const PatientEmbeddingSet* find(const std::string& patient_id) const;
};

struct QueryPatient {
  std::string patient_id;
  MatF embeddings;  // M x embedding_dim
  std::optional<Label> true_label;
};

// Encodes every z-scored segment of every patient in evaluation mode.
PatientDatabase build_database(const Model& model, const std::string& fingerprint,
                               const Dataset& ds);
PatientDatabase build_database(const std::filesystem::path& checkpoint, const Dataset& ds);

QueryPatient embed_query(const Model& model, const std::string& patient_id,
                         const std::vector<SignalSegment>& segments,
                         std::optional<Label> true_label = std::nullopt);
QueryPatient embed_query(const Model& model, const PatientRecord& patient);

// File format: magic + version + JSON header {embedding_dim,
// encoder_fingerprint, entries:[{id,label,n_i,offset}]} + one contiguous
// little-endian float32 block; offsets are row indices into the block.
void save_database(const PatientDatabase& db, const std::filesystem::path& path);

// Warns on stderr when `expected_fingerprint` is present and differs.
PatientDatabase load_database(const std::filesystem::path& path,
                              const std::string* expected_fingerprint = nullptr);

}  // namespace simsig
