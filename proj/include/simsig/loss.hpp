#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simsig/matrix.hpp"

namespace simsig {

enum class LossName { nt_xent, nt_xent_multi };

std::string to_string(LossName n);
LossName loss_from_string(const std::string& s);

// A minibatch of projected vectors with their individual ids.
struct LossBatch {
  Mat z;                         // K x dim
  std::vector<std::string> ids;  // ind(.) per row
  double tau = 0.5;
};

// Disjoint index pairs covering all rows; paired rows share an id.
using Pairing = std::vector<std::pair<int, int>>;

struct LossValue {
  double total = 0.0;
  std::vector<double> per_anchor;  // one term per row
  Mat grad;                        // d total / d z, filled when requested
};

// cos(a, b); throws on a zero-norm operand.
double cosine_sim(std::span<const double> a, std::span<const double> b);

// Pair-contrastive objective. Every row is an anchor once; the anchor's
// partner supplies the numerator and the denominator sums over all rows
// except the anchor and its partner.
LossValue nt_xent_loss(const LossBatch& batch, const Pairing& pairing, bool with_grad = false);

struct MultiOptions {
  // Count the anchor itself as one of its own positives (a constant
  // self-similarity term in the numerator). Off by default.
  bool include_self = false;
};

// Multi-positive variant: the numerator sums exponential similarities over
// all same-individual rows, the denominator over all rows from different
// individuals. May be negative.
LossValue nt_xent_multi_loss(const LossBatch& batch, bool with_grad = false,
                             MultiOptions opts = {});

// Shared precondition checks: K >= 2, tau > 0, nonzero row norms.
void validate_loss_batch(const LossBatch& batch);

// Throws unless `pairing` partitions all rows into id-matched pairs (K >= 4).
void validate_pairing(const LossBatch& batch, const Pairing& pairing);

}  // namespace simsig
