#include "simsig/loss.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "simsig/kernels.hpp"

namespace simsig {

std::string to_string(LossName n) { return n == LossName::nt_xent ? "nt_xent" : "nt_xent_multi"; }

LossName loss_from_string(const std::string& s) {
  if (s == "nt_xent" || s == "nt-xent") return LossName::nt_xent;
  if (s == "nt_xent_multi" || s == "nt-xent-multi") return LossName::nt_xent_multi;
  throw std::invalid_argument("unknown loss '" + s + "'");
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_sim: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) throw std::invalid_argument("cosine_sim: zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

void validate_loss_batch(const LossBatch& batch) {
  const int k = batch.z.rows;
  if (k < 2) throw std::invalid_argument("loss batch: need at least 2 rows");
  if (static_cast<int>(batch.ids.size()) != k)
    throw std::invalid_argument("loss batch: ids size does not match row count");
  if (!(batch.tau > 0.0)) throw std::invalid_argument("loss batch: tau must be > 0");
  for (int i = 0; i < k; ++i) {
    double n = 0;
    for (int j = 0; j < batch.z.cols; ++j) n += batch.z.at(i, j) * batch.z.at(i, j);
    if (n <= 0.0)
      throw std::invalid_argument("loss batch: zero-norm row " + std::to_string(i));
  }
}

void validate_pairing(const LossBatch& batch, const Pairing& pairing) {
  const int k = batch.z.rows;
  if (k < 4)
    throw std::invalid_argument("nt_xent: need K >= 4 so every anchor has a denominator term");
  if (static_cast<int>(pairing.size()) * 2 != k)
    throw std::invalid_argument("nt_xent: pairing must cover all rows exactly once");
  std::vector<char> seen(k, 0);
  for (auto [a, b] : pairing) {
    if (a < 0 || a >= k || b < 0 || b >= k || a == b)
      throw std::invalid_argument("nt_xent: invalid pair (" + std::to_string(a) + ", " +
                                  std::to_string(b) + ")");
    if (seen[a] || seen[b])
      throw std::invalid_argument("nt_xent: row appears in more than one pair");
    seen[a] = seen[b] = 1;
    if (batch.ids[a] != batch.ids[b])
      throw std::invalid_argument("nt_xent: paired rows " + std::to_string(a) + " and " +
                                  std::to_string(b) + " have different ids");
  }
}

namespace {

struct NormalizedBatch {
  Mat zhat;                   // rows scaled to unit norm
  std::vector<double> norms;  // original row norms
  Mat sim;                    // zhat * zhat^T
};

NormalizedBatch normalize_and_similarity(const Mat& z) {
  NormalizedBatch nb;
  const int k = z.rows, d = z.cols;
  nb.zhat = Mat(k, d);
  nb.norms.resize(k);
  for (int i = 0; i < k; ++i) {
    double n = 0;
    for (int j = 0; j < d; ++j) n += z.at(i, j) * z.at(i, j);
    n = std::sqrt(n);
    nb.norms[i] = n;
    for (int j = 0; j < d; ++j) nb.zhat.at(i, j) = z.at(i, j) / n;
  }
  nb.sim = Mat(k, k);
  kernels::matmul_nt(nb.zhat.data.data(), nb.zhat.data.data(), nb.sim.data.data(), k, d, k);
  return nb;
}

// dL/dz from dL/dS: z enters S through both its row and its column, and each
// row of zhat is z / |z|.
Mat grad_through_similarity(const NormalizedBatch& nb, const Mat& g) {
  const int k = nb.zhat.rows, d = nb.zhat.cols;
  const bool par = kernels::backend() == kernels::Backend::openmp;
  Mat gsym(k, k);
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) gsym.at(i, j) = g.at(i, j) + g.at(j, i);
  Mat dzhat(k, d);
  kernels::matmul_nn(gsym.data.data(), nb.zhat.data.data(), dzhat.data.data(), k, k, d);
  Mat dz(k, d);
  for (int i = 0; i < k; ++i) {
    double proj = 0;
    for (int j = 0; j < d; ++j) proj += nb.zhat.at(i, j) * dzhat.at(i, j);
    for (int j = 0; j < d; ++j)
      dz.at(i, j) = (dzhat.at(i, j) - proj * nb.zhat.at(i, j)) / nb.norms[i];
  }
  return dz;
}

}  // namespace

LossValue nt_xent_loss(const LossBatch& batch, const Pairing& pairing, bool with_grad) {
  validate_loss_batch(batch);
  validate_pairing(batch, pairing);

  const int k = batch.z.rows;
  const double tau = batch.tau;
  auto nb = normalize_and_similarity(batch.z);

  std::vector<int> partner(k, -1);
  for (auto [a, b] : pairing) {
    partner[a] = b;
    partner[b] = a;
  }

  LossValue out;
  out.per_anchor.assign(k, 0.0);
  Mat g;
  if (with_grad) g = Mat(k, k);
  const bool par = kernels::backend() == kernels::Backend::openmp;

  // Rows of the gradient matrix are disjoint per anchor.
#pragma omp parallel for schedule(static) if (par)
  for (int a = 0; a < k; ++a) {
    const int p = partner[a];
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != a && c != p) mx = std::max(mx, nb.sim.at(a, c));
    double denom = 0;
    for (int c = 0; c < k; ++c)
      if (c != a && c != p) denom += std::exp((nb.sim.at(a, c) - mx) / tau);
    // l_a = -s(a,p)/tau + logsumexp_{c not in {a,p}} s(a,c)/tau
    out.per_anchor[a] = -nb.sim.at(a, p) / tau + mx / tau + std::log(denom);
    if (with_grad) {
      g.at(a, p) += -1.0 / tau;
      for (int c = 0; c < k; ++c)
        if (c != a && c != p) g.at(a, c) += std::exp((nb.sim.at(a, c) - mx) / tau) / (denom * tau);
    }
  }

  for (int a = 0; a < k; ++a) out.total += out.per_anchor[a];
  if (with_grad) out.grad = grad_through_similarity(nb, g);
  return out;
}

LossValue nt_xent_multi_loss(const LossBatch& batch, bool with_grad, MultiOptions opts) {
  validate_loss_batch(batch);

  const int k = batch.z.rows;
  const double tau = batch.tau;

  // Every anchor needs a positive and a negative before any math happens.
  for (int a = 0; a < k; ++a) {
    bool pos = false, neg = false;
    for (int c = 0; c < k; ++c) {
      if (c != a && batch.ids[c] == batch.ids[a]) pos = true;
      if (batch.ids[c] != batch.ids[a]) neg = true;
    }
    if (opts.include_self) pos = true;
    if (!pos)
      throw std::invalid_argument("nt_xent_multi: anchor row " + std::to_string(a) + " (id '" +
                                  batch.ids[a] + "') has no positive");
    if (!neg)
      throw std::invalid_argument("nt_xent_multi: anchor row " + std::to_string(a) + " (id '" +
                                  batch.ids[a] + "') has no negative");
  }

  auto nb = normalize_and_similarity(batch.z);

  LossValue out;
  out.per_anchor.assign(k, 0.0);
  Mat g;
  if (with_grad) g = Mat(k, k);
  const bool par = kernels::backend() == kernels::Backend::openmp;

#pragma omp parallel for schedule(static) if (par)
  for (int a = 0; a < k; ++a) {
    double mp = -std::numeric_limits<double>::infinity();
    double mn = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const bool same = batch.ids[c] == batch.ids[a];
      if (same && (c != a || opts.include_self)) mp = std::max(mp, nb.sim.at(a, c));
      if (!same) mn = std::max(mn, nb.sim.at(a, c));
    }
    double num = 0, den = 0;
    for (int c = 0; c < k; ++c) {
      const bool same = batch.ids[c] == batch.ids[a];
      if (same && (c != a || opts.include_self)) num += std::exp((nb.sim.at(a, c) - mp) / tau);
      if (!same) den += std::exp((nb.sim.at(a, c) - mn) / tau);
    }
    // l_a = -logsumexp(positives) + logsumexp(negatives)
    out.per_anchor[a] = -(mp / tau + std::log(num)) + (mn / tau + std::log(den));
    if (with_grad) {
      for (int c = 0; c < k; ++c) {
        const bool same = batch.ids[c] == batch.ids[a];
        if (same && (c != a || opts.include_self))
          g.at(a, c) += -std::exp((nb.sim.at(a, c) - mp) / tau) / (num * tau);
        if (!same) g.at(a, c) += std::exp((nb.sim.at(a, c) - mn) / tau) / (den * tau);
      }
    }
  }

  for (int a = 0; a < k; ++a) out.total += out.per_anchor[a];
  if (with_grad) out.grad = grad_through_similarity(nb, g);
  return out;
}

}  // namespace simsig
