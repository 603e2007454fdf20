#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "simsig/loss.hpp"
#include "simsig/matrix.hpp"

// Brute-force reference evaluations of both objectives. Deliberately
// independent of the library path: per-pair cosine from the raw rows, direct
// exponentials, no log-sum-exp shifting, no shared similarity matrix.
// Templated on the scalar so the same code runs in float32 and float64.

namespace oracle {

template <class T>
T cosine(const std::vector<T>& a, const std::vector<T>& b) {
  T dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= T(0) || nb <= T(0)) throw std::invalid_argument("oracle: zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

template <class T>
std::vector<std::vector<T>> rows_of(const simsig::Mat& z) {
  std::vector<std::vector<T>> rows(z.rows, std::vector<T>(z.cols));
  for (int i = 0; i < z.rows; ++i)
    for (int j = 0; j < z.cols; ++j) rows[i][j] = static_cast<T>(z.at(i, j));
  return rows;
}

template <class T>
T nt_xent(const simsig::Mat& z, const simsig::Pairing& pairing, T tau) {
  const auto rows = rows_of<T>(z);
  const int k = z.rows;
  std::vector<int> partner(k, -1);
  for (auto [a, b] : pairing) {
    partner[a] = b;
    partner[b] = a;
  }
  T total = 0;
  for (int a = 0; a < k; ++a) {
    const T num = std::exp(cosine(rows[a], rows[partner[a]]) / tau);
    T den = 0;
    for (int c = 0; c < k; ++c)
      if (c != a && c != partner[a]) den += std::exp(cosine(rows[a], rows[c]) / tau);
    total += -std::log(num / den);
  }
  return total;
}

template <class T>
T nt_xent_multi(const simsig::Mat& z, const std::vector<std::string>& ids, T tau,
                bool include_self = false) {
  const auto rows = rows_of<T>(z);
  const int k = z.rows;
  T total = 0;
  for (int a = 0; a < k; ++a) {
    T num = 0, den = 0;
    for (int c = 0; c < k; ++c) {
      if (ids[c] == ids[a]) {
        if (c != a || include_self) num += std::exp(cosine(rows[a], rows[c]) / tau);
      } else {
        den += std::exp(cosine(rows[a], rows[c]) / tau);
      }
    }
    total += -std::log(num / den);
  }
  return total;
}

}  // namespace oracle
