#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace simsig {

// Dense row-major matrix.
template <class T>
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(int r, int c, T fill = T(0))
      : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

  T* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const T* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }
  std::span<T> row_span(int i) { return {row(i), static_cast<size_t>(cols)}; }
  std::span<const T> row_span(int i) const { return {row(i), static_cast<size_t>(cols)}; }

  T& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  const T& at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

  size_t size() const { return data.size(); }
  bool operator==(const Matrix&) const = default;
};

using Mat = Matrix<double>;
using MatF = Matrix<float>;

template <class U, class T>
Matrix<U> matrix_cast(const Matrix<T>& m) {
  Matrix<U> out(m.rows, m.cols);
  for (size_t i = 0; i < m.data.size(); ++i) out.data[i] = static_cast<U>(m.data[i]);
  return out;
}

}  // namespace simsig
