#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

// Compute kernels behind the encoder, the losses and the neighbor search.
// Every kernel comes in a serial reference flavor and an OpenMP flavor; the
// dispatching wrapper picks one from the process-wide backend setting.
// Parallel loops always split over independent output elements with a serial
// inner accumulation, so results are bit-identical across backends and
// thread counts.

namespace simsig::kernels {

enum class Backend { serial, openmp };

Backend backend();
void set_backend(Backend b);

// ---------------------------------------------------------------------------
// matmul: c(m x n) = a * b with the operand layouts named in the suffix.
//   nn: a(m x k) * b(k x n)
//   nt: a(m x k) * b(n x k)^T
//   tn: a(m x k)^T * b(m x n)   (result k x n; m is the contracted dim)
// ---------------------------------------------------------------------------

template <class T>
void matmul_nn_serial(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    T* ci = c + static_cast<size_t>(i) * n;
    std::fill(ci, ci + n, T(0));
    const T* ai = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T apv = ai[p];
      const T* bp = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += apv * bp[j];
    }
  }
}

template <class T>
void matmul_nn_omp(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    T* ci = c + static_cast<size_t>(i) * n;
    std::fill(ci, ci + n, T(0));
    const T* ai = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T apv = ai[p];
      const T* bp = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += apv * bp[j];
    }
  }
}

template <class T>
void matmul_nt_serial(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* ai = a + static_cast<size_t>(i) * k;
    T* ci = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* bj = b + static_cast<size_t>(j) * k;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
}

template <class T>
void matmul_nt_omp(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const T* ai = a + static_cast<size_t>(i) * k;
    T* ci = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* bj = b + static_cast<size_t>(j) * k;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
}

template <class T>
void matmul_tn_serial(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    T* cp = c + static_cast<size_t>(p) * n;
    std::fill(cp, cp + n, T(0));
    for (int i = 0; i < m; ++i) {
      const T apv = a[static_cast<size_t>(i) * k + p];
      const T* bi = b + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) cp[j] += apv * bi[j];
    }
  }
}

template <class T>
void matmul_tn_omp(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int p = 0; p < k; ++p) {
    T* cp = c + static_cast<size_t>(p) * n;
    std::fill(cp, cp + n, T(0));
    for (int i = 0; i < m; ++i) {
      const T apv = a[static_cast<size_t>(i) * k + p];
      const T* bi = b + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) cp[j] += apv * bi[j];
    }
  }
}

template <class T>
void matmul_nn(const T* a, const T* b, T* c, int m, int k, int n) {
  if (backend() == Backend::openmp)
    matmul_nn_omp(a, b, c, m, k, n);
  else
    matmul_nn_serial(a, b, c, m, k, n);
}

template <class T>
void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n) {
  if (backend() == Backend::openmp)
    matmul_nt_omp(a, b, c, m, k, n);
  else
    matmul_nt_serial(a, b, c, m, k, n);
}

template <class T>
void matmul_tn(const T* a, const T* b, T* c, int m, int k, int n) {
  if (backend() == Backend::openmp)
    matmul_tn_omp(a, b, c, m, k, n);
  else
    matmul_tn_serial(a, b, c, m, k, n);
}

// ---------------------------------------------------------------------------
// Pairwise cosine distance block: out[i*nb + j] = 1 - cos(a_i, b_j).
// Inputs are float32 rows; accumulation and output are float64.
// Row norms must be nonzero (validated by the caller).
// ---------------------------------------------------------------------------

void pairwise_cosine_distance_serial(const float* a, int na, const float* b, int nb, int dim,
                                     double* out);
void pairwise_cosine_distance_omp(const float* a, int na, const float* b, int nb, int dim,
                                  double* out);
void pairwise_cosine_distance(const float* a, int na, const float* b, int nb, int dim,
                              double* out);

// ---------------------------------------------------------------------------
// Grouped 1D convolution, NCT layout.
//   x: (batch, in_ch, t_in)   w: (out_ch, in_ch/groups, kernel)   y: (batch, out_ch, t_out)
// ---------------------------------------------------------------------------

struct Conv1dShape {
  int batch = 0;
  int in_ch = 0;
  int out_ch = 0;
  int t_in = 0;
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  int groups = 1;

  int t_out() const { return (t_in + 2 * pad - kernel) / stride + 1; }
};

void conv1d_forward_serial(const Conv1dShape& s, const float* x, const float* w,
                           const float* bias, float* y);
void conv1d_forward_omp(const Conv1dShape& s, const float* x, const float* w, const float* bias,
                        float* y);
void conv1d_forward(const Conv1dShape& s, const float* x, const float* w, const float* bias,
                    float* y);

void conv1d_grad_input_serial(const Conv1dShape& s, const float* gy, const float* w, float* gx);
void conv1d_grad_input_omp(const Conv1dShape& s, const float* gy, const float* w, float* gx);
void conv1d_grad_input(const Conv1dShape& s, const float* gy, const float* w, float* gx);

// gw/gb are accumulated into (callers zero them first when appropriate).
void conv1d_grad_params_serial(const Conv1dShape& s, const float* gy, const float* x, float* gw,
                               float* gb);
void conv1d_grad_params_omp(const Conv1dShape& s, const float* gy, const float* x, float* gw,
                            float* gb);
void conv1d_grad_params(const Conv1dShape& s, const float* gy, const float* x, float* gw,
                        float* gb);

}  // namespace simsig::kernels
