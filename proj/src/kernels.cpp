#include "simsig/kernels.hpp"

#include <atomic>
#include <cstring>
#include <vector>

namespace simsig::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::openmp};
}

Backend backend() { return g_backend.load(std::memory_order_relaxed); }
void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

// ---------------------------------------------------------------------------
// pairwise cosine distance
// ---------------------------------------------------------------------------

namespace {

inline double row_norm(const float* p, int dim) {
  double acc = 0.0;
  for (int i = 0; i < dim; ++i) acc += static_cast<double>(p[i]) * static_cast<double>(p[i]);
  return std::sqrt(acc);
}

inline void pairwise_row(const float* ai, double na, const float* b, const double* nb_norms,
                         int nb, int dim, double* out_row) {
  for (int j = 0; j < nb; ++j) {
    const float* bj = b + static_cast<size_t>(j) * dim;
    double dot = 0.0;
    for (int p = 0; p < dim; ++p) dot += static_cast<double>(ai[p]) * static_cast<double>(bj[p]);
    out_row[j] = 1.0 - dot / (na * nb_norms[j]);
  }
}

}  // namespace

void pairwise_cosine_distance_serial(const float* a, int na, const float* b, int nb, int dim,
                                     double* out) {
  std::vector<double> bn(nb);
  for (int j = 0; j < nb; ++j) bn[j] = row_norm(b + static_cast<size_t>(j) * dim, dim);
  for (int i = 0; i < na; ++i) {
    const float* ai = a + static_cast<size_t>(i) * dim;
    pairwise_row(ai, row_norm(ai, dim), b, bn.data(), nb, dim, out + static_cast<size_t>(i) * nb);
  }
}

void pairwise_cosine_distance_omp(const float* a, int na, const float* b, int nb, int dim,
                                  double* out) {
  std::vector<double> bn(nb);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < nb; ++j) bn[j] = row_norm(b + static_cast<size_t>(j) * dim, dim);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < na; ++i) {
    const float* ai = a + static_cast<size_t>(i) * dim;
    pairwise_row(ai, row_norm(ai, dim), b, bn.data(), nb, dim, out + static_cast<size_t>(i) * nb);
  }
}

void pairwise_cosine_distance(const float* a, int na, const float* b, int nb, int dim,
                              double* out) {
  if (backend() == Backend::openmp)
    pairwise_cosine_distance_omp(a, na, b, nb, dim, out);
  else
    pairwise_cosine_distance_serial(a, na, b, nb, dim, out);
}

// ---------------------------------------------------------------------------
// conv1d
// ---------------------------------------------------------------------------

namespace {

// One (batch, out-channel) plane. Bounds on ot are hoisted per kernel tap so
// the inner loop carries no padding branch.
inline void conv1d_forward_plane(const Conv1dShape& s, const float* x, const float* w,
                                 const float* bias, float* y, int b, int oc) {
  const int to = s.t_out();
  const int icg = s.in_ch / s.groups;
  const int g = oc / (s.out_ch / s.groups);
  float* yp = y + (static_cast<size_t>(b) * s.out_ch + oc) * to;
  const float bv = bias ? bias[oc] : 0.0f;
  for (int t = 0; t < to; ++t) yp[t] = bv;
  for (int ic = 0; ic < icg; ++ic) {
    const float* xp = x + (static_cast<size_t>(b) * s.in_ch + g * icg + ic) * s.t_in;
    const float* wp = w + (static_cast<size_t>(oc) * icg + ic) * s.kernel;
    for (int kk = 0; kk < s.kernel; ++kk) {
      const float wv = wp[kk];
      // valid ot range: 0 <= ot*stride + kk - pad < t_in
      int lo = 0;
      if (kk < s.pad) lo = (s.pad - kk + s.stride - 1) / s.stride;
      int hi_num = s.t_in - 1 + s.pad - kk;
      int hi = hi_num < 0 ? -1 : hi_num / s.stride;
      if (hi > to - 1) hi = to - 1;
      const float* xk = xp + kk - s.pad;
      for (int ot = lo; ot <= hi; ++ot) yp[ot] += wv * xk[static_cast<size_t>(ot) * s.stride];
    }
  }
}

inline void conv1d_grad_input_plane(const Conv1dShape& s, const float* gy, const float* w,
                                    float* gx, int b, int ic) {
  const int to = s.t_out();
  const int icg = s.in_ch / s.groups;
  const int ocg = s.out_ch / s.groups;
  const int g = ic / icg;
  const int ic_local = ic - g * icg;
  float* gxp = gx + (static_cast<size_t>(b) * s.in_ch + ic) * s.t_in;
  std::memset(gxp, 0, sizeof(float) * static_cast<size_t>(s.t_in));
  for (int oc = g * ocg; oc < (g + 1) * ocg; ++oc) {
    const float* gyp = gy + (static_cast<size_t>(b) * s.out_ch + oc) * to;
    const float* wp = w + (static_cast<size_t>(oc) * icg + ic_local) * s.kernel;
    for (int kk = 0; kk < s.kernel; ++kk) {
      const float wv = wp[kk];
      int lo = 0;
      if (kk < s.pad) lo = (s.pad - kk + s.stride - 1) / s.stride;
      int hi_num = s.t_in - 1 + s.pad - kk;
      int hi = hi_num < 0 ? -1 : hi_num / s.stride;
      if (hi > to - 1) hi = to - 1;
      float* gxk = gxp + kk - s.pad;
      for (int ot = lo; ot <= hi; ++ot) gxk[static_cast<size_t>(ot) * s.stride] += wv * gyp[ot];
    }
  }
}

// All taps for one out-channel; each thread owns a disjoint gw/gb slice.
inline void conv1d_grad_params_oc(const Conv1dShape& s, const float* gy, const float* x,
                                  float* gw, float* gb, int oc) {
  const int to = s.t_out();
  const int icg = s.in_ch / s.groups;
  const int g = oc / (s.out_ch / s.groups);
  float bacc = 0.0f;
  for (int b = 0; b < s.batch; ++b) {
    const float* gyp = gy + (static_cast<size_t>(b) * s.out_ch + oc) * to;
    for (int t = 0; t < to; ++t) bacc += gyp[t];
    for (int ic = 0; ic < icg; ++ic) {
      const float* xp = x + (static_cast<size_t>(b) * s.in_ch + g * icg + ic) * s.t_in;
      float* gwp = gw + (static_cast<size_t>(oc) * icg + ic) * s.kernel;
      for (int kk = 0; kk < s.kernel; ++kk) {
        int lo = 0;
        if (kk < s.pad) lo = (s.pad - kk + s.stride - 1) / s.stride;
        int hi_num = s.t_in - 1 + s.pad - kk;
        int hi = hi_num < 0 ? -1 : hi_num / s.stride;
        if (hi > to - 1) hi = to - 1;
        const float* xk = xp + kk - s.pad;
        float acc = 0.0f;
        for (int ot = lo; ot <= hi; ++ot) acc += gyp[ot] * xk[static_cast<size_t>(ot) * s.stride];
        gwp[kk] += acc;
      }
    }
  }
  if (gb) gb[oc] += bacc;
}

}  // namespace

void conv1d_forward_serial(const Conv1dShape& s, const float* x, const float* w,
                           const float* bias, float* y) {
  for (int b = 0; b < s.batch; ++b)
    for (int oc = 0; oc < s.out_ch; ++oc) conv1d_forward_plane(s, x, w, bias, y, b, oc);
}

void conv1d_forward_omp(const Conv1dShape& s, const float* x, const float* w, const float* bias,
                        float* y) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < s.batch; ++b)
    for (int oc = 0; oc < s.out_ch; ++oc) conv1d_forward_plane(s, x, w, bias, y, b, oc);
}

void conv1d_forward(const Conv1dShape& s, const float* x, const float* w, const float* bias,
                    float* y) {
  if (backend() == Backend::openmp)
    conv1d_forward_omp(s, x, w, bias, y);
  else
    conv1d_forward_serial(s, x, w, bias, y);
}

void conv1d_grad_input_serial(const Conv1dShape& s, const float* gy, const float* w, float* gx) {
  for (int b = 0; b < s.batch; ++b)
    for (int ic = 0; ic < s.in_ch; ++ic) conv1d_grad_input_plane(s, gy, w, gx, b, ic);
}

void conv1d_grad_input_omp(const Conv1dShape& s, const float* gy, const float* w, float* gx) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < s.batch; ++b)
    for (int ic = 0; ic < s.in_ch; ++ic) conv1d_grad_input_plane(s, gy, w, gx, b, ic);
}

void conv1d_grad_input(const Conv1dShape& s, const float* gy, const float* w, float* gx) {
  if (backend() == Backend::openmp)
    conv1d_grad_input_omp(s, gy, w, gx);
  else
    conv1d_grad_input_serial(s, gy, w, gx);
}

void conv1d_grad_params_serial(const Conv1dShape& s, const float* gy, const float* x, float* gw,
                               float* gb) {
  for (int oc = 0; oc < s.out_ch; ++oc) conv1d_grad_params_oc(s, gy, x, gw, gb, oc);
}

void conv1d_grad_params_omp(const Conv1dShape& s, const float* gy, const float* x, float* gw,
                            float* gb) {
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < s.out_ch; ++oc) conv1d_grad_params_oc(s, gy, x, gw, gb, oc);
}

void conv1d_grad_params(const Conv1dShape& s, const float* gy, const float* x, float* gw,
                        float* gb) {
  if (backend() == Backend::openmp)
    conv1d_grad_params_omp(s, gy, x, gw, gb);
  else
    conv1d_grad_params_serial(s, gy, x, gw, gb);
}

}  // namespace simsig::kernels
