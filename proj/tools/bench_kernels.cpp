#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <omp.h>

#include "simsig/kernels.hpp"
#include "simsig/rng.hpp"

// Times every dual-flavor kernel on both backends and prints the speedup.
// Shapes roughly follow what training and retrieval actually run.

using namespace simsig;
using namespace simsig::kernels;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(end - start).count() / reps;
}

void report(const std::string& name, const std::string& shape, double serial_ms, double omp_ms) {
  std::printf("%-24s %-28s %10.2f %10.2f %8.2fx\n", name.c_str(), shape.c_str(), serial_ms,
              omp_ms, serial_ms / omp_ms);
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::string(argv[1]) == "--quick";
  const int reps = quick ? 2 : 5;
  Rng rng(1);

  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-24s %-28s %10s %10s %9s\n", "kernel", "shape", "serial ms", "omp ms", "speedup");

  {
    const int m = 512, k = 512, n = 512;
    std::vector<double> a(m * k), b(k * n), c(m * n), bt(n * k);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < k; ++p) bt[j * k + p] = b[p * n + j];
    report("matmul_nn<double>", "512x512 * 512x512",
           time_ms([&] { matmul_nn_serial(a.data(), b.data(), c.data(), m, k, n); }, reps),
           time_ms([&] { matmul_nn_omp(a.data(), b.data(), c.data(), m, k, n); }, reps));
    report("matmul_nt<double>", "512x512 * (512x512)^T",
           time_ms([&] { matmul_nt_serial(a.data(), bt.data(), c.data(), m, k, n); }, reps),
           time_ms([&] { matmul_nt_omp(a.data(), bt.data(), c.data(), m, k, n); }, reps));
    report("matmul_tn<double>", "(512x512)^T * 512x512",
           time_ms([&] { matmul_tn_serial(a.data(), b.data(), c.data(), k, m, n); }, reps),
           time_ms([&] { matmul_tn_omp(a.data(), b.data(), c.data(), k, m, n); }, reps));
  }

  {
    Conv1dShape s;
    s.batch = 64;
    s.in_ch = 32;
    s.out_ch = 64;
    s.t_in = 400;
    s.kernel = 5;
    s.stride = 1;
    s.pad = 2;
    s.groups = 1;
    const int to = s.t_out();
    std::vector<float> x(static_cast<size_t>(s.batch) * s.in_ch * s.t_in);
    std::vector<float> w(static_cast<size_t>(s.out_ch) * s.in_ch * s.kernel);
    std::vector<float> bias(s.out_ch);
    std::vector<float> y(static_cast<size_t>(s.batch) * s.out_ch * to);
    std::vector<float> gx(x.size()), gw(w.size()), gb(bias.size());
    for (auto& v : x) v = static_cast<float>(rng.normal());
    for (auto& v : w) v = static_cast<float>(rng.normal());
    const std::string shape = "b64 c32->64 t400 k5";
    report("conv1d_forward", shape,
           time_ms([&] { conv1d_forward_serial(s, x.data(), w.data(), bias.data(), y.data()); },
                   reps),
           time_ms([&] { conv1d_forward_omp(s, x.data(), w.data(), bias.data(), y.data()); },
                   reps));
    report("conv1d_grad_input", shape,
           time_ms([&] { conv1d_grad_input_serial(s, y.data(), w.data(), gx.data()); }, reps),
           time_ms([&] { conv1d_grad_input_omp(s, y.data(), w.data(), gx.data()); }, reps));
    report("conv1d_grad_params", shape,
           time_ms([&] { conv1d_grad_params_serial(s, y.data(), x.data(), gw.data(), gb.data()); },
                   reps),
           time_ms([&] { conv1d_grad_params_omp(s, y.data(), x.data(), gw.data(), gb.data()); },
                   reps));
  }

  {
    const int na = 1000, nb = 100, dim = 1024;
    std::vector<float> a(static_cast<size_t>(na) * dim), b(static_cast<size_t>(nb) * dim);
    std::vector<double> d(static_cast<size_t>(na) * nb);
    for (auto& v : a) v = static_cast<float>(rng.normal());
    for (auto& v : b) v = static_cast<float>(rng.normal());
    report("pairwise_cosine", "1000x100, dim 1024",
           time_ms([&] { pairwise_cosine_distance_serial(a.data(), na, b.data(), nb, dim,
                                                         d.data()); },
                   reps),
           time_ms([&] { pairwise_cosine_distance_omp(a.data(), na, b.data(), nb, dim, d.data()); },
                   reps));
  }

  return 0;
}
