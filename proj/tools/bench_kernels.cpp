#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "confctrl/kernels.hpp"
#include "confctrl/rng.hpp"

using namespace confctrl;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e30;
  for (int i = 0; i < reps; ++i) {
    const double t0 = now_ms();
    f();
    best = std::min(best, now_ms() - t0);
  }
  return best;
}

void bench_gemm(int M, int N, int K) {
  Rng rng(42, "bench-gemm");
  std::vector<float> a(size_t(M) * K), b(size_t(K) * N), c(size_t(M) * N), c_ref(c);
  for (auto& v : a) v = float(rng.normal());
  for (auto& v : b) v = float(rng.normal());

  const double ts = time_best_of(
      3, [&] { kern::gemm_serial(false, false, M, N, K, a.data(), b.data(), c_ref.data()); });
  const double tp =
      time_best_of(3, [&] { kern::gemm(false, false, M, N, K, a.data(), b.data(), c.data()); });

  float max_diff = 0;
  for (size_t i = 0; i < c.size(); ++i)
    max_diff = std::max(max_diff, std::abs(c[i] - c_ref[i]));
  const double gflop = 2.0 * M * N * K / 1e9;
  std::printf(
      "gemm    %4dx%4dx%4d  serial %8.2f ms (%6.2f GF/s)  parallel %8.2f ms (%6.2f GF/s)  "
      "speedup %5.2fx  max|diff| %g\n",
      M, N, K, ts, gflop / (ts / 1e3), tp, gflop / (tp / 1e3), ts / tp, double(max_diff));
}

void bench_softmax(int rows, int cols) {
  Rng rng(43, "bench-softmax");
  std::vector<float> x(size_t(rows) * cols);
  for (auto& v : x) v = float(rng.normal());
  std::vector<float> y(x), y_ref(x);

  const double ts = time_best_of(5, [&] {
    y_ref = x;
    kern::softmax_rows_serial(y_ref.data(), rows, cols);
  });
  const double tp = time_best_of(5, [&] {
    y = x;
    kern::softmax_rows(y.data(), rows, cols);
  });

  float max_diff = 0;
  for (size_t i = 0; i < y.size(); ++i)
    max_diff = std::max(max_diff, std::abs(y[i] - y_ref[i]));
  std::printf(
      "softmax %5d x %5d      serial %8.2f ms                 parallel %8.2f ms            "
      "     speedup %5.2fx  max|diff| %g\n",
      rows, cols, ts, tp, ts / tp, double(max_diff));
}

}  // namespace

int main() {
  std::printf("parallel vs serial reference kernels (best of several runs)\n\n");
  for (int n : {128, 256, 512}) bench_gemm(n, n, n);
  bench_gemm(1296, 64, 64);
  bench_gemm(1296, 1296, 16);
  std::printf("\n");
  for (int n : {256, 1024, 2048}) bench_softmax(n, n);
  return 0;
}
