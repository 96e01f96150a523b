#include "confctrl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace confctrl::kern {

namespace {

// Inner kernel for one output row of C = A_row * B (B row-major K x N).
// Accumulates along K with B traversed row-wise for stride-1 access.
template <typename T>
inline void row_kernel(const T* a_row, int a_stride, const T* B, int ldb,
                       bool bRowMajorK, int N, int K, T* c_row, bool acc) {
  if (!acc) std::memset(c_row, 0, sizeof(T) * N);
  if (bRowMajorK) {
    // B indexed [k, n] with leading dim ldb
    for (int k = 0; k < K; ++k) {
      const T a = a_row[k * a_stride];
      const T* b = B + static_cast<size_t>(k) * ldb;
      for (int n = 0; n < N; ++n) c_row[n] += a * b[n];
    }
  } else {
    // B indexed [n, k]: dot products
    for (int n = 0; n < N; ++n) {
      const T* b = B + static_cast<size_t>(n) * ldb;
      T s = 0;
      for (int k = 0; k < K; ++k) s += a_row[k * a_stride] * b[k];
      c_row[n] += s;
    }
  }
}

template <typename T>
void gemm_impl(bool transA, bool transB, int M, int N, int K, const T* A,
               const T* B, T* C, bool acc, bool parallel) {
  const int a_row_stride = transA ? 1 : K;   // step to next row of op(A)
  const int a_col_stride = transA ? M : 1;   // step along K within a row
  const int ldb = transB ? K : N;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel && M > 1)
#endif
  for (int m = 0; m < M; ++m) {
    row_kernel(A + static_cast<size_t>(m) * a_row_stride, a_col_stride, B, ldb,
               !transB, N, K, C + static_cast<size_t>(m) * N, acc);
  }
  (void)parallel;
}

template <typename T>
void softmax_rows_impl(T* x, int rows, int cols, bool parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel && rows > 1)
#endif
  for (int r = 0; r < rows; ++r) {
    T* row = x + static_cast<size_t>(r) * cols;
    T mx = row[0];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
    T sum = 0;
    for (int c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    const T inv = T(1) / sum;
    for (int c = 0; c < cols; ++c) row[c] *= inv;
  }
  (void)parallel;
}

}  // namespace

template <typename T>
void gemm(bool transA, bool transB, int M, int N, int K, const T* A,
          const T* B, T* C) {
  gemm_impl(transA, transB, M, N, K, A, B, C, false, true);
}

template <typename T>
void gemm_serial(bool transA, bool transB, int M, int N, int K, const T* A,
                 const T* B, T* C) {
  gemm_impl(transA, transB, M, N, K, A, B, C, false, false);
}

template <typename T>
void gemm_acc(bool transA, bool transB, int M, int N, int K, const T* A,
              const T* B, T* C) {
  gemm_impl(transA, transB, M, N, K, A, B, C, true, true);
}

template <typename T>
void softmax_rows(T* x, int rows, int cols) {
  softmax_rows_impl(x, rows, cols, true);
}

template <typename T>
void softmax_rows_serial(T* x, int rows, int cols) {
  softmax_rows_impl(x, rows, cols, false);
}

template void gemm<float>(bool, bool, int, int, int, const float*, const float*, float*);
template void gemm<double>(bool, bool, int, int, int, const double*, const double*, double*);
template void gemm_serial<float>(bool, bool, int, int, int, const float*, const float*, float*);
template void gemm_serial<double>(bool, bool, int, int, int, const double*, const double*, double*);
template void gemm_acc<float>(bool, bool, int, int, int, const float*, const float*, float*);
template void gemm_acc<double>(bool, bool, int, int, int, const double*, const double*, double*);
template void softmax_rows<float>(float*, int, int);
template void softmax_rows<double>(double*, int, int);
template void softmax_rows_serial<float>(float*, int, int);
template void softmax_rows_serial<double>(double*, int, int);

}  // namespace confctrl::kern
