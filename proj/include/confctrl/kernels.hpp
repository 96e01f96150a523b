#pragma once

#include <cstddef>

// Dense kernels used by the tensor core. Every kernel has an OpenMP
// variant (the default) and a serial reference. The parallel variants
// partition work over independent output rows, so they produce
// bit-identical results to the serial reference for any thread count.

namespace confctrl::kern {

// C[M,N] = op(A) * op(B), where op transposes when the flag is set.
// A is M x K (or K x M when transA), B is K x N (or N x K when transB).
template <typename T>
void gemm(bool transA, bool transB, int M, int N, int K, const T* A,
          const T* B, T* C);

template <typename T>
void gemm_serial(bool transA, bool transB, int M, int N, int K, const T* A,
                 const T* B, T* C);

// C += op(A) * op(B)
template <typename T>
void gemm_acc(bool transA, bool transB, int M, int N, int K, const T* A,
              const T* B, T* C);

// Row-wise softmax in place, rows x cols.
template <typename T>
void softmax_rows(T* x, int rows, int cols);

template <typename T>
void softmax_rows_serial(T* x, int rows, int cols);

extern template void gemm<float>(bool, bool, int, int, int, const float*, const float*, float*);
extern template void gemm<double>(bool, bool, int, int, int, const double*, const double*, double*);
extern template void gemm_serial<float>(bool, bool, int, int, int, const float*, const float*, float*);
extern template void gemm_serial<double>(bool, bool, int, int, int, const double*, const double*, double*);
extern template void gemm_acc<float>(bool, bool, int, int, int, const float*, const float*, float*);
extern template void gemm_acc<double>(bool, bool, int, int, int, const double*, const double*, double*);
extern template void softmax_rows<float>(float*, int, int);
extern template void softmax_rows<double>(double*, int, int);
extern template void softmax_rows_serial<float>(float*, int, int);
extern template void softmax_rows_serial<double>(double*, int, int);

}  // namespace confctrl::kern
