#pragma once

#include <cstdint>

namespace atlab::detail {

// Row-major single-precision matrix products with explicit leading
// dimensions. The reduction (k) dimension is always walked in ascending
// order per output element, so results do not depend on the worker-thread
// count. `parallel` gates row-chunk threading (callers that already run
// inside parallel_for must pass false).

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const float* a, std::int64_t lda,
             const float* b, std::int64_t ldb, float* c, std::int64_t ldc, bool parallel = true);

// C[M,N] += A[M,K] * B[N,K]^T
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const float* a, std::int64_t lda,
             const float* b, std::int64_t ldb, float* c, std::int64_t ldc, bool parallel = true);

// C[M,N] += A[K,M]^T * B[K,N]
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const float* a, std::int64_t lda,
             const float* b, std::int64_t ldb, float* c, std::int64_t ldc, bool parallel = true);

}  // namespace atlab::detail
