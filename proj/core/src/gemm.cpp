#include "gemm.hpp"

#include "atlab/parallel.hpp"

namespace atlab::detail {

namespace {
constexpr std::int64_t kParallelRowCutoff = 8;

template <typename Body>
void over_rows(std::int64_t m, bool parallel, Body body) {
    if (parallel && m >= kParallelRowCutoff)
        parallel_for(m, body);
    else
        body(0, m);
}
}  // namespace

void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const float* a, std::int64_t lda,
             const float* b, std::int64_t ldb, float* c, std::int64_t ldc, bool parallel) {
    over_rows(m, parallel, [=](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            float* crow = c + i * ldc;
            const float* arow = a + i * lda;
            for (std::int64_t p = 0; p < k; ++p) {
                const float av = arow[p];
                if (av == 0.0f) continue;
                const float* brow = b + p * ldb;
                for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const float* a, std::int64_t lda,
             const float* b, std::int64_t ldb, float* c, std::int64_t ldc, bool parallel) {
    over_rows(m, parallel, [=](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const float* arow = a + i * lda;
            float* crow = c + i * ldc;
            for (std::int64_t j = 0; j < n; ++j) {
                const float* brow = b + j * ldb;
                float acc = 0.0f;
                for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
                crow[j] += acc;
            }
        }
    });
}

void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const float* a, std::int64_t lda,
             const float* b, std::int64_t ldb, float* c, std::int64_t ldc, bool parallel) {
    over_rows(m, parallel, [=](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            float* crow = c + i * ldc;
            for (std::int64_t p = 0; p < k; ++p) {
                const float av = a[p * lda + i];
                if (av == 0.0f) continue;
                const float* brow = b + p * ldb;
                for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

}  // namespace atlab::detail
