// Reference kernels. Deliberately straightforward: these define the semantics
// the SIMD variants are tested against.

#include "lmnav/kernels.hpp"

namespace lmnav::kern::detail {

namespace {

double dot_scalar(const double* a, const double* b, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double* y, double alpha, const double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nt_scalar(size_t m, size_t n, size_t k,
                    const double* A, size_t lda,
                    const double* B, size_t ldb,
                    double* C, size_t ldc, bool accumulate) {
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < n; ++j) {
            double s = accumulate ? C[i * ldc + j] : 0.0;
            const double* ai = A + i * lda;
            const double* bj = B + j * ldb;
            for (size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
            C[i * ldc + j] = s;
        }
    }
}

void gemm_tn_scalar(size_t m, size_t n, size_t k,
                    const double* A, size_t lda,
                    const double* B, size_t ldb,
                    double* C, size_t ldc, bool accumulate) {
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < n; ++j) {
            double s = accumulate ? C[i * ldc + j] : 0.0;
            for (size_t p = 0; p < k; ++p) s += A[p * lda + i] * B[p * ldb + j];
            C[i * ldc + j] = s;
        }
    }
}

void gemm_nn_scalar(size_t m, size_t n, size_t k,
                    const double* A, size_t lda,
                    const double* B, size_t ldb,
                    double* C, size_t ldc, bool accumulate) {
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < n; ++j) {
            double s = accumulate ? C[i * ldc + j] : 0.0;
            for (size_t p = 0; p < k; ++p) s += A[i * lda + p] * B[p * ldb + j];
            C[i * ldc + j] = s;
        }
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable t{dot_scalar, axpy_scalar, gemm_nt_scalar, gemm_tn_scalar, gemm_nn_scalar};
    return t;
}

}  // namespace lmnav::kern::detail
