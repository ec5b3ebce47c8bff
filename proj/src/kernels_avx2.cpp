// AVX2+FMA kernels. Compiled with -mavx2 -mfma in this TU only; the dispatcher
// guarantees these run only on CPUs that report both features.
//
// Summation order differs from the scalar reference (vector lanes + register
// tiles), so agreement is up to roundoff, not bitwise. The equivalence tests
// budget for that with k-scaled tolerances.

#include "lmnav/kernels.hpp"

#include <immintrin.h>

namespace lmnav::kern::detail {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    __m128d s2 = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s2, _mm_unpackhi_pd(s2, s2)));
}

double dot_avx2(const double* a, const double* b, size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    __m256d acc3 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
        acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
        acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double s = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double* y, double alpha, const double* x, size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        __m256d y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4));
        _mm256_storeu_pd(y + i, y0);
        _mm256_storeu_pd(y + i + 4, y1);
    }
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

// ---- NT: C = A * B^T, dot-product shape. Register tile 4 rows of A x 2 rows
// of B, accumulating along k.
void gemm_nt_avx2(size_t m, size_t n, size_t k,
                  const double* A, size_t lda,
                  const double* B, size_t ldb,
                  double* C, size_t ldc, bool accumulate) {
    const KernelTable& ref = scalar_table();
    size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const double* a0 = A + (i + 0) * lda;
        const double* a1 = A + (i + 1) * lda;
        const double* a2 = A + (i + 2) * lda;
        const double* a3 = A + (i + 3) * lda;
        size_t j = 0;
        for (; j + 2 <= n; j += 2) {
            const double* b0 = B + (j + 0) * ldb;
            const double* b1 = B + (j + 1) * ldb;
            __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
            __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
            __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
            __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
            size_t p = 0;
            for (; p + 4 <= k; p += 4) {
                __m256d vb0 = _mm256_loadu_pd(b0 + p);
                __m256d vb1 = _mm256_loadu_pd(b1 + p);
                __m256d va = _mm256_loadu_pd(a0 + p);
                c00 = _mm256_fmadd_pd(va, vb0, c00);
                c01 = _mm256_fmadd_pd(va, vb1, c01);
                va = _mm256_loadu_pd(a1 + p);
                c10 = _mm256_fmadd_pd(va, vb0, c10);
                c11 = _mm256_fmadd_pd(va, vb1, c11);
                va = _mm256_loadu_pd(a2 + p);
                c20 = _mm256_fmadd_pd(va, vb0, c20);
                c21 = _mm256_fmadd_pd(va, vb1, c21);
                va = _mm256_loadu_pd(a3 + p);
                c30 = _mm256_fmadd_pd(va, vb0, c30);
                c31 = _mm256_fmadd_pd(va, vb1, c31);
            }
            double s[4][2] = {{hsum(c00), hsum(c01)},
                              {hsum(c10), hsum(c11)},
                              {hsum(c20), hsum(c21)},
                              {hsum(c30), hsum(c31)}};
            for (; p < k; ++p) {
                s[0][0] += a0[p] * b0[p]; s[0][1] += a0[p] * b1[p];
                s[1][0] += a1[p] * b0[p]; s[1][1] += a1[p] * b1[p];
                s[2][0] += a2[p] * b0[p]; s[2][1] += a2[p] * b1[p];
                s[3][0] += a3[p] * b0[p]; s[3][1] += a3[p] * b1[p];
            }
            for (int r = 0; r < 4; ++r) {
                double* c = C + (i + r) * ldc + j;
                if (accumulate) { c[0] += s[r][0]; c[1] += s[r][1]; }
                else            { c[0]  = s[r][0]; c[1]  = s[r][1]; }
            }
        }
        if (j < n)  // odd trailing column
            ref.gemm_nt(4, n - j, k, A + i * lda, lda, B + j * ldb, ldb, C + i * ldc + j, ldc, accumulate);
    }
    if (i < m)
        ref.gemm_nt(m - i, n, k, A + i * lda, lda, B, ldb, C + i * ldc, ldc, accumulate);
}

// ---- TN: C = A^T * B, outer-product shape (k is the short axis in training:
// it is the batch size). Register tile 4 rows of C x 8 columns.
void gemm_tn_avx2(size_t m, size_t n, size_t k,
                  const double* A, size_t lda,
                  const double* B, size_t ldb,
                  double* C, size_t ldc, bool accumulate) {
    const KernelTable& ref = scalar_table();
    size_t j = 0;
    for (; j + 8 <= n; j += 8) {
        size_t i = 0;
        for (; i + 4 <= m; i += 4) {
            __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
            __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
            __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
            __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
            for (size_t p = 0; p < k; ++p) {
                const double* ap = A + p * lda + i;
                const double* bp = B + p * ldb + j;
                __m256d vb0 = _mm256_loadu_pd(bp);
                __m256d vb1 = _mm256_loadu_pd(bp + 4);
                __m256d va = _mm256_set1_pd(ap[0]);
                c00 = _mm256_fmadd_pd(va, vb0, c00);
                c01 = _mm256_fmadd_pd(va, vb1, c01);
                va = _mm256_set1_pd(ap[1]);
                c10 = _mm256_fmadd_pd(va, vb0, c10);
                c11 = _mm256_fmadd_pd(va, vb1, c11);
                va = _mm256_set1_pd(ap[2]);
                c20 = _mm256_fmadd_pd(va, vb0, c20);
                c21 = _mm256_fmadd_pd(va, vb1, c21);
                va = _mm256_set1_pd(ap[3]);
                c30 = _mm256_fmadd_pd(va, vb0, c30);
                c31 = _mm256_fmadd_pd(va, vb1, c31);
            }
            __m256d tiles[4][2] = {{c00, c01}, {c10, c11}, {c20, c21}, {c30, c31}};
            for (int r = 0; r < 4; ++r) {
                double* c = C + (i + r) * ldc + j;
                if (accumulate) {
                    _mm256_storeu_pd(c, _mm256_add_pd(_mm256_loadu_pd(c), tiles[r][0]));
                    _mm256_storeu_pd(c + 4, _mm256_add_pd(_mm256_loadu_pd(c + 4), tiles[r][1]));
                } else {
                    _mm256_storeu_pd(c, tiles[r][0]);
                    _mm256_storeu_pd(c + 4, tiles[r][1]);
                }
            }
        }
        if (i < m)
            ref.gemm_tn(m - i, 8, k, A + i, lda, B + j, ldb, C + i * ldc + j, ldc, accumulate);
    }
    if (j < n)
        ref.gemm_tn(m, n - j, k, A, lda, B + j, ldb, C + j, ldc, accumulate);
}

// ---- NN: C = A * B. Row of A broadcast against row-panels of B.
void gemm_nn_avx2(size_t m, size_t n, size_t k,
                  const double* A, size_t lda,
                  const double* B, size_t ldb,
                  double* C, size_t ldc, bool accumulate) {
    const KernelTable& ref = scalar_table();
    size_t j = 0;
    for (; j + 8 <= n; j += 8) {
        for (size_t i = 0; i < m; ++i) {
            __m256d acc0, acc1;
            if (accumulate) {
                acc0 = _mm256_loadu_pd(C + i * ldc + j);
                acc1 = _mm256_loadu_pd(C + i * ldc + j + 4);
            } else {
                acc0 = _mm256_setzero_pd();
                acc1 = _mm256_setzero_pd();
            }
            const double* ai = A + i * lda;
            for (size_t p = 0; p < k; ++p) {
                __m256d va = _mm256_set1_pd(ai[p]);
                const double* bp = B + p * ldb + j;
                acc0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(bp), acc0);
                acc1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(bp + 4), acc1);
            }
            _mm256_storeu_pd(C + i * ldc + j, acc0);
            _mm256_storeu_pd(C + i * ldc + j + 4, acc1);
        }
    }
    if (j < n)
        ref.gemm_nn(m, n - j, k, A, lda, B + j, ldb, C + j, ldc, accumulate);
}

}  // namespace

const KernelTable& avx2_table() {
    static const KernelTable t{dot_avx2, axpy_avx2, gemm_nt_avx2, gemm_tn_avx2, gemm_nn_avx2};
    return t;
}

}  // namespace lmnav::kern::detail
