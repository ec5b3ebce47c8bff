#pragma once

#include <cstddef>
#include <string>

// Dense arithmetic kernels behind the trainer and the score featurizer.
//
// Every operation has a plain scalar reference implementation plus optional
// SIMD variants (AVX2 on x86-64, NEON on aarch64) selected once at startup
// from CPU capabilities. The reference build is the semantic contract; SIMD
// variants must agree with it to tight tolerances and the test suite checks
// that on whatever machine it runs on.
//
// Matrix arguments are row-major with an explicit leading dimension (`ld*` =
// elements between consecutive rows), so views into larger buffers work.

namespace lmnav::kern {

enum class Backend { Scalar, Avx2, Neon };

/// Backend picked at startup for this process.
Backend active_backend();
const char* backend_name(Backend b);

/// Force a specific backend (tests). Throws Error if unsupported on this CPU.
void set_backend(Backend b);

/// Backends usable on this machine (always includes Scalar).
bool backend_available(Backend b);

/// sum_i a[i]*b[i]
double dot(const double* a, const double* b, size_t n);

/// y += alpha * x
void axpy(double* y, double alpha, const double* x, size_t n);

/// C (m x n) = A (m x k) * B^T (B is n x k). accumulate? C += : C =
void gemm_nt(size_t m, size_t n, size_t k,
             const double* A, size_t lda,
             const double* B, size_t ldb,
             double* C, size_t ldc, bool accumulate);

/// C (m x n) = A^T * B  (A is k x m, B is k x n). accumulate? C += : C =
void gemm_tn(size_t m, size_t n, size_t k,
             const double* A, size_t lda,
             const double* B, size_t ldb,
             double* C, size_t ldc, bool accumulate);

/// C (m x n) = A (m x k) * B (k x n). accumulate? C += : C =
void gemm_nn(size_t m, size_t n, size_t k,
             const double* A, size_t lda,
             const double* B, size_t ldb,
             double* C, size_t ldc, bool accumulate);

// Single-backend entry points, used by the dispatcher and the equivalence
// tests. Scalar is always compiled in; the others exist only on their arch.
namespace detail {

struct KernelTable {
    double (*dot)(const double*, const double*, size_t);
    void (*axpy)(double*, double, const double*, size_t);
    void (*gemm_nt)(size_t, size_t, size_t, const double*, size_t, const double*, size_t, double*, size_t, bool);
    void (*gemm_tn)(size_t, size_t, size_t, const double*, size_t, const double*, size_t, double*, size_t, bool);
    void (*gemm_nn)(size_t, size_t, size_t, const double*, size_t, const double*, size_t, double*, size_t, bool);
};

const KernelTable& scalar_table();
#if defined(LMNAV_BUILD_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(LMNAV_BUILD_NEON)
const KernelTable& neon_table();
#endif

}  // namespace detail

}  // namespace lmnav::kern
