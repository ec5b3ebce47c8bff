#include "lmnav/kernels.hpp"

#include "lmnav/common.hpp"

namespace lmnav::kern {

namespace {

using detail::KernelTable;

Backend detect_backend() {
#if defined(LMNAV_BUILD_AVX2)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Backend::Avx2;
#endif
#if defined(LMNAV_BUILD_NEON)
    // NEON is architecturally guaranteed on aarch64.
    return Backend::Neon;
#endif
    return Backend::Scalar;
}

const KernelTable* table_for(Backend b) {
    switch (b) {
        case Backend::Scalar: return &detail::scalar_table();
#if defined(LMNAV_BUILD_AVX2)
        case Backend::Avx2: return &detail::avx2_table();
#endif
#if defined(LMNAV_BUILD_NEON)
        case Backend::Neon: return &detail::neon_table();
#endif
        default: return nullptr;
    }
}

struct Dispatch {
    Backend backend;
    const KernelTable* table;
    Dispatch() : backend(detect_backend()), table(table_for(backend)) {}
};

Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

}  // namespace

Backend active_backend() { return dispatch().backend; }

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
        case Backend::Neon: return "neon";
    }
    return "?";
}

bool backend_available(Backend b) {
    if (b == Backend::Scalar) return true;
#if defined(LMNAV_BUILD_AVX2)
    if (b == Backend::Avx2) return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#endif
#if defined(LMNAV_BUILD_NEON)
    if (b == Backend::Neon) return true;
#endif
    return false;
}

void set_backend(Backend b) {
    if (!backend_available(b))
        throw Error(std::string("kernel backend not available on this CPU: ") + backend_name(b));
    dispatch().backend = b;
    dispatch().table = table_for(b);
}

double dot(const double* a, const double* b, size_t n) { return dispatch().table->dot(a, b, n); }
void axpy(double* y, double alpha, const double* x, size_t n) { dispatch().table->axpy(y, alpha, x, n); }

void gemm_nt(size_t m, size_t n, size_t k, const double* A, size_t lda, const double* B, size_t ldb,
             double* C, size_t ldc, bool accumulate) {
    dispatch().table->gemm_nt(m, n, k, A, lda, B, ldb, C, ldc, accumulate);
}
void gemm_tn(size_t m, size_t n, size_t k, const double* A, size_t lda, const double* B, size_t ldb,
             double* C, size_t ldc, bool accumulate) {
    dispatch().table->gemm_tn(m, n, k, A, lda, B, ldb, C, ldc, accumulate);
}
void gemm_nn(size_t m, size_t n, size_t k, const double* A, size_t lda, const double* B, size_t ldb,
             double* C, size_t ldc, bool accumulate) {
    dispatch().table->gemm_nn(m, n, k, A, lda, B, ldb, C, ldc, accumulate);
}

}  // namespace lmnav::kern
