// NEON kernels for aarch64. Only the vector primitives are vectorized here;
// the matrix kernels reuse the scalar reference, which autovectorizes
// reasonably on this shape. Guarded by the build so x86 never compiles it.

#include "lmnav/kernels.hpp"

#include <arm_neon.h>

namespace lmnav::kern::detail {

namespace {

double dot_neon(const double* a, const double* b, size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double s = vaddvq_f64(acc0) + vaddvq_f64(acc1);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_neon(double* y, double alpha, const double* x, size_t n) {
    float64x2_t va = vdupq_n_f64(alpha);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
        vst1q_f64(y + i + 2, vfmaq_f64(vld1q_f64(y + i + 2), va, vld1q_f64(x + i + 2)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const KernelTable& neon_table() {
    static const KernelTable t{dot_neon, axpy_neon,
                               scalar_table().gemm_nt,
                               scalar_table().gemm_tn,
                               scalar_table().gemm_nn};
    return t;
}

}  // namespace lmnav::kern::detail
