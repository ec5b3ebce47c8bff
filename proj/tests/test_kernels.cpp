#include <doctest.h>

#include <vector>

#include "lmnav/kernels.hpp"
#include "lmnav/rng.hpp"

using namespace lmnav;
namespace kern = lmnav::kern;

namespace {

std::vector<double> random_vec(Rng& rng, size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

// Roundoff budget for comparing different summation orders over k products
// of O(1) values.
double tol_for(size_t k) { return 1e-12 * static_cast<double>(k) + 1e-12; }

struct BackendGuard {
    kern::Backend saved;
    BackendGuard() : saved(kern::active_backend()) {}
    ~BackendGuard() { kern::set_backend(saved); }
};

}  // namespace

TEST_CASE("scalar backend is always available and selectable") {
    BackendGuard guard;
    CHECK(kern::backend_available(kern::Backend::Scalar));
    kern::set_backend(kern::Backend::Scalar);
    CHECK(kern::active_backend() == kern::Backend::Scalar);
}

TEST_CASE("dot matches a plain loop on every available backend") {
    BackendGuard guard;
    Rng rng(101);
    for (size_t n : {0ul, 1ul, 3ul, 4ul, 17ul, 64ul, 1000ul, 16640ul}) {
        auto a = random_vec(rng, n);
        auto b = random_vec(rng, n);
        double expect = 0.0;
        for (size_t i = 0; i < n; ++i) expect += a[i] * b[i];
        for (auto backend : {kern::Backend::Scalar, kern::Backend::Avx2, kern::Backend::Neon}) {
            if (!kern::backend_available(backend)) continue;
            kern::set_backend(backend);
            CHECK(std::abs(kern::dot(a.data(), b.data(), n) - expect) <= tol_for(n));
        }
    }
}

TEST_CASE("axpy matches the reference on every available backend") {
    BackendGuard guard;
    Rng rng(202);
    for (size_t n : {1ul, 5ul, 8ul, 31ul, 200ul}) {
        auto x = random_vec(rng, n);
        auto y0 = random_vec(rng, n);
        double alpha = rng.uniform(-2.0, 2.0);
        std::vector<double> expect = y0;
        for (size_t i = 0; i < n; ++i) expect[i] += alpha * x[i];
        for (auto backend : {kern::Backend::Scalar, kern::Backend::Avx2, kern::Backend::Neon}) {
            if (!kern::backend_available(backend)) continue;
            kern::set_backend(backend);
            auto y = y0;
            kern::axpy(y.data(), alpha, x.data(), n);
            for (size_t i = 0; i < n; ++i) CHECK(std::abs(y[i] - expect[i]) <= 1e-12);
        }
    }
}

namespace {

// Naive triple loops, written independently of the library's scalar kernels.
void naive_nt(size_t m, size_t n, size_t k, const std::vector<double>& A, const std::vector<double>& B,
              std::vector<double>& C) {
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
            double s = 0;
            for (size_t p = 0; p < k; ++p) s += A[i * k + p] * B[j * k + p];
            C[i * n + j] += s;
        }
}
void naive_tn(size_t m, size_t n, size_t k, const std::vector<double>& A, const std::vector<double>& B,
              std::vector<double>& C) {
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
            double s = 0;
            for (size_t p = 0; p < k; ++p) s += A[p * m + i] * B[p * n + j];
            C[i * n + j] += s;
        }
}
void naive_nn(size_t m, size_t n, size_t k, const std::vector<double>& A, const std::vector<double>& B,
              std::vector<double>& C) {
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
            double s = 0;
            for (size_t p = 0; p < k; ++p) s += A[i * k + p] * B[p * n + j];
            C[i * n + j] += s;
        }
}

void check_gemms(size_t m, size_t n, size_t k, uint64_t seed) {
    Rng rng(seed);
    auto A1 = random_vec(rng, m * k);  // row-major m x k
    auto A2 = random_vec(rng, k * m);  // row-major k x m (for TN)
    auto B1 = random_vec(rng, n * k);  // row-major n x k (for NT)
    auto B2 = random_vec(rng, k * n);  // row-major k x n
    auto C0 = random_vec(rng, m * n);

    for (auto backend : {kern::Backend::Scalar, kern::Backend::Avx2, kern::Backend::Neon}) {
        if (!kern::backend_available(backend)) continue;
        kern::set_backend(backend);
        INFO("backend ", kern::backend_name(backend), " m=", m, " n=", n, " k=", k);

        std::vector<double> expect = C0, got = C0;
        naive_nt(m, n, k, A1, B1, expect);
        kern::gemm_nt(m, n, k, A1.data(), k, B1.data(), k, got.data(), n, true);
        for (size_t i = 0; i < m * n; ++i) REQUIRE(std::abs(got[i] - expect[i]) <= tol_for(k));

        expect.assign(m * n, 0.0);
        got.assign(m * n, 1e9);  // accumulate=false must overwrite
        naive_tn(m, n, k, A2, B2, expect);
        kern::gemm_tn(m, n, k, A2.data(), m, B2.data(), n, got.data(), n, false);
        for (size_t i = 0; i < m * n; ++i) REQUIRE(std::abs(got[i] - expect[i]) <= tol_for(k));

        expect = C0;
        got = C0;
        naive_nn(m, n, k, A1, B2, expect);
        kern::gemm_nn(m, n, k, A1.data(), k, B2.data(), n, got.data(), n, true);
        for (size_t i = 0; i < m * n; ++i) REQUIRE(std::abs(got[i] - expect[i]) <= tol_for(k));
    }
}

}  // namespace

TEST_CASE("gemm variants agree with naive references across shapes and backends") {
    BackendGuard guard;
    // Tile-aligned, tile-misaligned and degenerate shapes.
    check_gemms(4, 8, 16, 1);
    check_gemms(64, 64, 64, 2);
    check_gemms(5, 7, 3, 3);
    check_gemms(1, 1, 1, 4);
    check_gemms(3, 9, 33, 5);
    check_gemms(13, 2, 129, 6);
    check_gemms(64, 9, 64, 7);
    check_gemms(2, 64, 1000, 8);
}

TEST_CASE("gemm honors leading dimensions (views into larger buffers)") {
    BackendGuard guard;
    Rng rng(77);
    const size_t m = 6, n = 10, k = 12, lda = 20, ldb = 24, ldc = 16;
    auto A = random_vec(rng, m * lda);
    auto B = random_vec(rng, n * ldb);
    auto C = random_vec(rng, m * ldc);
    auto expect = C;
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
            double s = 0;
            for (size_t p = 0; p < k; ++p) s += A[i * lda + p] * B[j * ldb + p];
            expect[i * ldc + j] = s;
        }
    for (auto backend : {kern::Backend::Scalar, kern::Backend::Avx2, kern::Backend::Neon}) {
        if (!kern::backend_available(backend)) continue;
        kern::set_backend(backend);
        auto got = C;
        kern::gemm_nt(m, n, k, A.data(), lda, B.data(), ldb, got.data(), ldc, false);
        for (size_t i = 0; i < m * ldc; ++i) {
            // Cells outside the written m x n window must be untouched.
            size_t r = i / ldc, c = i % ldc;
            if (r < m && c < n) CHECK(std::abs(got[i] - expect[i]) <= tol_for(k));
            else CHECK(got[i] == C[i]);
        }
    }
}

TEST_CASE("active backend matches this machine's capabilities") {
    auto b = kern::active_backend();
    CHECK(kern::backend_available(b));
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        CHECK(b == kern::Backend::Avx2);
#endif
}

TEST_CASE("kernel results are reproducible call-to-call") {
    Rng rng(303);
    auto a = random_vec(rng, 4097);
    auto b = random_vec(rng, 4097);
    double first = kern::dot(a.data(), b.data(), a.size());
    for (int i = 0; i < 5; ++i) CHECK(kern::dot(a.data(), b.data(), a.size()) == first);
}
