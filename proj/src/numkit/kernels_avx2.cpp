// AVX2 variants. Compiled with -mavx2 only (no -mfma): every product is
// rounded before it is added, exactly as in the scalar reference.

#include "kernels_impl.hpp"

#include <immintrin.h>

namespace eqprune::kernels::detail {
namespace {

inline double hsum(__m256d v) {
    // [p0, p1, p2, p3] -> (p0 + p1) + (p2 + p3)
    const __m128d pairs = _mm_hadd_pd(_mm256_castpd256_pd128(v), _mm256_extractf128_pd(v, 1));
    return _mm_cvtsd_f64(pairs) + _mm_cvtsd_f64(_mm_unpackhi_pd(pairs, pairs));
}

inline __m256d madd(__m256d acc, __m256d x, __m256d y) {
    return _mm256_add_pd(acc, _mm256_mul_pd(x, y));
}

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) acc = madd(acc, _mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k));
    double sum = hsum(acc);
    for (; k < n; ++k) sum = sum + a[k] * b[k];
    return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4)
        _mm256_storeu_pd(y + k, madd(_mm256_loadu_pd(y + k), va, _mm256_loadu_pd(x + k)));
    for (; k < n; ++k) y[k] = y[k] + alpha * x[k];
}

// MR rows of A against NR rows of B, each output a canonical 4-lane dot.
template <int MR, int NR>
inline void nt_tile(const double* a, const double* b, double* c,
                    std::size_t n, std::size_t k) {
    __m256d acc[MR][NR];
    for (int r = 0; r < MR; ++r)
        for (int q = 0; q < NR; ++q) acc[r][q] = _mm256_setzero_pd();
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
        __m256d bv[NR];
        for (int q = 0; q < NR; ++q) bv[q] = _mm256_loadu_pd(b + q * k + p);
        for (int r = 0; r < MR; ++r) {
            const __m256d av = _mm256_loadu_pd(a + r * k + p);
            for (int q = 0; q < NR; ++q) acc[r][q] = madd(acc[r][q], av, bv[q]);
        }
    }
    for (int r = 0; r < MR; ++r) {
        for (int q = 0; q < NR; ++q) {
            double sum = hsum(acc[r][q]);
            for (std::size_t t = p; t < k; ++t) sum = sum + a[r * k + t] * b[q * k + t];
            c[r * n + q] = sum;
        }
    }
}

void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t k) {
    constexpr std::size_t MR = 4, NR = 3;
    std::size_t j = 0;
    for (; j + NR <= n; j += NR) {
        std::size_t i = 0;
        for (; i + MR <= m; i += MR) nt_tile<MR, NR>(a + i * k, b + j * k, c + i * n + j, n, k);
        for (; i < m; ++i) nt_tile<1, NR>(a + i * k, b + j * k, c + i * n + j, n, k);
    }
    for (; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i) nt_tile<1, 1>(a + i * k, b + j * k, c + i * n + j, n, k);
}

// Outer-product accumulation for MR output rows by NV*4 output columns.
// A is addressed as a[i * row_stride + p * col_stride] so the same tile
// serves both A*B and A^T*B.
template <int MR, int NV>
inline void nn_tile(const double* a, std::size_t row_stride, std::size_t col_stride,
                    const double* b, std::size_t ldb, double* c, std::size_t ldc,
                    std::size_t k) {
    __m256d acc[MR][NV];
    for (int r = 0; r < MR; ++r)
        for (int v = 0; v < NV; ++v) acc[r][v] = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
        __m256d bv[NV];
        for (int v = 0; v < NV; ++v) bv[v] = _mm256_loadu_pd(b + p * ldb + 4 * v);
        for (int r = 0; r < MR; ++r) {
            const __m256d av = _mm256_set1_pd(a[r * row_stride + p * col_stride]);
            for (int v = 0; v < NV; ++v) acc[r][v] = madd(acc[r][v], av, bv[v]);
        }
    }
    for (int r = 0; r < MR; ++r)
        for (int v = 0; v < NV; ++v) _mm256_storeu_pd(c + r * ldc + 4 * v, acc[r][v]);
}

inline void nn_column_tail(const double* a, std::size_t col_stride,
                           const double* b, std::size_t ldb, double* c, std::size_t k) {
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc = acc + a[p * col_stride] * b[p * ldb];
    *c = acc;
}

void gemm_strided(const double* a, std::size_t row_stride, std::size_t col_stride,
                  const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
    constexpr std::size_t MR = 4;
    for (std::size_t j = 0; j < n;) {
        const std::size_t left = n - j;
        const std::size_t width = left >= 8 ? 8 : (left >= 4 ? 4 : 1);
        std::size_t i = 0;
        for (; i + MR <= m; i += MR) {
            const double* ai = a + i * row_stride;
            double* ci = c + i * n + j;
            if (width == 8) nn_tile<MR, 2>(ai, row_stride, col_stride, b + j, n, ci, n, k);
            else if (width == 4) nn_tile<MR, 1>(ai, row_stride, col_stride, b + j, n, ci, n, k);
            else
                for (std::size_t r = 0; r < MR; ++r)
                    nn_column_tail(ai + r * row_stride, col_stride, b + j, n, ci + r * n, k);
        }
        for (; i < m; ++i) {
            const double* ai = a + i * row_stride;
            double* ci = c + i * n + j;
            if (width == 8) nn_tile<1, 2>(ai, row_stride, col_stride, b + j, n, ci, n, k);
            else if (width == 4) nn_tile<1, 1>(ai, row_stride, col_stride, b + j, n, ci, n, k);
            else nn_column_tail(ai, col_stride, b + j, n, ci, k);
        }
        j += width;
    }
}

void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t k) {
    gemm_strided(a, k, 1, b, c, m, n, k);
}

void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t k) {
    gemm_strided(a, 1, m, b, c, m, n, k);
}

} // namespace

const Table& avx2() {
    static const Table table{"avx2", dot, axpy, gemm_nt, gemm_nn, gemm_tn};
    return table;
}

} // namespace eqprune::kernels::detail
