#include "kernels_impl.hpp"

#include <algorithm>

namespace eqprune::kernels::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double p0 = 0.0, p1 = 0.0, p2 = 0.0, p3 = 0.0;
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        p0 = p0 + a[k] * b[k];
        p1 = p1 + a[k + 1] * b[k + 1];
        p2 = p2 + a[k + 2] * b[k + 2];
        p3 = p3 + a[k + 3] * b[k + 3];
    }
    double sum = (p0 + p1) + (p2 + p3);
    for (; k < n; ++k) sum = sum + a[k] * b[k];
    return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) y[k] = y[k] + alpha * x[k];
}

void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot(a + i * k, b + j * k, k);
}

void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t k) {
    std::fill(c, c + m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) axpy(a[i * k + p], b + p * n, crow, n);
    }
}

void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t k) {
    std::fill(c, c + m * n, 0.0);
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t i = 0; i < m; ++i) axpy(a[p * m + i], b + p * n, c + i * n, n);
}

} // namespace

const Table& scalar() {
    static const Table table{"scalar", dot, axpy, gemm_nt, gemm_nn, gemm_tn};
    return table;
}

} // namespace eqprune::kernels::detail
