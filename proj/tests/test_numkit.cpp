#include "eqprune/kernels.hpp"
#include "eqprune/numkit.hpp"

#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <vector>

using namespace eqprune;

namespace {

DenseMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    DenseMatrix m(rows, cols);
    for (double& v : m.data()) v = rng_uniform(rng, -1.0, 1.0);
    return m;
}

DenseMatrix naive_product(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double sum = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) sum += a(i, k) * b(k, j);
            c(i, j) = sum;
        }
    return c;
}

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a.data()[k] - b.data()[k]));
    return worst;
}

bool bit_equal(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

} // namespace

TEST_CASE("matmul small cases") {
    const auto id = DenseMatrix::from_rows({{1, 0}, {0, 1}});
    const auto b = DenseMatrix::from_rows({{3, 4}, {5, 6}});
    CHECK(matmul(id, b) == b);
    const auto row = DenseMatrix::from_rows({{1, 2}});
    const auto col = DenseMatrix::from_rows({{3}, {4}});
    const auto p = matmul(row, col);
    CHECK(p.rows() == 1);
    CHECK(p.cols() == 1);
    CHECK(p(0, 0) == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    DenseMatrix a(2, 3), b(2, 3);
    try {
        (void)matmul(a, b);
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
    }
}

TEST_CASE("matmul variants agree with the naive triple loop") {
    Rng rng(1);
    for (std::size_t trial = 0; trial < 40; ++trial) {
        const std::size_t m = 1 + rng.next_below(32), n = 1 + rng.next_below(32), k = 1 + rng.next_below(32);
        const auto a = random_matrix(rng, m, k);
        const auto b = random_matrix(rng, k, n);
        const auto oracle = naive_product(a, b);
        CHECK(max_abs_diff(matmul(a, b), oracle) < 1e-12);
        CHECK(max_abs_diff(matmul_transposed_b(a, transpose(b)), oracle) < 1e-12);
        CHECK(max_abs_diff(matmul_transposed_a(transpose(a), b), oracle) < 1e-12);
    }
    Rng fixed(7);
    const auto a = random_matrix(fixed, 7, 5);
    const auto b = random_matrix(fixed, 5, 3);
    CHECK(max_abs_diff(matmul(a, b), naive_product(a, b)) < 1e-12);
}

TEST_CASE("matmul associativity") {
    Rng rng(2);
    for (std::size_t trial = 0; trial < 20; ++trial) {
        const auto a = random_matrix(rng, 1 + rng.next_below(12), 9);
        const auto b = random_matrix(rng, 9, 6);
        const auto c = random_matrix(rng, 6, 1 + rng.next_below(12));
        const auto left = matmul(matmul(a, b), c);
        const auto right = matmul(a, matmul(b, c));
        for (std::size_t k = 0; k < left.size(); ++k) {
            const double scale = std::max({std::abs(left.data()[k]), std::abs(right.data()[k]), 1.0});
            CHECK(std::abs(left.data()[k] - right.data()[k]) / scale < 1e-9);
        }
    }
}

TEST_CASE("row_dot") {
    const auto a = DenseMatrix::from_rows({{1, 2, 3}, {0, 0, 0}});
    const auto b = DenseMatrix::from_rows({{4, 5, 6}});
    CHECK(row_dot(a, 0, b, 0) == 32.0);
    CHECK(row_dot(a, 1, b, 0) == 0.0);
    CHECK(row_dot(a, 0, a, 0) == 14.0);
    CHECK_THROWS_AS((void)row_dot(a, 2, b, 0), std::out_of_range);
    CHECK_THROWS((void)row_dot(a, 0, DenseMatrix(1, 2), 0));

    Rng rng(3);
    const auto r = random_matrix(rng, 16, 33);
    for (std::size_t i = 0; i < r.rows(); ++i) CHECK(row_dot(r, i, r, i) >= 0.0);
}

TEST_CASE("rng determinism and ranges") {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int k = 0; k < 100; ++k) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        differs |= x != c.next_u64();
    }
    CHECK(differs);

    Rng r(5);
    for (int k = 0; k < 10000; ++k) {
        const double u = rng_uniform(r, -2.0, 3.0);
        CHECK(u >= -2.0);
        CHECK(u < 3.0);
        CHECK(r.next_below(7) < 7u);
    }
    CHECK_THROWS_AS((void)rng_uniform(r, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)rng_uniform(r, 2.0, 1.0), std::invalid_argument);
}

TEST_CASE("shuffle") {
    std::vector<std::size_t> one{0};
    Rng rng(9);
    rng_shuffle(rng, one);
    CHECK(one == std::vector<std::size_t>{0});

    std::vector<std::size_t> p(60000), q(60000);
    std::iota(p.begin(), p.end(), 0);
    std::iota(q.begin(), q.end(), 0);
    Rng r1(42), r2(42);
    rng_shuffle(r1, p);
    rng_shuffle(r2, q);
    CHECK(std::memcmp(p.data(), q.data(), p.size() * sizeof(std::size_t)) == 0);
    auto sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) REQUIRE(sorted[k] == k);
    std::size_t fixed_points = 0;
    for (std::size_t k = 0; k < p.size(); ++k) fixed_points += p[k] == k;
    CHECK(fixed_points < 20);
}

TEST_CASE("he_init standard deviation") {
    Rng rng(42);
    const double target = std::sqrt(2.0 / 784.0);
    for (int draw = 0; draw < 10; ++draw) {
        const auto w = he_init(rng, 512, 784);
        double sum = 0.0, sq = 0.0;
        for (double v : w.data()) {
            sum += v;
            sq += v * v;
        }
        const double n = static_cast<double>(w.size());
        const double mean = sum / n;
        const double sd = std::sqrt(sq / n - mean * mean);
        CHECK(std::abs(sd - target) < 0.1 * target);
        CHECK(std::abs(mean) < 1e-3);
    }
}

TEST_CASE("finite results from finite inputs") {
    Rng rng(4);
    const auto a = random_matrix(rng, 20, 30);
    const auto b = random_matrix(rng, 30, 10);
    CHECK(matmul(a, b).all_finite());
    DenseMatrix bad(1, 1, std::nan(""));
    CHECK_FALSE(bad.all_finite());
}

TEST_CASE("avx2 kernels are bit-identical to the scalar reference") {
    const auto* simd = kernels::avx2_table();
    if (simd == nullptr) {
        MESSAGE("no AVX2 variant on this build or CPU; skipping");
        return;
    }
    const auto& ref = kernels::scalar_table();
    Rng rng(11);
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 33u, 784u, 1000u}) {
        std::vector<double> a(n), b(n);
        for (auto& v : a) v = rng_uniform(rng, -1.0, 1.0);
        for (auto& v : b) v = rng_uniform(rng, -1.0, 1.0);
        const double d0 = ref.dot(a.data(), b.data(), n);
        const double d1 = simd->dot(a.data(), b.data(), n);
        CHECK(std::memcmp(&d0, &d1, sizeof d0) == 0);

        auto y0 = b, y1 = b;
        ref.axpy(0.37, a.data(), y0.data(), n);
        simd->axpy(0.37, a.data(), y1.data(), n);
        CHECK(bit_equal(y0, y1));
    }

    for (std::size_t trial = 0; trial < 60; ++trial) {
        const std::size_t m = 1 + rng.next_below(40), n = 1 + rng.next_below(40), k = 1 + rng.next_below(40);
        std::vector<double> a(m * k), b(n * k), c0(m * n, 9.0), c1(m * n, -9.0);
        for (auto& v : a) v = rng_uniform(rng, -1.0, 1.0);
        for (auto& v : b) v = rng_uniform(rng, -1.0, 1.0);
        ref.gemm_nt(a.data(), b.data(), c0.data(), m, n, k);
        simd->gemm_nt(a.data(), b.data(), c1.data(), m, n, k);
        CHECK(bit_equal(c0, c1));

        std::vector<double> bk(k * n);
        for (auto& v : bk) v = rng_uniform(rng, -1.0, 1.0);
        ref.gemm_nn(a.data(), bk.data(), c0.data(), m, n, k);
        simd->gemm_nn(a.data(), bk.data(), c1.data(), m, n, k);
        CHECK(bit_equal(c0, c1));

        std::vector<double> at(k * m);
        for (auto& v : at) v = rng_uniform(rng, -1.0, 1.0);
        ref.gemm_tn(at.data(), bk.data(), c0.data(), m, n, k);
        simd->gemm_tn(at.data(), bk.data(), c1.data(), m, n, k);
        CHECK(bit_equal(c0, c1));
    }
}

TEST_CASE("matmul results do not depend on the selected ISA") {
    if (kernels::avx2_table() == nullptr) return;
    Rng rng(12);
    const auto a = random_matrix(rng, 37, 29);
    const auto b = random_matrix(rng, 29, 23);
    const auto before = kernels::active_isa();
    REQUIRE(kernels::select(kernels::Isa::scalar));
    const auto s_nn = matmul(a, b);
    const auto s_tn = matmul_transposed_a(transpose(a), b);
    const auto s_nt = matmul_transposed_b(a, transpose(b));
    REQUIRE(kernels::select(kernels::Isa::avx2));
    CHECK(s_nn == matmul(a, b));
    CHECK(s_tn == matmul_transposed_a(transpose(a), b));
    CHECK(s_nt == matmul_transposed_b(a, transpose(b)));
    kernels::select(before);
}
