#pragma once

// Dense row-major matrices of doubles, a fixed-algorithm RNG, and the handful
// of products the network needs. Every product routes through the active
// kernel table (see kernels.hpp), so results are identical whichever ISA
// variant is selected.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace eqprune {

class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    /// Builds a matrix from nested rows; all rows must share one length.
    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    void fill(double v);
    bool all_finite() const noexcept;
    std::string shape_string() const;

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// a * b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// a * b^T (rows of a dotted with rows of b)
DenseMatrix matmul_transposed_b(const DenseMatrix& a, const DenseMatrix& b);
/// a^T * b
DenseMatrix matmul_transposed_a(const DenseMatrix& a, const DenseMatrix& b);

/// Sum_k a[i,k] * b[j,k].
double row_dot(const DenseMatrix& a, std::size_t i, const DenseMatrix& b, std::size_t j);

/// y <- y + alpha * x, elementwise.
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// Reduction with the canonical kernel order (four interleaved partial sums).
double dot(std::span<const double> a, std::span<const double> b);

// xoshiro256** seeded through splitmix64. The algorithm is part of the
// reproducibility contract: never swap it for a std:: engine whose output
// differs across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1) with 53 bits of resolution.
    double next_unit() noexcept;
    /// Standard normal via Box-Muller; the second variate is cached.
    double next_normal() noexcept;
    /// Uniform integer in [0, bound) without modulo bias.
    std::uint64_t next_below(std::uint64_t bound) noexcept;

private:
    std::uint64_t state_[4];
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

double rng_uniform(Rng& rng, double lo, double hi);

/// In-place Fisher-Yates shuffle.
void rng_shuffle(Rng& rng, std::span<std::size_t> seq);

/// Gaussian entries with standard deviation sqrt(2 / cols).
DenseMatrix he_init(Rng& rng, std::size_t rows, std::size_t cols);

} // namespace eqprune
