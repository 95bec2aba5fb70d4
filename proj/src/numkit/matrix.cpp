#include "eqprune/kernels.hpp"
#include "eqprune/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace eqprune {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols)
        throw std::invalid_argument("DenseMatrix: " + std::to_string(data_.size()) +
                                    " values cannot fill " + shape_string());
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw std::invalid_argument("DenseMatrix::from_rows: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return {r, c, std::move(data)};
}

void DenseMatrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool DenseMatrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string DenseMatrix::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

namespace {

[[noreturn]] void shape_error(const char* op, const DenseMatrix& a, const DenseMatrix& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.shape_string() +
                                " and " + b.shape_string());
}

} // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    DenseMatrix c(a.rows(), b.cols());
    if (c.size() == 0) return c;
    kernels::active().gemm_nn(a.data().data(), b.data().data(), c.data().data(),
                              a.rows(), b.cols(), a.cols());
    return c;
}

DenseMatrix matmul_transposed_b(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) shape_error("matmul_transposed_b", a, b);
    DenseMatrix c(a.rows(), b.rows());
    if (c.size() == 0) return c;
    kernels::active().gemm_nt(a.data().data(), b.data().data(), c.data().data(),
                              a.rows(), b.rows(), a.cols());
    return c;
}

DenseMatrix matmul_transposed_a(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) shape_error("matmul_transposed_a", a, b);
    DenseMatrix c(a.cols(), b.cols());
    if (c.size() == 0) return c;
    kernels::active().gemm_tn(a.data().data(), b.data().data(), c.data().data(),
                              a.cols(), b.cols(), a.rows());
    return c;
}

double row_dot(const DenseMatrix& a, std::size_t i, const DenseMatrix& b, std::size_t j) {
    if (a.cols() != b.cols()) shape_error("row_dot", a, b);
    if (i >= a.rows() || j >= b.rows())
        throw std::out_of_range("row_dot: row " + std::to_string(i) + " of " + a.shape_string() +
                                " / row " + std::to_string(j) + " of " + b.shape_string());
    return dot(a.row(i), b.row(j));
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size())
        throw std::invalid_argument("axpy: length " + std::to_string(x.size()) + " vs " +
                                    std::to_string(y.size()));
    kernels::active().axpy(alpha, x.data(), y.data(), x.size());
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("dot: length " + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()));
    return kernels::active().dot(a.data(), b.data(), a.size());
}

} // namespace eqprune
