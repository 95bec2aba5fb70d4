#pragma once

// Inner-loop kernels with one scalar reference implementation and optional
// SIMD variants picked at runtime.
//
// Every variant must be bit-identical to the scalar reference. Two orderings
// make that possible without fused multiply-add:
//
//  * dot / gemm_nt: four partial sums, lane l accumulating k = l, l+4, ...
//    in increasing k, combined as (p0 + p1) + (p2 + p3), then the n % 4 tail
//    added one term at a time.
//  * axpy / gemm_nn / gemm_tn: each output element accumulates its terms in
//    increasing reduction index, one product and one add per step. SIMD only
//    widens across independent outputs.
//
// The multiply and the add are always separately rounded.

#include <cstddef>
#include <string_view>

namespace eqprune::kernels {

struct Table {
    std::string_view name;

    double (*dot)(const double* a, const double* b, std::size_t n);

    // y[k] = y[k] + alpha * x[k]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

    // C(m x n) = A(m x k) * B(n x k)^T; C is overwritten.
    void (*gemm_nt)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t n, std::size_t k);

    // C(m x n) = A(m x k) * B(k x n); C is overwritten.
    void (*gemm_nn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t n, std::size_t k);

    // C(m x n) = A(k x m)^T * B(k x n); C is overwritten.
    void (*gemm_tn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t n, std::size_t k);
};

enum class Isa { scalar, avx2 };

const Table& scalar_table();

/// nullptr when the build has no AVX2 variant or the CPU lacks AVX2.
const Table* avx2_table();

/// Best table for this CPU unless the EQPRUNE_ISA environment variable
/// ("scalar" or "avx2") says otherwise at first use.
const Table& active();

/// Switches the process-wide table. Returns false if the ISA is unavailable.
bool select(Isa isa);

Isa active_isa();
std::string_view isa_name(Isa isa);

} // namespace eqprune::kernels
