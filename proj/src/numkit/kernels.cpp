#include "eqprune/kernels.hpp"

#include "kernels_impl.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace eqprune::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(EQPRUNE_WITH_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Isa initial_isa() {
    const bool avx2_ok = avx2_table() != nullptr;
    if (const char* env = std::getenv("EQPRUNE_ISA")) {
        const std::string_view want{env};
        if (want == "scalar") return Isa::scalar;
        if (want == "avx2" && avx2_ok) return Isa::avx2;
    }
    return avx2_ok ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

} // namespace

const Table& scalar_table() { return detail::scalar(); }

const Table* avx2_table() {
#if defined(EQPRUNE_WITH_AVX2)
    static const bool supported = cpu_has_avx2();
    return supported ? &detail::avx2() : nullptr;
#else
    return nullptr;
#endif
}

const Table& active() {
    if (current().load(std::memory_order_relaxed) == Isa::avx2) return *avx2_table();
    return scalar_table();
}

bool select(Isa isa) {
    if (isa == Isa::avx2 && avx2_table() == nullptr) return false;
    current().store(isa, std::memory_order_relaxed);
    return true;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

} // namespace eqprune::kernels
