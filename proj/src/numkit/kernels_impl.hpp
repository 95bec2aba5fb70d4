#pragma once

#include "eqprune/kernels.hpp"

namespace eqprune::kernels::detail {

const Table& scalar();

#if defined(EQPRUNE_WITH_AVX2)
const Table& avx2();
#endif

} // namespace eqprune::kernels::detail
