#pragma once
// Batched reductions used by the flux functionals and the residual integrals.
// A scalar reference is always available; an AVX2/FMA variant is selected at
// runtime when the CPU supports it and DFEXT_SIMD is not set to "scalar".

#include <cstddef>

namespace dfext::kernels {

enum class Isa { Scalar, Avx2 };

/// sum_{c < comps} sum_{i < m} a[c][i] * b[c][i]
double multi_dot_scalar(const double* const* a, const double* const* b, int comps, std::size_t m);
double multi_dot_avx2(const double* const* a, const double* const* b, int comps, std::size_t m);

/// Dispatching entry point.
double multi_dot(const double* const* a, const double* const* b, int comps, std::size_t m);

/// ISA chosen by the dispatcher (fixed after the first call).
Isa active_isa();
bool avx2_available();

}  // namespace dfext::kernels
