#include "dfext/kernels.hpp"

#include <cstdlib>
#include <cstring>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define DFEXT_X86 1
#endif

namespace dfext::kernels {

double multi_dot_scalar(const double* const* a, const double* const* b, int comps, std::size_t m) {
    double acc = 0.0;
    for (int c = 0; c < comps; ++c) {
        const double* x = a[c];
        const double* y = b[c];
        for (std::size_t i = 0; i < m; ++i) acc += x[i] * y[i];
    }
    return acc;
}

#ifdef DFEXT_X86
__attribute__((target("avx2,fma"))) double multi_dot_avx2(const double* const* a, const double* const* b,
                                                          int comps, std::size_t m) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    double tail = 0.0;
    for (int c = 0; c < comps; ++c) {
        const double* x = a[c];
        const double* y = b[c];
        std::size_t i = 0;
        for (; i + 8 <= m; i += 8) {
            acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
            acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
        }
        for (; i + 4 <= m; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        for (; i < m; ++i) tail += x[i] * y[i];
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
    return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + tail;
}

bool avx2_available() {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#else
double multi_dot_avx2(const double* const* a, const double* const* b, int comps, std::size_t m) {
    return multi_dot_scalar(a, b, comps, m);
}
bool avx2_available() { return false; }
#endif

namespace {

Isa choose() {
    const char* env = std::getenv("DFEXT_SIMD");
    if (env && std::strcmp(env, "scalar") == 0) return Isa::Scalar;
    return avx2_available() ? Isa::Avx2 : Isa::Scalar;
}

}  // namespace

Isa active_isa() {
    static const Isa isa = choose();
    return isa;
}

double multi_dot(const double* const* a, const double* const* b, int comps, std::size_t m) {
    if (active_isa() == Isa::Avx2) return multi_dot_avx2(a, b, comps, m);
    return multi_dot_scalar(a, b, comps, m);
}

}  // namespace dfext::kernels
