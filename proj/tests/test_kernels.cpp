#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "dfext/kernels.hpp"

using namespace dfext::kernels;

TEST_CASE("scalar and AVX2 reductions agree") {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> u(-1, 1);
    for (std::size_t m : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 31u, 64u, 1000u, 4097u}) {
        for (int comps = 1; comps <= 3; ++comps) {
            std::vector<std::vector<double>> a(3, std::vector<double>(m)), b(3, std::vector<double>(m));
            double mag = 0.0;
            for (int c = 0; c < comps; ++c)
                for (std::size_t i = 0; i < m; ++i) {
                    a[c][i] = u(rng);
                    b[c][i] = u(rng);
                    mag += std::abs(a[c][i] * b[c][i]);
                }
            const double* pa[3] = {a[0].data(), a[1].data(), a[2].data()};
            const double* pb[3] = {b[0].data(), b[1].data(), b[2].data()};
            const double s = multi_dot_scalar(pa, pb, comps, m);
            const double v = multi_dot_avx2(pa, pb, comps, m);
            const double d = multi_dot(pa, pb, comps, m);
            CHECK(std::abs(s - v) <= 1e-14 * (mag + 1.0));
            CHECK(std::abs(s - d) <= 1e-14 * (mag + 1.0));
        }
    }
}

TEST_CASE("reduction of known values") {
    std::vector<double> a = {1, 2, 3, 4, 5}, b = {1, 1, 1, 1, 2};
    const double* pa[1] = {a.data()};
    const double* pb[1] = {b.data()};
    CHECK(multi_dot_scalar(pa, pb, 1, 5) == 20.0);
    CHECK(multi_dot_avx2(pa, pb, 1, 5) == 20.0);
}

TEST_CASE("dispatcher reports a consistent ISA") {
    const Isa isa = active_isa();
    if (!avx2_available()) CHECK(isa == Isa::Scalar);
    CHECK(active_isa() == isa);
}
