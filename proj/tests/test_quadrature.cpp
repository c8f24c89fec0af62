#include "doctest.h"

#include <cmath>

#include "dfext/quadrature.hpp"

using namespace dfext;

TEST_CASE("Gauss-Legendre integrates polynomials of degree 2m-1 exactly") {
    for (int m = 1; m <= 12; ++m) {
        const GaussRule& g = gauss_legendre(m);
        double sw = 0;
        for (double w : g.w) sw += w;
        CHECK(sw == doctest::Approx(1.0).epsilon(1e-14));
        for (int p = 0; p <= 2 * m - 1; ++p) {
            double s = 0;
            for (int i = 0; i < m; ++i) s += g.w[i] * std::pow(g.x[i], p);
            CHECK(s == doctest::Approx(1.0 / (p + 1)).epsilon(1e-13));
        }
        // degree 2m is not exact (the defect drops below 1e-8 beyond m = 6)
        if (m > 6) continue;
        double s = 0;
        for (int i = 0; i < m; ++i) s += g.w[i] * std::pow(g.x[i], 2 * m);
        CHECK(std::abs(s - 1.0 / (2 * m + 1)) > 1e-8);
    }
    CHECK_THROWS_AS(gauss_legendre(0), QuadratureError);
}

TEST_CASE("collapsed simplex rules are exact to the requested degree") {
    for (int k = 1; k <= 3; ++k)
        for (int d = 0; d <= 8; ++d) {
            const SimplexRule& r = simplex_rule(k, d);
            double fact = 1;
            for (int j = 2; j <= k; ++j) fact *= j;
            // all monomials t^a with |a| <= d
            std::array<int, 3> a{0, 0, 0};
            for (a[0] = 0; a[0] <= d; ++a[0])
                for (a[1] = 0; a[1] <= (k >= 2 ? d - a[0] : 0); ++a[1])
                    for (a[2] = 0; a[2] <= (k >= 3 ? d - a[0] - a[1] : 0); ++a[2]) {
                        double s = 0;
                        for (std::size_t q = 0; q < r.weights.size(); ++q) {
                            double v = 1;
                            for (int j = 0; j < k; ++j) v *= std::pow(r.bary[q][j + 1], a[j]);
                            s += r.weights[q] * v;
                        }
                        const double exact = simplex_monomial_integral(std::span<const int>(a.data(), k)) * fact;
                        CHECK(s == doctest::Approx(exact).epsilon(1e-12));
                    }
        }
}

TEST_CASE("simplex rule weights are positive and nodes barycentric") {
    const SimplexRule& r = simplex_rule(3, 6);
    for (std::size_t q = 0; q < r.weights.size(); ++q) {
        CHECK(r.weights[q] > 0);
        double s = 0;
        for (int j = 0; j < 4; ++j) {
            CHECK(r.bary[q][j] >= 0.0);
            s += r.bary[q][j];
        }
        CHECK(s == doctest::Approx(1.0));
    }
}

TEST_CASE("cube rule averages polynomials exactly") {
    CubeRule r = make_cube_rule(3, 2);
    Box b{Vec(Eigen::Vector3d(1.0, 2.0, -1.0)), 0.5};
    // average of x^2 over [0.75, 1.25] is 1 + 0.25^2/3
    const double avg = integrate_cube(r, [](const Vec& x) { return x[0] * x[0]; }, b);
    CHECK(avg == doctest::Approx(1.0 + 0.0625 / 3.0).epsilon(1e-14));
    const double avg3 = integrate_cube(r, [](const Vec& x) { return x[0] * x[1] * x[2]; }, b);
    CHECK(avg3 == doctest::Approx(-2.0).epsilon(1e-14));
}

TEST_CASE("product integration: tensor and Monte Carlo") {
    CubeRule r = make_cube_rule(2, 2);
    std::vector<Box> boxes = {{Vec(Eigen::Vector2d(0, 0)), 1.0}, {Vec(Eigen::Vector2d(1, 0)), 1.0}};
    auto f = [](std::span<const Vec> x) { return x[0][0] * x[1][0] + x[1][1] * x[1][1]; };
    ProductIntegral t = integrate_product(r, boxes, f);
    CHECK(t.value == doctest::Approx(0.0 * 1.0 + 1.0 / 12.0).epsilon(1e-14));
    CHECK_FALSE(t.monte_carlo);
    ProductOptions o;
    o.budget = 4;
    CHECK_THROWS_AS(integrate_product(r, boxes, f, o), QuadratureError);
    o.allow_monte_carlo = true;
    o.mc_samples = 200000;
    o.seed = 42;
    ProductIntegral m = integrate_product(r, boxes, f, o);
    CHECK(m.monte_carlo);
    CHECK(std::abs(m.value - 1.0 / 12.0) < 5 * m.std_error + 1e-12);
    ProductIntegral m2 = integrate_product(r, boxes, f, o);
    CHECK(m2.value == m.value);  // reproducible
}

namespace {
struct Line {
    Vec a, b;
    Vec eval(const std::array<double, 3>& t) const { return a + t[0] * (b - a); }
    double measure_element(const std::array<double, 3>&) const { return (b - a).norm(); }
};
}  // namespace

TEST_CASE("integrate_simplex over a segment") {
    Line l{Vec(Eigen::Vector2d(0, 0)), Vec(Eigen::Vector2d(3, 4))};
    const double v = integrate_simplex(simplex_rule(1, 4), [](const Vec& x) { return x[0] * x[0]; }, l);
    // int_0^1 (3t)^2 * 5 dt = 15
    CHECK(v == doctest::Approx(15.0).epsilon(1e-13));
}
