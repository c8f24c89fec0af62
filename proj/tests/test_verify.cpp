#include "doctest.h"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "dfext/verify.hpp"

using namespace dfext;

namespace {

std::shared_ptr<const Domain> square() {
    return std::make_shared<const Domain>(Domain::rectangle(Vec(Eigen::Vector2d(0, 0)), Vec(Eigen::Vector2d(1, 1))));
}
Vec v2(double a, double b) { return Vec(Eigen::Vector2d(a, b)); }

FieldPtr hyperbolic(double s) {
    Mat A(2, 2);
    A << s, 0, 0, -s;
    return linear_field(A, v2(0.1 * s, -0.3 * s));
}

WeakQuadrature quick() {
    WeakQuadrature q;
    q.min_level = 4;
    q.max_level = 6;
    q.richardson = 1;
    q.rule = ExteriorRule::coarse();
    q.interior_order = 12;
    q.interior_cells = 16;
    return q;
}

}  // namespace

TEST_CASE("test function profile") {
    TestFunction psi(v2(0.2, 0.3), 0.5);
    CHECK(psi.value(v2(0.2, 0.3)) == doctest::Approx(1.0));
    CHECK(psi.value(v2(0.8, 0.3)) == 0.0);
    const Vec x = v2(0.4, 0.1);
    const double h = 1e-6;
    const Vec g = psi.gradient(x);
    for (int d = 0; d < 2; ++d) {
        Vec p = x, m = x;
        p[d] += h;
        m[d] -= h;
        CHECK(g[d] == doctest::Approx((psi.value(p) - psi.value(m)) / (2 * h)).epsilon(1e-7));
    }
    double sampled = 0.0;
    for (int i = 1; i < 5000; ++i) sampled = std::max(sampled, psi.gradient(v2(0.2 + 0.5 * i / 5000.0, 0.3)).norm());
    CHECK(psi.gradient_sup() == doctest::Approx(sampled).epsilon(1e-6));
    CHECK(psi.gradient_sup() >= sampled);
    CHECK(psi.meets(v2(0.6, 0.0), v2(1.0, 1.0)));
    CHECK_FALSE(psi.meets(v2(0.71, 0.0), v2(1.0, 1.0)));
    CHECK_THROWS_AS(TestFunction(v2(0, 0), 0.0), VerifyError);
}

TEST_CASE("straddling tests and sample points") {
    auto dom = square();
    for (const TestFunction& t : straddling_tests(*dom, 20, 3, 0.1, 0.2)) {
        CHECK(std::abs(dom->signed_distance(t.center())) < 1e-14);
        CHECK(t.radius() >= 0.1);
        CHECK(t.radius() <= 0.2);
    }
    for (const Vec& y : exterior_points(*dom, 50, 4, 0.01, 0.1)) {
        const double D = -dom->signed_distance(y);
        CHECK(D > 0.01);
        CHECK(D < 0.1);
    }
    for (const Vec& y : interior_points(*dom, 50, 4)) CHECK(dom->contains(y));
}

TEST_CASE("finite-difference divergence of simple fields is zero") {
    auto dom = square();
    auto c = constant_field(v2(0.3, -2.0));
    auto h = hyperbolic(1.0);
    for (const Vec& y : {v2(-0.5, 0.5), v2(1.3, 1.7), v2(0.5, -0.2)}) {
        CHECK(std::abs(pointwise_div_fd([&](const Vec& p) { return c->value(p); }, *dom, y, 1e-3)) <= 1e-12);
        CHECK(std::abs(pointwise_div_fd([&](const Vec& p) { return h->value(p); }, *dom, y, 1e-3)) <= 1e-12);
    }
    CHECK_THROWS_AS(pointwise_div_fd([&](const Vec& p) { return c->value(p); }, *dom, v2(-0.01, 0.5), 0.05),
                    VerifyError);
}

TEST_CASE("weak residual of an interior test function vanishes for a solenoidal polynomial") {
    L1Extension e(square(), hyperbolic(1.0));
    const std::vector<TestFunction> tests = {TestFunction(v2(0.5, 0.45), 0.3), TestFunction(v2(0.3, 0.6), 0.2)};
    const auto r = weak_div_residual(e, tests, quick());
    REQUIRE(r.size() == 2);
    for (const WeakResidual& w : r) {
        CHECK(w.residual <= 1e-10);
        CHECK(w.scale > 0);
    }
}

TEST_CASE("weak residual is linear in the field") {
    auto dom = square();
    L1Extension e1(dom, hyperbolic(1.0)), e2(dom, hyperbolic(2.0));
    const std::vector<TestFunction> tests = {TestFunction(v2(1.0, 0.4), 0.15)};
    const auto a = weak_div_residual(e1, tests, quick());
    const auto b = weak_div_residual(e2, tests, quick());
    REQUIRE(a[0].partial.size() == b[0].partial.size());
    CHECK(a[0].partial.size() == 3);
    CHECK(b[0].signed_value == doctest::Approx(2.0 * a[0].signed_value).epsilon(1e-9));
    CHECK(b[0].residual == doctest::Approx(2.0 * a[0].residual).epsilon(1e-9));
    CHECK(b[0].scale == doctest::Approx(2.0 * a[0].scale).epsilon(1e-12));
}

TEST_CASE("weak residual rejects supports beyond theta") {
    L1Extension e(square(), hyperbolic(1.0));
    const std::vector<TestFunction> tests = {TestFunction(v2(1.0, 0.5), 10.0)};
    CHECK_THROWS_AS(weak_div_residual(e, tests, quick()), VerifyError);
}

TEST_CASE("norm ratio is invariant under scaling of the field") {
    auto dom = square();
    L1Extension e1(dom, hyperbolic(1.0)), e2(dom, hyperbolic(3.0));
    for (double p : {1.0, std::numeric_limits<double>::infinity()}) {
        const NormRatio a = norm_ratio(e1, p, 4), b = norm_ratio(e2, p, 4);
        CHECK(a.ratio > 1.0);
        CHECK(b.ratio == doctest::Approx(a.ratio).epsilon(1e-10));
        CHECK(a.nodes > 0);
    }
    CHECK_THROWS_AS(norm_ratio(e1, 3.0, 4), VerifyError);
}

TEST_CASE("strip ratios are finite and positive") {
    L1Extension e(square(), hyperbolic(1.0));
    const auto s = strip_ratios(e, 3, 4, 7);
    REQUIRE(s.size() == 2);
    for (const StripRatio& r : s) {
        CHECK(r.interior > 0);
        CHECK(r.exterior > 0);
        CHECK(std::isfinite(r.ratio));
    }
    CHECK(s[0].delta == 0.125);
    CHECK(s[1].delta == 0.0625);
}

TEST_CASE("interior strip mass of a constant field is the strip area") {
    L1Extension e(square(), constant_field(v2(1.0, 0.0)));
    const auto s = strip_ratios(e, 5, 5, 6);
    // delta/32 < dist < 8 delta inside the unit square, delta = 1/32.
    const double a = 1.0 / 1024, b = 0.25;
    const double expect = (1 - 2 * a) * (1 - 2 * a) - (1 - 2 * b) * (1 - 2 * b);
    CHECK(s[0].interior == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("hull integral of a constant is the hull area") {
    auto c = constant_field(v2(3.0, 4.0));
    std::vector<Vec> pts = {v2(0, 0), v2(1, 0), v2(0.5, 0.5), v2(1, 1), v2(0, 1), v2(0.2, 0.7)};
    CHECK(hull_integral(*c, pts) == doctest::Approx(5.0).epsilon(1e-13));
}

TEST_CASE("per-term samples carry positive hull data") {
    L1Extension e(square(), random_bump_field(2, 4, 11, v2(0, 0), v2(1, 1)));
    const auto s = simplex_term_samples(e, 20, 2, 4, 6);
    REQUIRE(s.size() == 20);
    for (const TermSample& t : s) {
        CHECK(t.tuple.size() == 2);
        CHECK(t.hull_diameter > 0);
        CHECK(t.hull_mass >= 0);
        CHECK(std::isfinite(t.ratio));
    }
}

TEST_CASE("Stokes on flat simplices") {
    const std::vector<Vec> tri = {v2(0.1, 0.2), v2(1.3, -0.4), v2(0.5, 0.9)};
    auto c = constant_field(v2(0.7, -1.1));
    CHECK(std::abs(simplex_boundary_flux(*c, tri, 2)) <= 1e-14);
    Mat I = Mat::Identity(2, 2);
    auto id = linear_field(I, v2(0, 0));
    const double area = 0.5 * std::abs((tri[1] - tri[0])[0] * (tri[2] - tri[0])[1] - (tri[1] - tri[0])[1] * (tri[2] - tri[0])[0]);
    CHECK(simplex_boundary_flux(*id, tri, 2) == doctest::Approx(2 * area).epsilon(1e-13));
    CHECK(stokes_check(*id, tri, 2) <= 1e-13);

    const std::vector<Vec> tet = {Vec(Eigen::Vector3d(0, 0, 0)), Vec(Eigen::Vector3d(1, 0, 0)),
                                  Vec(Eigen::Vector3d(0, 2, 0)), Vec(Eigen::Vector3d(0.3, 0.1, 1.5))};
    auto id3 = linear_field(Mat::Identity(3, 3), Vec(Eigen::Vector3d(0, 0, 0)));
    CHECK(simplex_boundary_flux(*id3, tet, 2) == doctest::Approx(3 * 0.5).epsilon(1e-13));

    for (int n : {2, 3}) {
        const Report r = stokes_suite(n, 25, 9);
        CHECK(r.pass);
        CHECK(r.residuals.size() == 3);
    }
}

TEST_CASE("restriction and support suite passes") {
    L1Extension e(square(), random_bump_field(2, 3, 7, v2(0, 0), v2(1, 1)));
    const Report r = restriction_support_check(e, 200, 50, 1);
    CHECK(r.pass);
    CHECK(r.residuals[0] == 0.0);
    CHECK(r.residuals[1] == 0.0);
}

TEST_CASE("report serialisation writes non-finite numbers as null") {
    Report r;
    r.check = "demo";
    r.residuals = {1.0, std::numeric_limits<double>::quiet_NaN()};
    r.fitted_order = std::numeric_limits<double>::infinity();
    r.pass = false;
    const auto j = r.to_json();
    CHECK(j["check"] == "demo");
    CHECK(j["residuals"][0] == 1.0);
    CHECK(j["residuals"][1].is_null());
    CHECK(j["fitted_order"].is_null());
    CHECK(j["pass"] == false);
}
