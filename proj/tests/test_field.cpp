#include "doctest.h"

#include <random>

#include "dfext/field.hpp"

using namespace dfext;

namespace {

Mat fd_jacobian(const Field& f, const Vec& x) {
    const int n = f.dim();
    Mat J(n, n);
    const double h = 1e-6;
    for (int j = 0; j < n; ++j) {
        Vec xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        J.col(j) = (f.value(xp) - f.value(xm)) / (2 * h);
    }
    return J;
}

}  // namespace

TEST_CASE("analytic Jacobians match finite differences and fields are solenoidal") {
    std::vector<FieldPtr> fields = {
        rotation_field(2), rotation_field(3), quadratic_perp_field(), cubic_perp_field(),
        random_bump_field(2, 5, 3, Vec::Zero(2), Vec::Ones(2)), random_bump_field(3, 4, 8, Vec::Zero(3), Vec::Ones(3)),
        cusp_shear_field(2, 2.5), cusp_radial_field(3, 1.5)};
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    for (const auto& f : fields) {
        for (int t = 0; t < 10; ++t) {
            Vec x(f->dim());
            for (int d = 0; d < f->dim(); ++d) x[d] = u(rng);
            Mat J = f->jacobian(x);
            Mat F = fd_jacobian(*f, x);
            CHECK((J - F).norm() < 1e-6 * (1.0 + J.norm()));
            CHECK(std::abs(f->divergence(x)) < 1e-12 * (1.0 + J.norm()));
        }
    }
}

TEST_CASE("non-solenoidal linear field reports its divergence") {
    Mat A = Mat::Identity(2, 2);
    FieldPtr f = linear_field(A, Vec::Zero(2));
    CHECK(f->divergence(Vec::Zero(2)) == doctest::Approx(2.0));
}

TEST_CASE("mollification is exact on constants and preserves divergence-free data") {
    auto dom = std::make_shared<const Domain>(Domain::rectangle(Vec::Zero(2), Vec::Ones(2)));
    Vec c(2);
    c << 1.5, -0.5;
    FieldPtr m = mollified_field(constant_field(c), dom, 0.1);
    Vec x(2);
    x << 0.5, 0.5;
    CHECK((m->value(x) - c).norm() < 1e-14);
    CHECK(m->jacobian(x).norm() < 1e-12);

    FieldPtr s = mollified_field(shear_step_field(2, 0.5), dom, 0.1, 16);
    for (double y : {0.35, 0.45, 0.5, 0.55, 0.65}) {
        x << 0.4, y;
        CHECK(std::abs(s->divergence(x)) < 1e-12);
        CHECK(s->value(x)[0] >= 0.0);
        CHECK(s->value(x)[0] <= 1.0 + 1e-14);
    }
    x << 0.4, 0.3;
    CHECK(s->value(x)[0] == doctest::Approx(0.0));
    x << 0.4, 0.5;
    CHECK(s->value(x)[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("field json factory") {
    FieldPtr f = field_from_json({{"type", "rotation"}, {"dim", 2}});
    Vec x(2);
    x << 1, 0;
    CHECK(f->value(x)[1] == doctest::Approx(1.0));
    FieldPtr g = field_from_json({{"type", "random_bumps"}, {"dim", 2}, {"count", 3}, {"seed", 5}});
    FieldPtr h = field_from_json({{"type", "random_bumps"}, {"dim", 2}, {"count", 3}, {"seed", 5}});
    CHECK((g->value(x) - h->value(x)).norm() == 0.0);
    CHECK_THROWS_AS(field_from_json({{"type", "nope"}}), FieldError);
}
