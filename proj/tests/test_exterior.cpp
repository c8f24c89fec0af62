#include "doctest.h"

#include <random>

#include <Eigen/Dense>

#include "dfext/exterior.hpp"

using namespace dfext;

namespace {

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}
Vec v3(double a, double b, double c) {
    Vec v(3);
    v << a, b, c;
    return v;
}

KForm random_form(std::mt19937_64& rng, int n, int k) {
    std::uniform_real_distribution<double> u(-1, 1);
    KForm f(n, k);
    for (int j = 0; j < f.size(); ++j) f[j] = u(rng);
    return f;
}

}  // namespace

TEST_CASE("basis ordering is lexicographic") {
    CHECK(binomial(3, 2) == 3);
    CHECK(basis_mask(3, 2, 0) == 0b011u);
    CHECK(basis_mask(3, 2, 1) == 0b101u);
    CHECK(basis_mask(3, 2, 2) == 0b110u);
    CHECK(basis_index(3, 0b110u) == 2);
    CHECK(basis_index(2, 0b11u) == 0);
}

TEST_CASE("wedge of a covector with itself vanishes") {
    KForm dx1 = KForm::basis(2, 0b01);
    KForm w = wedge(dx1, dx1);
    CHECK(w.k == 2);
    CHECK(w[0] == 0.0);
}

TEST_CASE("(dx1 + dx2) ^ dx2 = dx1 ^ dx2") {
    KForm a = KForm::basis(2, 0b01) + KForm::basis(2, 0b10);
    KForm w = wedge(a, KForm::basis(2, 0b10));
    CHECK(w[0] == doctest::Approx(1.0));
}

TEST_CASE("dx2 ^ dx1 = -dx1 ^ dx2 and 3D sign table") {
    CHECK(wedge(KForm::basis(2, 0b10), KForm::basis(2, 0b01))[0] == doctest::Approx(-1.0));
    // dx3 ^ dx1 = dx1 ^ dx3 * (-1)
    KForm w = wedge(KForm::basis(3, 0b100), KForm::basis(3, 0b001));
    CHECK(w.at_mask(0b101) == doctest::Approx(-1.0));
    // dx2 ^ (dx1 ^ dx3) = -dx1 ^ dx2 ^ dx3
    KForm v = wedge(KForm::basis(3, 0b010), KForm::basis(3, 0b101));
    CHECK(v[0] == doctest::Approx(-1.0));
}

TEST_CASE("grade overflow throws") {
    CHECK_THROWS_AS(wedge(KForm::basis(2, 0b11), KForm::basis(2, 0b01)), AlgebraError);
    CHECK_THROWS_AS(KForm(4, 1), AlgebraError);
}

TEST_CASE("graded anticommutativity and associativity on random forms") {
    std::mt19937_64 rng(7);
    for (int n = 2; n <= 3; ++n)
        for (int k = 0; k <= n; ++k)
            for (int l = 0; k + l <= n; ++l) {
                KForm a = random_form(rng, n, k), b = random_form(rng, n, l);
                KForm ab = wedge(a, b), ba = wedge(b, a);
                const double s = ((k * l) % 2) ? -1.0 : 1.0;
                for (int j = 0; j < ab.size(); ++j) CHECK(ab[j] == doctest::Approx(s * ba[j]).epsilon(1e-14));
                for (int m = 0; k + l + m <= n; ++m) {
                    KForm c = random_form(rng, n, m);
                    KForm x = wedge(wedge(a, b), c), y = wedge(a, wedge(b, c));
                    for (int j = 0; j < x.size(); ++j) CHECK(x[j] == doctest::Approx(y[j]).epsilon(1e-13));
                }
            }
}

TEST_CASE("simplex normal of the reference triangle") {
    Vec pts[3] = {v2(0, 0), v2(1, 0), v2(0, 1)};
    KVector nu = simplex_normal(pts, 3);
    CHECK(nu.k == 2);
    CHECK(nu[0] == doctest::Approx(-0.5));
    // one point gives the scalar 1
    CHECK(simplex_normal(pts, 1)[0] == 1.0);
    // segment normal is the difference vector
    KVector e = simplex_normal(pts, 2);
    CHECK(e[0] == doctest::Approx(1.0));
    CHECK(e[1] == doctest::Approx(0.0));
}

TEST_CASE("simplex normal norm equals the Gram volume") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 50; ++trial) {
        Vec p[3] = {v3(u(rng), u(rng), u(rng)), v3(u(rng), u(rng), u(rng)), v3(u(rng), u(rng), u(rng))};
        KVector nu = simplex_normal(p, 3);
        Eigen::Vector3d a(p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]);
        Eigen::Vector3d b(p[2][0] - p[0][0], p[2][1] - p[0][1], p[2][2] - p[0][2]);
        CHECK(nu.norm() == doctest::Approx(0.5 * a.cross(b).norm()).epsilon(1e-12));
        Vec q[4] = {p[0], p[1], p[2], v3(u(rng), u(rng), u(rng))};
        KVector vol = simplex_normal(q, 4);
        Eigen::Matrix3d M;
        for (int c = 0; c < 3; ++c) M.col(c) << q[c + 1][0] - q[0][0], q[c + 1][1] - q[0][1], q[c + 1][2] - q[0][2];
        CHECK(std::abs(vol[0]) == doctest::Approx(std::abs(M.determinant()) / 6.0).epsilon(1e-12));
    }
}

TEST_CASE("vector to (n-1)-form conversion") {
    KForm w = vec_to_form(v2(1, 0));
    CHECK(w.k == 1);
    CHECK(w.at_mask(0b10) == doctest::Approx(1.0));   // e1 -> dx2
    KForm z = vec_to_form(v2(0, 1));
    CHECK(z.at_mask(0b01) == doctest::Approx(-1.0));  // e2 -> -dx1
    KForm t = vec_to_form(v3(0, 1, 0));
    CHECK(t.at_mask(0b101) == doctest::Approx(-1.0)); // e2 -> -dx1 ^ dx3
    Vec back = form_to_vec(vec_to_form(v3(0.3, -2.0, 5.0)));
    CHECK(back[0] == doctest::Approx(0.3));
    CHECK(back[1] == doctest::Approx(-2.0));
    CHECK(back[2] == doctest::Approx(5.0));
}

TEST_CASE("flux pairing across a segment is u . R(-90) (b - a)") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        Vec a = v2(u(rng), u(rng)), b = v2(u(rng), u(rng)), f = v2(u(rng), u(rng));
        Vec pts[2] = {a, b};
        const double got = pair(vec_to_form(f), simplex_normal(pts, 2));
        const Vec d = b - a;
        CHECK(got == doctest::Approx(f[0] * d[1] - f[1] * d[0]).epsilon(1e-14));
    }
}

TEST_CASE("interior product and contraction") {
    // dx_1 -| (e1 ^ e2) = e2, dx_2 -| (e1 ^ e2) = -e1
    KVector e12 = KVector::basis(2, 0b11);
    KVector a = interior(0, e12), b = interior(1, e12);
    CHECK(a.at_mask(0b10) == doctest::Approx(1.0));
    CHECK(b.at_mask(0b01) == doctest::Approx(-1.0));
    // (dx1 ^ dx2)(e1, .) = dx2
    KForm c = contract(KVector::basis(2, 0b01), KForm::basis(2, 0b11));
    CHECK(c.at_mask(0b10) == doctest::Approx(1.0));
    KForm d = contract(KVector::basis(2, 0b10), KForm::basis(2, 0b11));
    CHECK(d.at_mask(0b01) == doctest::Approx(-1.0));
    // full contraction equals pairing
    std::mt19937_64 rng(5);
    KForm w = random_form(rng, 3, 2);
    KVector x(3, 2);
    x[0] = 0.4;
    x[1] = -1.1;
    x[2] = 2.0;
    CHECK(contract(x, w)[0] == doctest::Approx(pair(w, x)));
}
