#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "dfext/extend_l1.hpp"

using namespace dfext;

namespace {

std::shared_ptr<const Domain> square() {
    return std::make_shared<const Domain>(Domain::rectangle(Vec(Eigen::Vector2d(0, 0)), Vec(Eigen::Vector2d(1, 1))));
}
std::shared_ptr<const Domain> disk() {
    return std::make_shared<const Domain>(Domain::ball(Vec(Eigen::Vector2d(0, 0)), 1.0));
}

Vec v2(double a, double b) { return Vec(Eigen::Vector2d(a, b)); }

CubeKey icube(int level, std::int64_t i, std::int64_t j) {
    CubeKey k;
    k.side = Side::Interior;
    k.level = static_cast<std::int16_t>(level);
    k.idx = {i, j, 0};
    return k;
}

std::vector<Vec> exterior_points(const Domain& dom, int count, std::uint64_t seed, double dmin, double dmax) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec> out;
    while (static_cast<int>(out.size()) < count) {
        Vec y(dom.dim());
        for (int d = 0; d < dom.dim(); ++d)
            y[d] = dom.bbox_lo()[d] - dmax + (dom.bbox_hi()[d] - dom.bbox_lo()[d] + 2 * dmax) * u(rng);
        const double D = -dom.signed_distance(y);
        if (D > dmin && D < dmax) out.push_back(y);
    }
    return out;
}

double fd_divergence(const L1Extension& e, const Vec& y, double h) {
    double s = 0.0;
    for (int d = 0; d < y.size(); ++d) {
        Vec p = y, m = y;
        p[d] += h;
        m[d] -= h;
        s += (e.evaluate(p)[d] - e.evaluate(m)[d]) / (2 * h);
    }
    return s;
}


// Observed order of the central-difference divergence with steps scaled to the
// smallest active cube.  Returns a negative value when the residual is already
// at rounding level relative to field_scale / side.
double divergence_order(const L1Extension& e, const Vec& y, double field_scale) {
    double lmin = 1e300;
    for (const CubeKey& q : e.partition().local(y, 0).cubes) lmin = std::min(lmin, cube_side(q));
    const double r1 = std::abs(fd_divergence(e, y, 2e-3 * lmin));
    const double r3 = std::abs(fd_divergence(e, y, 5e-4 * lmin));
    if (r1 < 1e-9 * field_scale / lmin) return -1.0;
    return std::log2(r1 / r3) / 2.0;
}

}  // namespace

TEST_CASE("support radius formula") {
    CHECK(support_radius(0.25, 4.0, 2) == doctest::Approx(0.5 * (13 * std::sqrt(2.0) / 12 + 4)));
    CHECK(support_radius(0.25, 4.0, 2) == doctest::Approx(2.766).epsilon(1e-3));
    CHECK(support_radius(0.5, 4.0, 2) == doctest::Approx(2 * support_radius(0.25, 4.0, 2)));
    L1Extension e(square(), rotation_field(2));
    CHECK(e.support_radius() == doctest::Approx(support_radius(0.125, 4 * std::sqrt(2.0) + 1, 2)));
}

TEST_CASE("tuple enumeration") {
    std::vector<std::vector<std::size_t>> seen;
    for_each_tuple(3, 2, [&](std::span<const std::size_t> t) { seen.emplace_back(t.begin(), t.end()); });
    REQUIRE(seen.size() == 9);
    CHECK(seen[0] == std::vector<std::size_t>{0, 0});
    CHECK(seen[1] == std::vector<std::size_t>{0, 1});
    CHECK(seen[8] == std::vector<std::size_t>{2, 2});
}

TEST_CASE("constant field: functional equals the flux through the centre simplex") {
    const Vec c = v2(0.7, -1.3);
    L1Extension e(square(), constant_field(c));
    std::array<CubeKey, 2> I = {icube(5, 3, 7), icube(4, 2, 4)};
    const Vec x1 = cube_center(I[0], 2), x2 = cube_center(I[1], 2);
    const Vec nu = x2 - x1;
    CHECK(e.functional_of_images(I) == doctest::Approx(pair(vec_to_form(c), as_kvector(nu))).epsilon(1e-14));

    auto b3 = std::make_shared<const Domain>(Domain::ball(Vec(Eigen::Vector3d(0, 0, 0)), 1.0));
    const Vec c3(Eigen::Vector3d(0.3, -0.2, 1.1));
    ExtensionConfig cfg;
    cfg.outer_order = 1;
    L1Extension e3(b3, constant_field(c3), cfg);
    std::array<CubeKey, 3> J;
    for (int j = 0; j < 3; ++j) {
        J[j].side = Side::Interior;
        J[j].level = 4;
        J[j].idx = {j, 2 * j - 1, 1 - j};
    }
    std::array<Vec, 3> xs = {cube_center(J[0], 3), cube_center(J[1], 3), cube_center(J[2], 3)};
    const double expect = pair(vec_to_form(c3), simplex_normal(xs.data(), 3));
    CHECK(e3.functional_of_images(J) == doctest::Approx(expect).epsilon(1e-14));
    ExtensionConfig cfg2;
    L1Extension e3b(b3, constant_field(c3), cfg2);
    CHECK(e3b.functional_of_images(J) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("linear field: functional matches the closed-form expectation") {
    Mat A(2, 2);
    A << 0.4, -1.2, 0.7, 0.9;
    const Vec b = v2(0.25, -0.5);
    L1Extension e(square(), linear_field(A, b));
    std::array<CubeKey, 2> I = {icube(6, 10, 31), icube(5, 4, 16)};
    const Vec c1 = cube_center(I[0], 2), c2 = cube_center(I[1], 2);
    // f(x1, x2) = (A m + b)^T J d, m = (x1 + x2)/2, d = x2 - x1, J = [[0, 1], [-1, 0]]
    Eigen::Matrix2d J;
    J << 0, 1, -1, 0;
    const Eigen::Vector2d cm = 0.5 * (c1 + c2), cd = c2 - c1;
    const Eigen::Matrix2d A2 = A;
    const double s1 = 0.5 * cube_side(I[0]), s2 = 0.5 * cube_side(I[1]);
    const double var1 = s1 * s1 / 12, var2 = s2 * s2 / 12;
    const double expect = (A2 * cm + Eigen::Vector2d(b)).dot(J * cd) + 0.5 * (var2 - var1) * (A2.transpose() * J).trace();
    CHECK(e.functional_of_images(I) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("degenerate simplices are skipped") {
    auto dom = square();
    SimplexSampler s{dom.get(), SimplexVariant::Flat, 4.0, &simplex_rule(1, 4), nullptr};
    std::array<Vec, 2> same = {v2(0.3, 0.3), v2(0.3, 0.3)};
    int calls = 0;
    CHECK_FALSE(s.visit(same, 1.0, [&](const Vec&, const KVector&) { ++calls; }));
    CHECK(calls == 0);
    std::array<Vec, 2> seg = {v2(0.3, 0.3), v2(0.5, 0.3)};
    KVector total(2, 1);
    CHECK(s.visit(seg, 1.0, [&](const Vec&, const KVector& el) { total += el; }));
    CHECK(total[0] == doctest::Approx(0.2));
    CHECK(total[1] == doctest::Approx(0.0));
}

TEST_CASE("restriction is exact and the extension vanishes beyond theta") {
    for (auto dom : {square(), disk()}) {
        auto u = random_bump_field(2, 4, 3, dom->bbox_lo(), dom->bbox_hi());
        L1Extension e(dom, u);
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        int inside = 0;
        while (inside < 1000) {
            const Vec y = v2(uni(rng), uni(rng));
            if (!dom->contains(y)) continue;
            const Vec a = e.evaluate(y), b = u->value(y);
            CHECK(a[0] == b[0]);
            CHECK(a[1] == b[1]);
            ++inside;
        }
        const double th = e.support_radius();
        for (const Vec& y : exterior_points(*dom, 50, 4, th * 1.0001, th * 1.2)) {
            const Vec v = e.evaluate(y);
            CHECK(v[0] == 0.0);
            CHECK(v[1] == 0.0);
        }
    }
}

TEST_CASE("the unsummed form vanishes beyond theta up to rounding") {
    auto dom = square();
    L1Extension e(dom, rotation_field(2));
    const double th = e.support_radius();
    for (const Vec& y : exterior_points(*dom, 20, 8, th * 1.001, th * 1.3)) CHECK(e.exterior_sum(y).norm() < 1e-12);
}

TEST_CASE("linearity in the field") {
    auto dom = disk();
    auto u = rotation_field(2);
    auto v = random_bump_field(2, 3, 11, dom->bbox_lo(), dom->bbox_hi());
    Mat A(2, 2);
    A << 1.0, 2.0, -0.5, -1.0;
    auto w = linear_field(A, v2(0.0, 0.0));
    L1Extension eu(dom, u), ev(dom, v);
    struct Sum : Field {
        FieldPtr a, b;
        double ca, cb;
        int dim() const override { return 2; }
        Vec value(const Vec& x) const override { return ca * a->value(x) + cb * b->value(x); }
        Mat jacobian(const Vec& x) const override { return ca * a->jacobian(x) + cb * b->jacobian(x); }
        std::string name() const override { return "sum"; }
    };
    auto s = std::make_shared<Sum>();
    s->a = u;
    s->b = v;
    s->ca = 2.5;
    s->cb = -0.75;
    L1Extension es(dom, s);
    for (const Vec& y : exterior_points(*dom, 30, 12, 0.01, 1.5)) {
        const Vec lhs = es.evaluate(y);
        const Vec rhs = 2.5 * eu.evaluate(y) - 0.75 * ev.evaluate(y);
        CHECK((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }
    (void)w;
}

TEST_CASE("exterior finite-difference divergence decays at second order") {
    for (auto dom : {square(), disk()}) {
        ExtensionConfig cfg;
        cfg.simplex_degree = 10;
        L1Extension e(dom, random_bump_field(2, 4, 21, dom->bbox_lo(), dom->bbox_hi()), cfg);
        int measured = 0;
        for (const Vec& y : exterior_points(*dom, 60, 5, 0.02, 1.0)) {
            const double order = divergence_order(e, y, 1.0);
            if (order < 0) continue;
            CHECK(order >= 1.9);
            ++measured;
        }
        CHECK(measured > 0);
    }
}

TEST_CASE("constant field extends to a field of bounded size") {
    auto dom = square();
    L1Extension e(dom, constant_field(v2(1.0, 0.0)));
    double mx = 0.0;
    for (const Vec& y : exterior_points(*dom, 200, 6, 1e-4, 1.0)) mx = std::max(mx, e.evaluate(y).norm());
    CHECK(mx < 100.0);
    CHECK(mx > 0.1);
    // the bound does not degrade as the boundary is approached
    std::vector<double> band_max;
    for (double D : {1e-1, 1e-2, 1e-3, 1e-4}) {
        double m = 0.0;
        for (const Vec& y : exterior_points(*dom, 400, 7, D, 2 * D)) m = std::max(m, e.evaluate(y).norm());
        band_max.push_back(m);
    }
    for (double m : band_max) CHECK(m <= 1.25 * band_max.back());
    CHECK(band_max.back() > 0.1);
}

TEST_CASE("curvilinear and flat functionals agree for solenoidal fields in 2D") {
    auto dom = disk();
    ExtensionConfig flat, curv;
    curv.variant = SimplexVariant::Curvilinear;
    curv.curvilinear_on_convex = true;
    curv.simplex_degree = 12;
    flat.simplex_degree = 12;
    for (FieldPtr u : {constant_field(v2(0.3, -1.0)), rotation_field(2), quadratic_perp_field()}) {
        L1Extension ef(dom, u, flat), ec(dom, u, curv);
        CHECK(ec.config().variant == SimplexVariant::Curvilinear);
        int checked = 0;
        for (const Vec& y : exterior_points(*dom, 30, 31, 0.002, 0.05)) {
            LocalPartition lp = ef.partition().local(y, 0);
            for (std::size_t a = 0; a < lp.cubes.size(); ++a)
                for (std::size_t b = 0; b < lp.cubes.size(); ++b) {
                    std::array<CubeKey, 2> I = {lp.cubes[a], lp.cubes[b]};
                    const double vf = ef.simplex_functional(I), vc = ec.simplex_functional(I);
                    CHECK(std::abs(vf - vc) <= 1e-9 * (std::abs(vf) + cube_side(I[0])));
                    ++checked;
                }
        }
        CHECK(checked > 50);
    }
}

TEST_CASE("curvilinear extension on a non-convex smooth domain") {
    auto rose = std::make_shared<const Domain>(Domain::rose(Eigen::Vector2d(0, 0), 1.0, 0.2, 5));
    CHECK_THROWS_AS(L1Extension(rose, rotation_field(2)), ExtensionError);
    ExtensionConfig cfg;
    cfg.variant = SimplexVariant::Curvilinear;
    cfg.simplex_degree = 8;
    L1Extension e(rose, rotation_field(2), cfg);
    for (const Vec& y : exterior_points(*rose, 10, 41, 0.01, 0.08)) {
        const double order = divergence_order(e, y, 2.0);
        if (order >= 0) CHECK(order >= 1.9);
    }
}

TEST_CASE("convex domain with a curvilinear request falls back to flat with a notice") {
    ExtensionConfig cfg;
    cfg.variant = SimplexVariant::Curvilinear;
    L1Extension e(square(), rotation_field(2), cfg);
    CHECK(e.config().variant == SimplexVariant::Flat);
    REQUIRE(e.notices().size() == 1);
    L1Extension d(disk(), rotation_field(2), cfg);
    CHECK(d.config().variant == SimplexVariant::Flat);
}

TEST_CASE("rebuilt handles give bit-identical values and the cache is deterministic") {
    auto dom = disk();
    auto u = random_bump_field(2, 5, 77, dom->bbox_lo(), dom->bbox_hi());
    L1Extension a(dom, u), b(dom, u);
    for (const Vec& y : exterior_points(*dom, 20, 13, 0.001, 1.0)) {
        const Vec va = a.evaluate(y), vb = b.evaluate(y);
        CHECK(va[0] == vb[0]);
        CHECK(va[1] == vb[1]);
    }
    CHECK(a.cache_size() == b.cache_size());
    CHECK(a.cache_size() > 0);
    CHECK(a.config().hash() == b.config().hash());
    ExtensionConfig c2;
    c2.simplex_degree = 6;
    CHECK(c2.hash() != a.config().hash());
}

TEST_CASE("configuration JSON round trip and validation") {
    ExtensionConfig c;
    c.variant = SimplexVariant::Curvilinear;
    c.outer_order = 3;
    c.simplex_degree = 7;
    ExtensionConfig d = ExtensionConfig::from_json(c.to_json());
    CHECK(d.hash() == c.hash());
    CHECK_THROWS_AS(ExtensionConfig::from_json({{"simplex", "wobbly"}}), ExtensionError);
    CHECK_THROWS_AS(ExtensionConfig::from_json({{"outer_order", 0}}), ExtensionError);
    CHECK_THROWS_AS(ExtensionConfig::from_json({{"allow_monte_carlo", true}}), ExtensionError);
}

TEST_CASE("mollified input on the inner parallel domain") {
    auto dom = disk();
    auto m = mollified_inner(dom, constant_field(v2(2.0, -1.0)), 0.05);
    CHECK(m.domain->signed_distance(v2(0.9, 0.0)) == doctest::Approx(0.05));
    const Vec v = m.field->value(v2(0.3, 0.4));
    CHECK(v[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK_THROWS_AS(mollified_inner(dom, rotation_field(2), 0.0), ExtensionError);
    CHECK_THROWS_AS(mollified_inner(dom, rotation_field(2), 0.9), ExtensionError);

    // mollifying a solenoidal field keeps it solenoidal away from the boundary
    auto r = mollified_inner(dom, rotation_field(2), 0.05);
    const Vec y = v2(0.2, -0.3);
    const double h = 1e-4;
    double div = 0;
    for (int d = 0; d < 2; ++d) {
        Vec p = y, q = y;
        p[d] += h;
        q[d] -= h;
        div += (r.field->value(p)[d] - r.field->value(q)[d]) / (2 * h);
    }
    CHECK(std::abs(div) < 1e-8);
    L1Extension e(r.domain, r.field);
    CHECK(e.evaluate(v2(1.0, 0.0)).norm() > 0.0);
}

TEST_CASE("three-dimensional extension of a rotation field") {
    auto b3 = std::make_shared<const Domain>(Domain::ball(Vec(Eigen::Vector3d(0, 0, 0)), 1.0));
    ExtensionConfig cfg;
    cfg.outer_order = 1;
    cfg.simplex_degree = 4;
    L1Extension e(b3, rotation_field(3, Vec(Eigen::Vector3d(0.2, 0.3, 1.0))), cfg);
    for (const Vec& y : exterior_points(*b3, 4, 43, 0.05, 0.3)) {
        const double order = divergence_order(e, y, 2.0);
        if (order >= 0) CHECK(order >= 1.9);
    }
    CHECK(e.evaluate(Vec(Eigen::Vector3d(0.1, 0.2, 0.3))) == e.field().value(Vec(Eigen::Vector3d(0.1, 0.2, 0.3))));
}
