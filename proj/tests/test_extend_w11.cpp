#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "dfext/extend_w11.hpp"

using namespace dfext;

namespace {

std::shared_ptr<const Domain> square() {
    return std::make_shared<const Domain>(Domain::rectangle(Vec(Eigen::Vector2d(0, 0)), Vec(Eigen::Vector2d(1, 1))));
}
std::shared_ptr<const Domain> cube3() {
    return std::make_shared<const Domain>(
        Domain::rectangle(Vec(Eigen::Vector3d(0, 0, 0)), Vec(Eigen::Vector3d(1, 1, 1))));
}

Vec v2(double a, double b) { return Vec(Eigen::Vector2d(a, b)); }

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

double fd_step(const W11Extension& e, const Vec& y) {
    double lmin = 1e300;
    for (const auto& q : e.partition().local(y, 0).cubes) lmin = std::min(lmin, cube_side(q));
    return 1e-4 * lmin;
}

W11Config quiet() {
    W11Config c;
    c.self_check = false;
    return c;
}

// A field whose Jacobian is not the derivative of its values.
class InconsistentField : public Field {
public:
    int dim() const override { return 2; }
    Vec value(const Vec& x) const override { return v2(x[0], -x[1]); }
    Mat jacobian(const Vec&) const override {
        Mat J = Mat::Zero(2, 2);
        J(0, 1) = 1.0;
        return J;
    }
    std::string name() const override { return "inconsistent"; }
};

}  // namespace

TEST_CASE("assembly coefficients") {
    CHECK(telescoping_coefficient(2, 1) == -1.0);
    CHECK(printed_coefficient(2, 1) == -1.0);
    CHECK(telescoping_coefficient(3, 1) == -0.5);
    CHECK(telescoping_coefficient(3, 2) == -1.0);
    CHECK(printed_coefficient(3, 1) == -0.5);
    CHECK(printed_coefficient(3, 2) == 0.5);
    W11Extension e(square(), rotation_field(2), quiet());
    REQUIRE(e.coefficients().size() == 1);
    CHECK(e.coefficients()[0] == -1.0);
}

TEST_CASE("Jones part: restriction, constants, cutoff and linearity") {
    auto dom = square();
    const Vec c = v2(0.4, -1.1);
    W11Extension e(dom, constant_field(c), quiet());
    const double th = e.support_radius();
    CHECK(e.cutoff(v2(0.5, 0.5)) == 1.0);
    CHECK(e.cutoff(v2(1.0 + 0.9 * th, 0.5)) == 1.0);
    CHECK(e.cutoff(v2(1.0 + 2.1 * th, 0.5)) == 0.0);
    const double mid = e.cutoff(v2(1.0 + 1.5 * th, 0.5));
    CHECK(mid > 0.0);
    CHECK(mid < 1.0);
    for (const Vec& y : exterior_points(*dom, 100, 3, 1e-4, 0.9 * th)) CHECK((e.jones_E0(y) - c).norm() < 1e-13);
    CHECK(e.jones_E0(v2(1.0 + 2.5 * th, 0.3)).norm() == 0.0);
    CHECK(e.jones_E0(v2(0.3, 0.6)) == c);

    // averages are linear in the field
    Mat A1(2, 2), A2(2, 2);
    A1 << 0.3, -1.0, 0.5, 0.2;
    A2 << -0.7, 0.4, 0.1, 0.9;
    const Vec b1 = v2(0.2, 0.0), b2 = v2(-0.5, 1.0);
    W11Extension ea(dom, linear_field(A1, b1), quiet()), eb(dom, linear_field(A2, b2), quiet()),
        eab(dom, linear_field(A1 + A2, b1 + b2), quiet());
    for (const Vec& y : exterior_points(*dom, 30, 4, 1e-3, 1.0)) {
        const Vec sum = ea.jones_E0(y) + eb.jones_E0(y);
        CHECK((eab.jones_E0(y) - sum).norm() <= 1e-12 * (1.0 + sum.norm()));
    }
}

TEST_CASE("constant fields have vanishing correctors") {
    W11Extension e(square(), constant_field(v2(1.0, 2.0)), quiet());
    for (const Vec& y : exterior_points(e.domain(), 50, 5, 1e-3, 0.5)) {
        CHECK(e.corrector_R(1, y).norm() == 0.0);
        CHECK(e.corrector_S(1, y).norm() == 0.0);
        CHECK(e.corrector_S(2, y).norm() == 0.0);
    }
    CHECK_THROWS_AS(e.corrector_R(0, v2(1.2, 0.5)), ExtensionError);
    CHECK_THROWS_AS(e.corrector_R(2, v2(1.2, 0.5)), ExtensionError);
    CHECK_THROWS_AS(e.corrector_S(3, v2(1.2, 0.5)), ExtensionError);
}

TEST_CASE("correctors vanish on the domain and fade at the boundary") {
    W11Extension e(square(), quadratic_perp_field(), quiet());
    CHECK(e.corrector_R(1, v2(0.5, 0.5)).norm() == 0.0);
    CHECK(e.corrector_S(2, v2(0.0, 0.5)).norm() == 0.0);
    std::vector<double> mx;
    for (double D : {1e-2, 1e-3, 1e-4}) {
        double m = 0.0;
        for (const Vec& y : exterior_points(e.domain(), 200, 6, D, 2 * D)) m = std::max(m, e.corrector_R(1, y).norm());
        mx.push_back(m);
    }
    CHECK(mx[0] > 0.0);
    CHECK(mx[1] < 0.5 * mx[0]);
    CHECK(mx[2] < 0.5 * mx[1]);
}

TEST_CASE("S_n vanishes for linear solenoidal fields") {
    Mat A(2, 2);
    A << 0.7, 1.3, -0.4, -0.7;
    W11Extension e(square(), linear_field(A, v2(0.2, 0.1)), quiet());
    int nonzero = 0;
    for (const Vec& y : exterior_points(e.domain(), 300, 7, 1e-3, 0.5)) {
        const double s2 = e.corrector_S(2, y)[0];
        const double s1 = e.corrector_S(1, y)[0];
        CHECK(std::abs(s2) <= 1e-12 * (1.0 + std::abs(s1)));
        if (std::abs(s1) > 1e-8) ++nonzero;
    }
    CHECK(nonzero > 10);
}

TEST_CASE("identity suite in two dimensions") {
    for (FieldPtr u : {random_bump_field(2, 4, 21, v2(0, 0), v2(1, 1)), quadratic_perp_field()}) {
        W11Extension e(square(), u);
        REQUIRE(e.calibration().identities.size() == 2);
        for (const auto& c : e.calibration().identities) CHECK(c.pass);
        const double th = e.support_radius();
        int active = 0;
        for (const Vec& y : exterior_points(e.domain(), 200, 8, 1e-3, 0.9 * th)) {
            const double h = fd_step(e, y);
            const double dE0 = fd_exterior_derivative([&](const Vec& p) { return vec_to_form(e.jones_E0(p)); }, y, h, true);
            const double dR1 = fd_exterior_derivative([&](const Vec& p) { return e.corrector_R(1, p); }, y, h, true);
            const double dE = fd_exterior_derivative([&](const Vec& p) { return vec_to_form(e.assemble(p)); }, y, h, true);
            const double s1 = e.corrector_S(1, y)[0], s2 = e.corrector_S(2, y)[0];
            CHECK(std::abs(dE0 - s1) <= 1e-4);
            CHECK(std::abs(dR1 - (s1 - s2)) <= 1e-4);
            CHECK(std::abs(s2) <= 1e-6);
            CHECK(std::abs(dE) <= 1e-5);
            if (std::abs(s1) > 1e-3) ++active;
        }
        CHECK(active > 10);
    }
}

TEST_CASE("non-solenoidal fields: the assembled divergence equals S_n") {
    Mat A(2, 2);
    A << 1.0, 0.3, 0.2, 0.5;
    W11Extension e(square(), linear_field(A, v2(0.1, -0.2)));
    int active = 0;
    for (const Vec& y : exterior_points(e.domain(), 400, 9, 1e-3, 0.5)) {
        const double h = fd_step(e, y);
        const double dE = fd_exterior_derivative([&](const Vec& p) { return vec_to_form(e.assemble(p)); }, y, h, true);
        const double s2 = e.corrector_S(2, y)[0];
        CHECK(std::abs(dE - s2) <= 1e-6 * (1.0 + std::abs(s2)));
        if (std::abs(s2) > 1e-3) ++active;
    }
    CHECK(active > 5);
}

TEST_CASE("assembled extension of a solenoidal field: divergence decays at second order") {
    W11Extension e(square(), quadratic_perp_field());
    int measured = 0;
    for (const Vec& y : exterior_points(e.domain(), 60, 10, 0.01, 0.5)) {
        const double h = fd_step(e, y);
        auto fd = [&](double s) {
            return std::abs(fd_exterior_derivative([&](const Vec& p) { return vec_to_form(e.assemble(p)); }, y, s, false));
        };
        const double r1 = fd(20 * h), r3 = fd(5 * h);
        if (r1 < 1e-9 / (h * 1e4)) continue;
        CHECK(std::log2(r1 / r3) / 2.0 >= 1.9);
        ++measured;
    }
    CHECK(measured > 0);
}

TEST_CASE("three dimensions: telescoping assembly passes, printed residual is reported") {
    W11Config cfg;
    cfg.base.outer_order = 1;
    Mat A(3, 3);
    A << 0.5, 0.2, -0.1, 0.3, -0.2, 0.4, 0.1, 0.6, -0.3;  // trace 0
    W11Extension e(cube3(), linear_field(A, Vec(Eigen::Vector3d(0.1, 0.2, 0.3))), cfg);
    const auto& rep = e.calibration();
    REQUIRE(rep.identities.size() == 3);
    for (const auto& c : rep.identities) CHECK(c.pass);
    CHECK(rep.telescoping_residual < 1e-5);
    CHECK(std::isfinite(rep.printed_residual));
    REQUIRE(e.coefficients().size() == 2);
    CHECK(e.coefficients()[0] == -0.5);
    CHECK(e.coefficients()[1] == -1.0);
    const double th = e.support_radius();
    for (const Vec& y : exterior_points(e.domain(), 20, 11, 1e-2, 0.5 * th)) {
        const double h = fd_step(e, y);
        const double dE0 = fd_exterior_derivative([&](const Vec& p) { return vec_to_form(e.jones_E0(p)); }, y, h, true);
        const double s1 = e.corrector_S(1, y)[0], s2 = e.corrector_S(2, y)[0], s3 = e.corrector_S(3, y)[0];
        CHECK(std::abs(dE0 - s1) <= 1e-4);
        for (int k = 1; k <= 2; ++k) {
            const double dR = fd_exterior_derivative([&](const Vec& p) { return e.corrector_R(k, p); }, y, h, true);
            const double rhs = (3 - k) * (k == 1 ? s1 - s2 : s2 - s3);
            CHECK(std::abs(dR - rhs) <= 1e-4 * (1.0 + std::abs(rhs)));
        }
        CHECK(std::abs(s3) <= 1e-6);
        const double dE = fd_exterior_derivative([&](const Vec& p) { return vec_to_form(e.assemble(p)); }, y, h, true);
        CHECK(std::abs(dE) <= 1e-5);
    }
}

TEST_CASE("printed coefficients can be selected") {
    W11Config cfg;
    cfg.coefficients = CoefficientSet::Printed;
    cfg.self_check = false;
    W11Extension e(square(), rotation_field(2), cfg);
    CHECK(e.coefficients()[0] == -1.0);
    const nlohmann::json j = cfg.to_json();
    CHECK(j["coefficients"] == "printed");
    CHECK(W11Config::from_json(j).coefficients == CoefficientSet::Printed);
    CHECK_THROWS_AS(W11Config::from_json({{"coefficients", "other"}}), ExtensionError);
}

TEST_CASE("self-check failure names the identity index") {
    try {
        W11Extension e(square(), std::make_shared<InconsistentField>());
        FAIL("expected a calibration error");
    } catch (const CalibrationError& err) {
        CHECK(err.failing_k() == 0);
        CHECK(std::string(err.what()).find("k = 0") != std::string::npos);
    }
}

TEST_CASE("unsupported domains are rejected") {
    auto rose = std::make_shared<const Domain>(Domain::rose(Eigen::Vector2d(0, 0), 1.0, 0.2, 5));
    CHECK_THROWS_AS(W11Extension(rose, rotation_field(2)), ExtensionError);
    W11Config cfg;
    cfg.base.variant = SimplexVariant::Curvilinear;
    cfg.self_check = false;
    W11Extension e(square(), rotation_field(2), cfg);
    CHECK_FALSE(e.notices().empty());
}
