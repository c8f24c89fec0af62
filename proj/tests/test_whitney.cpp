#include "doctest.h"

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "dfext/whitney.hpp"

using namespace dfext;

namespace {

std::shared_ptr<const Domain> unit_square() {
    return std::make_shared<const Domain>(Domain::rectangle(Vec(Eigen::Vector2d(0, 0)), Vec(Eigen::Vector2d(1, 1))));
}

std::shared_ptr<const Domain> unit_disk() {
    return std::make_shared<const Domain>(Domain::ball(Vec(Eigen::Vector2d(0, 0)), 1.0));
}

CubeKey key2(Side s, int level, std::int64_t i, std::int64_t j) {
    CubeKey k;
    k.side = s;
    k.level = static_cast<std::int16_t>(level);
    k.idx = {i, j, 0};
    return k;
}

// Exhaustive search over every level for the member containing y.
std::optional<CubeKey> brute_locate(const WhitneyCover& w, const Vec& y, Side s) {
    std::optional<CubeKey> hit;
    int count = 0;
    for (int L = w.coarsest_level(s); L <= 30; ++L) {
        CubeKey k = key2(s, L, static_cast<std::int64_t>(std::floor(std::ldexp(y[0], L))),
                         static_cast<std::int64_t>(std::floor(std::ldexp(y[1], L))));
        if (w.is_member(k)) {
            hit = k;
            ++count;
        }
    }
    CHECK(count <= 1);
    return hit;
}

std::vector<CubeKey> brute_blowups(const WhitneyCover& w, const Vec& y) {
    std::vector<CubeKey> out;
    for (int L = w.coarsest_level(Side::Exterior); L <= 24; ++L) {
        const std::int64_t i0 = static_cast<std::int64_t>(std::floor(std::ldexp(y[0], L)));
        const std::int64_t j0 = static_cast<std::int64_t>(std::floor(std::ldexp(y[1], L)));
        for (std::int64_t i = i0 - 2; i <= i0 + 2; ++i)
            for (std::int64_t j = j0 - 2; j <= j0 + 2; ++j) {
                CubeKey k = key2(Side::Exterior, L, i, j);
                if (blowup_contains(k, 2, y) && w.is_member(k)) out.push_back(k);
            }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST_CASE("unit square anchor and constants") {
    WhitneyCover w(unit_square());
    CHECK(w.anchor() == key2(Side::Interior, 3, 2, 2));
    CHECK(w.eta() == doctest::Approx(0.125));
    CHECK(w.whitney_constant() == doctest::Approx(4 * std::sqrt(2.0) + 1));
    CHECK(w.theta() == doctest::Approx(0.25 * (13 * std::sqrt(2.0) / 12 + 4 * std::sqrt(2.0) + 1)));
    CHECK(w.coarsest_level(Side::Exterior) == 0);
}

TEST_CASE("cube geometry helpers") {
    CubeKey k = key2(Side::Interior, 2, 1, -1);
    CHECK(cube_side(k) == 0.25);
    Vec c = cube_center(k, 2);
    CHECK(c[0] == doctest::Approx(0.375));
    CHECK(c[1] == doctest::Approx(-0.125));
    CHECK(blowup_contains(k, 2, Vec(Eigen::Vector2d(0.375 + 0.14, -0.125))));
    CHECK_FALSE(blowup_contains(k, 2, Vec(Eigen::Vector2d(0.375 + 0.15, -0.125))));
    CHECK(cube_distance(k, key2(Side::Interior, 2, 3, -1), 2) == doctest::Approx(0.25));
    CHECK(cube_distance(k, key2(Side::Interior, 3, 4, 0), 2) == doctest::Approx(0.0));
    CHECK(cube_label(k, 2) == "I:2:1:-1");
}

TEST_CASE("membership of a specific cube in the unit square") {
    WhitneyCover w(unit_square());
    // level 5 cube near the left edge: centre depth 5/64, diam sqrt(2)/32
    CubeKey k = key2(Side::Interior, 5, 2, 10);
    CHECK(w.center_depth(k) == doctest::Approx(5.0 / 64));
    CHECK(w.is_candidate(k));
    CHECK(w.is_member(k));
    // its parent is too close to the boundary to be a candidate
    CHECK_FALSE(w.is_candidate(key2(Side::Interior, 4, 1, 5)));
    // a child of a member is never a member
    CHECK(w.is_candidate(key2(Side::Interior, 6, 5, 21)));
    CHECK_FALSE(w.is_member(key2(Side::Interior, 6, 5, 21)));
}

TEST_CASE("locate agrees with exhaustive search") {
    for (auto dom : {unit_square(), unit_disk()}) {
        WhitneyCover w(dom);
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(-1.6, 1.6);
        int tested = 0;
        for (int s = 0; s < 400; ++s) {
            Vec y(Eigen::Vector2d(u(rng), u(rng)));
            const double sd = dom->signed_distance(y);
            if (std::abs(sd) < 1e-6) continue;
            const Side side = sd > 0 ? Side::Interior : Side::Exterior;
            auto a = w.locate(y, side);
            auto b = brute_locate(w, y, side);
            REQUIRE(a.has_value());
            REQUIRE(b.has_value());
            CHECK(*a == *b);
            CHECK_FALSE(w.locate(y, side == Side::Interior ? Side::Exterior : Side::Interior).has_value());
            ++tested;
        }
        CHECK(tested > 300);
    }
}

TEST_CASE("points very close to the boundary are located at deep levels") {
    WhitneyCover w(unit_square());
    auto k = w.locate(Vec(Eigen::Vector2d(1.0 + 1e-9, 0.5)), Side::Exterior);
    REQUIRE(k.has_value());
    CHECK(k->level >= 28);
    CHECK(w.is_member(*k));
}

TEST_CASE("blow-up neighbours agree with exhaustive search") {
    for (auto dom : {unit_square(), unit_disk()}) {
        WhitneyCover w(dom);
        std::vector<Vec> pts = {Vec(Eigen::Vector2d(1.01, 1.02)), Vec(Eigen::Vector2d(1.3, -0.2)),
                                Vec(Eigen::Vector2d(-0.05, 0.5)), Vec(Eigen::Vector2d(0.5, 1.0001)),
                                Vec(Eigen::Vector2d(1.0 + 1e-5, 1.0 + 2e-5))};
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(-1.8, 1.8);
        while (pts.size() < 60) {
            Vec y(Eigen::Vector2d(u(rng), u(rng)));
            if (dom->signed_distance(y) < -1e-4) pts.push_back(y);
        }
        for (const Vec& y : pts) {
            if (dom->signed_distance(y) >= 0) continue;
            auto a = w.blowup_neighbors(y);
            auto b = brute_blowups(w, y);
            CHECK(a == b);
            CHECK(!a.empty());
            CHECK(a.size() <= 12);
        }
        CHECK(w.blowup_neighbors(Vec(Eigen::Vector2d(0.5, 0.25))).empty());
    }
}

TEST_CASE("materialised covers satisfy the Whitney and reflection invariants") {
    const double perimeters[] = {4.0, 2.0 * M_PI};
    int which = 0;
    for (auto dom : {unit_square(), unit_disk()}) {
        WhitneyCover w(dom);
        const double perimeter = perimeters[which++];
        CoverList in = w.build(Side::Interior, 8);
        CoverList ex = w.build(Side::Exterior, 8);
        CHECK(in.cubes.size() > 50);
        CHECK(ex.cubes.size() > 50);
        CHECK(in.deficit_cubes > 0);
        // unresolved cubes lie in a band of width 3 diam(level 8) around the boundary
        CHECK(in.deficit_measure < 1.05 * perimeter * 3.0 * std::sqrt(2.0) / 256);
        for (const auto& k : in.cubes) CHECK(w.is_member(k));
        for (const auto& k : ex.cubes) CHECK(w.is_member(k));
        InvariantReport rep = w.check_invariants(in, ex, 2000, 3);
        for (const auto& m : rep.messages) MESSAGE(m);
        CHECK(rep.ok);
        CHECK(rep.w3_lo >= 1.0 / rep.w3_c);
        CHECK(rep.w3_hi <= rep.w3_c);
        CHECK(rep.max_overlap <= 12);
        CHECK(rep.psi_size_lo >= 0.25);
        CHECK(rep.psi_size_hi <= 4.0);
        CHECK(rep.psi_sep_lo > 0.0);
        CHECK(rep.psi_dist_c < 40.0);
    }
}

TEST_CASE("neighbour relation is symmetric and reflexive") {
    WhitneyCover w(unit_disk());
    CoverList in = w.build(Side::Interior, 7);
    for (std::size_t i = 0; i < in.cubes.size(); i += 7) {
        auto nb = w.neighbors(in, i);
        CHECK(std::binary_search(nb.begin(), nb.end(), i));
        for (std::size_t j : nb) {
            auto back = w.neighbors(in, j);
            CHECK(std::binary_search(back.begin(), back.end(), i));
            // neighbours have comparable size
            CHECK(std::abs(in.cubes[i].level - in.cubes[j].level) <= 2);
        }
    }
}

TEST_CASE("reflection of large exterior cubes is the anchor") {
    WhitneyCover w(unit_square());
    CoverList ex = w.build(Side::Exterior, 6);
    int large = 0;
    for (const auto& k : ex.cubes)
        if (cube_side(k) > w.eta()) {
            CHECK(w.reflect(k) == w.anchor());
            ++large;
        }
    CHECK(large > 0);
    CHECK_THROWS_AS(w.reflect(w.anchor()), CoverError);
}

TEST_CASE("reflection mirrors across a flat edge") {
    WhitneyCover w(unit_square());
    // exterior point right of x1 = 1, mirrored to the interior
    Vec y(Eigen::Vector2d(1.05, 0.5));
    auto q = w.locate(y, Side::Exterior);
    REQUIRE(q.has_value());
    CubeKey p = w.reflect(*q);
    CHECK(p.side == Side::Interior);
    const Vec cq = cube_center(*q, 2);
    const Vec target(Eigen::Vector2d(2.0 - cq[0], cq[1]));
    auto direct = w.locate(target, Side::Interior);
    REQUIRE(direct.has_value());
    CHECK(p == *direct);
    CHECK(std::abs(p.level - q->level) <= 2);
    CHECK(w.reflect(*q) == p);  // cached
}

TEST_CASE("CSV output") {
    WhitneyCover w(unit_square());
    CoverList ex = w.build(Side::Exterior, 5);
    std::ostringstream os;
    w.write_csv(os, ex);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "side,level,i0,i1,side_length,dist_to_boundary,psi_target");
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        CHECK(line.rfind("E,", 0) == 0);
        CHECK(line.find(",I:") != std::string::npos);
        ++rows;
    }
    CHECK(rows == ex.cubes.size());
}

TEST_CASE("three-dimensional ball cover") {
    auto dom = std::make_shared<const Domain>(Domain::ball(Vec(Eigen::Vector3d(0, 0, 0)), 1.0));
    WhitneyCover w(dom);
    CoverList in = w.build(Side::Interior, 5);
    CoverList ex = w.build(Side::Exterior, 5);
    InvariantReport rep = w.check_invariants(in, ex, 300, 5);
    for (const auto& m : rep.messages) MESSAGE(m);
    CHECK(rep.ok);
    Vec y(Eigen::Vector3d(0.7, 0.8, 0.1));
    auto nb = w.blowup_neighbors(y);
    CHECK(!nb.empty());
    for (const auto& k : nb) CHECK(blowup_contains(k, 3, y));
}

TEST_CASE("invalid construction") {
    CHECK_THROWS_AS(WhitneyCover(nullptr), CoverError);
    WhitneyOptions o;
    o.max_level = 100;
    CHECK_THROWS_AS(WhitneyCover(unit_square(), o), CoverError);
}
