#include "dfext/whitney.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <string>
#include <unordered_set>

namespace dfext {
namespace {

// Candidate band for the centre distance, in units of the cube diameter.
constexpr double kLower = 1.5;
constexpr double kUpper = 4.5;
constexpr double kBlow = 7.0 / 12.0;  // half-width of the 7/6 blow-up in units of the side

int floor_log2(double x) { return static_cast<int>(std::floor(std::log2(x))); }
int ceil_log2(double x) { return static_cast<int>(std::ceil(std::log2(x))); }

std::int64_t index_of(double y, int level) { return static_cast<std::int64_t>(std::floor(std::ldexp(y, level))); }

void append_double(std::string& s, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    s.append(buf, res.ptr);
}

CubeKey parent(const CubeKey& k) {
    CubeKey p = k;
    p.level = static_cast<std::int16_t>(k.level - 1);
    for (auto& i : p.idx) i >>= 1;  // arithmetic shift floors negative indices
    return p;
}

}  // namespace

std::size_t CubeKeyHash::operator()(const CubeKey& k) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    };
    mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(k.side)));
    mix(static_cast<std::uint64_t>(k.level));
    for (auto i : k.idx) mix(static_cast<std::uint64_t>(i));
    return static_cast<std::size_t>(h);
}

double cube_side(const CubeKey& k) { return std::ldexp(1.0, -k.level); }

Vec cube_center(const CubeKey& k, int n) {
    Vec c(n);
    const double l = cube_side(k);
    for (int d = 0; d < n; ++d) c[d] = (static_cast<double>(k.idx[d]) + 0.5) * l;
    return c;
}

double cube_diam(const CubeKey& k, int n) { return std::sqrt(static_cast<double>(n)) * cube_side(k); }

Box cube_box(const CubeKey& k, int n) { return Box{cube_center(k, n), cube_side(k)}; }

bool blowup_contains(const CubeKey& k, int n, const Vec& y, double lambda) {
    const double l = cube_side(k);
    const double h = 0.5 * lambda * l;
    for (int d = 0; d < n; ++d) {
        const double c = (static_cast<double>(k.idx[d]) + 0.5) * l;
        if (!(std::abs(y[d] - c) < h)) return false;
    }
    return true;
}

double cube_distance(const CubeKey& a, const CubeKey& b, int n) {
    const double la = cube_side(a), lb = cube_side(b);
    double s = 0.0;
    for (int d = 0; d < n; ++d) {
        const double a0 = static_cast<double>(a.idx[d]) * la, a1 = a0 + la;
        const double b0 = static_cast<double>(b.idx[d]) * lb, b1 = b0 + lb;
        const double gap = std::max({0.0, b0 - a1, a0 - b1});
        s += gap * gap;
    }
    return std::sqrt(s);
}

std::string cube_label(const CubeKey& k, int n) {
    std::string s(k.side == Side::Interior ? "I" : "E");
    s += ':' + std::to_string(k.level);
    for (int d = 0; d < n; ++d) s += ':' + std::to_string(k.idx[d]);
    return s;
}

WhitneyCover::WhitneyCover(std::shared_ptr<const Domain> dom, WhitneyOptions opt)
    : dom_(std::move(dom)), opt_(opt) {
    if (!dom_) throw CoverError("WhitneyCover: missing domain");
    if (opt_.max_level < 4 || opt_.max_level > 60) throw CoverError("WhitneyCover: max_level must lie in [4, 60]");
    n_ = dom_->dim();
    const double extent = (dom_->bbox_hi() - dom_->bbox_lo()).maxCoeff();
    if (!std::isfinite(extent) || extent <= 0) throw CoverError("WhitneyCover: domain is unbounded or empty");
    kmin_int_ = -ceil_log2(extent) - 1;

    // Anchor: first interior member found scanning levels from coarse to fine,
    // cubes in lexicographic index order.
    bool found = false;
    for (int L = kmin_int_; L <= kmin_int_ + 30 && !found; ++L) {
        std::array<std::int64_t, 3> lo{0, 0, 0}, hi{0, 0, 0};
        for (int d = 0; d < n_; ++d) {
            lo[d] = index_of(dom_->bbox_lo()[d], L);
            hi[d] = index_of(dom_->bbox_hi()[d], L);
        }
        CubeKey k;
        k.side = Side::Interior;
        k.level = static_cast<std::int16_t>(L);
        for (k.idx[0] = lo[0]; k.idx[0] <= hi[0] && !found; ++k.idx[0])
            for (k.idx[1] = lo[1]; k.idx[1] <= hi[1] && !found; ++k.idx[1])
                for (k.idx[2] = lo[2]; k.idx[2] <= hi[2] && !found; ++k.idx[2])
                    if (is_member(k)) {
                        anchor_ = k;
                        found = true;
                    }
    }
    if (!found) throw CoverError("WhitneyCover: no interior cube found (domain too thin)");
    eta_ = cube_side(anchor_);
    kmin_ext_ = anchor_.level - 3;
}

double WhitneyCover::whitney_constant() const { return 4.0 * std::sqrt(static_cast<double>(n_)) + 1.0; }

double WhitneyCover::theta() const {
    return 2.0 * eta_ * (13.0 * std::sqrt(static_cast<double>(n_)) / 12.0 + whitney_constant());
}

double WhitneyCover::center_depth(const CubeKey& k) const {
    const double sd = dom_->signed_distance(cube_center(k, n_));
    return k.side == Side::Interior ? sd : -sd;
}

bool WhitneyCover::is_candidate(const CubeKey& k) const {
    const int kmin = coarsest_level(k.side);
    if (k.level < kmin) return false;
    const double dc = center_depth(k);
    const double diam = cube_diam(k, n_);
    if (!(dc > kLower * diam)) return false;
    return k.level == kmin || dc <= kUpper * diam;
}

bool WhitneyCover::is_member(const CubeKey& k) const {
    if (!is_candidate(k)) return false;
    // Only ancestors with diam < dist(centre) can be candidates.
    const double dc = center_depth(k);
    const int kmin = coarsest_level(k.side);
    CubeKey a = parent(k);
    while (a.level >= kmin && cube_diam(a, n_) < dc * (1.0 + 1e-12)) {
        if (is_candidate(a)) return false;
        a = parent(a);
    }
    return true;
}

CubeKey WhitneyCover::cube_at(const Vec& y, int level, Side s) const {
    CubeKey k;
    k.side = s;
    k.level = static_cast<std::int16_t>(level);
    for (int d = 0; d < n_; ++d) k.idx[d] = index_of(y[d], level);
    return k;
}

std::optional<CubeKey> WhitneyCover::search_levels(const Vec& y, Side s, int lo, int hi) const {
    for (int L = lo; L <= hi; ++L) {
        CubeKey k = cube_at(y, L, s);
        if (is_member(k)) return k;
    }
    return std::nullopt;
}

std::optional<CubeKey> WhitneyCover::locate(const Vec& y, Side s) const {
    const double sd = dom_->signed_distance(y);
    const double D = s == Side::Interior ? sd : -sd;
    if (!(D > 0)) return std::nullopt;
    const double rn = std::sqrt(static_cast<double>(n_));
    // The member containing y has diam in [D/5, D).
    const int kmin = coarsest_level(s);
    int lo = floor_log2(rn / D) - 1;
    int hi = ceil_log2(5.0 * rn / D) + 1;
    if (lo > opt_.max_level) throw CoverError("locate: point is below the resolution floor");
    lo = std::max(lo, kmin);
    hi = std::min(hi, opt_.max_level);
    if (hi < lo) hi = lo;
    if (auto k = search_levels(y, s, lo, hi)) return k;
    if (auto k = search_levels(y, s, kmin, std::min(opt_.max_level, hi + 3))) return k;
    throw CoverError("locate: no member cube contains the point");
}

std::vector<CubeKey> WhitneyCover::blowup_neighbors(const Vec& y) const {
    std::vector<CubeKey> out;
    const double D = -dom_->signed_distance(y);
    if (!(D > 0)) return out;
    const double rn = std::sqrt(static_cast<double>(n_));
    // A member whose blow-up contains y has diam in (D/5.09, D/0.91).
    int lo = floor_log2(0.9 * rn / D) - 1;
    int hi = ceil_log2(5.1 * rn / D) + 1;
    if (lo > opt_.max_level) throw CoverError("blowup_neighbors: point is below the resolution floor");
    lo = std::max(lo, kmin_ext_);
    hi = std::min(hi, opt_.max_level);
    if (hi < lo) hi = lo;
    for (int L = lo; L <= hi; ++L) {
        const double l = std::ldexp(1.0, -L);
        std::array<std::vector<std::int64_t>, 3> cand;
        for (int d = 0; d < 3; ++d) {
            if (d >= n_) {
                cand[d] = {0};
                continue;
            }
            const std::int64_t j0 = index_of(y[d], L);
            for (std::int64_t j = j0 - 1; j <= j0 + 1; ++j) {
                const double c = (static_cast<double>(j) + 0.5) * l;
                if (std::abs(y[d] - c) < kBlow * l) cand[d].push_back(j);
            }
        }
        CubeKey k;
        k.side = Side::Exterior;
        k.level = static_cast<std::int16_t>(L);
        for (auto a : cand[0])
            for (auto b : cand[1])
                for (auto c : cand[2]) {
                    k.idx = {a, b, c};
                    if (is_member(k)) out.push_back(k);
                }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<CubeKey> WhitneyCover::reflect_fallback(const CubeKey& ext, const Vec& target) const {
    const double l = cube_side(ext);
    const int max_radius = n_ == 2 ? 32 : 8;
    for (int R = 2; R <= max_radius; R *= 2) {
        std::optional<CubeKey> best;
        double best_d = std::numeric_limits<double>::infinity();
        for (int L = ext.level - 2; L <= ext.level + 2; ++L) {
            if (L < kmin_int_ || L > opt_.max_level) continue;
            std::array<std::int64_t, 3> lo{0, 0, 0}, hi{0, 0, 0};
            for (int d = 0; d < n_; ++d) {
                lo[d] = index_of(target[d] - R * l, L);
                hi[d] = index_of(target[d] + R * l, L);
            }
            CubeKey k;
            k.side = Side::Interior;
            k.level = static_cast<std::int16_t>(L);
            for (k.idx[0] = lo[0]; k.idx[0] <= hi[0]; ++k.idx[0])
                for (k.idx[1] = lo[1]; k.idx[1] <= hi[1]; ++k.idx[1])
                    for (k.idx[2] = lo[2]; k.idx[2] <= hi[2]; ++k.idx[2]) {
                        const double dist = (cube_center(k, n_) - target).norm();
                        if (dist > best_d || (dist == best_d && best && !(k < *best))) continue;
                        if (!is_member(k)) continue;
                        best = k;
                        best_d = dist;
                    }
        }
        if (best) return best;
    }
    return std::nullopt;
}

CubeKey WhitneyCover::reflect(const CubeKey& ext) const {
    if (ext.side != Side::Exterior) throw CoverError("reflect: expected an exterior cube");
    if (ext.level < anchor_.level) return anchor_;
    {
        std::shared_lock lock(mu_);
        auto it = psi_cache_.find(ext);
        if (it != psi_cache_.end()) return it->second;
    }
    const Vec c = cube_center(ext, n_);
    const Vec xs = dom_->closest_boundary_point(c);
    const Vec r = 2.0 * xs - c;
    std::optional<CubeKey> hit;
    if (dom_->contains(r)) {
        hit = locate(r, Side::Interior);
        if (hit && std::abs(hit->level - ext.level) > 2) hit.reset();
    }
    bool used_fallback = false;
    if (!hit) {
        hit = reflect_fallback(ext, dom_->contains(r) ? r : xs);
        used_fallback = true;
    }
    if (!hit) throw CoverError("reflect: no interior cube satisfies the size filter for " + cube_label(ext, n_));
    std::unique_lock lock(mu_);
    if (used_fallback) ++fallbacks_;
    psi_cache_.emplace(ext, *hit);
    return *hit;
}

std::size_t WhitneyCover::fallback_count() const {
    std::shared_lock lock(mu_);
    return fallbacks_;
}

CoverList WhitneyCover::build(Side s, int max_level, double margin) const {
    if (max_level > opt_.max_level) throw CoverError("build: max_level exceeds the lazy resolution limit");
    CoverList out;
    out.side = s;
    out.max_level = max_level;
    Vec lo = dom_->bbox_lo(), hi = dom_->bbox_hi();
    if (s == Side::Exterior) {
        const double m = margin < 0 ? theta() : margin;
        lo = lo.array() - m;
        hi = hi.array() + m;
    }
    const int kmin = coarsest_level(s);
    if (max_level < kmin) throw CoverError("build: max_level is coarser than the coarsest level");

    auto intersects = [&](const CubeKey& k) {
        const double l = cube_side(k);
        for (int d = 0; d < n_; ++d) {
            const double a = static_cast<double>(k.idx[d]) * l;
            if (a >= hi[d] || a + l <= lo[d]) return false;
        }
        return true;
    };
    std::vector<CubeKey> stack;
    {
        std::array<std::int64_t, 3> a{0, 0, 0}, b{0, 0, 0};
        for (int d = 0; d < n_; ++d) {
            a[d] = index_of(lo[d], kmin);
            b[d] = index_of(hi[d], kmin);
        }
        CubeKey k;
        k.side = s;
        k.level = static_cast<std::int16_t>(kmin);
        for (k.idx[0] = b[0]; k.idx[0] >= a[0]; --k.idx[0])
            for (k.idx[1] = b[1]; k.idx[1] >= a[1]; --k.idx[1])
                for (k.idx[2] = b[2]; k.idx[2] >= a[2]; --k.idx[2]) stack.push_back(k);
    }
    while (!stack.empty()) {
        const CubeKey k = stack.back();
        stack.pop_back();
        if (!intersects(k)) continue;
        const double diam = cube_diam(k, n_);
        const double dc = center_depth(k);
        if (dc < -0.5 * diam) continue;  // entirely on the other side
        if (dc > kLower * diam) {
            if (is_candidate(k)) {
                out.index.emplace(k, out.cubes.size());
                out.cubes.push_back(k);
            }
            continue;
        }
        if (k.level >= max_level) {
            ++out.deficit_cubes;
            out.deficit_measure += std::pow(cube_side(k), n_);
            continue;
        }
        for (int child = (1 << n_) - 1; child >= 0; --child) {
            CubeKey c = k;
            c.level = static_cast<std::int16_t>(k.level + 1);
            for (int d = 0; d < n_; ++d) c.idx[d] = 2 * k.idx[d] + ((child >> d) & 1);
            stack.push_back(c);
        }
    }
    return out;
}

std::vector<std::size_t> WhitneyCover::neighbors(const CoverList& list, std::size_t i) const {
    const CubeKey& q = list.cubes.at(i);
    const double l = cube_side(q);
    const Vec c = cube_center(q, n_);
    std::vector<std::size_t> out;
    for (int L = q.level - 3; L <= q.level + 3; ++L) {
        const double lp = std::ldexp(1.0, -L);
        const double reach = kBlow * (l + lp);
        std::array<std::int64_t, 3> lo{0, 0, 0}, hi{0, 0, 0};
        for (int d = 0; d < n_; ++d) {
            lo[d] = static_cast<std::int64_t>(std::ceil((c[d] - reach) / lp - 0.5));
            hi[d] = static_cast<std::int64_t>(std::floor((c[d] + reach) / lp - 0.5));
        }
        CubeKey k;
        k.side = q.side;
        k.level = static_cast<std::int16_t>(L);
        for (k.idx[0] = lo[0]; k.idx[0] <= hi[0]; ++k.idx[0])
            for (k.idx[1] = lo[1]; k.idx[1] <= hi[1]; ++k.idx[1])
                for (k.idx[2] = lo[2]; k.idx[2] <= hi[2]; ++k.idx[2]) {
                    auto it = list.index.find(k);
                    if (it == list.index.end()) continue;
                    const Vec ck = cube_center(k, n_);
                    bool meet = true;
                    for (int d = 0; d < n_; ++d)
                        if (!(std::abs(ck[d] - c[d]) < reach)) meet = false;
                    if (meet) out.push_back(it->second);
                }
    }
    std::sort(out.begin(), out.end());
    return out;
}

InvariantReport WhitneyCover::check_invariants(const CoverList& interior, const CoverList& exterior, int samples,
                                               std::uint64_t seed) const {
    InvariantReport rep;
    const double cw = whitney_constant();
    rep.w3_c = cw;
    rep.w3_lo = std::numeric_limits<double>::infinity();
    rep.w3_hi = 0.0;
    rep.cubes = interior.cubes.size() + exterior.cubes.size();

    for (const CoverList* list : {&interior, &exterior}) {
        for (const CubeKey& k : list->cubes) {
            const double l = cube_side(k), diam = cube_diam(k, n_);
            const double dc = center_depth(k);
            if (dc - kBlow * diam <= 0) rep.blowups_inside = false;
            if (k.side == Side::Exterior && k.level == kmin_ext_ && dc > kUpper * diam) continue;  // truncation layer
            rep.w3_lo = std::min(rep.w3_lo, (dc - 0.5 * diam) / l);
            rep.w3_hi = std::max(rep.w3_hi, dc / l);
            // Disjointness: no ancestor of a member is a member.
            CubeKey a = parent(k);
            while (a.level >= coarsest_level(k.side)) {
                if (list->index.count(a)) rep.disjoint = false;
                a = parent(a);
            }
        }
    }
    if (rep.w3_lo < 1.0 / cw || rep.w3_hi > cw) {
        rep.ok = false;
        rep.messages.push_back("W3 violated: dist/side outside [1/c, c]");
    }
    if (!rep.blowups_inside) {
        rep.ok = false;
        rep.messages.push_back("W1 violated: a 7/6 blow-up crosses the boundary");
    }
    if (!rep.disjoint) {
        rep.ok = false;
        rep.messages.push_back("cubes overlap");
    }

    // Reflection constants.
    rep.psi_size_lo = std::numeric_limits<double>::infinity();
    rep.psi_size_hi = 0.0;
    rep.psi_depth_lo = std::numeric_limits<double>::infinity();
    rep.psi_depth_hi = 0.0;
    rep.psi_sep_lo = std::numeric_limits<double>::infinity();
    for (const CubeKey& q : exterior.cubes) {
        const double l = cube_side(q);
        if (-center_depth(q) > theta() + cube_diam(q, n_)) continue;  // beyond the support of the extension
        const CubeKey p = reflect(q);
        const double d = cube_distance(q, p, n_);
        rep.psi_dist_c = std::max(rep.psi_dist_c, d / l);
        const double dp = center_depth(p);
        rep.psi_depth_lo = std::min(rep.psi_depth_lo, (dp - 0.5 * cube_diam(p, n_)) / l);
        rep.psi_depth_hi = std::max(rep.psi_depth_hi, dp / l);
        if (l <= eta_) {
            const double ratio = cube_side(p) / l;
            rep.psi_size_lo = std::min(rep.psi_size_lo, ratio);
            rep.psi_size_hi = std::max(rep.psi_size_hi, ratio);
            rep.psi_sep_lo = std::min(rep.psi_sep_lo, d / l);
        } else if (!(p == anchor_)) {
            rep.ok = false;
            rep.messages.push_back("J1 violated: large exterior cube not mapped to the anchor");
        }
    }
    if (rep.psi_size_hi > 0 && (rep.psi_size_lo < 0.25 || rep.psi_size_hi > 4.0)) {
        rep.ok = false;
        rep.messages.push_back("J2 violated: reflected cube size outside [l/4, 4l]");
    }
    if (rep.psi_sep_lo <= 0.0) {
        rep.ok = false;
        rep.messages.push_back("J5 violated: exterior cube touches its reflection");
    }

    // Sampled overlap count and coverage.
    std::mt19937_64 rng(seed);
    const Vec lo = dom_->bbox_lo(), hi = dom_->bbox_hi();
    const double th = theta();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double floor_int = std::ldexp(1.0, -interior.max_level) * 5.0 * std::sqrt(static_cast<double>(n_));
    const double floor_ext = std::ldexp(1.0, -exterior.max_level) * 5.1 * std::sqrt(static_cast<double>(n_));
    for (int s = 0; s < samples; ++s) {
        Vec y(n_);
        for (int d = 0; d < n_; ++d) y[d] = lo[d] - th + (hi[d] - lo[d] + 2 * th) * u(rng);
        const double sd = dom_->signed_distance(y);
        if (sd > floor_int) {
            auto k = locate(y, Side::Interior);
            if (!k || !interior.index.count(*k)) ++rep.coverage_failures;
        } else if (sd < -floor_ext && -sd < th) {
            auto nb = blowup_neighbors(y);
            rep.max_overlap = std::max(rep.max_overlap, nb.size());
            std::size_t listed = 0;
            for (const auto& k : nb) listed += exterior.index.count(k);
            if (listed == 0) ++rep.coverage_failures;
        }
    }
    if (rep.coverage_failures > 0) {
        rep.ok = false;
        rep.messages.push_back("coverage gaps above the resolution floor");
    }
    return rep;
}

void WhitneyCover::write_csv(std::ostream& os, const CoverList& list) const {
    os << "side,level";
    for (int d = 0; d < n_; ++d) os << ",i" << d;
    os << ",side_length,dist_to_boundary,psi_target\n";
    std::string line;
    for (const CubeKey& k : list.cubes) {
        line.clear();
        line += k.side == Side::Interior ? "I," : "E,";
        line += std::to_string(k.level);
        for (int d = 0; d < n_; ++d) line += ',' + std::to_string(k.idx[d]);
        line += ',';
        append_double(line, cube_side(k));
        line += ',';
        append_double(line, center_depth(k));
        line += ',';
        if (k.side == Side::Exterior) line += cube_label(reflect(k), n_);
        line += '\n';
        os << line;
    }
}

}  // namespace dfext
