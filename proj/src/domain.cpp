#include "dfext/domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "dfext/quadrature.hpp"

namespace dfext {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTol = 1e-10;

Eigen::Vector2d rot90(const Eigen::Vector2d& v) { return {-v.y(), v.x()}; }

Vec to_vec(const Eigen::Vector2d& v) {
    Vec out(2);
    out << v.x(), v.y();
    return out;
}

Vec json_vec(const nlohmann::json& j) {
    Vec v(static_cast<int>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
    if (v.size() < 2 || v.size() > 3) throw DomainError("domain: points must have 2 or 3 coordinates");
    return v;
}

nlohmann::json vec_json(const Vec& v) {
    nlohmann::json j = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

// Closest point on segment [a, b].
Vec segment_closest(const Vec& x, const Vec& a, const Vec& b) {
    Vec d = b - a;
    double dd = d.squaredNorm();
    double t = dd > 0 ? std::clamp((x - a).dot(d) / dd, 0.0, 1.0) : 0.0;
    return a + t * d;
}

}  // namespace

// ---------------------------------------------------------------- StarCurve

Eigen::Vector2d StarCurve::point(double t) const {
    const Eigen::Vector2d e(std::cos(t), std::sin(t));
    if (shape == Shape::Ellipse) return center + Eigen::Vector2d(a * e.x(), b * e.y());
    const double rho = r0 * (1.0 + eps * std::cos(m * t));
    return center + rho * e;
}

Eigen::Vector2d StarCurve::d1(double t) const {
    const Eigen::Vector2d e(std::cos(t), std::sin(t));
    if (shape == Shape::Ellipse) return {-a * e.y(), b * e.x()};
    const double rho = r0 * (1.0 + eps * std::cos(m * t));
    const double rho1 = -r0 * eps * m * std::sin(m * t);
    return rho1 * e + rho * rot90(e);
}

Eigen::Vector2d StarCurve::d2(double t) const {
    const Eigen::Vector2d e(std::cos(t), std::sin(t));
    if (shape == Shape::Ellipse) return {-a * e.x(), -b * e.y()};
    const double rho = r0 * (1.0 + eps * std::cos(m * t));
    const double rho1 = -r0 * eps * m * std::sin(m * t);
    const double rho2 = -r0 * eps * m * m * std::cos(m * t);
    return (rho2 - rho) * e + 2.0 * rho1 * rot90(e);
}

bool StarCurve::inside(const Eigen::Vector2d& x) const {
    const Eigen::Vector2d d = x - center;
    if (shape == Shape::Ellipse) return (d.x() / a) * (d.x() / a) + (d.y() / b) * (d.y() / b) < 1.0;
    const double t = std::atan2(d.y(), d.x());
    return d.norm() < r0 * (1.0 + eps * std::cos(m * t));
}

// ---------------------------------------------------------------- constructors

Domain Domain::ball(const Vec& center, double radius) {
    if (center.size() < 2 || center.size() > 3) throw DomainError("ball: dimension must be 2 or 3");
    if (!(radius > 0)) throw DomainError("ball: radius must be positive");
    Domain d;
    d.kind_ = DomainKind::Ball;
    d.n_ = static_cast<int>(center.size());
    d.center_ = center;
    d.radius_ = radius;
    d.lo_ = center.array() - radius;
    d.hi_ = center.array() + radius;
    d.kappa_max_ = 1.0 / radius;
    d.collar_ = 0.5 * radius;
    return d;
}

Domain Domain::rectangle(const Vec& lo, const Vec& hi) {
    if (lo.size() != hi.size() || lo.size() < 2 || lo.size() > 3) throw DomainError("rectangle: bad corners");
    for (int i = 0; i < lo.size(); ++i)
        if (!(hi[i] > lo[i])) throw DomainError("rectangle: empty box");
    Domain d;
    d.kind_ = DomainKind::Rectangle;
    d.n_ = static_cast<int>(lo.size());
    d.lo_ = lo;
    d.hi_ = hi;
    return d;
}

Domain Domain::polytope(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    if (A.rows() != b.size() || A.cols() < 2 || A.cols() > 3) throw DomainError("polytope: bad constraint shape");
    Domain d;
    d.kind_ = DomainKind::ConvexPolytope;
    d.n_ = static_cast<int>(A.cols());
    d.A_ = A;
    d.b_ = b;
    d.A_raw_ = A;
    d.b_raw_ = b;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        const double nr = A.row(i).norm();
        if (!(nr > 0)) throw DomainError("polytope: zero constraint row");
        d.A_.row(i) /= nr;
        d.b_[i] /= nr;
    }
    d.finish_polytope();
    return d;
}

Domain Domain::ellipse(const Eigen::Vector2d& center, double a, double b) {
    if (!(a > 0 && b > 0)) throw DomainError("ellipse: semi-axes must be positive");
    Domain d;
    d.kind_ = DomainKind::SmoothStar;
    d.n_ = 2;
    d.star_.shape = StarCurve::Shape::Ellipse;
    d.star_.center = center;
    d.star_.a = a;
    d.star_.b = b;
    d.finish_star();
    return d;
}

Domain Domain::rose(const Eigen::Vector2d& center, double r0, double eps, int m) {
    if (!(r0 > 0) || !(eps >= 0 && eps < 1) || m < 1) throw DomainError("rose: need r0 > 0, 0 <= eps < 1, m >= 1");
    Domain d;
    d.kind_ = DomainKind::SmoothStar;
    d.n_ = 2;
    d.star_.shape = StarCurve::Shape::Rose;
    d.star_.center = center;
    d.star_.r0 = r0;
    d.star_.eps = eps;
    d.star_.m = m;
    d.finish_star();
    return d;
}

Domain Domain::cusp(int n, double gamma, bool outward) {
    if (n < 2 || n > 3) throw DomainError("cusp: dimension must be 2 or 3");
    if (!(gamma > 0 && gamma < 1)) throw DomainError("cusp: exponent gamma must lie in (0, 1)");
    Domain d;
    d.kind_ = outward ? DomainKind::CuspPlus : DomainKind::CuspMinus;
    d.n_ = n;
    d.gamma_ = gamma;
    d.convex_ = false;
    d.lo_ = Vec::Constant(n, -1.0);
    d.hi_ = Vec::Constant(n, 1.0);
    return d;
}

void Domain::finish_polytope() {
    const int n = n_;
    const Eigen::Index m = A_.rows();
    verts_.clear();
    auto add_vertex = [&](const Vec& v) {
        for (Eigen::Index i = 0; i < m; ++i)
            if (A_.row(i).dot(v) > b_[i] + 1e-9) return;
        for (const Vec& w : verts_)
            if ((w - v).norm() < 1e-9) return;
        verts_.push_back(v);
    };
    if (n == 2) {
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = i + 1; j < m; ++j) {
                Eigen::Matrix2d M;
                M << A_.row(i), A_.row(j);
                if (std::abs(M.determinant()) < 1e-12) continue;
                Eigen::Vector2d v = M.partialPivLu().solve(Eigen::Vector2d(b_[i], b_[j]));
                add_vertex(to_vec(v));
            }
    } else {
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = i + 1; j < m; ++j)
                for (Eigen::Index k = j + 1; k < m; ++k) {
                    Eigen::Matrix3d M;
                    M << A_.row(i), A_.row(j), A_.row(k);
                    if (std::abs(M.determinant()) < 1e-12) continue;
                    Eigen::Vector3d v = M.partialPivLu().solve(Eigen::Vector3d(b_[i], b_[j], b_[k]));
                    Vec w(3);
                    w << v.x(), v.y(), v.z();
                    add_vertex(w);
                }
    }
    if (static_cast<int>(verts_.size()) < n + 1) throw DomainError("polytope: empty or unbounded constraint set");

    lo_ = verts_[0];
    hi_ = verts_[0];
    Vec cen = Vec::Zero(n);
    for (const Vec& v : verts_) {
        lo_ = lo_.cwiseMin(v);
        hi_ = hi_.cwiseMax(v);
        cen += v;
    }
    cen /= static_cast<double>(verts_.size());
    if ((hi_ - lo_).maxCoeff() > 1e8) throw DomainError("polytope: constraint set is unbounded");

    faces_.clear();
    for (Eigen::Index i = 0; i < m; ++i) {
        std::vector<int> f;
        for (std::size_t v = 0; v < verts_.size(); ++v)
            if (std::abs(A_.row(i).dot(verts_[v]) - b_[i]) < 1e-9) f.push_back(static_cast<int>(v));
        if (static_cast<int>(f.size()) < n) {
            faces_.emplace_back();
            continue;
        }
        // Order around the facet centroid in a basis of the facet plane.
        Vec fc = Vec::Zero(n);
        for (int v : f) fc += verts_[v];
        fc /= static_cast<double>(f.size());
        Vec nrm = A_.row(i).transpose();
        Vec u, w;
        if (n == 2) {
            u = Vec(2);
            u << -nrm[1], nrm[0];
            w = Vec::Zero(2);
        } else {
            Eigen::Vector3d n3(nrm[0], nrm[1], nrm[2]);
            Eigen::Vector3d a = std::abs(n3.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
            Eigen::Vector3d u3 = n3.cross(a).normalized();
            Eigen::Vector3d w3 = n3.cross(u3);
            u = Vec(3);
            w = Vec(3);
            u << u3.x(), u3.y(), u3.z();
            w << w3.x(), w3.y(), w3.z();
        }
        std::sort(f.begin(), f.end(), [&](int p, int q) {
            Vec dp = verts_[p] - fc, dq = verts_[q] - fc;
            return std::atan2(dp.dot(w), dp.dot(u)) < std::atan2(dq.dot(w), dq.dot(u));
        });
        faces_.push_back(std::move(f));
    }
}

void Domain::finish_star() {
    const int N = 4096;
    double kmax = 0.0, kmin = std::numeric_limits<double>::infinity();
    Eigen::Vector2d lo = star_.point(0.0), hi = lo;
    for (int i = 0; i < N; ++i) {
        const double t = 2.0 * kPi * i / N;
        const Eigen::Vector2d p = star_.point(t), d1 = star_.d1(t), d2 = star_.d2(t);
        const double sp = d1.norm();
        const double kap = (d1.x() * d2.y() - d1.y() * d2.x()) / (sp * sp * sp);
        kmax = std::max(kmax, std::abs(kap));
        kmin = std::min(kmin, kap);
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    convex_ = kmin >= 0.0;
    kappa_max_ = kmax;
    collar_ = 0.5 / kmax;
    lo_ = to_vec(lo);
    hi_ = to_vec(hi);
}

// ---------------------------------------------------------------- json

Domain Domain::from_json(const nlohmann::json& j) {
    try {
        const std::string type = j.at("type").get<std::string>();
        if (type == "ball") return ball(json_vec(j.at("center")), j.at("radius").get<double>());
        if (type == "rectangle") return rectangle(json_vec(j.at("lo")), json_vec(j.at("hi")));
        if (type == "polytope") {
            const auto& rows = j.at("A");
            const auto& rhs = j.at("b");
            if (rows.empty() || rows.size() != rhs.size()) throw DomainError("polytope: A and b sizes differ");
            const std::size_t n = rows[0].size();
            Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
            Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (rows[i].size() != n) throw DomainError("polytope: ragged A");
                for (std::size_t c = 0; c < n; ++c)
                    A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c].get<double>();
                b[static_cast<Eigen::Index>(i)] = rhs[i].get<double>();
            }
            return polytope(A, b);
        }
        if (type == "smooth_star") {
            const Vec c = json_vec(j.at("center"));
            if (c.size() != 2) throw DomainError("smooth_star: only planar curves are supported");
            const std::string shape = j.at("shape").get<std::string>();
            if (shape == "ellipse") return ellipse({c[0], c[1]}, j.at("a").get<double>(), j.at("b").get<double>());
            if (shape == "rose")
                return rose({c[0], c[1]}, j.at("r0").get<double>(), j.at("eps").get<double>(), j.at("m").get<int>());
            throw DomainError("smooth_star: unknown shape '" + shape + "'");
        }
        if (type == "cusp") {
            const std::string side = j.value("side", std::string("plus"));
            if (side != "plus" && side != "minus") throw DomainError("cusp: side must be plus or minus");
            return cusp(j.at("dim").get<int>(), j.at("gamma").get<double>(), side == "plus");
        }
        throw DomainError("unknown domain type '" + type + "'");
    } catch (const nlohmann::json::exception& e) {
        throw DomainError(std::string("domain: malformed description: ") + e.what());
    }
}

nlohmann::json Domain::to_json() const {
    nlohmann::json j;
    switch (kind_) {
        case DomainKind::Ball:
            j = {{"type", "ball"}, {"center", vec_json(center_)}, {"radius", radius_}};
            break;
        case DomainKind::Rectangle:
            j = {{"type", "rectangle"}, {"lo", vec_json(lo_)}, {"hi", vec_json(hi_)}};
            break;
        case DomainKind::ConvexPolytope: {
            nlohmann::json rows = nlohmann::json::array(), rhs = nlohmann::json::array();
            for (Eigen::Index i = 0; i < A_raw_.rows(); ++i) {
                nlohmann::json r = nlohmann::json::array();
                for (Eigen::Index c = 0; c < A_raw_.cols(); ++c) r.push_back(A_raw_(i, c));
                rows.push_back(r);
                rhs.push_back(b_raw_[i]);
            }
            j = {{"type", "polytope"}, {"A", rows}, {"b", rhs}};
            break;
        }
        case DomainKind::SmoothStar:
            j = {{"type", "smooth_star"}, {"center", {star_.center.x(), star_.center.y()}}};
            if (star_.shape == StarCurve::Shape::Ellipse) {
                j["shape"] = "ellipse";
                j["a"] = star_.a;
                j["b"] = star_.b;
            } else {
                j["shape"] = "rose";
                j["r0"] = star_.r0;
                j["eps"] = star_.eps;
                j["m"] = star_.m;
            }
            break;
        case DomainKind::CuspPlus:
        case DomainKind::CuspMinus:
            j = {{"type", "cusp"}, {"dim", n_}, {"gamma", gamma_},
                 {"side", kind_ == DomainKind::CuspPlus ? "plus" : "minus"}};
            break;
    }
    return j;
}

std::string Domain::name() const {
    switch (kind_) {
        case DomainKind::Ball: return "ball";
        case DomainKind::Rectangle: return "rectangle";
        case DomainKind::ConvexPolytope: return "polytope";
        case DomainKind::SmoothStar: return star_.shape == StarCurve::Shape::Ellipse ? "ellipse" : "rose";
        case DomainKind::CuspPlus: return "cusp_plus";
        case DomainKind::CuspMinus: return "cusp_minus";
    }
    return "unknown";
}

// ---------------------------------------------------------------- geometry

bool Domain::contains(const Vec& x) const {
    if (x.size() != n_) throw DomainError("contains: dimension mismatch");
    switch (kind_) {
        case DomainKind::Ball: return (x - center_).norm() < radius_;
        case DomainKind::Rectangle:
            for (int i = 0; i < n_; ++i)
                if (!(x[i] > lo_[i] && x[i] < hi_[i])) return false;
            return true;
        case DomainKind::ConvexPolytope:
            for (Eigen::Index i = 0; i < A_.rows(); ++i)
                if (!(A_.row(i).dot(x) < b_[i])) return false;
            return true;
        case DomainKind::SmoothStar: return star_.inside({x[0], x[1]});
        case DomainKind::CuspPlus:
        case DomainKind::CuspMinus: {
            for (int i = 0; i < n_; ++i)
                if (!(std::abs(x[i]) < 1.0)) return false;
            const double r = x.head(n_ - 1).norm();
            const double g = std::pow(r, gamma_);
            return kind_ == DomainKind::CuspPlus ? x[n_ - 1] > g : x[n_ - 1] < g;
        }
    }
    return false;
}

double Domain::star_parameter(const Eigen::Vector2d& x) const {
    constexpr int N = 256;
    const double h = 2.0 * kPi / N;
    std::array<double, N> d2{};
    for (int i = 0; i < N; ++i) d2[i] = (star_.point(h * i) - x).squaredNorm();
    std::vector<int> mins;
    for (int i = 0; i < N; ++i)
        if (d2[i] <= d2[(i + N - 1) % N] && d2[i] <= d2[(i + 1) % N]) mins.push_back(i);
    std::sort(mins.begin(), mins.end(), [&](int a, int b) { return d2[a] < d2[b]; });
    if (mins.size() > 4) mins.resize(4);
    double best_t = 0.0, best_d = std::numeric_limits<double>::infinity();
    for (int i0 : mins) {
        double t = h * i0;
        for (int it = 0; it < 40; ++it) {
            const Eigen::Vector2d p = star_.point(t), d1 = star_.d1(t), dd = star_.d2(t);
            const double g = (p - x).dot(d1);
            const double gp = d1.squaredNorm() + (p - x).dot(dd);
            double step = gp > 0 ? -g / gp : (g > 0 ? -0.5 * h : 0.5 * h);
            step = std::clamp(step, -h, h);
            t += step;
            if (std::abs(step) < 1e-15) break;
        }
        const double dist = (star_.point(t) - x).squaredNorm();
        if (dist < best_d) {
            best_d = dist;
            best_t = t;
        }
    }
    best_t = std::fmod(best_t, 2.0 * kPi);
    if (best_t < 0) best_t += 2.0 * kPi;
    return best_t;
}

double Domain::polytope_sd(const Vec& x) const {
    double inside = std::numeric_limits<double>::infinity();
    bool in = true;
    for (Eigen::Index i = 0; i < A_.rows(); ++i) {
        const double s = b_[i] - A_.row(i).dot(x);
        inside = std::min(inside, s);
        if (s < 0) in = false;
    }
    if (in) return inside;
    return -(x - polytope_closest(x)).norm();
}

Vec Domain::polytope_closest(const Vec& x) const {
    // Interior points: nearest facet plane.  Exterior points: nearest point over facets.
    bool in = true;
    Eigen::Index best_row = 0;
    double best_s = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < A_.rows(); ++i) {
        const double s = b_[i] - A_.row(i).dot(x);
        if (s < 0) in = false;
        if (s < best_s && !faces_[static_cast<std::size_t>(i)].empty()) {
            best_s = s;
            best_row = i;
        }
    }
    if (in) return x + best_s * A_.row(best_row).transpose();
    Vec best = verts_[0];
    double bd = (x - best).squaredNorm();
    auto consider = [&](const Vec& p) {
        const double d = (x - p).squaredNorm();
        if (d < bd) {
            bd = d;
            best = p;
        }
    };
    for (Eigen::Index i = 0; i < A_.rows(); ++i) {
        const auto& f = faces_[static_cast<std::size_t>(i)];
        if (f.empty()) continue;
        const Vec nrm = A_.row(i).transpose();
        const Vec p = x - (nrm.dot(x) - b_[i]) * nrm;
        bool inside_face = true;
        if (n_ == 3) {
            Eigen::Vector3d n3(nrm[0], nrm[1], nrm[2]);
            int sign = 0;
            for (std::size_t v = 0; v < f.size(); ++v) {
                const Vec& a = verts_[f[v]];
                const Vec& b = verts_[f[(v + 1) % f.size()]];
                Eigen::Vector3d e(b[0] - a[0], b[1] - a[1], b[2] - a[2]);
                Eigen::Vector3d r(p[0] - a[0], p[1] - a[1], p[2] - a[2]);
                const double c = n3.dot(e.cross(r));
                const int sg = c > 1e-14 ? 1 : (c < -1e-14 ? -1 : 0);
                if (sg == 0) continue;
                if (sign == 0) sign = sg;
                else if (sg != sign) inside_face = false;
            }
        } else {
            const Vec& a = verts_[f.front()];
            const Vec& b = verts_[f.back()];
            const double t = (p - a).dot(b - a) / (b - a).squaredNorm();
            inside_face = t >= 0 && t <= 1;
        }
        if (inside_face) consider(p);
        for (std::size_t v = 0; v < f.size(); ++v)
            consider(segment_closest(x, verts_[f[v]], verts_[f[(v + 1) % f.size()]]));
    }
    return best;
}

double Domain::cusp_sd(const Vec& x) const {
    // Distance to the graph is minimised in the (|x'|, y) half-plane; the box
    // faces that belong to the boundary are added separately.  Corners where the
    // graph meets the box are approximated by clamping the radius to [0, 1].
    const double r = x.head(n_ - 1).norm();
    const double y = x[n_ - 1];
    auto f = [&](double rho) {
        const double dy = std::pow(rho, gamma_) - y;
        return (rho - r) * (rho - r) + dy * dy;
    };
    constexpr int N = 400;
    double best = f(0.0), best_rho = 0.0;
    for (int i = 1; i <= N; ++i) {
        const double rho = static_cast<double>(i) * i / (static_cast<double>(N) * N);
        const double v = f(rho);
        if (v < best) {
            best = v;
            best_rho = rho;
        }
    }
    // Golden-section refinement around the best sample.
    const double span = 2.0 * (2.0 * best_rho * N + 1.0) / (static_cast<double>(N) * N);
    double a = std::max(0.0, best_rho - span), b = std::min(1.0, best_rho + span);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 80; ++it) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (f(c) < f(d)) b = d;
        else a = c;
    }
    double dist = std::sqrt(std::min(best, f(0.5 * (a + b))));
    if (kind_ == DomainKind::CuspPlus) {
        dist = std::min(dist, std::abs(1.0 - y));
    } else {
        dist = std::min(dist, std::abs(1.0 + y));
        for (int i = 0; i < n_ - 1; ++i) dist = std::min(dist, std::abs(1.0 - std::abs(x[i])));
    }
    return contains(x) ? dist : -dist;
}

double Domain::signed_distance(const Vec& x) const {
    if (x.size() != n_) throw DomainError("signed_distance: dimension mismatch");
    switch (kind_) {
        case DomainKind::Ball: return radius_ - (x - center_).norm();
        case DomainKind::Rectangle: {
            Vec c = x.cwiseMax(lo_).cwiseMin(hi_);
            const double out = (x - c).norm();
            if (out > 0) return -out;
            double in = std::numeric_limits<double>::infinity();
            for (int i = 0; i < n_; ++i) in = std::min({in, x[i] - lo_[i], hi_[i] - x[i]});
            return in;
        }
        case DomainKind::ConvexPolytope: return polytope_sd(x);
        case DomainKind::SmoothStar: {
            const Eigen::Vector2d p(x[0], x[1]);
            const double d = (star_.point(star_parameter(p)) - p).norm();
            return star_.inside(p) ? d : -d;
        }
        case DomainKind::CuspPlus:
        case DomainKind::CuspMinus: return cusp_sd(x);
    }
    return 0.0;
}

Vec Domain::closest_boundary_point(const Vec& x) const {
    if (x.size() != n_) throw DomainError("closest_boundary_point: dimension mismatch");
    switch (kind_) {
        case DomainKind::Ball: {
            Vec d = x - center_;
            const double r = d.norm();
            if (r == 0.0) {
                d = Vec::Zero(n_);
                d[0] = 1.0;
                return center_ + radius_ * d;
            }
            return center_ + (radius_ / r) * d;
        }
        case DomainKind::Rectangle: {
            Vec c = x.cwiseMax(lo_).cwiseMin(hi_);
            if ((x - c).norm() > 0) return c;
            int best_d = 0;
            bool upper = false;
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < n_; ++i) {
                if (x[i] - lo_[i] < best) {
                    best = x[i] - lo_[i];
                    best_d = i;
                    upper = false;
                }
                if (hi_[i] - x[i] < best) {
                    best = hi_[i] - x[i];
                    best_d = i;
                    upper = true;
                }
            }
            c[best_d] = upper ? hi_[best_d] : lo_[best_d];
            return c;
        }
        case DomainKind::ConvexPolytope: return polytope_closest(x);
        case DomainKind::SmoothStar: return to_vec(star_.point(star_parameter({x[0], x[1]})));
        case DomainKind::CuspPlus:
        case DomainKind::CuspMinus: throw DomainError("closest_boundary_point: not available for cusp domains");
    }
    return x;
}

Vec Domain::boundary_projection(const Vec& x) const {
    if (kind_ == DomainKind::CuspPlus || kind_ == DomainKind::CuspMinus)
        throw CollarError("boundary_projection: not available for cusp domains");
    const double sd = signed_distance(x);
    if (has_smooth_boundary()) {
        if (std::abs(sd) >= collar_) throw CollarError("boundary_projection: point outside the tubular collar");
    } else if (sd > 0) {
        throw CollarError("boundary_projection: interior projection is not unique for non-smooth boundaries");
    }
    return closest_boundary_point(x);
}

Vec Domain::inner_normal(const Vec& p) const {
    switch (kind_) {
        case DomainKind::Ball: {
            Vec d = center_ - p;
            const double r = d.norm();
            if (r == 0.0) throw DomainError("inner_normal: undefined at the centre");
            return d / r;
        }
        case DomainKind::Rectangle: {
            int best_d = 0;
            double sign = 1.0, best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < n_; ++i) {
                if (std::abs(p[i] - lo_[i]) < best) {
                    best = std::abs(p[i] - lo_[i]);
                    best_d = i;
                    sign = 1.0;
                }
                if (std::abs(hi_[i] - p[i]) < best) {
                    best = std::abs(hi_[i] - p[i]);
                    best_d = i;
                    sign = -1.0;
                }
            }
            Vec v = Vec::Zero(n_);
            v[best_d] = sign;
            return v;
        }
        case DomainKind::ConvexPolytope: {
            Eigen::Index best_row = 0;
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < A_.rows(); ++i) {
                const double s = std::abs(b_[i] - A_.row(i).dot(p));
                if (s < best) {
                    best = s;
                    best_row = i;
                }
            }
            return -A_.row(best_row).transpose();
        }
        case DomainKind::SmoothStar: {
            const double t = star_parameter({p[0], p[1]});
            return to_vec(rot90(star_.d1(t)).normalized());
        }
        case DomainKind::CuspPlus:
        case DomainKind::CuspMinus: throw DomainError("inner_normal: not available for cusp domains");
    }
    return p;
}

double Domain::diameter() const {
    if (kind_ == DomainKind::Ball) return 2.0 * radius_;
    if (kind_ == DomainKind::ConvexPolytope) {
        double d = 0;
        for (const Vec& a : verts_)
            for (const Vec& b : verts_) d = std::max(d, (a - b).norm());
        return d;
    }
    return (hi_ - lo_).norm();
}

double Domain::volume() const {
    switch (kind_) {
        case DomainKind::Ball: return n_ == 2 ? kPi * radius_ * radius_ : 4.0 / 3.0 * kPi * std::pow(radius_, 3);
        case DomainKind::Rectangle: return (hi_ - lo_).prod();
        case DomainKind::SmoothStar:
            if (star_.shape == StarCurve::Shape::Ellipse) return kPi * star_.a * star_.b;
            return kPi * star_.r0 * star_.r0 * (1.0 + 0.5 * star_.eps * star_.eps);
        case DomainKind::CuspPlus:
        case DomainKind::CuspMinus: {
            if (n_ != 2) throw DomainError("volume: only planar cusps are supported");
            const double plus = 2.0 * gamma_ / (gamma_ + 1.0);
            return kind_ == DomainKind::CuspPlus ? plus : 4.0 - plus;
        }
        case DomainKind::ConvexPolytope: {
            double v = 0.0;
            for (const auto& [x, w] : interior_quadrature(1, 1)) v += w;
            return v;
        }
    }
    return 0.0;
}

Domain Domain::shrunk(double eps) const {
    if (!(eps >= 0)) throw DomainError("shrunk: eps must be non-negative");
    switch (kind_) {
        case DomainKind::Ball:
            if (eps >= radius_) throw DomainError("shrunk: eps exceeds the radius");
            return ball(center_, radius_ - eps);
        case DomainKind::Rectangle:
            if (2 * eps >= (hi_ - lo_).minCoeff()) throw DomainError("shrunk: eps exceeds the half-width");
            return rectangle(lo_.array() + eps, hi_.array() - eps);
        case DomainKind::ConvexPolytope: {
            Eigen::VectorXd b = b_.array() - eps;
            return polytope(A_, b);
        }
        default: throw DomainError("shrunk: inner parallel set only available for balls and polytopes");
    }
}

std::vector<std::pair<Vec, double>> Domain::interior_quadrature(int order, int cells) const {
    if (order < 1 || cells < 1) throw DomainError("interior_quadrature: order and cells must be positive");
    std::vector<std::pair<Vec, double>> out;
    const GaussRule& g = gauss_legendre(order);
    // Composite Gauss rule on [0, 1] split into `cells` pieces.
    std::vector<double> cx, cw;
    for (int c = 0; c < cells; ++c)
        for (int i = 0; i < order; ++i) {
            cx.push_back((c + g.x[i]) / cells);
            cw.push_back(g.w[i] / cells);
        }
    const int nang = std::max(64, 8 * order * cells);
    switch (kind_) {
        case DomainKind::Rectangle: {
            const std::size_t m = cx.size();
            std::vector<std::size_t> it(static_cast<std::size_t>(n_), 0);
            const double vol = (hi_ - lo_).prod();
            while (true) {
                Vec x(n_);
                double w = vol;
                for (int d = 0; d < n_; ++d) {
                    x[d] = lo_[d] + (hi_[d] - lo_[d]) * cx[it[d]];
                    w *= cw[it[d]];
                }
                out.emplace_back(x, w);
                int d = n_ - 1;
                while (d >= 0) {
                    if (++it[d] < m) break;
                    it[d] = 0;
                    --d;
                }
                if (d < 0) break;
            }
            return out;
        }
        case DomainKind::Ball: {
            const double R = radius_;
            if (n_ == 2) {
                for (std::size_t i = 0; i < cx.size(); ++i)
                    for (int a = 0; a < nang; ++a) {
                        const double r = R * cx[i], t = 2.0 * kPi * a / nang;
                        Vec x(2);
                        x << center_[0] + r * std::cos(t), center_[1] + r * std::sin(t);
                        out.emplace_back(x, R * cw[i] * r * 2.0 * kPi / nang);
                    }
            } else {
                for (std::size_t i = 0; i < cx.size(); ++i)
                    for (std::size_t j = 0; j < cx.size(); ++j)
                        for (int a = 0; a < nang; ++a) {
                            const double r = R * cx[i], ct = 2.0 * cx[j] - 1.0, st = std::sqrt(1.0 - ct * ct);
                            const double ph = 2.0 * kPi * a / nang;
                            Vec x(3);
                            x << center_[0] + r * st * std::cos(ph), center_[1] + r * st * std::sin(ph),
                                center_[2] + r * ct;
                            out.emplace_back(x, R * cw[i] * r * r * 2.0 * cw[j] * 2.0 * kPi / nang);
                        }
            }
            return out;
        }
        case DomainKind::SmoothStar: {
            for (std::size_t i = 0; i < cx.size(); ++i)
                for (int a = 0; a < nang; ++a) {
                    const double s = cx[i], t = 2.0 * kPi * a / nang;
                    Vec x(2);
                    double jac;
                    if (star_.shape == StarCurve::Shape::Ellipse) {
                        x << star_.center.x() + star_.a * s * std::cos(t), star_.center.y() + star_.b * s * std::sin(t);
                        jac = star_.a * star_.b * s;
                    } else {
                        const double rho = star_.r0 * (1.0 + star_.eps * std::cos(star_.m * t));
                        x << star_.center.x() + s * rho * std::cos(t), star_.center.y() + s * rho * std::sin(t);
                        jac = rho * rho * s;
                    }
                    out.emplace_back(x, cw[i] * jac * 2.0 * kPi / nang);
                }
            return out;
        }
        case DomainKind::ConvexPolytope: {
            // Cone every facet over the vertex centroid; fan each facet polygon.
            Vec cen = Vec::Zero(n_);
            for (const Vec& v : verts_) cen += v;
            cen /= static_cast<double>(verts_.size());
            const SimplexRule& rule = simplex_rule(n_, std::max(1, 2 * order * cells - 1));
            auto emit = [&](const std::vector<Vec>& s) {
                Mat M(n_, n_);
                for (int c = 0; c < n_; ++c) M.col(c) = s[static_cast<std::size_t>(c) + 1] - s[0];
                double vol = std::abs(M.determinant());
                for (int j = 2; j <= n_; ++j) vol /= j;
                if (vol == 0.0) return;
                for (std::size_t q = 0; q < rule.weights.size(); ++q) {
                    Vec x = Vec::Zero(n_);
                    for (int c = 0; c <= n_; ++c) x += rule.bary[q][static_cast<std::size_t>(c)] * s[static_cast<std::size_t>(c)];
                    out.emplace_back(x, rule.weights[q] * vol);
                }
            };
            for (const auto& f : faces_) {
                if (f.empty()) continue;
                if (n_ == 2) {
                    emit({cen, verts_[f.front()], verts_[f.back()]});
                } else {
                    for (std::size_t v = 1; v + 1 < f.size(); ++v)
                        emit({cen, verts_[f[0]], verts_[f[v]], verts_[f[v + 1]]});
                }
            }
            return out;
        }
        default: throw DomainError("interior_quadrature: not available for cusp domains");
    }
}

// ---------------------------------------------------------------- simplex maps

double SimplexMap::measure_element(const std::array<double, 3>& t) const {
    if (k_ == 0) return 1.0;
    const Mat F = frame(t);
    const Mat G = F.transpose() * F;
    return std::sqrt(std::max(0.0, G.determinant()));
}

KVector SimplexMap::oriented_element(const std::array<double, 3>& t) const {
    if (k_ == 0) return KVector::scalar(n_, 1.0);
    const Mat F = frame(t);
    KVector acc = as_kvector(F.col(k_ - 1));
    for (int j = k_ - 2; j >= 0; --j) acc = wedge(acc, as_kvector(F.col(j)));
    return acc;
}

FlatSimplex::FlatSimplex(std::span<const Vec> verts)
    : SimplexMap(static_cast<int>(verts.empty() ? 2 : verts[0].size()), static_cast<int>(verts.size()) - 1),
      v_(verts.begin(), verts.end()) {
    if (verts.empty() || k_ > n_) throw DomainError("FlatSimplex: need 1 to n + 1 vertices");
}

Vec FlatSimplex::eval(const std::array<double, 3>& t) const {
    Vec x = v_[0];
    for (int j = 0; j < k_; ++j) x += t[static_cast<std::size_t>(j)] * (v_[static_cast<std::size_t>(j) + 1] - v_[0]);
    return x;
}

Mat FlatSimplex::frame(const std::array<double, 3>&) const {
    Mat F(n_, k_);
    for (int j = 0; j < k_; ++j) F.col(j) = v_[static_cast<std::size_t>(j) + 1] - v_[0];
    return F;
}

CurvedSimplex::CurvedSimplex(const Domain& dom, std::span<const Vec> verts, double c1, CollarStats* stats)
    : SimplexMap(dom.dim(), static_cast<int>(verts.size()) - 1), dom_(&dom) {
    if (!dom.has_smooth_boundary()) throw CollarError("CurvedSimplex: domain boundary is not smooth");
    if (verts.empty() || k_ > n_ - 1) throw DomainError("CurvedSimplex: need 1 to n vertices");
    double smin = std::numeric_limits<double>::infinity(), smax = 0.0, spread = 0.0;
    for (const Vec& v : verts) {
        const double s = dom.signed_distance(v);
        if (s < 0) throw CollarError("CurvedSimplex: vertex lies outside the domain");
        s_.push_back(s);
        smin = std::min(smin, s);
        smax = std::max(smax, s);
        for (const Vec& w : verts) spread = std::max(spread, (v - w).norm());
    }
    CollarStats st;
    st.eta_min = smin;
    st.depth_ratio = smin > 0 ? smax / smin : (smax > 0 ? std::numeric_limits<double>::infinity() : 1.0);
    st.spread_ratio = smin > 0 ? spread / smin : (spread > 0 ? std::numeric_limits<double>::infinity() : 0.0);
    if (stats) *stats = st;
    if (smax >= dom.collar_width()) throw CollarError("CurvedSimplex: vertex depth exceeds the collar width");
    if (st.depth_ratio > c1) throw CollarError("CurvedSimplex: vertex depths are not comparable");
    if (st.spread_ratio > c1) throw CollarError("CurvedSimplex: vertices are too far apart relative to their depth");
    for (const Vec& v : verts) p_.push_back(dom.boundary_projection(v));
}

Vec CurvedSimplex::eval(const std::array<double, 3>& t) const {
    Vec m = p_[0];
    double s = s_[0];
    for (int j = 0; j < k_; ++j) {
        m += t[static_cast<std::size_t>(j)] * (p_[static_cast<std::size_t>(j) + 1] - p_[0]);
        s += t[static_cast<std::size_t>(j)] * (s_[static_cast<std::size_t>(j) + 1] - s_[0]);
    }
    if (dom_->kind() == DomainKind::Ball) {
        const Vec c = 0.5 * (dom_->bbox_lo() + dom_->bbox_hi());
        const double R = 0.5 * (dom_->bbox_hi()[0] - dom_->bbox_lo()[0]);
        const Vec u = (m - c).normalized();
        return c + (R - s) * u;
    }
    const StarCurve& sc = dom_->star();
    const double th = dom_->star_parameter({m[0], m[1]});
    const Eigen::Vector2d N = rot90(sc.d1(th)).normalized();
    return to_vec(sc.point(th) + s * N);
}

Mat CurvedSimplex::frame(const std::array<double, 3>& t) const {
    Vec m = p_[0];
    double s = s_[0];
    for (int j = 0; j < k_; ++j) {
        m += t[static_cast<std::size_t>(j)] * (p_[static_cast<std::size_t>(j) + 1] - p_[0]);
        s += t[static_cast<std::size_t>(j)] * (s_[static_cast<std::size_t>(j) + 1] - s_[0]);
    }
    Mat F(n_, k_);
    if (dom_->kind() == DomainKind::Ball) {
        const Vec c = 0.5 * (dom_->bbox_lo() + dom_->bbox_hi());
        const double R = 0.5 * (dom_->bbox_hi()[0] - dom_->bbox_lo()[0]);
        const double r = (m - c).norm();
        const Vec u = (m - c) / r;
        for (int j = 0; j < k_; ++j) {
            const Vec dm = p_[static_cast<std::size_t>(j) + 1] - p_[0];
            const double ds = s_[static_cast<std::size_t>(j) + 1] - s_[0];
            F.col(j) = -ds * u + ((R - s) / r) * (dm - u * u.dot(dm));
        }
        return F;
    }
    const StarCurve& sc = dom_->star();
    const Eigen::Vector2d m2(m[0], m[1]);
    const double th = dom_->star_parameter(m2);
    const Eigen::Vector2d b = sc.point(th), b1 = sc.d1(th), b2 = sc.d2(th);
    const double sp = b1.norm();
    const Eigen::Vector2d T = b1 / sp;
    const Eigen::Vector2d N = rot90(T);
    const Eigen::Vector2d Tp = (b2 - T.dot(b2) * T) / sp;
    const double denom = b1.squaredNorm() + (b - m2).dot(b2);
    for (int j = 0; j < k_; ++j) {
        const Vec dm = p_[static_cast<std::size_t>(j) + 1] - p_[0];
        const double ds = s_[static_cast<std::size_t>(j) + 1] - s_[0];
        const double dth = b1.dot(Eigen::Vector2d(dm[0], dm[1])) / denom;
        F.col(j) = to_vec(b1 * dth + ds * N + s * rot90(Tp) * dth);
    }
    return F;
}

std::unique_ptr<SimplexMap> make_simplex(const Domain& dom, std::span<const Vec> verts, SimplexVariant variant,
                                         double c1, CollarStats* stats) {
    if (variant == SimplexVariant::Curvilinear) return std::make_unique<CurvedSimplex>(dom, verts, c1, stats);
    for (const Vec& v : verts)
        if (dom.signed_distance(v) < -kTol) throw DomainError("flat simplex: vertex lies outside the domain");
    if (!dom.is_convex()) throw DomainError("flat simplex: requires a convex domain");
    return std::make_unique<FlatSimplex>(verts);
}

}  // namespace dfext
