#include "dfext/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/LU>

namespace dfext {
namespace {

constexpr double kBlowupHalf = 7.0 / 12.0;

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

// Composite Gauss rule on [a, b]: panels graded geometrically towards both ends.
void graded_rule(double a, double b, int order, int grading, std::vector<double>* x, std::vector<double>* w) {
    std::vector<double> br{0.0};
    for (int k = grading; k >= 1; --k) br.push_back(std::ldexp(1.0, -k));
    for (int k = 2; k <= grading; ++k) br.push_back(1.0 - std::ldexp(1.0, -k));
    br.push_back(1.0);
    const GaussRule& g = gauss_legendre(order);
    x->clear();
    w->clear();
    for (std::size_t p = 0; p + 1 < br.size(); ++p) {
        const double u0 = a + (b - a) * br[p], u1 = a + (b - a) * br[p + 1];
        for (int i = 0; i < order; ++i) {
            x->push_back(u0 + (u1 - u0) * g.x[i]);
            w->push_back((u1 - u0) * g.w[i]);
        }
    }
}

void sort_cuts(std::vector<double>* c, double tol) {
    std::sort(c->begin(), c->end());
    c->erase(std::unique(c->begin(), c->end(), [tol](double p, double q) { return std::abs(p - q) <= tol; }),
             c->end());
}

// Walks the tensor grid of cells defined by per-axis cut lists.
template <class F>
void for_each_cell(const std::vector<std::vector<double>>& cuts, F&& f) {
    const int n = static_cast<int>(cuts.size());
    std::array<std::size_t, 3> it{0, 0, 0};
    for (int d = 0; d < n; ++d)
        if (cuts[d].size() < 2) return;
    while (true) {
        Vec lo(n), hi(n);
        for (int d = 0; d < n; ++d) {
            lo[d] = cuts[d][it[d]];
            hi[d] = cuts[d][it[d] + 1];
        }
        f(lo, hi);
        int d = n - 1;
        while (d >= 0) {
            if (++it[d] + 1 < cuts[d].size()) break;
            it[d] = 0;
            --d;
        }
        if (d < 0) return;
    }
}

// Tensor Gauss rule of the given order on every cell of a cut grid.
template <class F>
void gauss_on_cells(const std::vector<std::vector<double>>& cuts, int order, F&& visit) {
    const int n = static_cast<int>(cuts.size());
    const GaussRule& g = gauss_legendre(order);
    for_each_cell(cuts, [&](const Vec& lo, const Vec& hi) {
        std::array<std::size_t, 3> it{0, 0, 0};
        Vec x(n);
        while (true) {
            double w = 1.0;
            for (int d = 0; d < n; ++d) {
                x[d] = lo[d] + (hi[d] - lo[d]) * g.x[it[d]];
                w *= (hi[d] - lo[d]) * g.w[it[d]];
            }
            visit(x, w);
            int d = n - 1;
            while (d >= 0) {
                if (++it[d] < g.x.size()) break;
                it[d] = 0;
                --d;
            }
            if (d < 0) break;
        }
    });
}

class ExteriorWalker {
public:
    ExteriorWalker(const L1Extension& e, const ExteriorRule& rule, const ExteriorVisitor& visit)
        : e_(e), rule_(rule), visit_(visit), n_(e.domain().dim()), theta_(e.support_radius()) {}

    std::size_t nodes = 0;

    void cell(std::size_t cube, double side, const Vec& lo, const Vec& hi, bool check_theta, int depth) {
        Vec mid = 0.5 * (lo + hi);
        const std::vector<CubeKey> active = e_.cover().blowup_neighbors(mid);
        if (active.size() < 2) return;  // a single bump: its differential vanishes
        // Every active bump must be positive on the whole cell.  Otherwise cut
        // at the offending support edge and start again.
        if (depth < 6) {
            for (const CubeKey& q : active) {
                const Vec c = cube_center(q, n_);
                const double h = kBlowupHalf * cube_side(q);
                for (int d = 0; d < n_; ++d) {
                    for (double t : {c[d] - h, c[d] + h}) {
                        const double tol = 1e-12 * side;
                        if (t > lo[d] + tol && t < hi[d] - tol) {
                            Vec hi1 = hi, lo2 = lo;
                            hi1[d] = t;
                            lo2[d] = t;
                            cell(cube, side, lo, hi1, check_theta, depth + 1);
                            cell(cube, side, lo2, hi, check_theta, depth + 1);
                            return;
                        }
                    }
                }
            }
        }
        const ExteriorStencil st = e_.stencil(active);
        std::array<std::vector<double>, 3> xs, ws;
        for (int d = 0; d < n_; ++d) {
            const bool band = hi[d] - lo[d] <= rule_.band_fraction * side;
            graded_rule(lo[d], hi[d], band ? rule_.band_order : rule_.long_order,
                        band ? rule_.band_grading : rule_.long_grading, &xs[d], &ws[d]);
        }
        std::array<std::size_t, 3> it{0, 0, 0};
        Vec y(n_);
        while (true) {
            double w = 1.0;
            for (int d = 0; d < n_; ++d) {
                y[d] = xs[d][it[d]];
                w *= ws[d][it[d]];
            }
            Vec E = e_.exterior_sum(st, y);
            if (check_theta && -e_.domain().signed_distance(y) > theta_) E.setZero();
            visit_(cube, y, w, E);
            ++nodes;
            int d = n_ - 1;
            while (d >= 0) {
                if (++it[d] < xs[d].size()) break;
                it[d] = 0;
                --d;
            }
            if (d < 0) break;
        }
    }

private:
    const L1Extension& e_;
    const ExteriorRule& rule_;
    const ExteriorVisitor& visit_;
    int n_;
    double theta_;
};

std::vector<double> richardson_column(std::vector<double> v, int terms) {
    for (int j = 1; j <= terms && v.size() > 1; ++j) {
        const double f = std::ldexp(1.0, j);
        std::vector<double> next;
        for (std::size_t i = 1; i < v.size(); ++i) next.push_back((f * v[i] - v[i - 1]) / (f - 1.0));
        v = std::move(next);
    }
    return v;
}

// Random polynomial vector field of a given total degree with analytic Jacobian.
class PolynomialField final : public Field {
public:
    PolynomialField(int n, int degree, std::uint64_t seed) : n_(n) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        for (int a = 0; a <= degree; ++a)
            for (int b = 0; a + b <= degree; ++b)
                for (int c = 0; a + b + c <= degree; ++c) {
                    if (n == 2 && c > 0) continue;
                    exps_.push_back({a, b, c});
                }
        coef_.resize(static_cast<std::size_t>(n_));
        for (auto& row : coef_)
            for (std::size_t m = 0; m < exps_.size(); ++m) row.push_back(uni(rng));
    }
    int dim() const override { return n_; }
    Vec value(const Vec& x) const override {
        Vec v = Vec::Zero(n_);
        for (std::size_t m = 0; m < exps_.size(); ++m) {
            double mono = 1.0;
            for (int d = 0; d < n_; ++d) mono *= std::pow(x[d], exps_[m][d]);
            for (int i = 0; i < n_; ++i) v[i] += coef_[i][m] * mono;
        }
        return v;
    }
    Mat jacobian(const Vec& x) const override {
        Mat J = Mat::Zero(n_, n_);
        for (std::size_t m = 0; m < exps_.size(); ++m)
            for (int j = 0; j < n_; ++j) {
                if (exps_[m][j] == 0) continue;
                double mono = exps_[m][j];
                for (int d = 0; d < n_; ++d) mono *= std::pow(x[d], exps_[m][d] - (d == j ? 1 : 0));
                for (int i = 0; i < n_; ++i) J(i, j) += coef_[i][m] * mono;
            }
        return J;
    }
    std::string name() const override { return "polynomial"; }

private:
    int n_;
    std::vector<std::array<int, 3>> exps_;
    std::vector<std::vector<double>> coef_;
};

double factorial(int k) {
    double f = 1.0;
    for (int j = 2; j <= k; ++j) f *= j;
    return f;
}

Vec barycentric_point(std::span<const Vec> v, const std::array<double, 4>& b) {
    Vec x = Vec::Zero(v[0].size());
    for (std::size_t j = 0; j < v.size(); ++j) x += b[j] * v[j];
    return x;
}

// Flux through the face of a simplex, oriented away from `opposite`.
double face_flux(const Field& u, std::span<const Vec> face, const Vec& opposite, int degree) {
    const int k = static_cast<int>(face.size()) - 1;
    const KVector nu = simplex_normal(face.data(), static_cast<int>(face.size()));
    Vec centroid = Vec::Zero(opposite.size());
    for (const Vec& p : face) centroid += p;
    centroid /= static_cast<double>(face.size());
    const double orient = pair(vec_to_form(centroid - opposite), nu) >= 0 ? 1.0 : -1.0;
    const SimplexRule& rule = simplex_rule(k, degree);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.weights.size(); ++i)
        acc += rule.weights[i] * pair(vec_to_form(u.value(barycentric_point(face, rule.bary[i]))), nu);
    return orient * acc;
}

std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> p) {
    std::sort(p.begin(), p.end(), [](const auto& a, const auto& b) { return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]); });
    if (p.size() < 3) return p;
    auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    };
    std::vector<Eigen::Vector2d> h(2 * p.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        while (k >= 2 && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
        h[k++] = p[i];
    }
    for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
        h[k++] = p[i];
    }
    h.resize(k - 1);
    return h;
}

}  // namespace

// ---------------------------------------------------------------- Report

nlohmann::json Report::to_json() const {
    nlohmann::json r = nlohmann::json::array();
    for (double v : residuals) r.push_back(finite_or_null(v));
    nlohmann::json j = {{"check", check}, {"params", params}, {"residuals", r}, {"pass", pass}};
    j["fitted_order"] = fitted_order ? finite_or_null(*fitted_order) : nlohmann::json(nullptr);
    if (!details.empty()) j["details"] = details;
    return j;
}

// ---------------------------------------------------------------- test functions

TestFunction::TestFunction(Vec center, double radius) : c_(std::move(center)), r_(radius) {
    if (!(radius > 0)) throw VerifyError("TestFunction: radius must be positive");
}

double TestFunction::value(const Vec& x) const {
    const double s = (x - c_).squaredNorm() / (r_ * r_);
    if (s >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - s));
}

Vec TestFunction::gradient(const Vec& x) const {
    const double s = (x - c_).squaredNorm() / (r_ * r_);
    if (s >= 1.0) return Vec::Zero(x.size());
    const double t = 1.0 - s;
    return std::exp(1.0 - 1.0 / t) * (-2.0 / (r_ * r_ * t * t)) * (x - c_);
}

double TestFunction::gradient_sup() const {
    // |grad psi| = g(s) / r with g(s) = 2 sqrt(s) exp(1 - 1/(1-s)) / (1-s)^2, unimodal on (0, 1).
    auto g = [](double s) { return 2.0 * std::sqrt(s) * std::exp(1.0 - 1.0 / (1.0 - s)) / ((1.0 - s) * (1.0 - s)); };
    double a = 0.0, b = 1.0;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = g(x1), f2 = g(x2);
    for (int i = 0; i < 200 && b - a > 1e-15; ++i) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = g(x1);
        }
    }
    return std::max(f1, f2) / r_;
}

bool TestFunction::meets(const Vec& lo, const Vec& hi) const {
    double d2 = 0.0;
    for (int d = 0; d < c_.size(); ++d) {
        const double e = std::max({lo[d] - c_[d], c_[d] - hi[d], 0.0});
        d2 += e * e;
    }
    return d2 < r_ * r_;
}

std::vector<TestFunction> straddling_tests(const Domain& dom, int count, std::uint64_t seed, double rmin,
                                           double rmax) {
    if (!(rmin > 0) || rmax < rmin) throw VerifyError("straddling_tests: invalid radius range");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<TestFunction> out;
    const Vec lo = dom.bbox_lo(), hi = dom.bbox_hi();
    while (static_cast<int>(out.size()) < count) {
        Vec x(dom.dim());
        for (int d = 0; d < dom.dim(); ++d) x[d] = lo[d] + (hi[d] - lo[d]) * uni(rng);
        const double r = rmin + (rmax - rmin) * uni(rng);
        out.emplace_back(dom.closest_boundary_point(x), r);
    }
    return out;
}

std::vector<Vec> exterior_points(const Domain& dom, int count, std::uint64_t seed, double dmin, double dmax) {
    if (!(dmax > dmin) || dmin < 0) throw VerifyError("exterior_points: invalid distance range");
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

std::vector<Vec> interior_points(const Domain& dom, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec> out;
    while (static_cast<int>(out.size()) < count) {
        Vec y(dom.dim());
        for (int d = 0; d < dom.dim(); ++d) y[d] = dom.bbox_lo()[d] + (dom.bbox_hi()[d] - dom.bbox_lo()[d]) * u(rng);
        if (dom.contains(y)) out.push_back(y);
    }
    return out;
}

// ---------------------------------------------------------------- exterior integration

nlohmann::json ExteriorRule::to_json() const {
    return {{"band_order", band_order}, {"band_grading", band_grading}, {"long_order", long_order},
            {"long_grading", long_grading}, {"band_fraction", band_fraction}};
}

std::size_t visit_exterior(const L1Extension& e, const CoverList& list, int max_level, const ExteriorRule& rule,
                           const std::function<bool(const Vec&, const Vec&)>& keep, const ExteriorVisitor& visit,
                           const std::vector<std::vector<double>>& extra_cuts) {
    const int n = e.domain().dim();
    const WhitneyCover& cover = e.cover();
    const double theta = e.support_radius();
    ExteriorWalker walker(e, rule, visit);
    for (std::size_t i = 0; i < list.cubes.size(); ++i) {
        const CubeKey& Q = list.cubes[i];
        if (Q.level > max_level) continue;
        const double side = cube_side(Q);
        const Vec c = cube_center(Q, n);
        const Vec lo = c.array() - 0.5 * side, hi = c.array() + 0.5 * side;
        if (!keep(lo, hi)) continue;
        std::vector<std::vector<double>> cuts(static_cast<std::size_t>(n));
        for (int d = 0; d < n; ++d) cuts[d] = {lo[d], hi[d]};
        auto add = [&](int d, double t) {
            if (t > lo[d] && t < hi[d]) cuts[d].push_back(t);
        };
        for (std::size_t j : cover.neighbors(list, i)) {
            const Vec cj = cube_center(list.cubes[j], n);
            const double sj = cube_side(list.cubes[j]);
            for (int d = 0; d < n; ++d)
                for (double t : {cj[d] - 0.5 * sj, cj[d] + 0.5 * sj, cj[d] - kBlowupHalf * sj, cj[d] + kBlowupHalf * sj})
                    add(d, t);
        }
        for (int d = 0; d < n && d < static_cast<int>(extra_cuts.size()); ++d)
            for (double t : extra_cuts[d]) add(d, t);
        for (auto& cd : cuts) sort_cuts(&cd, 1e-13 * side);
        const bool check_theta = e.config().truncate_support &&
                                 -e.domain().signed_distance(c) + 0.5 * std::sqrt(double(n)) * side > theta;
        for_each_cell(cuts, [&](const Vec& a, const Vec& b) {
            if (keep(a, b)) walker.cell(i, side, a, b, check_theta, 0);
        });
    }
    return walker.nodes;
}

// ---------------------------------------------------------------- weak residual

nlohmann::json WeakQuadrature::to_json() const {
    return {{"min_level", min_level}, {"max_level", max_level}, {"richardson", richardson},
            {"rule", rule.to_json()}, {"interior_order", interior_order}, {"interior_cells", interior_cells}};
}

double field_l1_norm(const Field& u, const Domain& dom, int order, int cells) {
    double s = 0.0;
    for (const auto& [x, w] : dom.interior_quadrature(order, cells)) s += w * u.value(x).norm();
    return s;
}

std::vector<WeakResidual> weak_div_residual(const L1Extension& e, std::span<const TestFunction> tests,
                                            const WeakQuadrature& q) {
    if (q.min_level > q.max_level) throw VerifyError("weak_div_residual: min_level exceeds max_level");
    const Domain& dom = e.domain();
    const double theta = e.support_radius();
    double margin = 0.0;
    for (const TestFunction& t : tests) {
        const double reach = -dom.signed_distance(t.center()) + t.radius();
        if (reach > theta) throw VerifyError("weak_div_residual: test support leaves B_theta");
        margin = std::max(margin, std::max(0.0, reach));
    }
    const std::size_t T = tests.size();
    const int levels = q.max_level + 1;
    std::vector<std::vector<double>> bucket(T, std::vector<double>(static_cast<std::size_t>(levels), 0.0));
    std::vector<double> interior(T, 0.0);
    if (dom.kind() == DomainKind::Rectangle) {
        // Per test: the support box clipped to the rectangle, interior_cells per axis.
        for (std::size_t t = 0; t < T; ++t) {
            std::vector<std::vector<double>> cuts(static_cast<std::size_t>(dom.dim()));
            for (int d = 0; d < dom.dim(); ++d) {
                const double a = std::max(dom.bbox_lo()[d], tests[t].center()[d] - tests[t].radius());
                const double b = std::min(dom.bbox_hi()[d], tests[t].center()[d] + tests[t].radius());
                if (!(b > a)) cuts[d].clear();
                else
                    for (int c = 0; c <= q.interior_cells; ++c) cuts[d].push_back(a + (b - a) * c / q.interior_cells);
            }
            gauss_on_cells(cuts, q.interior_order, [&](const Vec& x, double w) {
                interior[t] += w * e.field().value(x).dot(tests[t].gradient(x));
            });
        }
    } else {
        for (const auto& [x, w] : dom.interior_quadrature(q.interior_order, q.interior_cells)) {
            const Vec ux = e.field().value(x);
            for (std::size_t t = 0; t < T; ++t)
                if ((x - tests[t].center()).squaredNorm() < tests[t].radius() * tests[t].radius())
                    interior[t] += w * ux.dot(tests[t].gradient(x));
        }
    }
    const double unorm = field_l1_norm(e.field(), dom);

    const CoverList list = e.cover().build(Side::Exterior, q.max_level + 2, margin + 1e-9);
    std::vector<std::size_t> live;  // tests meeting the current cell
    auto keep = [&](const Vec& lo, const Vec& hi) {
        for (const TestFunction& t : tests)
            if (t.meets(lo, hi)) return true;
        return false;
    };
    visit_exterior(e, list, q.max_level, q.rule, keep, [&](std::size_t i, const Vec& y, double w, const Vec& E) {
        const int lev = list.cubes[i].level;
        for (std::size_t t = 0; t < T; ++t) {
            const double r = tests[t].radius();
            if ((y - tests[t].center()).squaredNorm() >= r * r) continue;
            bucket[t][static_cast<std::size_t>(lev)] += w * E.dot(tests[t].gradient(y));
        }
    });

    std::vector<WeakResidual> out(T);
    for (std::size_t t = 0; t < T; ++t) {
        WeakResidual& r = out[t];
        r.interior = interior[t];
        r.scale = tests[t].gradient_sup() * unorm;
        double acc = interior[t];
        for (int L = 0; L < levels; ++L) {
            acc += bucket[t][static_cast<std::size_t>(L)];
            if (L >= q.min_level) r.partial.push_back(acc);
        }
        const std::vector<double> col = richardson_column(r.partial, q.richardson);
        const std::vector<double> prev = richardson_column(r.partial, std::max(0, q.richardson - 1));
        r.signed_value = col.back();
        r.residual = std::abs(col.back());
        r.uncertainty = col.size() > 1 ? std::abs(col.back() - col[col.size() - 2]) : std::abs(col.back() - prev.back());
    }
    return out;
}

// ---------------------------------------------------------------- pointwise divergence

double pointwise_div_fd(const std::function<Vec(const Vec&)>& f, const Domain& dom, const Vec& y, double h) {
    if (!(h > 0)) throw VerifyError("pointwise_div_fd: step must be positive");
    double s = 0.0;
    for (int d = 0; d < y.size(); ++d) {
        Vec p = y, m = y;
        p[d] += h;
        m[d] -= h;
        if (!(dom.signed_distance(p) < 0) || !(dom.signed_distance(m) < 0))
            throw VerifyError("pointwise_div_fd: stencil crosses the boundary");
        s += (f(p)[d] - f(m)[d]) / (2 * h);
    }
    return s;
}

double pointwise_div_fd(const L1Extension& e, const Vec& y, double h) {
    return pointwise_div_fd([&](const Vec& p) { return e.evaluate(p); }, e.domain(), y, h);
}

OrderStudy fd_order_study(const L1Extension& e, const Vec& y, std::span<const double> steps) {
    OrderStudy s;
    const double eps = std::numeric_limits<double>::epsilon();
    std::vector<double> lx, ly;
    bool all_low = true;
    for (double h : steps) {
        double M = 0.0;
        for (int d = 0; d < y.size(); ++d)
            for (double sg : {-1.0, 1.0}) {
                Vec p = y;
                p[d] += sg * h;
                M = std::max(M, e.evaluate(p).cwiseAbs().maxCoeff());
            }
        const double r = std::abs(pointwise_div_fd(e, y, h));
        const double floor = 1000.0 * eps * std::max(M, 1e-300) / h;
        s.steps.push_back(h);
        s.residuals.push_back(r);
        s.floors.push_back(floor);
        if (r > floor) all_low = false;
        lx.push_back(std::log(h));
        ly.push_back(std::log(std::max(r, 1e-300)));
    }
    s.at_rounding = all_low;
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    s.order = sxx > 0 ? sxy / sxx : 0.0;
    return s;
}

// ---------------------------------------------------------------- norms

NormRatio norm_ratio(const L1Extension& e, double p, int max_level, const ExteriorRule& rule) {
    const bool inf = std::isinf(p);
    if (!inf && p != 1.0 && p != 2.0) throw VerifyError("norm_ratio: p must be 1, 2 or inf");
    const Domain& dom = e.domain();
    const double theta = e.support_radius();
    NormRatio r;
    r.p = p;
    r.max_level = max_level;
    double in = 0.0;
    for (const auto& [x, w] : dom.interior_quadrature(8, 32)) {
        const double v = e.field().value(x).norm();
        in = inf ? std::max(in, v) : in + w * std::pow(v, p);
    }
    double ext = 0.0;
    const CoverList list = e.cover().build(Side::Exterior, max_level + 2, theta);
    auto keep = [&](const Vec& lo, const Vec& hi) {
        const Vec c = 0.5 * (lo + hi);
        return -dom.signed_distance(c) - 0.5 * (hi - lo).norm() < theta;
    };
    r.nodes = visit_exterior(e, list, max_level, rule, keep, [&](std::size_t, const Vec&, double w, const Vec& E) {
        const double v = E.norm();
        ext = inf ? std::max(ext, v) : ext + w * std::pow(v, p);
    });
    r.exterior_part = ext;
    if (inf) {
        r.field_norm = in;
        r.extension_norm = std::max(in, ext);
    } else {
        r.field_norm = std::pow(in, 1.0 / p);
        r.extension_norm = std::pow(in + ext, 1.0 / p);
    }
    r.ratio = r.extension_norm / r.field_norm;
    return r;
}

std::vector<StripRatio> strip_ratios(const L1Extension& e, int kmin, int kmax, int max_level,
                                     const ExteriorRule& rule) {
    if (kmin > kmax) throw VerifyError("strip_ratios: empty range");
    const Domain& dom = e.domain();
    const int n = dom.dim();
    const bool rect = dom.kind() == DomainKind::Rectangle;
    std::vector<StripRatio> out;
    for (int k = kmin; k <= kmax; ++k) out.push_back({std::ldexp(1.0, -k), 0.0, 0.0, 0.0});

    // Exterior strips, cut along the strip boundaries when they are axis aligned.
    std::vector<std::vector<double>> cuts(static_cast<std::size_t>(n));
    if (rect)
        for (int d = 0; d < n; ++d)
            for (const StripRatio& s : out)
                for (double f : {0.5, 1.0}) {
                    cuts[d].push_back(dom.bbox_lo()[d] - f * s.delta);
                    cuts[d].push_back(dom.bbox_hi()[d] + f * s.delta);
                }
    const double dmax = out.front().delta, dmin = 0.5 * out.back().delta;
    const CoverList list = e.cover().build(Side::Exterior, max_level + 2, dmax * 1.01);
    auto keep = [&](const Vec& lo, const Vec& hi) {
        const Vec c = 0.5 * (lo + hi);
        const double D = -dom.signed_distance(c), r = 0.5 * (hi - lo).norm();
        return D + r > dmin && D - r < dmax;
    };
    visit_exterior(e, list, max_level, rule, keep,
                   [&](std::size_t, const Vec& y, double w, const Vec& E) {
                       const double D = -dom.signed_distance(y), v = E.norm();
                       for (StripRatio& s : out)
                           if (D > 0.5 * s.delta && D < s.delta) s.exterior += w * v;
                   },
                   cuts);

    // Interior strips delta/32 < dist < 8 delta.
    auto add_interior = [&](const Vec& x, double w) {
        const double D = dom.signed_distance(x), v = e.field().value(x).norm();
        for (StripRatio& s : out)
            if (D > s.delta / 32.0 && D < 8.0 * s.delta) s.interior += w * v;
    };
    if (rect) {
        std::vector<std::vector<double>> ic(static_cast<std::size_t>(n));
        for (int d = 0; d < n; ++d) {
            const double a = dom.bbox_lo()[d], b = dom.bbox_hi()[d];
            for (int c = 0; c <= 16; ++c) ic[d].push_back(a + (b - a) * c / 16.0);
            for (const StripRatio& s : out)
                for (double t : {s.delta / 32.0, 8.0 * s.delta})
                    if (t < 0.5 * (b - a)) {
                        ic[d].push_back(a + t);
                        ic[d].push_back(b - t);
                    }
            sort_cuts(&ic[d], 1e-14);
        }
        gauss_on_cells(ic, 6, add_interior);
    } else {
        for (const auto& [x, w] : dom.interior_quadrature(8, 128)) add_interior(x, w);
    }
    for (StripRatio& s : out) s.ratio = s.interior > 0 ? s.exterior / s.interior : std::numeric_limits<double>::infinity();
    return out;
}

// ---------------------------------------------------------------- per-term bound

double hull_integral(const Field& u, std::span<const Vec> pts, int degree) {
    std::vector<Eigen::Vector2d> p;
    for (const Vec& v : pts) {
        if (v.size() != 2) throw VerifyError("hull_integral: planar points only");
        p.emplace_back(v[0], v[1]);
    }
    const auto h = convex_hull_2d(p);
    if (h.size() < 3) return 0.0;
    const SimplexRule& rule = simplex_rule(2, degree);
    double s = 0.0;
    for (std::size_t t = 1; t + 1 < h.size(); ++t) {
        const Eigen::Vector2d a = h[0], b = h[t], c = h[t + 1];
        const double area = 0.5 * std::abs((b - a)[0] * (c - a)[1] - (b - a)[1] * (c - a)[0]);
        for (std::size_t i = 0; i < rule.weights.size(); ++i) {
            const Eigen::Vector2d x = rule.bary[i][0] * a + rule.bary[i][1] * b + rule.bary[i][2] * c;
            s += area * rule.weights[i] * u.value(Vec(x)).norm();
        }
    }
    return s;
}

std::vector<TermSample> simplex_term_samples(const L1Extension& e, int count, std::uint64_t seed, int level_lo,
                                             int level_hi) {
    const int n = e.domain().dim();
    if (n != 2) throw VerifyError("simplex_term_samples: only planar domains");
    const CoverList list = e.cover().build(Side::Exterior, level_hi, 0.5 * e.support_radius());
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < list.cubes.size(); ++i)
        if (list.cubes[i].level >= level_lo && list.cubes[i].level <= level_hi) pool.push_back(i);
    if (pool.empty()) throw VerifyError("simplex_term_samples: no cubes in the level range");
    std::mt19937_64 rng(seed);
    std::vector<TermSample> out;
    while (static_cast<int>(out.size()) < count) {
        const std::size_t i = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
        const std::vector<std::size_t> nb = e.cover().neighbors(list, i);
        TermSample s;
        s.tuple.push_back(list.cubes[i]);
        for (int j = 1; j < n; ++j)
            s.tuple.push_back(list.cubes[nb[std::uniform_int_distribution<std::size_t>(0, nb.size() - 1)(rng)]]);
        std::shuffle(s.tuple.begin(), s.tuple.end(), rng);
        s.functional = e.simplex_functional(s.tuple);
        std::vector<Vec> corners;
        for (const CubeKey& q : s.tuple) {
            const CubeKey img = e.cover().reflect(q);
            const Vec c = cube_center(img, n);
            const double h = 0.25 * cube_side(img);  // half-size cube
            for (int m = 0; m < (1 << n); ++m) {
                Vec p = c;
                for (int d = 0; d < n; ++d) p[d] += ((m >> d) & 1) ? h : -h;
                corners.push_back(p);
            }
        }
        for (const Vec& a : corners)
            for (const Vec& b : corners) s.hull_diameter = std::max(s.hull_diameter, (a - b).norm());
        s.hull_mass = hull_integral(e.field(), corners);
        s.ratio = s.hull_mass > 0 ? std::abs(s.functional) * s.hull_diameter / s.hull_mass : 0.0;
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------- Stokes

double simplex_boundary_flux(const Field& u, std::span<const Vec> verts, int degree) {
    const int n = u.dim();
    if (static_cast<int>(verts.size()) != n + 1) throw VerifyError("stokes: need n + 1 vertices");
    double flux = 0.0;
    for (int j = 0; j <= n; ++j) {
        std::vector<Vec> face;
        for (int i = 0; i <= n; ++i)
            if (i != j) face.push_back(verts[i]);
        flux += face_flux(u, face, verts[j], degree);
    }
    return flux;
}

double stokes_check(const Field& u, std::span<const Vec> verts, int degree) {
    const int n = u.dim();
    const double flux = simplex_boundary_flux(u, verts, degree);
    Mat F(n, n);
    for (int j = 0; j < n; ++j) F.col(j) = verts[j + 1] - verts[0];
    const double vol = std::abs(F.determinant()) / factorial(n);
    const SimplexRule& rule = simplex_rule(n, degree);
    double div = 0.0;
    for (std::size_t i = 0; i < rule.weights.size(); ++i)
        div += rule.weights[i] * u.divergence(barycentric_point(verts, rule.bary[i]));
    return std::abs(flux - vol * div);
}

// ---------------------------------------------------------------- suites

Report restriction_support_check(const L1Extension& e, int interior_samples, int exterior_samples,
                                 std::uint64_t seed) {
    Report r;
    r.check = "restriction_support";
    r.params = {{"domain", e.domain().to_json()}, {"field", e.field().name()}, {"interior_samples", interior_samples},
                {"exterior_samples", exterior_samples}, {"seed", seed}, {"theta", e.support_radius()}};
    std::size_t bad_in = 0, bad_out = 0;
    double max_in = 0.0, max_out = 0.0;
    for (const Vec& y : interior_points(e.domain(), interior_samples, seed)) {
        const Vec a = e.evaluate(y), b = e.field().value(y);
        if (a != b) ++bad_in;
        max_in = std::max(max_in, (a - b).cwiseAbs().maxCoeff());
    }
    const double th = e.support_radius();
    for (const Vec& y : exterior_points(e.domain(), exterior_samples, seed + 1, th * (1 + 1e-12), 2.0 * th)) {
        const Vec a = e.evaluate(y);
        if (!(a.array() == 0.0).all()) ++bad_out;
        max_out = std::max(max_out, a.cwiseAbs().maxCoeff());
    }
    r.residuals = {max_in, max_out};
    r.details = {{"interior_mismatches", bad_in}, {"exterior_nonzero", bad_out}};
    r.pass = bad_in == 0 && bad_out == 0;
    return r;
}

Report w11_identity_suite(const W11Extension& w, const W11SuiteOptions& opt) {
    const int n = w.domain().dim();
    Report r;
    r.check = "w11_identities";
    r.params = {{"domain", w.domain().to_json()}, {"field", w.field().name()}, {"points", opt.points},
                {"seed", opt.seed}, {"identity_tol", opt.identity_tol}, {"sn_tol", opt.sn_tol},
                {"assembled_tol", opt.assembled_tol}, {"coefficients", w.coefficients()}};
    const double th = w.support_radius();
    std::vector<double> worst(static_cast<std::size_t>(n + 2), 0.0);  // E0, R_1..R_{n-1}, S_n, assembled
    std::size_t active = 0;
    for (const Vec& y : exterior_points(w.domain(), opt.points, opt.seed, opt.dmin_fraction * th,
                                        opt.dmax_fraction * th)) {
        double lmin = std::numeric_limits<double>::infinity();
        for (const CubeKey& q : w.partition().local(y, 0).cubes) lmin = std::min(lmin, cube_side(q));
        const double h = 1e-4 * lmin;
        std::vector<double> S(static_cast<std::size_t>(n + 2), 0.0);
        for (int k = 1; k <= n; ++k) S[k] = w.corrector_S(k, y)[0];
        const double dE0 = fd_exterior_derivative([&](const Vec& p) { return vec_to_form(w.jones_E0(p)); }, y, h, true);
        worst[0] = std::max(worst[0], std::abs(dE0 - S[1]));
        for (int k = 1; k < n; ++k) {
            const double dR = fd_exterior_derivative([&](const Vec& p) { return w.corrector_R(k, p); }, y, h, true);
            worst[k] = std::max(worst[k], std::abs(dR - (n - k) * (S[k] - S[k + 1])));
        }
        worst[n] = std::max(worst[n], std::abs(S[n]));
        const double dE = fd_exterior_derivative([&](const Vec& p) { return vec_to_form(w.assemble(p)); }, y, h, true);
        worst[n + 1] = std::max(worst[n + 1], opt.solenoidal ? std::abs(dE) : std::abs(dE - S[n]));
        if (std::abs(S[1]) > 1e-3) ++active;
    }
    r.residuals = worst;
    bool ok = true;
    for (int k = 0; k < n; ++k) ok = ok && worst[k] <= opt.identity_tol;
    if (opt.solenoidal) ok = ok && worst[n] <= opt.sn_tol;
    ok = ok && worst[n + 1] <= opt.assembled_tol;
    r.pass = ok && active > 0;
    nlohmann::json names = nlohmann::json::array({"dE0 - S1"});
    for (int k = 1; k < n; ++k) names.push_back("dR" + std::to_string(k) + " - (n-k)(S" + std::to_string(k) + " - S" + std::to_string(k + 1) + ")");
    names.push_back("S" + std::to_string(n));
    names.push_back(opt.solenoidal ? "d(assembled)" : "d(assembled) - Sn");
    r.details = {{"residual_names", names}, {"active_points", active},
                 {"calibration", w.calibration().to_json()}};
    return r;
}

Report stokes_suite(int n, int simplices, std::uint64_t seed) {
    if (n != 2 && n != 3) throw VerifyError("stokes_suite: dimension must be 2 or 3");
    Report r;
    r.check = "stokes";
    r.params = {{"dim", n}, {"simplices", simplices}, {"seed", seed}, {"field_degree", 3}, {"rule_degree", 3}};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    double worst_stokes = 0.0, worst_normal = 0.0, worst_constant = 0.0;
    for (int s = 0; s < simplices; ++s) {
        PolynomialField u(n, 3, seed * 7919 + static_cast<std::uint64_t>(s));
        std::vector<Vec> v(static_cast<std::size_t>(n + 1), Vec(n));
        for (auto& p : v)
            for (int d = 0; d < n; ++d) p[d] = uni(rng);
        worst_stokes = std::max(worst_stokes, stokes_check(u, v, 3));
        Vec c(n);
        for (int d = 0; d < n; ++d) c[d] = uni(rng);
        const auto cst = constant_field(c);
        worst_constant = std::max(worst_constant, std::abs(simplex_boundary_flux(*cst, v, 1)));
        for (int k = 1; k <= n; ++k) {
            Mat F(n, k);
            for (int j = 0; j < k; ++j) F.col(j) = v[j + 1] - v[0];
            const double gram = std::sqrt(std::max(0.0, (F.transpose() * F).determinant())) / factorial(k - 1);
            const double len = simplex_normal(v.data(), k + 1).norm();
            // simplex_normal carries 1/(r-1)! = 1/k!; the Gram area of the k-simplex is sqrt(det G)/k!.
            worst_normal = std::max(worst_normal, std::abs(len - gram / k));
        }
    }
    r.residuals = {worst_stokes, worst_normal, worst_constant};
    r.details = {{"residual_names", {"stokes", "normal_vs_gram", "constant_field_flux"}}};
    r.pass = worst_stokes <= 1e-8 && worst_normal <= 1e-12 && worst_constant <= 1e-12;
    return r;
}

}  // namespace dfext
