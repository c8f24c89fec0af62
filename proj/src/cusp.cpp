#include "dfext/cusp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>

#include "dfext/quadrature.hpp"

namespace dfext {
namespace {

constexpr int kSamplesPerLine = 257;
constexpr int kPanelOrder = 16;
constexpr int kDyadicLevels = 120;

// Surface measure of the unit sphere S^{m}.
double sphere_measure(int m) {
    // |S^m| = 2 pi^{(m+1)/2} / Gamma((m+1)/2)
    return 2.0 * std::pow(std::numbers::pi, 0.5 * (m + 1)) / std::tgamma(0.5 * (m + 1));
}

// Pieces of [0, 1] on which seg(t) lies in the domain.  Boundary crossings
// are located by bisection between samples.
std::vector<std::pair<double, double>> clip_line(const Domain& dom, const std::function<Vec(double)>& seg) {
    std::vector<std::pair<double, double>> out;
    auto inside = [&](double t) { return dom.contains(seg(t)); };
    auto crossing = [&](double a, double b) {
        const bool ia = inside(a);
        for (int k = 0; k < 200 && b - a > 0; ++k) {
            const double m = 0.5 * (a + b);
            if (m <= a || m >= b) break;
            (inside(m) == ia ? a : b) = m;
        }
        return 0.5 * (a + b);
    };
    double start = -1.0;
    bool prev = inside(0.0);
    if (prev) start = 0.0;
    double tprev = 0.0;
    for (int i = 1; i < kSamplesPerLine; ++i) {
        const double t = static_cast<double>(i) / (kSamplesPerLine - 1);
        const bool cur = inside(t);
        if (cur != prev) {
            const double c = crossing(tprev, t);
            if (cur) start = c;
            else out.emplace_back(start, c);
        }
        prev = cur;
        tprev = t;
    }
    if (prev) out.emplace_back(start, 1.0);
    return out;
}

// Integral of f(t) dt over [a, b] where y(t) is affine.  Panels are dyadic in
// |y| so that the y^-alpha singularity at y = 0 is resolved.
double graded_integral(double a, double b, const std::function<double(double)>& y_of_t,
                       const std::function<double(double)>& f, std::size_t* nodes) {
    std::vector<double> br{a, b};
    const double ya = y_of_t(a), yb = y_of_t(b);
    if (ya != yb) {
        auto t_of_y = [&](double y) { return a + (b - a) * (y - ya) / (yb - ya); };
        if ((ya < 0) != (yb < 0) && ya != 0 && yb != 0) br.push_back(t_of_y(0.0));
        for (double sgn : {-1.0, 1.0}) {
            const double r = std::max(sgn * ya, sgn * yb);
            if (!(r > 0)) continue;
            for (int k = 1; k <= kDyadicLevels; ++k) {
                const double y = sgn * std::ldexp(r, -k);
                const double t = t_of_y(y);
                if (t > std::min(a, b) && t < std::max(a, b)) br.push_back(t);
            }
        }
    }
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    const GaussRule& g = gauss_legendre(kPanelOrder);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < br.size(); ++i) {
        const double u0 = br[i], u1 = br[i + 1];
        for (int q = 0; q < kPanelOrder; ++q) s += (u1 - u0) * g.w[q] * f(u0 + (u1 - u0) * g.x[q]);
        if (nodes) *nodes += kPanelOrder;
    }
    return s;
}

// Outward flux through the part of the segment [p0, p1] inside the domain.
double segment_flux(const Domain& dom, const Field& u, const Vec& p0, const Vec& p1, const Vec& normal,
                    std::size_t* nodes) {
    const int n = static_cast<int>(p0.size());
    const double len = (p1 - p0).norm();
    auto seg = [&](double t) -> Vec { return p0 + t * (p1 - p0); };
    double s = 0.0;
    for (const auto& [a, b] : clip_line(dom, seg))
        s += len * graded_integral(
                       a, b, [&](double t) { return seg(t)[n - 1]; },
                       [&](double t) { return u.value(seg(t)).dot(normal); }, nodes);
    return s;
}

double closed_flux(const CuspScenario& sc, double s) {
    if (sc.side == CuspSide::Plus)
        return (std::pow(s, sc.gamma * (1.0 - sc.alpha)) - std::pow(s, 1.0 - sc.alpha)) / (sc.alpha - 1.0);
    return sphere_measure(sc.n - 2) * std::pow(s, 1.0 - sc.alpha) / (1.0 - sc.alpha);
}

double quadrature_flux_plus(const CuspScenario& sc, const Domain& dom, const Field& u, double s, std::size_t* nodes) {
    const double x0 = std::pow(s, 1.0 / sc.gamma), x1 = s, y0 = s, y1 = std::pow(s, sc.gamma);
    const Vec a(Eigen::Vector2d(x0, y0)), b(Eigen::Vector2d(x1, y0)), c(Eigen::Vector2d(x1, y1)),
        d(Eigen::Vector2d(x0, y1));
    const Vec ex(Eigen::Vector2d(1, 0)), ey(Eigen::Vector2d(0, 1));
    return segment_flux(dom, u, a, b, -ey, nodes) + segment_flux(dom, u, b, c, ex, nodes) +
           segment_flux(dom, u, c, d, ey, nodes) + segment_flux(dom, u, d, a, -ex, nodes);
}

double quadrature_flux_minus(const CuspScenario& sc, const Domain& dom, const Field& u, double r, std::size_t* nodes) {
    const int n = sc.n;
    const double rho = std::pow(r, 1.0 / sc.gamma);
    if (n == 2) {
        double s = 0.0;
        for (double sx : {-1.0, 1.0}) {
            const Vec p0(Eigen::Vector2d(sx * rho, -r)), p1(Eigen::Vector2d(sx * rho, r));
            s += segment_flux(dom, u, p0, p1, Vec(Eigen::Vector2d(sx, 0)), nodes);
        }
        for (double sy : {-1.0, 1.0}) {
            const Vec p0(Eigen::Vector2d(-rho, sy * r)), p1(Eigen::Vector2d(rho, sy * r));
            s += segment_flux(dom, u, p0, p1, Vec(Eigen::Vector2d(0, sy)), nodes);
        }
        return s;
    }
    // n = 3: lateral cylinder in (phi, y) and the two discs in polar form.
    const GaussRule& g = gauss_legendre(kPanelOrder);
    constexpr int kSectors = 8;
    double s = 0.0;
    for (int sec = 0; sec < kSectors; ++sec)
        for (int q = 0; q < kPanelOrder; ++q) {
            const double h = 2.0 * std::numbers::pi / kSectors;
            const double phi = h * (sec + g.x[q]), wphi = h * g.w[q];
            const Vec nrm(Eigen::Vector3d(std::cos(phi), std::sin(phi), 0.0));
            const Vec p0(Eigen::Vector3d(rho * nrm[0], rho * nrm[1], -r)), p1(Eigen::Vector3d(rho * nrm[0], rho * nrm[1], r));
            s += wphi * rho * segment_flux(dom, u, p0, p1, nrm, nodes);
        }
    for (double sy : {-1.0, 1.0}) {
        const Vec nrm(Eigen::Vector3d(0, 0, sy));
        for (int sec = 0; sec < kSectors; ++sec)
            for (int q = 0; q < kPanelOrder; ++q) {
                const double h = 2.0 * std::numbers::pi / kSectors;
                const double phi = h * (sec + g.x[q]), wphi = h * g.w[q];
                // Radial line from the axis to the rim; the area element carries the radius.
                const Vec dir(Eigen::Vector3d(std::cos(phi), std::sin(phi), 0.0));
                auto seg = [&](double t) -> Vec { Vec p = t * rho * dir; p[2] = sy * r; return p; };
                for (const auto& [a, b] : clip_line(dom, seg))
                    s += wphi * rho * graded_integral(
                                          a, b, [&](double) { return sy * r; },
                                          [&](double t) { return t * rho * u.value(seg(t)).dot(nrm); }, nodes);
            }
    }
    return s;
}

}  // namespace

std::string to_string(CuspSide s) { return s == CuspSide::Plus ? "plus" : "minus"; }

CuspSide cusp_side_from_string(const std::string& s) {
    if (s == "plus" || s == "a") return CuspSide::Plus;
    if (s == "minus" || s == "b") return CuspSide::Minus;
    throw CuspError("unknown cusp side '" + s + "' (expected plus or minus)");
}

// ---------------------------------------------------------------- windows

Interval ExponentWindow::p_for_alpha(double a) const {
    if (!alpha.contains(a)) return {0.0, 0.0};
    if (side == CuspSide::Plus) return {(1.0 + gamma) / (a + gamma - 1.0), (1.0 + gamma) / (gamma * a)};
    const double k = (n - 1) / gamma;
    return {std::max(p_min, (1.0 + k) / (a + k - 1.0)), 1.0 / a};
}

Interval ExponentWindow::alpha_for_p(double p) const {
    if (side == CuspSide::Plus) {
        // (1-p) gamma + p (1-alpha) < -1  <=>  alpha > (1 + gamma + p (1 - gamma)) / p;
        // u in L^p  <=>  alpha < (1 + gamma)/(gamma p).
        if (!(p > 0)) return {0.0, 0.0};
        return {std::max(alpha.lo, (1.0 + gamma + p * (1.0 - gamma)) / p),
                std::min(alpha.hi, (1.0 + gamma) / (gamma * p))};
    }
    if (!(p > p_min)) return {0.0, 0.0};
    const double k = (n - 1) / gamma;
    return {std::max(0.0, (1.0 + k) / p + 1.0 - k), 1.0 / p};
}

nlohmann::json ExponentWindow::to_json() const {
    nlohmann::json j = {{"gamma", gamma}, {"n", n}, {"side", to_string(side)}, {"alpha", alpha.to_json()}};
    if (side == CuspSide::Plus) {
        j["p_lower"] = "(1 + gamma) / (alpha + gamma - 1)";
        j["p_upper"] = "(1 + gamma) / (gamma alpha)";
    } else {
        j["p_min"] = p_min;
        j["p_lower"] = "(1 + (n-1)/gamma) / (alpha - 1 + (n-1)/gamma)";
        j["p_upper"] = "1 / alpha";
    }
    return j;
}

ExponentWindow exponent_window(double gamma, int n, CuspSide side) {
    if (!(gamma > 0 && gamma < 1)) throw CuspError("exponent_window: gamma must lie in (0, 1)");
    ExponentWindow w;
    w.gamma = gamma;
    w.n = n;
    w.side = side;
    if (side == CuspSide::Plus) {
        if (n != 2) throw CuspError("exponent_window: the plus side is implemented for n = 2");
        w.alpha = {2.0, (1.0 + gamma) / gamma};
    } else {
        if (n != 2 && n != 3) throw CuspError("exponent_window: the minus side needs n = 2 or 3");
        w.p_min = (n - 1) / (n - 1 - gamma);
        w.alpha = {0.0, 1.0 / w.p_min};
    }
    if (w.alpha.empty()) throw CuspError("exponent_window: empty window");
    return w;
}

double lowerbound_exponent(double gamma, int n, CuspSide side, double alpha, double p) {
    if (side == CuspSide::Plus) return (1.0 - p) * gamma + p * (1.0 - alpha);
    return (n - 1) * (1.0 - p) / gamma + (1.0 - alpha) * p;
}

// ---------------------------------------------------------------- scenario

CuspScenario CuspScenario::make(double gamma, double alpha, double p, CuspSide side, int n, double eta) {
    const ExponentWindow w = exponent_window(gamma, n, side);
    if (!w.alpha.contains(alpha))
        throw CuspError("cusp scenario: alpha outside (" + std::to_string(w.alpha.lo) + ", " +
                        std::to_string(w.alpha.hi) + ")");
    const Interval pw = w.p_for_alpha(alpha);
    if (!pw.contains(p))
        throw CuspError("cusp scenario: p outside (" + std::to_string(pw.lo) + ", " + std::to_string(pw.hi) + ")");
    CuspScenario s;
    s.gamma = gamma;
    s.alpha = alpha;
    s.p = p;
    s.side = side;
    s.n = n;
    const double def = side == CuspSide::Plus ? std::pow(2.0, -1.0 / ((1.0 - alpha) * (gamma - 1.0))) : 0.5;
    s.eta = eta > 0 ? eta : def;
    if (!(s.eta > 0 && s.eta <= def)) throw CuspError("cusp scenario: eta must lie in (0, " + std::to_string(def) + "]");
    return s;
}

Domain CuspScenario::domain() const { return Domain::cusp(n, gamma, side == CuspSide::Plus); }

FieldPtr CuspScenario::field() const {
    return side == CuspSide::Plus ? cusp_shear_field(n, alpha) : cusp_radial_field(n, alpha);
}

nlohmann::json CuspScenario::to_json() const {
    return {{"gamma", gamma}, {"alpha", alpha}, {"p", p}, {"eta", eta}, {"side", to_string(side)}, {"n", n},
            {"exponent", exponent()}, {"growth", growth()}};
}

// ---------------------------------------------------------------- flux

nlohmann::json CuspFlux::to_json() const {
    return {{"s", s}, {"closed_form", closed_form}, {"quadrature", quadrature}, {"difference", difference},
            {"nodes", nodes}};
}

CuspFlux cusp_flux(const CuspScenario& sc, double s) {
    if (!(s > 0 && s <= sc.eta)) throw CuspError("cusp_flux: s must lie in (0, eta]");
    const Domain dom = sc.domain();
    const FieldPtr u = sc.field();
    CuspFlux f;
    f.s = s;
    f.closed_form = closed_flux(sc, s);
    f.quadrature = sc.side == CuspSide::Plus ? quadrature_flux_plus(sc, dom, *u, s, &f.nodes)
                                             : quadrature_flux_minus(sc, dom, *u, s, &f.nodes);
    f.difference = std::abs(f.closed_form - f.quadrature) / std::max(1.0, std::abs(f.closed_form));
    return f;
}

std::vector<CuspFlux> cusp_flux_table(const CuspScenario& sc, double s_min, int count) {
    if (count < 2 || !(s_min > 0 && s_min < sc.eta)) throw CuspError("cusp_flux_table: invalid grid");
    std::vector<CuspFlux> out;
    const double l0 = std::log(s_min), l1 = std::log(sc.eta);
    for (int k = 0; k < count; ++k) {
        const double s = k + 1 == count ? sc.eta : std::exp(l0 + (l1 - l0) * k / (count - 1));
        out.push_back(cusp_flux(sc, s));
    }
    return out;
}

// ---------------------------------------------------------------- lower bound

nlohmann::json LowerBound::to_json() const {
    return {{"exponent", exponent}, {"expected_growth", expected_growth}, {"fitted_growth", fitted_growth},
            {"last_doubling", last_doubling}, {"monotone", monotone}, {"converges", converges},
            {"limit", limit}, {"eps", eps}, {"partial", partial}};
}

LowerBound partial_integrals(double exponent, double eta, double eps_floor) {
    if (!(eta > 0) || !(eps_floor > 0) || eps_floor >= eta) throw CuspError("partial_integrals: invalid range");
    LowerBound lb;
    lb.exponent = exponent;
    lb.expected_growth = std::abs(exponent + 1.0);
    const GaussRule& g = gauss_legendre(20);
    double acc = 0.0, eps = eta;
    while (eps / 2 >= eps_floor) {
        const double a = eps / 2, b = eps;
        for (int q = 0; q < 20; ++q) acc += (b - a) * g.w[q] * std::pow(a + (b - a) * g.x[q], exponent);
        eps = a;
        if (!lb.partial.empty() && !(acc > lb.partial.back())) lb.monotone = false;
        lb.eps.push_back(eps);
        lb.partial.push_back(acc);
    }
    // Log-log fit over eps <= eta 2^-10.
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < lb.eps.size(); ++i)
        if (lb.eps[i] <= std::ldexp(eta, -10)) {
            lx.push_back(std::log(lb.eps[i]));
            ly.push_back(std::log(lb.partial[i]));
        }
    if (lx.size() >= 2) {
        const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
        const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxy += (lx[i] - mx) * (ly[i] - my);
            sxx += (lx[i] - mx) * (lx[i] - mx);
        }
        lb.fitted_growth = -sxy / sxx;
    }
    const std::size_t m = lb.partial.size();
    if (m >= 2) lb.last_doubling = lb.partial[m - 1] / lb.partial[m - 2];
    if (exponent > -1.0) {
        lb.limit = std::pow(eta, exponent + 1.0) / (exponent + 1.0);
        lb.converges = m > 0 && std::abs(lb.limit - lb.partial.back()) <= 1e-5 * lb.limit;
    }
    return lb;
}

LowerBound cusp_lowerbound(const CuspScenario& sc, double eps_floor) {
    if (!(sc.exponent() < -1.0)) throw CuspError("cusp_lowerbound: exponent window violated");
    return partial_integrals(sc.exponent(), sc.eta, eps_floor);
}

// ---------------------------------------------------------------- suite

Report cusp_suite(const CuspScenario& sc, double control_p, double s_min, int flux_points) {
    Report r;
    r.check = "cusp";
    const ExponentWindow w = exponent_window(sc.gamma, sc.n, sc.side);
    r.params = {{"scenario", sc.to_json()}, {"window", w.to_json()}, {"control_p", control_p},
                {"s_min", s_min}, {"flux_points", flux_points}, {"flux_tol", 1e-8}, {"growth_tol", 0.01}};

    const auto table = cusp_flux_table(sc, s_min, flux_points);
    double worst = 0.0;
    bool negative = true;
    nlohmann::json jt = nlohmann::json::array();
    for (const CuspFlux& f : table) {
        worst = std::max(worst, f.difference);
        if (sc.side == CuspSide::Plus && !(f.closed_form < 0)) negative = false;
        jt.push_back(f.to_json());
    }
    const LowerBound lb = cusp_lowerbound(sc, 1e-12);
    const double ce = lowerbound_exponent(sc.gamma, sc.n, sc.side, sc.alpha, control_p);
    const LowerBound control = partial_integrals(ce, sc.eta, 1e-12);

    r.residuals = {worst, std::abs(lb.fitted_growth - lb.expected_growth),
                   std::abs(lb.last_doubling - std::pow(2.0, lb.expected_growth))};
    r.fitted_order = lb.fitted_growth;
    const bool flux_ok = worst <= 1e-8 && negative;
    const bool growth_ok = lb.monotone && std::abs(lb.fitted_growth - lb.expected_growth) <= 0.01;
    const bool control_ok = !w.admits(sc.alpha, control_p) && ce > -1.0 && control.converges;
    r.pass = flux_ok && growth_ok && control_ok;
    r.details = {{"flux_table", jt},
                 {"flux_ok", flux_ok},
                 {"flux_negative", negative},
                 {"lower_bound", lb.to_json()},
                 {"growth_ok", growth_ok},
                 {"control", {{"p", control_p}, {"exponent", ce}, {"limit", control.limit},
                              {"final_partial", control.partial.empty() ? 0.0 : control.partial.back()},
                              {"converges", control.converges}, {"in_window", w.admits(sc.alpha, control_p)}}},
                 {"control_ok", control_ok}};
    return r;
}

}  // namespace dfext
