#include "dfext/extend_w11.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>
#include <sstream>

namespace dfext {
namespace {

double factorial(int m) {
    double f = 1.0;
    for (int j = 2; j <= m; ++j) f *= j;
    return f;
}

// With nu = (1/k!) (x_{k+1} - x_k) ^ ... ^ (x_2 - x_1) and left contractions,
// the raw sums obey dE0 = -S_1 and dR_k = (-1)^k [(n-k) S_k + k S_{k+1}].
// Rescaling both families puts the identities in the form dE0 = S_1 and
// dR_k = (n-k)(S_k - S_{k+1}).
double r_scale(int n, int k) { return factorial(k - 1) * factorial(n - k) / factorial(n - 1); }
double s_scale(int n, int k) { return ((k & 1) ? -1.0 : 1.0) * r_scale(n, k); }

double smooth_step(double t) {
    // 1 for t <= 0, 0 for t >= 1, C-infinity in between
    if (t <= 0.0) return 1.0;
    if (t >= 1.0) return 0.0;
    const double a = std::exp(-1.0 / (1.0 - t)), b = std::exp(-1.0 / t);
    return a / (a + b);
}

}  // namespace

double telescoping_coefficient(int n, int k) { return -1.0 / (n - k); }

double printed_coefficient(int n, int k) {
    return ((k & 1) ? -1.0 : 1.0) * factorial(n - k - 1) / factorial(n - 1);
}

nlohmann::json W11Config::to_json() const {
    nlohmann::json j = base.to_json();
    j["coefficients"] = coefficients == CoefficientSet::Telescoping ? "telescoping" : "printed";
    j["self_check"] = self_check;
    j["self_check_points"] = self_check_points;
    j["self_check_tolerance"] = self_check_tolerance;
    return j;
}

W11Config W11Config::from_json(const nlohmann::json& j) {
    W11Config c;
    c.base = ExtensionConfig::from_json(j);
    if (!j.contains("simplex_degree")) c.base.simplex_degree = kDefaultSimplexDegree;
    const std::string s = j.value("coefficients", std::string("telescoping"));
    if (s == "telescoping") c.coefficients = CoefficientSet::Telescoping;
    else if (s == "printed") c.coefficients = CoefficientSet::Printed;
    else throw ExtensionError("unknown coefficient set '" + s + "'");
    c.self_check = j.value("self_check", c.self_check);
    c.self_check_points = j.value("self_check_points", c.self_check_points);
    c.self_check_tolerance = j.value("self_check_tolerance", c.self_check_tolerance);
    if (c.self_check_points < 1) throw ExtensionError("self_check_points must be positive");
    return c;
}

nlohmann::json CalibrationReport::to_json() const {
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& c : identities)
        ids.push_back({{"identity", c.name}, {"k", c.k}, {"max_residual", c.max_residual}, {"max_scale", c.max_scale},
                       {"pass", c.pass}});
    return {{"identities", ids},
            {"telescoping_residual", telescoping_residual},
            {"printed_residual", printed_residual},
            {"telescoping_coefficients", telescoping_coefficients},
            {"printed_coefficients", printed_coefficients}};
}

double fd_exterior_derivative(const std::function<KForm(const Vec&)>& f, const Vec& y, double h, bool extrapolate) {
    auto central = [&](double step) {
        double s = 0.0;
        for (int d = 0; d < y.size(); ++d) {
            Vec p = y, m = y;
            p[d] += step;
            m[d] -= step;
            s += (form_to_vec(f(p))[d] - form_to_vec(f(m))[d]) / (2 * step);
        }
        return s;
    };
    const double a = central(h);
    if (!extrapolate) return a;
    const double b = central(0.5 * h);
    return (4.0 * b - a) / 3.0;
}

W11Extension::W11Extension(std::shared_ptr<const Domain> dom, FieldPtr u, W11Config cfg)
    : dom_(std::move(dom)), u_(std::move(u)), cfg_(cfg) {
    if (!dom_ || !u_) throw ExtensionError("extension: missing domain or field");
    const int n = dom_->dim();
    if (u_->dim() != n) throw ExtensionError("extension: field and domain dimensions differ");
    if (cfg_.base.outer_order < 1) throw ExtensionError("extension: outer_order must be positive");
    if (cfg_.base.variant == SimplexVariant::Curvilinear) {
        // Stokes consistency between k- and (k+1)-simplices needs one family of
        // simplices for every k, and full-dimensional simplices are flat.
        if (!dom_->is_convex())
            throw ExtensionError("W11 extension: curvilinear simplices are not supported (domain " + dom_->name() + ")");
        cfg_.base.variant = SimplexVariant::Flat;
        notices_.push_back("domain is convex: using flat simplices");
    } else if (!dom_->is_convex()) {
        throw ExtensionError("W11 extension: flat simplices require a convex domain (domain " + dom_->name() + ")");
    }
    cover_ = std::make_shared<const WhitneyCover>(dom_, WhitneyOptions{cfg_.base.max_level});
    pu_ = std::make_shared<const PartitionOfUnity>(cover_);
    outer_ = make_cube_rule(n, cfg_.base.outer_order);
    for (int k = 1; k < n; ++k)
        coef_.push_back(cfg_.coefficients == CoefficientSet::Telescoping ? telescoping_coefficient(n, k)
                                                                          : printed_coefficient(n, k));
    if (cfg_.self_check) report_ = calibrate(cfg_.self_check_points, cfg_.self_check_tolerance);
}

double W11Extension::cutoff(const Vec& y) const {
    const double D = -dom_->signed_distance(y);
    const double th = support_radius();
    return smooth_step((D - th) / th);
}

std::vector<Box> W11Extension::half_boxes(const TupleKey& key) const {
    const int n = dom_->dim();
    std::vector<Box> boxes;
    for (int j = 0; j < key.len; ++j) boxes.push_back(Box{cube_center(key.cubes[j], n), 0.5 * cube_side(key.cubes[j])});
    return boxes;
}

Vec W11Extension::cube_average(const CubeKey& q) const {
    {
        std::shared_lock lock(mu_);
        auto it = avg_.find(q);
        if (it != avg_.end()) return it->second;
    }
    const int n = dom_->dim();
    const Box box{cube_center(q, n), 0.5 * cube_side(q)};
    Vec acc = Vec::Zero(n);
    for (std::size_t i = 0; i < outer_.nodes.size(); ++i) acc += outer_.weights[i] * u_->value(box.map(outer_.nodes[i]));
    std::unique_lock lock(mu_);
    return avg_.emplace(q, acc).first->second;
}

KForm W11Extension::s_functional(const TupleKey& key) const {
    {
        std::shared_lock lock(mu_);
        auto it = s_cache_.find(key);
        if (it != s_cache_.end()) return it->second;
    }
    const int n = dom_->dim();
    const int k = key.len - 1;
    SimplexSampler sampler{dom_.get(), SimplexVariant::Flat, cfg_.base.collar_c1,
                           &simplex_rule(k, cfg_.base.simplex_degree), nullptr};
    KForm acc(n, n - k);
    ProductOptions po = cfg_.base.product;
    po.seed ^= TupleKeyHash{}(key);
    visit_product(outer_, half_boxes(key), po, [&](std::span<const Vec> pts, double w) {
        sampler.visit(pts, w, [&](const Vec& z, const KVector& el) {
            const Mat J = u_->jacobian(z);
            // Du . nu: the derivative direction pairs with nu, the value form with the rest
            for (int a = 0; a < n; ++a) acc += contract(interior(a, el), vec_to_form(J.col(a)));
        });
    });
    std::unique_lock lock(mu_);
    return s_cache_.emplace(key, acc).first->second;
}

const std::array<KForm, 4>& W11Extension::r_functional(const TupleKey& key) const {
    {
        std::shared_lock lock(mu_);
        auto it = r_cache_.find(key);
        if (it != r_cache_.end()) return it->second;
    }
    const int n = dom_->dim();
    const int k = key.len - 1;
    SimplexSampler sampler{dom_.get(), SimplexVariant::Flat, cfg_.base.collar_c1,
                           &simplex_rule(k, cfg_.base.simplex_degree), nullptr};
    // R(x_I)(y) is affine in y: sum_b (y - c)_b G_b - B with c the first cube centre.
    std::array<KForm, 4> G;
    for (auto& g : G) g = KForm(n, n - 1 - k);
    const Vec c = cube_center(key.cubes[0], n);
    ProductOptions po = cfg_.base.product;
    po.seed ^= TupleKeyHash{}(key) * 31u;
    visit_product(outer_, half_boxes(key), po, [&](std::span<const Vec> pts, double w) {
        sampler.visit(pts, w, [&](const Vec& z, const KVector& el) {
            const Mat J = u_->jacobian(z);
            for (int a = 0; a < n; ++a) {
                const KVector ia = interior(a, el);
                const KForm da = vec_to_form(J.col(a));
                for (int b = 0; b < n; ++b) {
                    const KForm t = contract(wedge(ia, KVector::basis(n, 1u << b)), da);
                    G[b] += t;
                    G[n] += (z[b] - c[b]) * t;
                }
            }
        });
    });
    std::unique_lock lock(mu_);
    return r_cache_.emplace(key, G).first->second;
}

Vec W11Extension::jones_E0(const Vec& y) const {
    const int n = dom_->dim();
    const double sd = dom_->signed_distance(y);
    if (sd >= 0.0) return u_->value(y);
    const double rho = cutoff(y);
    if (rho == 0.0) return Vec::Zero(n);
    LocalPartition lp = pu_->local(y, 0);
    Vec acc = Vec::Zero(n);
    for (std::size_t i = 0; i < lp.cubes.size(); ++i) acc += lp.phi[i] * cube_average(cover_->reflect(lp.cubes[i]));
    return rho * acc;
}

namespace {

// Visits (k+1)-tuples of active cubes with the weight phi_{i_{k+1}} dphi_{i_k} ^ ... ^ dphi_{i_1}.
template <class F>
void for_each_weighted(const LocalPartition& lp, const std::vector<CubeKey>& img, int n, int k, F&& f) {
    std::vector<KForm> dphi;
    for (const Vec& g : lp.grad) dphi.push_back(as_covector(g));
    TupleKey key;
    key.len = k + 1;
    for_each_tuple(lp.cubes.size(), k + 1, [&](std::span<const std::size_t> I) {
        const double phi = lp.phi[I[k]];
        if (phi == 0.0) return;
        KForm w = KForm::scalar(n, phi);
        for (int s = k - 1; s >= 0; --s) w = wedge(w, dphi[I[s]]);
        if (w.norm() == 0.0) return;
        for (int j = 0; j <= k; ++j) key.cubes[j] = img[I[j]];
        f(key, w);
    });
}

}  // namespace

KForm W11Extension::corrector_S(int k, const Vec& y) const {
    const int n = dom_->dim();
    if (k < 1 || k > n) throw ExtensionError("corrector_S: k must lie in [1, n]");
    KForm acc(n, n);
    if (dom_->signed_distance(y) >= 0.0) return acc;
    LocalPartition lp = pu_->local(y, 1);
    std::vector<CubeKey> img;
    for (const auto& q : lp.cubes) img.push_back(cover_->reflect(q));
    for_each_weighted(lp, img, n, k, [&](const TupleKey& key, const KForm& w) { acc += wedge(w, s_functional(key)); });
    return s_scale(n, k) * acc;
}

KForm W11Extension::corrector_R(int k, const Vec& y) const {
    const int n = dom_->dim();
    if (k < 1 || k > n - 1) throw ExtensionError("corrector_R: k must lie in [1, n-1]");
    KForm acc(n, n - 1);
    if (dom_->signed_distance(y) >= 0.0) return acc;
    LocalPartition lp = pu_->local(y, 1);
    std::vector<CubeKey> img;
    for (const auto& q : lp.cubes) img.push_back(cover_->reflect(q));
    for_each_weighted(lp, img, n, k, [&](const TupleKey& key, const KForm& w) {
        const auto& G = r_functional(key);
        const Vec c = cube_center(key.cubes[0], n);
        KForm R = -1.0 * G[n];
        for (int b = 0; b < n; ++b) R += (y[b] - c[b]) * G[b];
        acc += wedge(w, R);
    });
    return r_scale(n, k) * acc;
}

Vec W11Extension::assemble_with(const Vec& y, std::span<const double> coefficients) const {
    const int n = dom_->dim();
    if (static_cast<int>(coefficients.size()) != n - 1) throw ExtensionError("assemble: expected n-1 coefficients");
    if (dom_->signed_distance(y) >= 0.0) return u_->value(y);
    Vec out = jones_E0(y);
    for (int k = 1; k < n; ++k) out += coefficients[k - 1] * form_to_vec(corrector_R(k, y));
    return out;
}

Vec W11Extension::assemble(const Vec& y) const { return assemble_with(y, coef_); }

CalibrationReport W11Extension::calibrate(int points, double tolerance) const {
    const int n = dom_->dim();
    CalibrationReport rep;
    for (int k = 1; k < n; ++k) {
        rep.telescoping_coefficients.push_back(telescoping_coefficient(n, k));
        rep.printed_coefficients.push_back(printed_coefficient(n, k));
    }
    // deterministic exterior points at moderate distance
    std::mt19937_64 rng(0x5eedu);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double th = support_radius();
    const Vec lo = dom_->bbox_lo(), hi = dom_->bbox_hi();
    std::vector<Vec> pts;
    for (int tries = 0; static_cast<int>(pts.size()) < points && tries < 100000; ++tries) {
        Vec y(n);
        for (int d = 0; d < n; ++d) y[d] = lo[d] - 0.5 * th + (hi[d] - lo[d] + th) * unit(rng);
        const double D = -dom_->signed_distance(y);
        if (D > 0.02 * th && D < 0.4 * th) pts.push_back(y);
    }

    auto check = [&](const std::string& name, int k, auto&& lhs_minus_rhs) {
        IdentityCheck c;
        c.name = name;
        c.k = k;
        for (const Vec& y : pts) {
            auto [res, scale] = lhs_minus_rhs(y);
            c.max_residual = std::max(c.max_residual, std::abs(res));
            c.max_scale = std::max(c.max_scale, scale);
        }
        c.pass = c.max_residual <= tolerance * c.max_scale + 1e-9;
        rep.identities.push_back(c);
        if (!c.pass) {
            std::ostringstream msg;
            msg << "telescoping self-check failed for k = " << k << " (" << name << "): residual " << c.max_residual
                << " against scale " << c.max_scale;
            throw CalibrationError(k, msg.str());
        }
    };
    auto step = [&](const Vec& y) {
        double lmin = 1e300;
        for (const auto& q : pu_->local(y, 0).cubes) lmin = std::min(lmin, cube_side(q));
        return 1e-4 * lmin;
    };

    check("dE0 = S_1", 0, [&](const Vec& y) {
        const double d = fd_exterior_derivative([&](const Vec& p) { return vec_to_form(jones_E0(p)); }, y, step(y), true);
        const double s = corrector_S(1, y)[0];
        return std::pair{d - s, std::max(std::abs(d), std::abs(s))};
    });
    for (int k = 1; k < n; ++k)
        check("dR_k = (n-k)(S_k - S_{k+1})", k, [&](const Vec& y) {
            const double d = fd_exterior_derivative([&](const Vec& p) { return corrector_R(k, p); }, y, step(y), true);
            const double a = (n - k) * corrector_S(k, y)[0], b = (n - k) * corrector_S(k + 1, y)[0];
            return std::pair{d - (a - b), std::max({std::abs(d), std::abs(a), std::abs(b)})};
        });
    for (const Vec& y : pts) {
        const double sn = corrector_S(n, y)[0];
        const double h = step(y);
        const double dt = fd_exterior_derivative(
            [&](const Vec& p) { return vec_to_form(assemble_with(p, rep.telescoping_coefficients)); }, y, h, true);
        const double dp = fd_exterior_derivative(
            [&](const Vec& p) { return vec_to_form(assemble_with(p, rep.printed_coefficients)); }, y, h, true);
        rep.telescoping_residual = std::max(rep.telescoping_residual, std::abs(dt - sn));
        rep.printed_residual = std::max(rep.printed_residual, std::abs(dp - sn));
    }
    return rep;
}

std::size_t W11Extension::cache_size() const {
    std::shared_lock lock(mu_);
    return avg_.size() + s_cache_.size() + r_cache_.size();
}

}  // namespace dfext
