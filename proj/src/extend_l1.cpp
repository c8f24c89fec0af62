#include "dfext/extend_l1.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "dfext/kernels.hpp"

namespace dfext {
namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

const char* variant_name(SimplexVariant v) { return v == SimplexVariant::Flat ? "flat" : "curvilinear"; }

// Samples the open chord between vertices and reports whether it stays inside.
bool chord_inside(const Domain& dom, std::span<const Vec> verts) {
    constexpr int kSamples = 33;
    for (std::size_t a = 0; a < verts.size(); ++a)
        for (std::size_t b = a + 1; b < verts.size(); ++b)
            for (int s = 0; s <= kSamples; ++s) {
                const double t = static_cast<double>(s) / kSamples;
                if (dom.signed_distance(Vec((1 - t) * verts[a] + t * verts[b])) < 0) return false;
            }
    return true;
}

bool same_cube(const TupleKey& key) {
    for (int j = 1; j < key.len; ++j)
        if (!(key.cubes[j] == key.cubes[0])) return false;
    return true;
}

}  // namespace

nlohmann::json ExtensionConfig::to_json() const {
    return {{"simplex", variant_name(variant)},
            {"outer_order", outer_order},
            {"simplex_degree", simplex_degree},
            {"max_level", max_level},
            {"collar_c1", collar_c1},
            {"curvilinear_on_convex", curvilinear_on_convex},
            {"truncate_support", truncate_support},
            {"mc_budget", product.budget},
            {"allow_monte_carlo", product.allow_monte_carlo},
            {"mc_samples", product.mc_samples},
            {"seed", product.seed}};
}

ExtensionConfig ExtensionConfig::from_json(const nlohmann::json& j) {
    ExtensionConfig c;
    const std::string s = j.value("simplex", std::string("flat"));
    if (s == "flat") c.variant = SimplexVariant::Flat;
    else if (s == "curvilinear") c.variant = SimplexVariant::Curvilinear;
    else throw ExtensionError("unknown simplex variant '" + s + "'");
    c.outer_order = j.value("outer_order", c.outer_order);
    c.simplex_degree = j.value("simplex_degree", c.simplex_degree);
    c.max_level = j.value("max_level", c.max_level);
    c.collar_c1 = j.value("collar_c1", c.collar_c1);
    c.curvilinear_on_convex = j.value("curvilinear_on_convex", c.curvilinear_on_convex);
    c.truncate_support = j.value("truncate_support", c.truncate_support);
    c.product.budget = j.value("mc_budget", c.product.budget);
    c.product.allow_monte_carlo = j.value("allow_monte_carlo", c.product.allow_monte_carlo);
    c.product.mc_samples = j.value("mc_samples", c.product.mc_samples);
    c.product.seed = j.value("seed", c.product.seed);
    if (c.outer_order < 1 || c.outer_order > 16) throw ExtensionError("outer_order must lie in [1, 16]");
    if (c.simplex_degree < 0 || c.simplex_degree > 40) throw ExtensionError("simplex_degree must lie in [0, 40]");
    if (c.product.allow_monte_carlo && !j.contains("seed"))
        throw ExtensionError("a seed is required when Monte Carlo is enabled");
    return c;
}

std::uint64_t ExtensionConfig::hash() const { return fnv1a(to_json().dump()); }

std::size_t TupleKeyHash::operator()(const TupleKey& k) const noexcept {
    CubeKeyHash h;
    std::size_t acc = static_cast<std::size_t>(k.len) * 0x9e3779b97f4a7c15ull;
    for (int j = 0; j < k.len; ++j) acc ^= h(k.cubes[j]) + 0x9e3779b97f4a7c15ull + (acc << 6) + (acc >> 2);
    return acc;
}

bool SimplexSampler::visit(std::span<const Vec> verts, double weight,
                           const std::function<void(const Vec&, const KVector&)>& f) const {
    const int k = static_cast<int>(verts.size()) - 1;
    if (k < 1) throw ExtensionError("simplex needs at least two vertices");
    double max_edge = 0.0;
    for (std::size_t a = 0; a < verts.size(); ++a)
        for (std::size_t b = a + 1; b < verts.size(); ++b) max_edge = std::max(max_edge, (verts[a] - verts[b]).norm());
    const KVector nu = simplex_normal(verts.data(), k + 1);
    if (!(nu.norm() > 1e-12 * std::pow(max_edge, k))) return false;

    bool flat = variant == SimplexVariant::Flat || k >= dom->dim();
    std::unique_ptr<SimplexMap> curved;
    if (!flat) {
        try {
            curved = std::make_unique<CurvedSimplex>(*dom, verts, c1);
        } catch (const CollarError& e) {
            // Outside the collar a flat chord inside the domain carries the same flux.
            if (!chord_inside(*dom, verts)) throw ExtensionError(std::string("curvilinear simplex unavailable: ") + e.what());
            if (curvilinear_fallbacks) ++*curvilinear_fallbacks;
            flat = true;
        }
    }
    double inv_fact = 1.0;
    for (int j = 2; j <= k; ++j) inv_fact /= j;
    for (std::size_t s = 0; s < rule->weights.size(); ++s) {
        const auto& b = rule->bary[s];
        if (flat) {
            Vec z = b[0] * verts[0];
            for (int j = 1; j <= k; ++j) z += b[j] * verts[j];
            f(z, (weight * rule->weights[s]) * nu);
        } else {
            std::array<double, 3> t{};
            for (int j = 0; j < k; ++j) t[j] = b[j + 1];
            f(curved->eval(t), (weight * rule->weights[s] * inv_fact) * curved->oriented_element(t));
        }
    }
    return true;
}

double support_radius(double eta, double c, int n) {
    return 2.0 * eta * (13.0 * std::sqrt(static_cast<double>(n)) / 12.0 + c);
}

void for_each_tuple(std::size_t m, int r, const std::function<void(std::span<const std::size_t>)>& f) {
    if (m == 0) return;
    std::vector<std::size_t> t(static_cast<std::size_t>(r), 0);
    while (true) {
        f(t);
        int d = r;
        while (d > 0) {
            if (++t[d - 1] < m) break;
            t[d - 1] = 0;
            --d;
        }
        if (d == 0) return;
    }
}

L1Extension::L1Extension(std::shared_ptr<const Domain> dom, FieldPtr u, ExtensionConfig cfg)
    : dom_(std::move(dom)), u_(std::move(u)), cfg_(cfg) {
    if (!dom_ || !u_) throw ExtensionError("extension: missing domain or field");
    if (u_->dim() != dom_->dim()) throw ExtensionError("extension: field and domain dimensions differ");
    if (cfg_.outer_order < 1) throw ExtensionError("extension: outer_order must be positive");
    if (cfg_.variant == SimplexVariant::Curvilinear) {
        if (!dom_->has_smooth_boundary()) {
            if (!dom_->is_convex())
                throw ExtensionError("extension: curvilinear simplices need a smooth boundary (domain " + dom_->name() + ")");
            cfg_.variant = SimplexVariant::Flat;
            notices_.push_back("domain is convex without smooth boundary: using flat simplices");
        } else if (dom_->dim() != 2 && !dom_->is_convex()) {
            throw ExtensionError("extension: curvilinear simplices are only supported in two dimensions");
        } else if (dom_->is_convex() && !cfg_.curvilinear_on_convex) {
            cfg_.variant = SimplexVariant::Flat;
            notices_.push_back("domain is convex: using flat simplices");
        }
    } else if (!dom_->is_convex()) {
        throw ExtensionError("extension: flat simplices require a convex domain (domain " + dom_->name() +
                             "); request curvilinear simplices");
    }
    cover_ = std::make_shared<const WhitneyCover>(dom_, WhitneyOptions{cfg_.max_level});
    pu_ = std::make_shared<const PartitionOfUnity>(cover_);
    outer_ = make_cube_rule(dom_->dim(), cfg_.outer_order);
}

double L1Extension::functional_of_images(std::span<const CubeKey> interior_tuple) const {
    const int n = dom_->dim();
    if (static_cast<int>(interior_tuple.size()) != n) throw ExtensionError("functional: tuple length must equal n");
    TupleKey key;
    key.len = n;
    for (int j = 0; j < n; ++j) key.cubes[j] = interior_tuple[j];
    {
        std::shared_lock lock(mu_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    const double v = compute_functional(key);
    std::unique_lock lock(mu_);
    return cache_.emplace(key, v).first->second;
}

double L1Extension::simplex_functional(std::span<const CubeKey> exterior_tuple) const {
    std::array<CubeKey, 3> img;
    for (std::size_t j = 0; j < exterior_tuple.size() && j < 3; ++j) img[j] = cover_->reflect(exterior_tuple[j]);
    return functional_of_images(std::span<const CubeKey>(img.data(), exterior_tuple.size()));
}

double L1Extension::compute_functional(const TupleKey& key) const {
    const int n = dom_->dim();
    std::vector<Box> boxes;
    for (int j = 0; j < key.len; ++j) boxes.push_back(Box{cube_center(key.cubes[j], n), 0.5 * cube_side(key.cubes[j])});

    std::size_t fallbacks = 0;
    SimplexSampler sampler{dom_.get(), cfg_.variant, cfg_.collar_c1, &simplex_rule(n - 1, cfg_.simplex_degree),
                           &fallbacks};
    // A tuple inside a single cube spans a simplex inside that cube, so flat is exact.
    if (same_cube(key)) sampler.variant = SimplexVariant::Flat;

    std::vector<Vec> nodes;
    std::array<std::vector<double>, 3> coef;
    const std::uint32_t all = (1u << n) - 1u;
    ProductOptions po = cfg_.product;
    po.seed ^= TupleKeyHash{}(key);
    const bool mc = visit_product(outer_, boxes, po, [&](std::span<const Vec> pts, double w) {
        sampler.visit(pts, w, [&](const Vec& z, const KVector& el) {
            nodes.push_back(z);
            // pair(vec_to_form(u), el) = sum_j (-1)^j u_j el[all \ j]
            for (int j = 0; j < n; ++j) coef[j].push_back(((j & 1) ? -1.0 : 1.0) * el.at_mask(all ^ (1u << j)));
        });
    });
    if (mc) used_mc_ = true;
    if (fallbacks) curv_fallbacks_ += fallbacks;
    if (nodes.empty()) return 0.0;
    std::vector<double> vals[3];
    u_->value_batch(nodes, vals);
    const double* a[3];
    const double* b[3];
    for (int j = 0; j < n; ++j) {
        a[j] = vals[j].data();
        b[j] = coef[j].data();
    }
    return kernels::multi_dot(a, b, n, nodes.size());
}

Vec L1Extension::exterior_sum(const Vec& y) const {
    const int n = dom_->dim();
    LocalPartition lp = pu_->local(y, 1);
    const std::size_t m = lp.cubes.size();
    std::vector<CubeKey> img(m);
    for (std::size_t i = 0; i < m; ++i) img[i] = cover_->reflect(lp.cubes[i]);
    std::vector<KForm> dphi;
    for (std::size_t i = 0; i < m; ++i) dphi.push_back(as_covector(lp.grad[i]));

    KForm acc(n, n - 1);
    std::array<CubeKey, 3> tuple;
    for_each_tuple(m, n, [&](std::span<const std::size_t> I) {
        // I = (i_1, ..., i_n); the weight is phi_{i_n} dphi_{i_{n-1}} ^ ... ^ dphi_{i_1}
        const double phi = lp.phi[I[n - 1]];
        if (phi == 0.0) return;
        KForm w = KForm::scalar(n, phi);
        for (int s = n - 2; s >= 0; --s) w = wedge(w, dphi[I[s]]);
        if (w.norm() == 0.0) return;
        for (int j = 0; j < n; ++j) tuple[j] = img[I[j]];
        acc += functional_of_images(std::span<const CubeKey>(tuple.data(), n)) * w;
    });
    if ((n - 1) & 1) acc *= -1.0;
    return form_to_vec(acc);
}

ExteriorStencil L1Extension::stencil(std::span<const CubeKey> cubes) const {
    const int n = dom_->dim();
    ExteriorStencil st;
    st.cubes.assign(cubes.begin(), cubes.end());
    std::sort(st.cubes.begin(), st.cubes.end());
    st.cubes.erase(std::unique(st.cubes.begin(), st.cubes.end()), st.cubes.end());
    const std::size_t m = st.cubes.size();
    std::vector<CubeKey> img(m);
    for (std::size_t i = 0; i < m; ++i) img[i] = cover_->reflect(st.cubes[i]);
    std::array<CubeKey, 3> tuple;
    for_each_tuple(m, n, [&](std::span<const std::size_t> I) {
        for (int j = 0; j < n; ++j) tuple[j] = img[I[j]];
        st.functionals.push_back(functional_of_images(std::span<const CubeKey>(tuple.data(), n)));
    });
    return st;
}

Vec L1Extension::exterior_sum(const ExteriorStencil& st, const Vec& y) const {
    const int n = dom_->dim();
    const std::size_t m = st.cubes.size();
    LocalPartition lp = pu_->local_from(st.cubes, y, 1);
    // local_from drops cubes whose bump vanishes at y; map back to stencil slots.
    std::vector<double> phi(m, 0.0);
    std::vector<KForm> dphi(m, KForm(n, 1));
    for (std::size_t i = 0, j = 0; i < lp.cubes.size(); ++i) {
        while (st.cubes[j] != lp.cubes[i]) ++j;
        phi[j] = lp.phi[i];
        dphi[j] = as_covector(lp.grad[i]);
    }
    KForm acc(n, n - 1);
    std::size_t slot = 0;
    for_each_tuple(m, n, [&](std::span<const std::size_t> I) {
        const double a = st.functionals[slot++];
        const double p = phi[I[n - 1]];
        if (p == 0.0 || a == 0.0) return;
        KForm w = KForm::scalar(n, p);
        for (int s = n - 2; s >= 0; --s) w = wedge(w, dphi[I[s]]);
        acc += a * w;
    });
    if ((n - 1) & 1) acc *= -1.0;
    return form_to_vec(acc);
}

Vec L1Extension::evaluate(const Vec& y) const {
    const double sd = dom_->signed_distance(y);
    if (sd >= 0.0) return u_->value(y);
    if (cfg_.truncate_support && -sd > support_radius()) return Vec::Zero(dom_->dim());
    return exterior_sum(y);
}

std::size_t L1Extension::cache_size() const {
    std::shared_lock lock(mu_);
    return cache_.size();
}

MollifiedInput mollified_inner(std::shared_ptr<const Domain> dom, FieldPtr u, double eps, int nodes_per_axis) {
    if (!(eps > 0.0)) throw ExtensionError("mollified_inner: eps must be positive");
    const double limit = dom->has_smooth_boundary() ? dom->collar_width() : 0.25 * (dom->bbox_hi() - dom->bbox_lo()).minCoeff();
    if (eps >= limit) throw ExtensionError("mollified_inner: eps exceeds the admissible width");
    MollifiedInput out;
    out.domain = std::make_shared<const Domain>(dom->shrunk(eps));
    out.field = mollified_field(std::move(u), dom, eps, nodes_per_axis);
    out.eps = eps;
    return out;
}

}  // namespace dfext
