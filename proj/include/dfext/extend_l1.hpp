#pragma once
// Divergence-free extension of integrable fields across the boundary.
//
// Outside the domain the extension is the (n-1)-form
//     (-1)^{n-1} sum_I phi_{i_n} dphi_{i_{n-1}} ^ ... ^ dphi_{i_1} a_I,
// where I runs over n-tuples of exterior cubes whose bumps are active at y and
// a_I averages the flux of u through the simplex spanned by one point from each
// reflected half-cube.  Because a_I only depends on the reflected cubes, the
// functionals are cached per tuple of interior cubes.

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfext/field.hpp"
#include "dfext/partition.hpp"
#include "dfext/quadrature.hpp"
#include "dfext/whitney.hpp"

namespace dfext {

class ExtensionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExtensionConfig {
    SimplexVariant variant = SimplexVariant::Flat;
    int outer_order = 2;      // Gauss points per axis on every reflected half-cube
    int simplex_degree = 4;   // polynomial exactness of the inner simplex rule
    int max_level = 48;       // deepest level reachable by lazy cover queries
    double collar_c1 = 4.0;   // comparability constant for curvilinear simplices
    bool curvilinear_on_convex = false;  // keep curvilinear simplices on convex domains
    bool truncate_support = true;        // return 0 beyond theta without summing
    ProductOptions product;

    nlohmann::json to_json() const;
    static ExtensionConfig from_json(const nlohmann::json& j);
    /// FNV-1a hash of the canonical JSON form.
    std::uint64_t hash() const;
};

/// Up to four interior cubes identifying a cached functional.
struct TupleKey {
    std::array<CubeKey, 4> cubes{};
    int len = 0;
    friend bool operator==(const TupleKey&, const TupleKey&) = default;
};

struct TupleKeyHash {
    std::size_t operator()(const TupleKey& k) const noexcept;
};

/// Evaluates sum_j sum_i w_{ij} f(...) over a set of simplices and product nodes.
/// Shared by the extension and corrector functionals.
struct SimplexSampler {
    const Domain* dom = nullptr;
    SimplexVariant variant = SimplexVariant::Flat;
    double c1 = 4.0;
    const SimplexRule* rule = nullptr;
    std::size_t* curvilinear_fallbacks = nullptr;

    /// Calls visit(z, element) for every simplex node, where element is the
    /// oriented k-vector weight: integrating a form against it gives the
    /// integral over the simplex.  Returns false for a degenerate simplex.
    bool visit(std::span<const Vec> verts, double weight,
               const std::function<void(const Vec&, const KVector&)>& visit) const;
};

/// Cubes active on a region together with the functionals of all their
/// n-tuples, so that the exterior sum can be evaluated without cover lookups.
struct ExteriorStencil {
    std::vector<CubeKey> cubes;        // sorted exterior members
    std::vector<double> functionals;   // m^n values in lexicographic tuple order
};

class L1Extension {
public:
    L1Extension(std::shared_ptr<const Domain> dom, FieldPtr u, ExtensionConfig cfg = {});

    const Domain& domain() const { return *dom_; }
    std::shared_ptr<const Domain> domain_ptr() const { return dom_; }
    const Field& field() const { return *u_; }
    FieldPtr field_ptr() const { return u_; }
    const ExtensionConfig& config() const { return cfg_; }
    const WhitneyCover& cover() const { return *cover_; }
    std::shared_ptr<const WhitneyCover> cover_ptr() const { return cover_; }
    const PartitionOfUnity& partition() const { return *pu_; }
    const std::vector<std::string>& notices() const { return notices_; }

    /// theta = 2 eta (13 sqrt(n) / 12 + c).
    double support_radius() const { return cover_->theta(); }

    /// a_I for an n-tuple of exterior cubes (their reflections determine the value).
    double simplex_functional(std::span<const CubeKey> exterior_tuple) const;
    /// Same functional addressed directly by interior cubes.
    double functional_of_images(std::span<const CubeKey> interior_tuple) const;

    /// The extension: u on the closed domain, the form sum outside.
    Vec evaluate(const Vec& y) const;
    /// The exterior form sum regardless of the support radius (y must lie outside).
    Vec exterior_sum(const Vec& y) const;

    /// Stencil made of the given exterior cubes.
    ExteriorStencil stencil(std::span<const CubeKey> cubes) const;
    /// Exterior sum over the stencil cubes only.  Equals exterior_sum(y) when
    /// the stencil holds every cube whose blow-up contains y.
    Vec exterior_sum(const ExteriorStencil& st, const Vec& y) const;

    std::size_t cache_size() const;
    std::size_t curvilinear_fallbacks() const { return curv_fallbacks_.load(); }
    bool used_monte_carlo() const { return used_mc_.load(); }

private:
    double compute_functional(const TupleKey& key) const;

    std::shared_ptr<const Domain> dom_;
    FieldPtr u_;
    ExtensionConfig cfg_;
    std::shared_ptr<const WhitneyCover> cover_;
    std::shared_ptr<const PartitionOfUnity> pu_;
    CubeRule outer_;
    std::vector<std::string> notices_;

    mutable std::shared_mutex mu_;
    mutable std::unordered_map<TupleKey, double, TupleKeyHash> cache_;
    mutable std::atomic<std::size_t> curv_fallbacks_{0};
    mutable std::atomic<bool> used_mc_{false};
};

/// Mollified input on the inner parallel domain: returns the shrunk domain and
/// the convolution of the zero extension of u with a radius-eps bump.
struct MollifiedInput {
    std::shared_ptr<const Domain> domain;
    FieldPtr field;
    double eps = 0.0;
};
MollifiedInput mollified_inner(std::shared_ptr<const Domain> dom, FieldPtr u, double eps, int nodes_per_axis = 12);

/// theta = 2 eta (13 sqrt(n) / 12 + c).
double support_radius(double eta, double c, int n);

/// Calls f(tuple) for every r-tuple over {0, ..., m-1} in lexicographic order.
void for_each_tuple(std::size_t m, int r, const std::function<void(std::span<const std::size_t>)>& f);

}  // namespace dfext
