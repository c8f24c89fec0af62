#pragma once
// Verification suite for the extension operators: weak and pointwise
// divergence residuals, L^p and strip norm ratios, per-term bounds, Stokes
// checks and the corrector identity suite.  Cusp counterexamples live in
// cusp.hpp.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfext/extend_l1.hpp"
#include "dfext/extend_w11.hpp"

namespace dfext {

class VerifyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniform result record of every check.
struct Report {
    std::string check;
    nlohmann::json params = nlohmann::json::object();
    std::vector<double> residuals;
    std::optional<double> fitted_order;
    bool pass = true;
    nlohmann::json details = nlohmann::json::object();

    /// {check, params, residuals[], fitted_order, pass, details}; non-finite
    /// numbers are written as null.
    nlohmann::json to_json() const;
};

/// psi(x) = exp(1 - 1/(1 - |x - c|^2 / r^2)) inside the ball, 0 outside.  Peak value 1.
class TestFunction {
public:
    TestFunction(Vec center, double radius);

    const Vec& center() const { return c_; }
    double radius() const { return r_; }
    double value(const Vec& x) const;
    Vec gradient(const Vec& x) const;
    /// sup |grad psi|, computed once from the radial profile.
    double gradient_sup() const;
    /// True when the support ball meets the closed box [lo, hi].
    bool meets(const Vec& lo, const Vec& hi) const;

private:
    Vec c_;
    double r_;
};

/// Test functions whose centres lie on the boundary, radii uniform in [rmin, rmax].
std::vector<TestFunction> straddling_tests(const Domain& dom, int count, std::uint64_t seed, double rmin,
                                           double rmax);

/// Random points with dmin < dist(y, domain) < dmax.
std::vector<Vec> exterior_points(const Domain& dom, int count, std::uint64_t seed, double dmin, double dmax);
/// Random points of the domain (rejection sampling in the bounding box).
std::vector<Vec> interior_points(const Domain& dom, int count, std::uint64_t seed);

// ---------------------------------------------------------------- exterior integration

/// Composite Gauss rule used on every exterior Whitney cube.  Each cube is cut
/// at the faces and blow-up edges of its neighbours; pieces where a single bump
/// is active carry no extension and are skipped.  Pieces no longer than
/// band_fraction * side get the band rule, the others the long rule.  Both are
/// graded geometrically towards the piece ends, where bumps switch on flatly.
struct ExteriorRule {
    int band_order = 10;
    int band_grading = 1;
    int long_order = 6;
    int long_grading = 3;
    double band_fraction = 0.2;

    static ExteriorRule coarse() { return {4, 1, 3, 2, 0.2}; }
    nlohmann::json to_json() const;
};

/// Node visitor: cube index in the list, node, weight and extension value there.
using ExteriorVisitor = std::function<void(std::size_t, const Vec&, double, const Vec&)>;

/// Visits quadrature nodes of every cube of `list` with level <= max_level that
/// passes `keep` (called with the cube's closed box).  Extra per-axis cut
/// positions may be supplied, for example strip boundaries.  Returns the node count.
std::size_t visit_exterior(const L1Extension& e, const CoverList& list, int max_level, const ExteriorRule& rule,
                           const std::function<bool(const Vec&, const Vec&)>& keep, const ExteriorVisitor& visit,
                           const std::vector<std::vector<double>>& extra_cuts = {});

// ---------------------------------------------------------------- weak residual

struct WeakQuadrature {
    int min_level = 5;
    int max_level = 10;
    int richardson = 3;  // number of eliminated powers of 2^-L
    ExteriorRule rule;
    int interior_order = 12;
    int interior_cells = 24;  // per axis of each support box on rectangles, of the bounding box otherwise
    nlohmann::json to_json() const;
};

struct WeakResidual {
    double residual = 0.0;     // extrapolated |int E u . grad psi|
    double signed_value = 0.0;
    double uncertainty = 0.0;  // spread of the last two extrapolants
    double interior = 0.0;     // int over the domain of u . grad psi
    std::vector<double> partial;  // sums with exterior cubes up to level min_level + i
    double scale = 0.0;        // sup|grad psi| * ||u||_L1
};

/// Pairing of the extension with grad psi for each test.  The exterior part is
/// summed over Whitney cubes level by level; the missing boundary layer decays
/// like a power series in 2^-L and is removed by Richardson extrapolation.
std::vector<WeakResidual> weak_div_residual(const L1Extension& e, std::span<const TestFunction> tests,
                                            const WeakQuadrature& q = {});

/// ||u||_L1 of the input field over its domain.
double field_l1_norm(const Field& u, const Domain& dom, int order = 8, int cells = 32);

// ---------------------------------------------------------------- pointwise divergence

/// Central-difference divergence at y.  Throws VerifyError when a stencil
/// point is not strictly outside the domain.
double pointwise_div_fd(const std::function<Vec(const Vec&)>& f, const Domain& dom, const Vec& y, double h);
double pointwise_div_fd(const L1Extension& e, const Vec& y, double h);

struct OrderStudy {
    std::vector<double> steps;
    std::vector<double> residuals;
    std::vector<double> floors;  // rounding level of each residual
    double order = 0.0;          // least-squares slope of log residual against log h
    bool at_rounding = false;    // every residual below its floor
};
/// FD divergence at the given steps with the rounding floor 1000 eps max|E| / h.
OrderStudy fd_order_study(const L1Extension& e, const Vec& y, std::span<const double> steps);

// ---------------------------------------------------------------- norms

struct NormRatio {
    double p = 1.0;
    double ratio = 0.0;
    double extension_norm = 0.0;  // over B_theta(domain), the domain included
    double field_norm = 0.0;
    double exterior_part = 0.0;   // p-th power integral (or max for p = inf) outside
    int max_level = 0;
    std::size_t nodes = 0;
};
/// ||E u||_{L^p(B_theta)} / ||u||_{L^p(domain)} for p in {1, 2, inf}.  The
/// exterior is integrated over Whitney cubes up to max_level.
NormRatio norm_ratio(const L1Extension& e, double p, int max_level, const ExteriorRule& rule = ExteriorRule::coarse());

struct StripRatio {
    double delta = 0.0;
    double exterior = 0.0;  // int |E u| over delta/2 < dist < delta outside
    double interior = 0.0;  // int |u| over delta/32 < dist < 8 delta inside
    double ratio = 0.0;
};
/// Strip ratios for delta = 2^-k, k in [kmin, kmax].
std::vector<StripRatio> strip_ratios(const L1Extension& e, int kmin, int kmax, int max_level,
                                     const ExteriorRule& rule = ExteriorRule::coarse());

// ---------------------------------------------------------------- per-term bound

struct TermSample {
    std::vector<CubeKey> tuple;
    double functional = 0.0;   // a_I
    double hull_diameter = 0.0;  // delta_I
    double hull_mass = 0.0;    // int over conv(reflected half-cubes) of |u|
    double ratio = 0.0;        // |a_I| delta_I / hull_mass
};
/// Random neighbour multi-indices of exterior cubes with levels in [level_lo, level_hi].  2D only.
std::vector<TermSample> simplex_term_samples(const L1Extension& e, int count, std::uint64_t seed, int level_lo,
                                             int level_hi);
/// Integral of |u| over the convex hull of planar points.
double hull_integral(const Field& u, std::span<const Vec> pts, int degree = 8);

// ---------------------------------------------------------------- Stokes

/// |sum over faces of the outward flux - integral of div u| on a flat n-simplex.
double stokes_check(const Field& u, std::span<const Vec> verts, int degree);
/// Outward flux through the boundary of a flat n-simplex.
double simplex_boundary_flux(const Field& u, std::span<const Vec> verts, int degree);

// ---------------------------------------------------------------- suites

/// Restriction on the domain and vanishing beyond theta.
Report restriction_support_check(const L1Extension& e, int interior_samples, int exterior_samples,
                                 std::uint64_t seed);

/// Corrector identities at exterior points (FD steps 1e-4 times the smallest
/// active cube, extrapolated).  Tolerances: identities 1e-4, |S_n| 1e-6 (only
/// when solenoidal), assembled divergence 1e-5.
struct W11SuiteOptions {
    int points = 200;
    std::uint64_t seed = 5;
    double dmin_fraction = 1e-3;  // of theta
    double dmax_fraction = 0.9;
    double identity_tol = 1e-4;
    double sn_tol = 1e-6;
    double assembled_tol = 1e-5;
    bool solenoidal = true;
};
Report w11_identity_suite(const W11Extension& w, const W11SuiteOptions& opt = {});

/// Stokes residuals on random flat simplices and simplex-normal lengths against
/// Gram determinants.
Report stokes_suite(int n, int simplices, std::uint64_t seed);

}  // namespace dfext
