#pragma once
// Hölder cusp counterexamples.
//
// Plus side (n = 2): Omega_+ = { y > |x|^gamma } carries u = (y^-alpha, 0).  The
// flux out of the box A_s = (s^{1/gamma}, s) x (s, s^gamma) through the part of
// its boundary inside Omega_+ blows up like s^{1-alpha}, which forces any
// bounded extension to have divergent L^p mass.
//
// Minus side (n >= 2): Omega_- = { y < |x'|^gamma } carries
// u = x'/|x'|^{n-1} y^-alpha for y > 0, and Z_r = B_{r^{1/gamma}} x (-r, r).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfext/domain.hpp"
#include "dfext/field.hpp"
#include "dfext/verify.hpp"

namespace dfext {

class CuspError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class CuspSide { Plus, Minus };

std::string to_string(CuspSide s);
CuspSide cusp_side_from_string(const std::string& s);

/// Open interval (lo, hi); empty when lo >= hi.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool empty() const { return !(lo < hi); }
    bool contains(double x) const { return lo < x && x < hi; }
    nlohmann::json to_json() const { return {lo, hi}; }
};

/// Admissible exponents.  Plus: 2 < alpha < (1 + gamma)/gamma and
/// (1-p) gamma + p (1-alpha) < -1 with u in L^p.  Minus: p < 1/alpha and
/// (n-1)(1-p)/gamma + (1-alpha) p < -1.
struct ExponentWindow {
    double gamma = 0.5;
    int n = 2;
    CuspSide side = CuspSide::Plus;
    Interval alpha;      // alphas for which some p is admissible
    double p_min = 0.0;  // minus side: lower end of the admissible p range

    Interval p_for_alpha(double a) const;
    Interval alpha_for_p(double p) const;
    bool admits(double a, double p) const { return p_for_alpha(a).contains(p); }
    nlohmann::json to_json() const;
};

/// Throws CuspError when gamma is outside (0, 1), the dimension is not
/// supported for the side, or the window is empty.
ExponentWindow exponent_window(double gamma, int n, CuspSide side);

/// Exponent of the lower-bound integrand s^e.
double lowerbound_exponent(double gamma, int n, CuspSide side, double alpha, double p);

struct CuspScenario {
    double gamma = 0.5;
    double alpha = 2.5;
    double p = 1.0;
    double eta = 0.0;
    CuspSide side = CuspSide::Plus;
    int n = 2;

    /// Validated scenario.  eta defaults to 2^{-1/((1-alpha)(gamma-1))} on the
    /// plus side and 1/2 on the minus side.
    static CuspScenario make(double gamma, double alpha, double p, CuspSide side, int n = 2, double eta = 0.0);

    double exponent() const { return lowerbound_exponent(gamma, n, side, alpha, p); }
    double growth() const { return std::abs(exponent() + 1.0); }
    Domain domain() const;
    FieldPtr field() const;
    nlohmann::json to_json() const;
};

struct CuspFlux {
    double s = 0.0;
    double closed_form = 0.0;
    double quadrature = 0.0;
    double difference = 0.0;  // |closed - quadrature| / max(1, |closed|)
    std::size_t nodes = 0;
    nlohmann::json to_json() const;
};

/// Flux of u out of A_s (plus) or Z_s (minus) through the boundary part inside
/// the cusp domain.  Closed form and clipped composite Gauss quadrature.
CuspFlux cusp_flux(const CuspScenario& sc, double s);

/// s_k log-spaced on [s_min, eta], both ends included.
std::vector<CuspFlux> cusp_flux_table(const CuspScenario& sc, double s_min, int count);

struct LowerBound {
    double exponent = 0.0;
    double expected_growth = 0.0;
    std::vector<double> eps;      // eta 2^-j
    std::vector<double> partial;  // int_eps^eta s^exponent ds
    double fitted_growth = 0.0;   // minus the log-log slope over the fit range
    double last_doubling = 0.0;   // I(eps/2) / I(eps) at the smallest eps
    bool monotone = true;
    bool converges = false;       // exponent > -1 and the tail is below 1e-5 relative
    double limit = 0.0;           // eta^{e+1}/(e+1) when convergent
    nlohmann::json to_json() const;
};

/// Partial integrals of s^exponent over [eta 2^-j, eta] down to eps_floor.
/// The growth fit uses eps <= eta 2^-10.
LowerBound partial_integrals(double exponent, double eta, double eps_floor = 1e-12);
LowerBound cusp_lowerbound(const CuspScenario& sc, double eps_floor = 1e-12);

/// Flux table, lower-bound growth and the out-of-window control case.
/// Tolerances: flux 1e-8 relative, growth within 0.01 of the expected value.
Report cusp_suite(const CuspScenario& sc, double control_p, double s_min = 1e-4, int flux_points = 25);

}  // namespace dfext
