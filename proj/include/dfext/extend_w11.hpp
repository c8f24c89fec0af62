#pragma once
// Divergence-free extension of W^{1,1} fields.
//
// The Jones-type extension E0 u = rho sum_i phi_i (u)_{Q~_i} does not preserve
// solenoidality.  Its divergence is expressed through the forms
//     S_k(y) = sum_I phi_{i_{k+1}} dphi_{i_k} ^ ... ^ dphi_{i_1} ^ S(x_I),
// and the correctors
//     R_k(y) = sum_I phi_{i_{k+1}} dphi_{i_k} ^ ... ^ dphi_{i_1} ^ R(x_I)(y)
// satisfy dE0 = S_1 and dR_k = (n-k)(S_k - S_{k+1}).  Here I runs over
// (k+1)-tuples of active exterior cubes, S(x_I) integrates Du . nu over the
// k-simplex through one point of each reflected half-cube and R(x_I)(y)
// integrates [Du . nu](y - z).  Choosing c_k = -1/(n-k) gives
//     d(E0 + sum_k c_k R_k) = S_n,
// which vanishes when div u = 0.

#include <array>
#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfext/extend_l1.hpp"

namespace dfext {

enum class CoefficientSet { Telescoping, Printed };

struct W11Config {
    /// Identities compare integrals along simplices of different dimension, so
    /// the default simplex rule is finer than for the integrable case.
    static constexpr int kDefaultSimplexDegree = 12;

    W11Config() { base.simplex_degree = kDefaultSimplexDegree; }

    ExtensionConfig base;
    CoefficientSet coefficients = CoefficientSet::Telescoping;
    bool self_check = true;  // run the identity check in the constructor
    int self_check_points = 4;
    double self_check_tolerance = 1e-3;  // relative to the size of the compared terms

    nlohmann::json to_json() const;
    static W11Config from_json(const nlohmann::json& j);
};

/// Residuals of one identity at the calibration points.
struct IdentityCheck {
    std::string name;
    int k = 0;
    double max_residual = 0.0;
    double max_scale = 0.0;
    bool pass = true;
};

struct CalibrationReport {
    std::vector<IdentityCheck> identities;
    double telescoping_residual = 0.0;  // max |d E - S_n| with c_k = -1/(n-k)
    double printed_residual = 0.0;      // same with c_k = (-1)^k (n-k-1)!/(n-1)!
    std::vector<double> telescoping_coefficients;
    std::vector<double> printed_coefficients;
    nlohmann::json to_json() const;
};

class CalibrationError : public ExtensionError {
public:
    CalibrationError(int k, const std::string& what) : ExtensionError(what), k_(k) {}
    int failing_k() const { return k_; }

private:
    int k_;
};

/// c_k = -1/(n-k).
double telescoping_coefficient(int n, int k);
/// c_k = (-1)^k (n-k-1)!/(n-1)!.
double printed_coefficient(int n, int k);

class W11Extension {
public:
    W11Extension(std::shared_ptr<const Domain> dom, FieldPtr u, W11Config cfg = {});

    const Domain& domain() const { return *dom_; }
    const Field& field() const { return *u_; }
    const W11Config& config() const { return cfg_; }
    const WhitneyCover& cover() const { return *cover_; }
    const PartitionOfUnity& partition() const { return *pu_; }
    const std::vector<std::string>& notices() const { return notices_; }
    double support_radius() const { return cover_->theta(); }

    /// Smooth cutoff: 1 within theta of the domain, 0 beyond 2 theta.
    double cutoff(const Vec& y) const;

    /// u on the domain, rho sum_i phi_i (u)_{Q~_i} outside.
    Vec jones_E0(const Vec& y) const;
    /// Corrector of grade n-1 for 1 <= k <= n-1; zero on the closed domain.
    KForm corrector_R(int k, const Vec& y) const;
    /// Divergence form of grade n for 1 <= k <= n; zero on the closed domain.
    KForm corrector_S(int k, const Vec& y) const;

    /// E0 u + sum_k c_k R_k u with the configured coefficient set.
    Vec assemble(const Vec& y) const;
    Vec assemble_with(const Vec& y, std::span<const double> coefficients) const;
    const std::vector<double>& coefficients() const { return coef_; }

    /// Checks the identities at deterministic exterior points.  Throws
    /// CalibrationError naming k when an identity fails.
    CalibrationReport calibrate(int points, double tolerance) const;
    const CalibrationReport& calibration() const { return report_; }

    /// Cube average of u on the half-size reflected cube.
    Vec cube_average(const CubeKey& interior_cube) const;

    std::size_t cache_size() const;

private:
    KForm s_functional(const TupleKey& key) const;
    const std::array<KForm, 4>& r_functional(const TupleKey& key) const;
    std::vector<Box> half_boxes(const TupleKey& key) const;

    std::shared_ptr<const Domain> dom_;
    FieldPtr u_;
    W11Config cfg_;
    std::shared_ptr<const WhitneyCover> cover_;
    std::shared_ptr<const PartitionOfUnity> pu_;
    CubeRule outer_;
    std::vector<double> coef_;
    std::vector<std::string> notices_;
    CalibrationReport report_;

    mutable std::shared_mutex mu_;
    mutable std::unordered_map<CubeKey, Vec, CubeKeyHash> avg_;
    mutable std::unordered_map<TupleKey, KForm, TupleKeyHash> s_cache_;
    mutable std::unordered_map<TupleKey, std::array<KForm, 4>, TupleKeyHash> r_cache_;
};

/// Central-difference exterior derivative of an (n-1)-form valued map, returned
/// as the coefficient of dx_1 ^ ... ^ dx_n.  With extrapolate set, combines the
/// steps h and h/2 to cancel the h^2 term.
double fd_exterior_derivative(const std::function<KForm(const Vec&)>& f, const Vec& y, double h, bool extrapolate);

}  // namespace dfext
