#pragma once
// Input vector fields with analytic Jacobians.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfext/domain.hpp"
#include "dfext/exterior.hpp"

namespace dfext {

class FieldError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Field {
public:
    virtual ~Field() = default;
    virtual int dim() const = 0;
    virtual Vec value(const Vec& x) const = 0;
    /// J(i, j) = d u_i / d x_j.
    virtual Mat jacobian(const Vec& x) const = 0;
    virtual std::string name() const = 0;
    double divergence(const Vec& x) const { return jacobian(x).trace(); }
    /// Evaluates many points into structure-of-arrays output (out[c][i]).
    virtual void value_batch(const std::vector<Vec>& pts, std::vector<double>* out) const;
};

using FieldPtr = std::shared_ptr<const Field>;

FieldPtr constant_field(const Vec& c);
/// u = A x + b.
FieldPtr linear_field(const Mat& A, const Vec& b);
/// 2D: (-x2, x1).  3D: axis x x.
FieldPtr rotation_field(int n, const Vec& axis = Vec());
/// Polynomial divergence-free planar fields of degree 2 and 3.
FieldPtr quadratic_perp_field();
FieldPtr cubic_perp_field();
/// 2D: perpendicular gradient of a sum of Gaussians.  3D: curl of Gaussian vector potentials.
/// Centres are drawn uniformly from [lo, hi] and widths from [sigma_min, sigma_max]
/// with the given seed.
FieldPtr random_bump_field(int n, int count, std::uint64_t seed, const Vec& lo, const Vec& hi,
                           double sigma_min = 0.15, double sigma_max = 0.35);
/// Piecewise constant shear: u = (1, 0[, 0]) where x_n > h, zero elsewhere.  Weakly divergence free.
FieldPtr shear_step_field(int n, double h);
/// (y^-alpha, 0, ...) for y = x_n > 0, zero otherwise.
FieldPtr cusp_shear_field(int n, double alpha);
/// (x'/|x'|^{n-1} y^-alpha, 0) for y > 0, zero otherwise.
FieldPtr cusp_radial_field(int n, double alpha);

/// Convolution of the zero extension of `base` outside `dom` with a smooth
/// radial mollifier of radius eps.  Exact for constants.
FieldPtr mollified_field(FieldPtr base, std::shared_ptr<const Domain> dom, double eps, int nodes_per_axis = 12);

/// Build a field from a JSON description such as {"type": "rotation", "dim": 2}.
FieldPtr field_from_json(const nlohmann::json& j);

}  // namespace dfext
