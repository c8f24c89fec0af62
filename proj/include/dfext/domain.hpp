#pragma once
// Bounded domains in R^2 / R^3 with signed distance, nearest boundary points,
// inner normals, tubular collars, and the simplex maps built on them.

#include <array>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "dfext/exterior.hpp"

namespace dfext {

class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a projection or curvilinear simplex is requested outside the
/// region where it is well defined.
class CollarError : public DomainError {
public:
    using DomainError::DomainError;
};

enum class DomainKind { Ball, Rectangle, ConvexPolytope, SmoothStar, CuspPlus, CuspMinus };

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

/// Closed C^2 star-shaped curve in the plane, parametrised by angle.
struct StarCurve {
    enum class Shape { Ellipse, Rose } shape = Shape::Ellipse;
    Eigen::Vector2d center{0.0, 0.0};
    double a = 1.0, b = 1.0;                // ellipse semi-axes
    double r0 = 1.0, eps = 0.0; int m = 3;  // rose: rho(t) = r0 (1 + eps cos(m t))

    Eigen::Vector2d point(double t) const;
    Eigen::Vector2d d1(double t) const;
    Eigen::Vector2d d2(double t) const;
    bool inside(const Eigen::Vector2d& x) const;
};

class Domain {
public:
    static Domain ball(const Vec& center, double radius);
    static Domain rectangle(const Vec& lo, const Vec& hi);
    /// { x : A x <= b }, rows normalised internally.  Must be bounded.
    static Domain polytope(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);
    static Domain ellipse(const Eigen::Vector2d& center, double a, double b);
    static Domain rose(const Eigen::Vector2d& center, double r0, double eps, int m);
    /// Cusp domains inside (-1, 1)^n: outward = { y > |x'|^gamma }, inward = { y < |x'|^gamma }.
    static Domain cusp(int n, double gamma, bool outward);

    static Domain from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    int dim() const { return n_; }
    DomainKind kind() const { return kind_; }
    std::string name() const;
    bool is_convex() const { return convex_; }
    /// Boundary is C^2, so curvilinear simplices are available.
    bool has_smooth_boundary() const { return kind_ == DomainKind::Ball || kind_ == DomainKind::SmoothStar; }

    bool contains(const Vec& x) const;
    /// Positive inside, negative outside; |value| = dist(x, boundary).
    double signed_distance(const Vec& x) const;
    /// A nearest boundary point (no uniqueness check).
    Vec closest_boundary_point(const Vec& x) const;
    /// Nearest-point projection, only where it is unique and C^1.
    Vec boundary_projection(const Vec& x) const;
    /// Inward unit normal at (or nearest to) a boundary point.
    Vec inner_normal(const Vec& p) const;
    /// Width of the two-sided tubular neighbourhood on which projection is C^1.
    /// Zero for non-smooth boundaries.
    double collar_width() const { return collar_; }
    /// Upper bound for the boundary curvature (zero when not smooth).
    double max_curvature() const { return kappa_max_; }

    const Vec& bbox_lo() const { return lo_; }
    const Vec& bbox_hi() const { return hi_; }
    double diameter() const;
    double volume() const;

    /// Inner parallel domain { x : dist(x, complement) > eps }.
    Domain shrunk(double eps) const;

    /// Quadrature nodes and absolute weights on the domain (composite rule).
    /// `order` controls the number of points per cell, `cells` the subdivision.
    std::vector<std::pair<Vec, double>> interior_quadrature(int order, int cells) const;

    const StarCurve& star() const { return star_; }
    /// Parameter of the nearest point on a star curve.
    double star_parameter(const Eigen::Vector2d& x) const;

    const std::vector<Vec>& polytope_vertices() const { return verts_; }

private:
    Domain() = default;
    void finish_polytope();
    void finish_star();

    DomainKind kind_ = DomainKind::Ball;
    int n_ = 2;
    bool convex_ = true;
    double collar_ = 0.0;
    double kappa_max_ = 0.0;
    Vec lo_, hi_;
    // ball
    Vec center_;
    double radius_ = 1.0;
    // polytope / rectangle (rows normalised)
    Eigen::MatrixXd A_;
    Eigen::VectorXd b_;
    Eigen::MatrixXd A_raw_;  // constraints as given, for serialisation
    Eigen::VectorXd b_raw_;
    std::vector<Vec> verts_;
    std::vector<std::vector<int>> faces_;  // vertex indices per facet, ordered around the facet
    // star
    StarCurve star_;
    // cusp
    double gamma_ = 0.5;

    double polytope_sd(const Vec& x) const;
    Vec polytope_closest(const Vec& x) const;
    double cusp_sd(const Vec& x) const;
};

/// Geometric variant of the simplices carrying the flux functionals.
enum class SimplexVariant { Flat, Curvilinear };

/// A k-simplex parametrised over the unit simplex by t = (t_1, ..., t_k),
/// with x_0 at t = 0 and x_j at t = e_j.
class SimplexMap {
public:
    virtual ~SimplexMap() = default;
    int k() const { return k_; }
    int n() const { return n_; }
    virtual Vec eval(const std::array<double, 3>& t) const = 0;
    /// n x k matrix of partial derivatives dS/dt_j.
    virtual Mat frame(const std::array<double, 3>& t) const = 0;
    /// sqrt(det(F^T F)); the k-dimensional area element.
    double measure_element(const std::array<double, 3>& t) const;
    /// dS/dt_k ^ ... ^ dS/dt_1; integrates with the 1/k! of the unit simplex
    /// to the oriented simplex normal.
    KVector oriented_element(const std::array<double, 3>& t) const;

protected:
    SimplexMap(int n, int k) : n_(n), k_(k) {}
    int n_, k_;
};

class FlatSimplex final : public SimplexMap {
public:
    explicit FlatSimplex(std::span<const Vec> verts);
    Vec eval(const std::array<double, 3>& t) const override;
    Mat frame(const std::array<double, 3>& t) const override;

private:
    std::vector<Vec> v_;
};

/// Collar observations recorded while building curvilinear simplices.
struct CollarStats {
    double eta_min = 0.0;       // smallest vertex depth
    double depth_ratio = 0.0;   // max depth / min depth
    double spread_ratio = 0.0;  // max vertex distance / min depth
};

/// Curvilinear simplex: boundary projection of the flat chord between the
/// projected vertices, pushed inward along the normal by the interpolated depth.
class CurvedSimplex final : public SimplexMap {
public:
    CurvedSimplex(const Domain& dom, std::span<const Vec> verts, double c1, CollarStats* stats = nullptr);
    Vec eval(const std::array<double, 3>& t) const override;
    Mat frame(const std::array<double, 3>& t) const override;

private:
    const Domain* dom_;
    std::vector<Vec> p_;       // projected vertices
    std::vector<double> s_;    // vertex depths
};

std::unique_ptr<SimplexMap> make_simplex(const Domain& dom, std::span<const Vec> verts, SimplexVariant variant,
                                         double c1 = 4.0, CollarStats* stats = nullptr);

}  // namespace dfext
