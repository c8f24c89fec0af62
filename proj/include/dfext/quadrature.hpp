#pragma once
// Quadrature rules: Gauss-Legendre on intervals, tensor rules on cubes
// (normalised to probability weights) and collapsed Gauss rules on simplices.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "dfext/exterior.hpp"

namespace dfext {

class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// m-point Gauss-Legendre rule on [0, 1]; weights sum to 1.
struct GaussRule {
    std::vector<double> x;
    std::vector<double> w;
};
const GaussRule& gauss_legendre(int m);

/// Tensor Gauss rule with q points per axis on the reference cube [-1/2, 1/2]^n.
/// Weights sum to 1, so the rule is the uniform probability measure on a cube.
struct CubeRule {
    int n = 2;
    int q = 2;
    std::vector<Vec> nodes;
    std::vector<double> weights;
};
CubeRule make_cube_rule(int n, int q);

/// Axis-aligned cube given by center and side length.
struct Box {
    Vec center;
    double side = 0.0;
    Vec map(const Vec& ref) const { return center + side * ref; }
};

/// Rule on the unit k-simplex.  Nodes are barycentric (k + 1 entries, the
/// first belonging to vertex x_0); weights sum to 1 so the rule averages.
struct SimplexRule {
    int k = 1;
    int degree = 4;
    std::vector<std::array<double, 4>> bary;
    std::vector<double> weights;
};
const SimplexRule& simplex_rule(int k, int degree);

/// Exact integral of t_1^a1 ... t_k^ak over the unit simplex (reference oracle).
double simplex_monomial_integral(std::span<const int> exps);

/// Sum_i w_i f(node_i) for a cube rule mapped onto a box.
template <class F>
auto integrate_cube(const CubeRule& rule, F&& f, const Box& box) {
    using R = decltype(f(box.center));
    R acc = rule.weights[0] * f(box.map(rule.nodes[0]));
    for (std::size_t i = 1; i < rule.nodes.size(); ++i) acc = acc + rule.weights[i] * f(box.map(rule.nodes[i]));
    return acc;
}

/// Result of an integral over a product of cube measures.
struct ProductIntegral {
    double value = 0.0;
    double std_error = 0.0;  // zero for tensor evaluation
    bool monte_carlo = false;
};

struct ProductOptions {
    std::uint64_t budget = 1u << 20;  // max tensor evaluations before MC is needed
    bool allow_monte_carlo = false;
    int mc_samples = 10000;
    std::uint64_t seed = 0;
};

/// Integral of F(x_1, ..., x_r) against mu^{1} x ... x mu^{r}, each mu the uniform
/// measure of a box.  Tensor evaluation uses the cube rule on every factor.
ProductIntegral integrate_product(const CubeRule& rule, std::span<const Box> boxes,
                                  const std::function<double(std::span<const Vec>)>& f,
                                  const ProductOptions& opt = {});

/// Calls visit(points, weight) for every node of the tensor product rule, or for
/// uniform Monte Carlo samples (weight 1/N) when the tensor count exceeds the
/// budget and Monte Carlo is allowed.  Returns true in the Monte Carlo case.
bool visit_product(const CubeRule& rule, std::span<const Box> boxes, const ProductOptions& opt,
                   const std::function<void(std::span<const Vec>, double)>& visit);

/// Integral of f over a simplex map of dimension k with respect to H^k.
/// The map must provide eval(t) and measure_element(t) for t in the unit simplex
/// (t given as k free barycentric coordinates).
template <class Map, class F>
auto integrate_simplex(const SimplexRule& rule, F&& f, const Map& map) {
    using R = decltype(f(map.eval(std::array<double, 3>{})));
    double inv_fact = 1.0;
    for (int j = 2; j <= rule.k; ++j) inv_fact /= j;
    R acc{};
    bool first = true;
    for (std::size_t i = 0; i < rule.weights.size(); ++i) {
        std::array<double, 3> t{};
        for (int j = 0; j < rule.k; ++j) t[j] = rule.bary[i][j + 1];
        const double jac = map.measure_element(t);
        if (jac == 0.0) continue;
        R v = (rule.weights[i] * inv_fact * jac) * f(map.eval(t));
        if (first) {
            acc = v;
            first = false;
        } else {
            acc = acc + v;
        }
    }
    return acc;
}

}  // namespace dfext
