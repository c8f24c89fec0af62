#include "dfext/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace dfext {
namespace {

GaussRule compute_gauss(int m) {
    // Newton iteration on the Legendre polynomial P_m over [-1, 1], then map to [0, 1].
    GaussRule r;
    r.x.resize(static_cast<std::size_t>(m));
    r.w.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= m; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = m * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // Recompute the derivative at the converged root for the weight.
        double p0 = 1.0, p1 = 0.0;
        for (int j = 1; j <= m; ++j) {
            double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
        }
        dp = m * (z * p0 - p1) / (z * z - 1.0);
        const std::size_t a = static_cast<std::size_t>(m - 1 - i);
        r.x[a] = 0.5 * (1.0 + z);
        r.w[a] = 1.0 / ((1.0 - z * z) * dp * dp);  // 2/((1-z^2)P'^2) halved for [0, 1]
    }
    if (m == 1) {
        r.x[0] = 0.5;
        r.w[0] = 1.0;
    }
    return r;
}

SimplexRule compute_simplex_rule(int k, int degree) {
    // Collapsed (Duffy) coordinates: t_1 = u_1, t_2 = (1 - u_1) u_2, ...
    // with Jacobian prod_j (1 - u_j)^{k - j}; direction j needs exactness
    // degree + k - j, hence ceil((degree + k - j + 1) / 2) Gauss points.
    SimplexRule r;
    r.k = k;
    r.degree = degree;
    if (k == 0) {
        r.bary.push_back({1.0, 0.0, 0.0, 0.0});
        r.weights.push_back(1.0);
        return r;
    }
    std::vector<const GaussRule*> rules;
    for (int j = 1; j <= k; ++j) rules.push_back(&gauss_legendre((degree + k - j + 2) / 2));
    std::vector<std::size_t> it(static_cast<std::size_t>(k), 0);
    double total = 0.0;
    while (true) {
        double w = 1.0;
        double rem = 1.0;
        std::array<double, 4> b{};
        for (int j = 0; j < k; ++j) {
            const double u = rules[j]->x[it[j]];
            w *= rules[j]->w[it[j]] * std::pow(1.0 - u, k - 1 - j);
            b[j + 1] = rem * u;
            rem *= (1.0 - u);
        }
        double s = 0.0;
        for (int j = 1; j <= k; ++j) s += b[j];
        b[0] = 1.0 - s;
        r.bary.push_back(b);
        r.weights.push_back(w);
        total += w;
        int d = k - 1;
        while (d >= 0) {
            if (++it[d] < rules[d]->x.size()) break;
            it[d] = 0;
            --d;
        }
        if (d < 0) break;
    }
    for (double& w : r.weights) w /= total;
    return r;
}

}  // namespace

const GaussRule& gauss_legendre(int m) {
    if (m < 1 || m > 64) throw QuadratureError("gauss_legendre: order out of range");
    static std::mutex mu;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto itr = cache.find(m);
    if (itr == cache.end()) itr = cache.emplace(m, compute_gauss(m)).first;
    return itr->second;
}

CubeRule make_cube_rule(int n, int q) {
    const GaussRule& g = gauss_legendre(q);
    CubeRule r;
    r.n = n;
    r.q = q;
    std::vector<int> it(static_cast<std::size_t>(n), 0);
    while (true) {
        Vec p(n);
        double w = 1.0;
        for (int d = 0; d < n; ++d) {
            p[d] = g.x[static_cast<std::size_t>(it[d])] - 0.5;
            w *= g.w[static_cast<std::size_t>(it[d])];
        }
        r.nodes.push_back(p);
        r.weights.push_back(w);
        int d = n - 1;
        while (d >= 0) {
            if (++it[d] < q) break;
            it[d] = 0;
            --d;
        }
        if (d < 0) break;
    }
    return r;
}

const SimplexRule& simplex_rule(int k, int degree) {
    if (k < 0 || k > 3) throw QuadratureError("simplex_rule: dimension out of range");
    if (degree < 0 || degree > 40) throw QuadratureError("simplex_rule: degree out of range");
    static std::mutex mu;
    static std::map<std::pair<int, int>, SimplexRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(k, degree);
    auto itr = cache.find(key);
    if (itr == cache.end()) itr = cache.emplace(key, compute_simplex_rule(k, degree)).first;
    return itr->second;
}

double simplex_monomial_integral(std::span<const int> exps) {
    // Dirichlet integral: prod a_j! / (k + sum a_j)!
    double num = 1.0;
    int sum = 0;
    for (int a : exps) {
        num *= std::tgamma(a + 1.0);
        sum += a;
    }
    return num / std::tgamma(static_cast<double>(exps.size()) + sum + 1.0);
}

bool visit_product(const CubeRule& rule, std::span<const Box> boxes, const ProductOptions& opt,
                   const std::function<void(std::span<const Vec>, double)>& visit) {
    const std::size_t r = boxes.size();
    std::vector<Vec> pts(r);
    if (r == 0) {
        visit(pts, 1.0);
        return false;
    }
    const std::size_t m = rule.nodes.size();
    double count = 1.0;
    for (std::size_t j = 0; j < r; ++j) count *= static_cast<double>(m);
    if (count <= static_cast<double>(opt.budget)) {
        std::vector<std::size_t> it(r, 0);
        while (true) {
            double w = 1.0;
            for (std::size_t j = 0; j < r; ++j) {
                pts[j] = boxes[j].map(rule.nodes[it[j]]);
                w *= rule.weights[it[j]];
            }
            visit(pts, w);
            std::size_t d = r;
            while (d > 0) {
                if (++it[d - 1] < m) break;
                it[d - 1] = 0;
                --d;
            }
            if (d == 0) break;
        }
        return false;
    }
    if (!opt.allow_monte_carlo) throw QuadratureError("product rule: tensor budget exceeded and Monte Carlo disabled");
    if (opt.mc_samples <= 0) throw QuadratureError("product rule: mc_samples must be positive");
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> uni(-0.5, 0.5);
    const double w = 1.0 / opt.mc_samples;
    for (int i = 0; i < opt.mc_samples; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            Vec ref(boxes[j].center.size());
            for (int d = 0; d < ref.size(); ++d) ref[d] = uni(rng);
            pts[j] = boxes[j].map(ref);
        }
        visit(pts, w);
    }
    return true;
}

ProductIntegral integrate_product(const CubeRule& rule, std::span<const Box> boxes,
                                  const std::function<double(std::span<const Vec>)>& f,
                                  const ProductOptions& opt) {
    ProductIntegral out;
    double s = 0.0, s2 = 0.0;
    std::size_t samples = 0;
    out.monte_carlo = visit_product(rule, boxes, opt, [&](std::span<const Vec> pts, double w) {
        const double v = f(pts);
        s += w * v;
        s2 += w * v * v;
        ++samples;
    });
    out.value = s;
    if (out.monte_carlo) {
        const double var = std::max(0.0, s2 - s * s);
        out.std_error = std::sqrt(var / static_cast<double>(samples));
    }
    return out;
}

}  // namespace dfext
