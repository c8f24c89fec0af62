#include "dfext/field.hpp"

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "dfext/quadrature.hpp"

namespace dfext {

void Field::value_batch(const std::vector<Vec>& pts, std::vector<double>* out) const {
    const int n = dim();
    for (int c = 0; c < n; ++c) out[c].resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec v = value(pts[i]);
        for (int c = 0; c < n; ++c) out[c][i] = v[c];
    }
}

namespace {

void check_dim(int n) {
    if (n < 2 || n > 3) throw FieldError("field dimension must be 2 or 3");
}

class LinearField final : public Field {
public:
    LinearField(Mat A, Vec b, std::string name) : A_(std::move(A)), b_(std::move(b)), name_(std::move(name)) {}
    int dim() const override { return static_cast<int>(b_.size()); }
    Vec value(const Vec& x) const override { return A_ * x + b_; }
    Mat jacobian(const Vec&) const override { return A_; }
    std::string name() const override { return name_; }

private:
    Mat A_;
    Vec b_;
    std::string name_;
};

class QuadraticPerp final : public Field {
public:
    int dim() const override { return 2; }
    // Stream function x1^2 x2.
    Vec value(const Vec& x) const override {
        Vec v(2);
        v << x[0] * x[0], -2.0 * x[0] * x[1];
        return v;
    }
    Mat jacobian(const Vec& x) const override {
        Mat J(2, 2);
        J << 2.0 * x[0], 0.0, -2.0 * x[1], -2.0 * x[0];
        return J;
    }
    std::string name() const override { return "quadratic_perp"; }
};

class CubicPerp final : public Field {
public:
    int dim() const override { return 2; }
    // Stream function x2^4/4 + x1^2 x2^2/2.
    Vec value(const Vec& x) const override {
        Vec v(2);
        v << x[1] * x[1] * x[1] + x[0] * x[0] * x[1], -x[0] * x[1] * x[1];
        return v;
    }
    Mat jacobian(const Vec& x) const override {
        Mat J(2, 2);
        J << 2.0 * x[0] * x[1], 3.0 * x[1] * x[1] + x[0] * x[0], -x[1] * x[1], -2.0 * x[0] * x[1];
        return J;
    }
    std::string name() const override { return "cubic_perp"; }
};

struct Bump {
    Vec c;
    double amp;
    double sigma;
    Vec dir;  // vector potential direction (3D)
};

class BumpField final : public Field {
public:
    BumpField(int n, std::vector<Bump> b) : n_(n), bumps_(std::move(b)) {}
    int dim() const override { return n_; }

    Vec value(const Vec& x) const override {
        Vec v = Vec::Zero(n_);
        for (const Bump& b : bumps_) {
            const Vec d = x - b.c;
            const double g = b.amp * std::exp(-d.squaredNorm() / (2 * b.sigma * b.sigma));
            const Vec grad = -g * d / (b.sigma * b.sigma);
            if (n_ == 2) {
                v[0] += grad[1];
                v[1] -= grad[0];
            } else {
                v += cross(grad, b.dir);
            }
        }
        return v;
    }

    Mat jacobian(const Vec& x) const override {
        Mat J = Mat::Zero(n_, n_);
        for (const Bump& b : bumps_) {
            const Vec d = x - b.c;
            const double s2 = b.sigma * b.sigma;
            const double g = b.amp * std::exp(-d.squaredNorm() / (2 * s2));
            // Hessian of the Gaussian.
            Mat H = (g / (s2 * s2)) * (d * d.transpose()) - (g / s2) * Mat::Identity(n_, n_);
            if (n_ == 2) {
                J.row(0) += H.row(1);
                J.row(1) -= H.row(0);
            } else {
                // u = grad g x a, so u_i = eps_ijk (d_j g) a_k.
                for (int j = 0; j < 3; ++j) {
                    Vec col = H.col(j);
                    J.col(j) += cross(col, b.dir);
                }
            }
        }
        return J;
    }
    std::string name() const override { return "random_bumps"; }

private:
    static Vec cross(const Vec& a, const Vec& b) {
        Vec c(3);
        c << a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0];
        return c;
    }
    int n_;
    std::vector<Bump> bumps_;
};

class ShearStep final : public Field {
public:
    ShearStep(int n, double h) : n_(n), h_(h) {}
    int dim() const override { return n_; }
    Vec value(const Vec& x) const override {
        Vec v = Vec::Zero(n_);
        if (x[n_ - 1] > h_) v[0] = 1.0;
        return v;
    }
    Mat jacobian(const Vec&) const override { return Mat::Zero(n_, n_); }
    std::string name() const override { return "shear_step"; }

private:
    int n_;
    double h_;
};

class CuspShear final : public Field {
public:
    CuspShear(int n, double a) : n_(n), a_(a) {}
    int dim() const override { return n_; }
    Vec value(const Vec& x) const override {
        Vec v = Vec::Zero(n_);
        const double y = x[n_ - 1];
        if (y > 0) v[0] = std::pow(y, -a_);
        return v;
    }
    Mat jacobian(const Vec& x) const override {
        Mat J = Mat::Zero(n_, n_);
        const double y = x[n_ - 1];
        if (y > 0) J(0, n_ - 1) = -a_ * std::pow(y, -a_ - 1.0);
        return J;
    }
    std::string name() const override { return "cusp_shear"; }

private:
    int n_;
    double a_;
};

class CuspRadial final : public Field {
public:
    CuspRadial(int n, double a) : n_(n), a_(a) {}
    int dim() const override { return n_; }
    Vec value(const Vec& x) const override {
        Vec v = Vec::Zero(n_);
        const double y = x[n_ - 1];
        if (!(y > 0)) return v;
        const Vec xp = x.head(n_ - 1);
        const double r = xp.norm();
        if (r == 0) return v;
        v.head(n_ - 1) = xp / std::pow(r, n_ - 1) * std::pow(y, -a_);
        return v;
    }
    Mat jacobian(const Vec& x) const override {
        Mat J = Mat::Zero(n_, n_);
        const double y = x[n_ - 1];
        if (!(y > 0)) return J;
        const Vec xp = x.head(n_ - 1);
        const double r = xp.norm();
        if (r == 0) return J;
        const double py = std::pow(y, -a_);
        const Vec w = xp / std::pow(r, n_ - 1);
        if (n_ == 3) {
            const double r2 = r * r;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    J(i, j) = py * ((i == j ? r2 : 0.0) - 2.0 * xp[i] * xp[j]) / (r2 * r2);
        }
        for (int i = 0; i < n_ - 1; ++i) J(i, n_ - 1) = -a_ * py / y * w[i];
        return J;
    }
    std::string name() const override { return "cusp_radial"; }

private:
    int n_;
    double a_;
};

class Mollified final : public Field {
public:
    Mollified(FieldPtr base, std::shared_ptr<const Domain> dom, double eps, int m)
        : base_(std::move(base)), dom_(std::move(dom)), eps_(eps) {
        const int n = base_->dim();
        const CubeRule rule = make_cube_rule(n, m);
        double total = 0.0;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const Vec y = 2.0 * eps * rule.nodes[q];  // cube [-eps, eps]^n
            const double t2 = y.squaredNorm() / (eps * eps);
            if (t2 >= 1.0) continue;
            const double rho = std::exp(-1.0 / (1.0 - t2));
            // d rho / d y = rho * (-2 y / eps^2) / (1 - t2)^2
            const Vec grad = rho * (-2.0 / (eps * eps)) / ((1.0 - t2) * (1.0 - t2)) * y;
            offsets_.push_back(y);
            w_.push_back(rule.weights[q] * rho);
            dw_.push_back(rule.weights[q] * grad);
            total += rule.weights[q] * rho;
        }
        for (double& w : w_) w /= total;
        for (Vec& g : dw_) g /= total;
    }
    int dim() const override { return base_->dim(); }
    Vec value(const Vec& x) const override {
        Vec v = Vec::Zero(dim());
        for (std::size_t q = 0; q < w_.size(); ++q) v += w_[q] * sample(x - offsets_[q]);
        return v;
    }
    Mat jacobian(const Vec& x) const override {
        // d/dx_j int rho(y) u(x - y) dy = int (d_j rho)(y) u(x - y) dy.
        Mat J = Mat::Zero(dim(), dim());
        for (std::size_t q = 0; q < w_.size(); ++q) J += sample(x - offsets_[q]) * dw_[q].transpose();
        return J;
    }
    std::string name() const override { return "mollified(" + base_->name() + ")"; }

private:
    Vec sample(const Vec& z) const {
        if (dom_ && !dom_->contains(z)) return Vec::Zero(dim());
        return base_->value(z);
    }
    FieldPtr base_;
    std::shared_ptr<const Domain> dom_;
    double eps_;
    std::vector<Vec> offsets_;
    std::vector<double> w_;
    std::vector<Vec> dw_;
};

Vec json_vec(const nlohmann::json& j) {
    Vec v(static_cast<int>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
    return v;
}

}  // namespace

FieldPtr constant_field(const Vec& c) {
    check_dim(static_cast<int>(c.size()));
    const int n = static_cast<int>(c.size());
    return std::make_shared<LinearField>(Mat::Zero(n, n), c, "constant");
}

FieldPtr linear_field(const Mat& A, const Vec& b) {
    check_dim(static_cast<int>(b.size()));
    if (A.rows() != b.size() || A.cols() != b.size()) throw FieldError("linear_field: shape mismatch");
    return std::make_shared<LinearField>(A, b, "linear");
}

FieldPtr rotation_field(int n, const Vec& axis) {
    check_dim(n);
    Mat A = Mat::Zero(n, n);
    if (n == 2) {
        A(0, 1) = -1.0;
        A(1, 0) = 1.0;
    } else {
        Vec w = axis.size() == 3 ? axis : Vec(Eigen::Vector3d(0, 0, 1));
        // w x x as a matrix.
        A << 0, -w[2], w[1], w[2], 0, -w[0], -w[1], w[0], 0;
    }
    return std::make_shared<LinearField>(A, Vec::Zero(n), "rotation");
}

FieldPtr quadratic_perp_field() { return std::make_shared<QuadraticPerp>(); }
FieldPtr cubic_perp_field() { return std::make_shared<CubicPerp>(); }

FieldPtr random_bump_field(int n, int count, std::uint64_t seed, const Vec& lo, const Vec& hi, double sigma_min,
                           double sigma_max) {
    check_dim(n);
    if (count < 1) throw FieldError("random_bump_field: need at least one bump");
    if (!(sigma_min > 0) || !(sigma_max >= sigma_min)) throw FieldError("random_bump_field: invalid width range");
    if (lo.size() != n || hi.size() != n) throw FieldError("random_bump_field: box dimension mismatch");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<Bump> bumps;
    for (int k = 0; k < count; ++k) {
        Bump b;
        b.c = Vec(n);
        for (int d = 0; d < n; ++d) b.c[d] = lo[d] + (hi[d] - lo[d]) * uni(rng);
        b.amp = 2.0 * uni(rng) - 1.0;
        b.sigma = sigma_min + (sigma_max - sigma_min) * uni(rng);
        b.dir = Vec::Zero(3);
        if (n == 3) {
            for (int d = 0; d < 3; ++d) b.dir[d] = 2.0 * uni(rng) - 1.0;
            b.dir.normalize();
        }
        bumps.push_back(std::move(b));
    }
    return std::make_shared<BumpField>(n, std::move(bumps));
}

FieldPtr shear_step_field(int n, double h) {
    check_dim(n);
    return std::make_shared<ShearStep>(n, h);
}

FieldPtr cusp_shear_field(int n, double alpha) {
    check_dim(n);
    return std::make_shared<CuspShear>(n, alpha);
}

FieldPtr cusp_radial_field(int n, double alpha) {
    check_dim(n);
    return std::make_shared<CuspRadial>(n, alpha);
}

FieldPtr mollified_field(FieldPtr base, std::shared_ptr<const Domain> dom, double eps, int nodes_per_axis) {
    if (!base) throw FieldError("mollified_field: missing base field");
    if (!(eps > 0)) throw FieldError("mollified_field: eps must be positive");
    if (nodes_per_axis < 2) throw FieldError("mollified_field: need at least two nodes per axis");
    return std::make_shared<Mollified>(std::move(base), std::move(dom), eps, nodes_per_axis);
}

FieldPtr field_from_json(const nlohmann::json& j) {
    try {
        const std::string type = j.at("type").get<std::string>();
        const int n = j.value("dim", 2);
        if (type == "constant") return constant_field(json_vec(j.at("value")));
        if (type == "rotation") return rotation_field(n, j.contains("axis") ? json_vec(j["axis"]) : Vec());
        if (type == "linear") {
            const auto& rows = j.at("A");
            const Vec b = j.contains("b") ? json_vec(j["b"]) : Vec(Vec::Zero(static_cast<int>(rows.size())));
            Mat A(static_cast<int>(rows.size()), static_cast<int>(rows.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows[r].size() != rows.size()) throw FieldError("linear: A must be square");
                for (std::size_t c = 0; c < rows.size(); ++c)
                    A(static_cast<int>(r), static_cast<int>(c)) = rows[r][c].get<double>();
            }
            return linear_field(A, b);
        }
        if (type == "quadratic_perp") return quadratic_perp_field();
        if (type == "cubic_perp") return cubic_perp_field();
        if (type == "random_bumps") {
            const Vec lo = j.contains("lo") ? json_vec(j["lo"]) : Vec(Vec::Zero(n));
            const Vec hi = j.contains("hi") ? json_vec(j["hi"]) : Vec(Vec::Ones(n));
            return random_bump_field(n, j.value("count", 4), j.value("seed", std::uint64_t{0}), lo, hi,
                                     j.value("sigma_min", 0.15), j.value("sigma_max", 0.35));
        }
        if (type == "shear_step") return shear_step_field(n, j.value("height", 0.5));
        if (type == "cusp_shear") return cusp_shear_field(n, j.at("alpha").get<double>());
        if (type == "cusp_radial") return cusp_radial_field(n, j.at("alpha").get<double>());
        throw FieldError("unknown field type '" + type + "'");
    } catch (const nlohmann::json::exception& e) {
        throw FieldError(std::string("field: malformed description: ") + e.what());
    }
}

}  // namespace dfext
