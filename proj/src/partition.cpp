#include "dfext/partition.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dfext {
namespace {

constexpr double kHalfWidth = 7.0 / 12.0;

// log-derivatives of the profile: b = exp(g), g = -1/(1-t^2).
struct Profile {
    double b = 0.0;
    double g1 = 0.0;  // g'
    double g2 = 0.0;  // g''
};

Profile profile(double t) {
    Profile p;
    const double s = 1.0 - t * t;
    if (!(s > 0.0)) return p;
    p.b = std::exp(-1.0 / s);
    if (p.b == 0.0) return p;
    p.g1 = -2.0 * t / (s * s);
    p.g2 = -(2.0 + 6.0 * t * t) / (s * s * s);
    return p;
}

struct Raw {
    double psi = 0.0;
    Vec grad;
    Mat hess;
};

Raw raw_bump(const CubeKey& q, int n, const Vec& y, int order) {
    Raw r;
    const double h = kHalfWidth * cube_side(q);
    const Vec c = cube_center(q, n);
    std::array<Profile, 3> pr;
    r.psi = 1.0;
    for (int d = 0; d < n; ++d) {
        pr[d] = profile((y[d] - c[d]) / h);
        r.psi *= pr[d].b;
    }
    if (order >= 1) r.grad = Vec::Zero(n);
    if (order >= 2) r.hess = Mat::Zero(n, n);
    if (r.psi == 0.0) return r;
    // grad psi = psi L with L_d = g'(t_d)/h; hess psi = psi (L L^T + diag(g''/h^2)).
    Vec L(n);
    for (int d = 0; d < n; ++d) L[d] = pr[d].g1 / h;
    if (order >= 1) r.grad = r.psi * L;
    if (order >= 2) {
        r.hess = r.psi * (L * L.transpose());
        for (int d = 0; d < n; ++d) r.hess(d, d) += r.psi * pr[d].g2 / (h * h);
    }
    return r;
}

}  // namespace

double bump_profile(double t) { return profile(t).b; }

PartitionOfUnity::PartitionOfUnity(std::shared_ptr<const WhitneyCover> cover) : cover_(std::move(cover)) {
    if (!cover_) throw PartitionError("partition: missing cover");
}

double PartitionOfUnity::eval_raw(const CubeKey& q, const Vec& y) const {
    return raw_bump(q, cover_->dim(), y, 0).psi;
}

LocalPartition PartitionOfUnity::local(const Vec& y, int order) const {
    const std::vector<CubeKey> keys = cover_->blowup_neighbors(y);
    return local_from(keys, y, order);
}

LocalPartition PartitionOfUnity::local_from(std::span<const CubeKey> keys, const Vec& y, int order) const {
    const int n = cover_->dim();
    LocalPartition out;
    std::vector<Raw> raws;
    raws.reserve(keys.size());
    double S = 0.0;
    Vec gS = Vec::Zero(n);
    Mat hS = Mat::Zero(n, n);
    for (const auto& k : keys) {
        Raw r = raw_bump(k, n, y, order);
        if (r.psi == 0.0) continue;
        S += r.psi;
        if (order >= 1) gS += r.grad;
        if (order >= 2) hS += r.hess;
        out.cubes.push_back(k);
        raws.push_back(std::move(r));
    }
    if (!(S > 0.0)) {
        std::ostringstream msg;
        msg << "coverage hole at (";
        for (int d = 0; d < n; ++d) msg << (d ? ", " : "") << y[d];
        msg << ")";
        throw PartitionError(msg.str());
    }
    const double inv = 1.0 / S;
    for (const Raw& r : raws) {
        const double phi = r.psi * inv;
        out.phi.push_back(phi);
        if (order >= 1) out.grad.push_back((r.grad - phi * gS) * inv);
        if (order >= 2) {
            // quotient rule for psi / S, written in terms of phi
            Mat H = (r.hess - phi * hS) * inv;
            const Vec gphi = out.grad.back();
            H -= (gphi * gS.transpose() + gS * gphi.transpose()) * inv;
            out.hess.push_back(H);
        }
    }
    return out;
}

double PartitionOfUnity::eval(const CubeKey& q, const Vec& y) const {
    if (raw_bump(q, cover_->dim(), y, 0).psi == 0.0) return 0.0;
    LocalPartition lp = local(y, 0);
    auto it = std::lower_bound(lp.cubes.begin(), lp.cubes.end(), q);
    return (it != lp.cubes.end() && *it == q) ? lp.phi[it - lp.cubes.begin()] : 0.0;
}

Vec PartitionOfUnity::grad(const CubeKey& q, const Vec& y) const {
    const int n = cover_->dim();
    if (raw_bump(q, n, y, 0).psi == 0.0) return Vec::Zero(n);
    LocalPartition lp = local(y, 1);
    auto it = std::lower_bound(lp.cubes.begin(), lp.cubes.end(), q);
    return (it != lp.cubes.end() && *it == q) ? lp.grad[it - lp.cubes.begin()] : Vec(Vec::Zero(n));
}

Mat PartitionOfUnity::hess(const CubeKey& q, const Vec& y) const {
    const int n = cover_->dim();
    if (raw_bump(q, n, y, 0).psi == 0.0) return Mat::Zero(n, n);
    LocalPartition lp = local(y, 2);
    auto it = std::lower_bound(lp.cubes.begin(), lp.cubes.end(), q);
    return (it != lp.cubes.end() && *it == q) ? lp.hess[it - lp.cubes.begin()] : Mat(Mat::Zero(n, n));
}

}  // namespace dfext
