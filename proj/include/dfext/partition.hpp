#pragma once
// Smooth partition of unity subordinate to the 7/6 blow-ups of the exterior
// Whitney cubes.  Each raw bump is a tensor product of exp(-1/(1-t^2))
// profiles; normalisation runs over the cubes whose blow-up contains y.

#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "dfext/whitney.hpp"

namespace dfext {

class PartitionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// b(t) = exp(-1 / (1 - t^2)) on (-1, 1), zero elsewhere.
double bump_profile(double t);

/// Values at y of every partition function that does not vanish there.
struct LocalPartition {
    std::vector<CubeKey> cubes;  // sorted
    std::vector<double> phi;
    std::vector<Vec> grad;       // filled when order >= 1
    std::vector<Mat> hess;       // filled when order >= 2
};

class PartitionOfUnity {
public:
    explicit PartitionOfUnity(std::shared_ptr<const WhitneyCover> cover);

    const WhitneyCover& cover() const { return *cover_; }
    std::shared_ptr<const WhitneyCover> cover_ptr() const { return cover_; }

    /// Unnormalised bump of the cube evaluated at y.
    double eval_raw(const CubeKey& q, const Vec& y) const;

    /// Normalised values (and derivatives up to `order`) of all phi_i at y.
    /// Throws PartitionError when no bump is positive at y.
    LocalPartition local(const Vec& y, int order = 1) const;
    /// Same, restricted to the given cubes.  Agrees with local() whenever `keys`
    /// contains every cube whose blow-up holds y.
    LocalPartition local_from(std::span<const CubeKey> keys, const Vec& y, int order = 1) const;

    double eval(const CubeKey& q, const Vec& y) const;
    Vec grad(const CubeKey& q, const Vec& y) const;
    Mat hess(const CubeKey& q, const Vec& y) const;

private:
    std::shared_ptr<const WhitneyCover> cover_;
};

}  // namespace dfext
