#pragma once
// Whitney decompositions of a domain and of its exterior, the blow-up
// neighbourhood structure, and the reflection map from exterior to interior
// cubes.  Membership is decided lazily per cube so that evaluation can reach
// arbitrarily deep levels; build() materialises a finite list when needed.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dfext/domain.hpp"
#include "dfext/quadrature.hpp"

namespace dfext {

class CoverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Side : std::int8_t { Interior = 1, Exterior = -1 };

/// Dyadic cube [idx * 2^-level, (idx + 1) * 2^-level) tagged with the side it covers.
struct CubeKey {
    Side side = Side::Interior;
    std::int16_t level = 0;
    std::array<std::int64_t, 3> idx{0, 0, 0};

    friend bool operator==(const CubeKey&, const CubeKey&) = default;
    friend auto operator<=>(const CubeKey&, const CubeKey&) = default;
};

struct CubeKeyHash {
    std::size_t operator()(const CubeKey& k) const noexcept;
};

/// Geometry helpers for a cube in dimension n.
double cube_side(const CubeKey& k);
Vec cube_center(const CubeKey& k, int n);
double cube_diam(const CubeKey& k, int n);
Box cube_box(const CubeKey& k, int n);
/// Open lambda-blow-up about the centre contains y.
bool blowup_contains(const CubeKey& k, int n, const Vec& y, double lambda = 7.0 / 6.0);
/// Euclidean distance between two closed cubes.
double cube_distance(const CubeKey& a, const CubeKey& b, int n);
std::string cube_label(const CubeKey& k, int n);

struct WhitneyOptions {
    int max_level = 48;  // deepest level reachable by lazy queries
};

struct CoverList {
    Side side = Side::Interior;
    int max_level = 12;
    std::vector<CubeKey> cubes;
    std::unordered_map<CubeKey, std::size_t, CubeKeyHash> index;  // position of each cube
    std::size_t deficit_cubes = 0;  // cubes left unresolved at max_level
    double deficit_measure = 0.0;   // their total volume
};

struct InvariantReport {
    bool ok = true;
    std::size_t cubes = 0;
    double w3_lo = 0.0, w3_hi = 0.0;  // observed min/max of dist(Q, boundary) / side
    double w3_c = 0.0;                // constant c used in the check
    bool blowups_inside = true;       // (7/6)Q stays on its side
    bool disjoint = true;
    std::size_t max_overlap = 0;      // largest number of blow-ups containing a sample point
    double psi_size_lo = 0.0, psi_size_hi = 0.0;  // l(Psi Q) / l(Q) for l(Q) <= eta
    double psi_dist_c = 0.0;          // max dist(Q, Psi Q) / l(Q)
    double psi_depth_lo = 0.0, psi_depth_hi = 0.0;  // dist(Psi Q, boundary) / l(Q)
    double psi_sep_lo = 0.0;          // min dist(Q, Psi Q) / l(Q) for l(Q) <= eta
    std::size_t coverage_failures = 0;
    std::vector<std::string> messages;
};

class WhitneyCover {
public:
    explicit WhitneyCover(std::shared_ptr<const Domain> dom, WhitneyOptions opt = {});

    const Domain& domain() const { return *dom_; }
    std::shared_ptr<const Domain> domain_ptr() const { return dom_; }
    int dim() const { return n_; }
    int coarsest_level(Side s) const { return s == Side::Interior ? kmin_int_ : kmin_ext_; }
    int max_level() const { return opt_.max_level; }

    /// Signed distance of the cube centre measured towards the cube's side.
    double center_depth(const CubeKey& k) const;
    bool is_candidate(const CubeKey& k) const;
    bool is_member(const CubeKey& k) const;

    /// Member cube containing y on the given side; nullopt if y is not on that side.
    std::optional<CubeKey> locate(const Vec& y, Side s) const;
    /// Exterior members whose open 7/6 blow-up contains y, sorted.
    std::vector<CubeKey> blowup_neighbors(const Vec& y) const;

    /// Anchor cube Q0 (a maximal interior member) and threshold eta = side(Q0).
    const CubeKey& anchor() const { return anchor_; }
    double eta() const { return eta_; }
    /// Whitney constant c = 4 sqrt(n) + 1 and support radius theta = 2 eta (13 sqrt(n) / 12 + c).
    double whitney_constant() const;
    double theta() const;

    /// Reflection map from exterior members to interior members.
    CubeKey reflect(const CubeKey& ext) const;
    /// Number of reflections that needed the nearest-centre fallback.
    std::size_t fallback_count() const;

    /// Materialise members on one side down to max_level.  For the exterior the
    /// list is truncated to the box around the domain enlarged by `margin`.
    CoverList build(Side s, int max_level, double margin = -1.0) const;
    /// Members of `list` whose blow-ups meet the blow-up of list.cubes[i] (including i).
    std::vector<std::size_t> neighbors(const CoverList& list, std::size_t i) const;

    InvariantReport check_invariants(const CoverList& interior, const CoverList& exterior, int samples,
                                     std::uint64_t seed) const;
    void write_csv(std::ostream& os, const CoverList& list) const;

private:
    std::optional<CubeKey> search_levels(const Vec& y, Side s, int lo, int hi) const;
    std::optional<CubeKey> reflect_fallback(const CubeKey& ext, const Vec& target) const;
    CubeKey cube_at(const Vec& y, int level, Side s) const;

    std::shared_ptr<const Domain> dom_;
    WhitneyOptions opt_;
    int n_;
    int kmin_int_ = 0;
    int kmin_ext_ = 0;
    CubeKey anchor_;
    double eta_ = 0.0;

    mutable std::shared_mutex mu_;
    mutable std::unordered_map<CubeKey, CubeKey, CubeKeyHash> psi_cache_;
    mutable std::size_t fallbacks_ = 0;
};

}  // namespace dfext
