#pragma once
// Dense exterior algebra over R^n for n in {2, 3}.
//
// Grade-k elements store one real per sorted multi-index i1 < ... < ik,
// ordered lexicographically.  Internally a multi-index is a bit mask over
// the coordinate directions; all signs come from permutation parity.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace dfext {

/// Point or vector in R^n with n <= 3 stored inline.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;

class AlgebraError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Number of components of a grade-k element over R^n.
int binomial(int n, int k);

/// Bit mask of the j-th sorted multi-index of grade k in dimension n.
std::uint32_t basis_mask(int n, int k, int j);

/// Position of a mask in the sorted basis of its grade, or -1.
int basis_index(int n, std::uint32_t mask);

namespace detail {

template <bool Dual>
struct Graded {
    int n = 2;
    int k = 0;
    std::array<double, 3> c{};

    Graded() = default;
    Graded(int dim, int grade) : n(dim), k(grade) {
        if (dim < 2 || dim > 3) throw AlgebraError("dimension must be 2 or 3");
        if (grade < 0 || grade > dim) throw AlgebraError("grade out of range");
    }

    int size() const { return binomial(n, k); }
    double& operator[](int j) { return c[static_cast<std::size_t>(j)]; }
    double operator[](int j) const { return c[static_cast<std::size_t>(j)]; }

    Graded& operator+=(const Graded& o) {
        check_same(o);
        for (int j = 0; j < size(); ++j) c[j] += o.c[j];
        return *this;
    }
    Graded& operator-=(const Graded& o) {
        check_same(o);
        for (int j = 0; j < size(); ++j) c[j] -= o.c[j];
        return *this;
    }
    Graded& operator*=(double s) {
        for (int j = 0; j < size(); ++j) c[j] *= s;
        return *this;
    }
    friend Graded operator+(Graded a, const Graded& b) { return a += b; }
    friend Graded operator-(Graded a, const Graded& b) { return a -= b; }
    friend Graded operator*(double s, Graded a) { return a *= s; }
    friend Graded operator*(Graded a, double s) { return a *= s; }

    double norm() const {
        double s = 0;
        for (int j = 0; j < size(); ++j) s += c[j] * c[j];
        return std::sqrt(s);
    }

    /// Coefficient of the basis element with the given mask.
    double at_mask(std::uint32_t mask) const { return c[basis_index(n, mask)]; }
    double& at_mask(std::uint32_t mask) { return c[basis_index(n, mask)]; }

    static Graded basis(int dim, std::uint32_t mask) {
        Graded g(dim, std::popcount(mask));
        g.at_mask(mask) = 1.0;
        return g;
    }
    static Graded scalar(int dim, double v) {
        Graded g(dim, 0);
        g.c[0] = v;
        return g;
    }

private:
    void check_same(const Graded& o) const {
        if (n != o.n || k != o.k) throw AlgebraError("grade or dimension mismatch");
    }
};

}  // namespace detail

using KVector = detail::Graded<false>;
using KForm = detail::Graded<true>;

/// Exterior product of forms.  Throws when k + l > n or dimensions differ.
KForm wedge(const KForm& a, const KForm& b);
KVector wedge(const KVector& a, const KVector& b);

/// Grade-1 vector / covector from coordinates.
KVector as_kvector(const Vec& v);
KForm as_covector(const Vec& v);

/// (1/(r-1)!) (x_r - x_{r-1}) ^ ... ^ (x_2 - x_1) for r points.
KVector simplex_normal(const Vec* pts, int r);

/// Vector field value to (n-1)-form: sum_j (-1)^{j-1} v_j dx_1^..^(dx_j omitted)^..^dx_n.
KForm vec_to_form(const Vec& v);
Vec form_to_vec(const KForm& w);

/// Euclidean pairing of a k-form with a k-vector in the shared sorted basis.
double pair(const KForm& w, const KVector& m);

/// Interior product of the covector dx_alpha (0-based) into a k-vector.
KVector interior(int alpha, const KVector& v);

/// Contraction X -| w = w(x_1, ..., x_m, .) of an m-vector into a p-form, m <= p.
KForm contract(const KVector& x, const KForm& w);

}  // namespace dfext
