#include "dfext/exterior.hpp"

#include <algorithm>
#include <vector>

namespace dfext {
namespace {

struct BasisTable {
    // masks[n][k] lists the grade-k masks in lexicographic tuple order.
    std::vector<std::uint32_t> masks[4][4];
    int index[4][8];

    BasisTable() {
        for (auto& row : index)
            for (int& v : row) v = -1;
        for (int n = 2; n <= 3; ++n) {
            std::vector<std::vector<int>> tuples[4];
            for (std::uint32_t m = 0; m < (1u << n); ++m) {
                std::vector<int> t;
                for (int b = 0; b < n; ++b)
                    if (m & (1u << b)) t.push_back(b);
                tuples[t.size()].push_back(t);
            }
            for (int k = 0; k <= n; ++k) {
                std::sort(tuples[k].begin(), tuples[k].end());
                for (const auto& t : tuples[k]) {
                    std::uint32_t m = 0;
                    for (int b : t) m |= 1u << b;
                    index[n][m] = static_cast<int>(masks[n][k].size());
                    masks[n][k].push_back(m);
                }
            }
        }
    }
};

const BasisTable& table() {
    static const BasisTable t;
    return t;
}

// Parity of the merge of two disjoint sorted index sets: pairs (a, b) with a > b.
int merge_sign(std::uint32_t a, std::uint32_t b) {
    int inv = 0;
    for (int i = 0; i < 3; ++i) {
        if (!(a & (1u << i))) continue;
        inv += std::popcount(b & ((1u << i) - 1u));
    }
    return (inv & 1) ? -1 : 1;
}

template <class G>
G wedge_impl(const G& a, const G& b) {
    if (a.n != b.n) throw AlgebraError("wedge: dimension mismatch");
    if (a.k + b.k > a.n) throw AlgebraError("wedge: grade exceeds dimension");
    G out(a.n, a.k + b.k);
    const auto& t = table();
    for (std::uint32_t ma : t.masks[a.n][a.k]) {
        double ca = a.at_mask(ma);
        if (ca == 0.0) continue;
        for (std::uint32_t mb : t.masks[a.n][b.k]) {
            if (ma & mb) continue;
            double cb = b.at_mask(mb);
            if (cb == 0.0) continue;
            out.at_mask(ma | mb) += merge_sign(ma, mb) * ca * cb;
        }
    }
    return out;
}

}  // namespace

int binomial(int n, int k) {
    static constexpr int tab[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
    if (n < 0 || n > 3 || k < 0 || k > n) return 0;
    return tab[n][k];
}

std::uint32_t basis_mask(int n, int k, int j) { return table().masks[n][k].at(static_cast<std::size_t>(j)); }

int basis_index(int n, std::uint32_t mask) {
    if (n < 2 || n > 3 || mask >= (1u << n)) return -1;
    return table().index[n][mask];
}

KForm wedge(const KForm& a, const KForm& b) { return wedge_impl(a, b); }
KVector wedge(const KVector& a, const KVector& b) { return wedge_impl(a, b); }

KVector as_kvector(const Vec& v) {
    KVector g(static_cast<int>(v.size()), 1);
    for (int j = 0; j < v.size(); ++j) g.c[j] = v[j];
    return g;
}

KForm as_covector(const Vec& v) {
    KForm g(static_cast<int>(v.size()), 1);
    for (int j = 0; j < v.size(); ++j) g.c[j] = v[j];
    return g;
}

KVector simplex_normal(const Vec* pts, int r) {
    if (r < 1) throw AlgebraError("simplex_normal: need at least one point");
    const int n = static_cast<int>(pts[0].size());
    if (r > n + 1) throw AlgebraError("simplex_normal: too many points");
    if (r == 1) return KVector::scalar(n, 1.0);
    KVector acc = as_kvector(pts[r - 1] - pts[r - 2]);
    double fact = 1.0;
    for (int j = r - 2; j >= 1; --j) {
        acc = wedge(acc, as_kvector(pts[j] - pts[j - 1]));
        fact *= static_cast<double>(r - j);
    }
    return acc * (1.0 / fact);
}

KForm vec_to_form(const Vec& v) {
    const int n = static_cast<int>(v.size());
    KForm w(n, n - 1);
    const std::uint32_t all = (1u << n) - 1u;
    for (int j = 0; j < n; ++j) w.at_mask(all ^ (1u << j)) = ((j & 1) ? -1.0 : 1.0) * v[j];
    return w;
}

Vec form_to_vec(const KForm& w) {
    if (w.k != w.n - 1) throw AlgebraError("form_to_vec: expected an (n-1)-form");
    Vec v(w.n);
    const std::uint32_t all = (1u << w.n) - 1u;
    for (int j = 0; j < w.n; ++j) v[j] = ((j & 1) ? -1.0 : 1.0) * w.at_mask(all ^ (1u << j));
    return v;
}

double pair(const KForm& w, const KVector& m) {
    if (w.n != m.n || w.k != m.k) throw AlgebraError("pair: grade or dimension mismatch");
    double s = 0;
    for (int j = 0; j < w.size(); ++j) s += w.c[j] * m.c[j];
    return s;
}

KVector interior(int alpha, const KVector& v) {
    if (v.k == 0) throw AlgebraError("interior: grade-0 argument");
    KVector out(v.n, v.k - 1);
    const std::uint32_t bit = 1u << alpha;
    for (std::uint32_t m : table().masks[v.n][v.k]) {
        if (!(m & bit)) continue;
        int below = std::popcount(m & (bit - 1u));
        out.at_mask(m ^ bit) += ((below & 1) ? -1.0 : 1.0) * v.at_mask(m);
    }
    return out;
}

KForm contract(const KVector& x, const KForm& w) {
    if (x.n != w.n) throw AlgebraError("contract: dimension mismatch");
    if (x.k > w.k) throw AlgebraError("contract: vector grade exceeds form grade");
    KForm out(w.n, w.k - x.k);
    const auto& t = table();
    for (std::uint32_t ma : t.masks[x.n][x.k]) {
        double ca = x.at_mask(ma);
        if (ca == 0.0) continue;
        for (std::uint32_t mb : t.masks[w.n][w.k]) {
            if ((ma & mb) != ma) continue;
            double cb = w.at_mask(mb);
            if (cb == 0.0) continue;
            out.at_mask(mb ^ ma) += merge_sign(ma, mb ^ ma) * ca * cb;
        }
    }
    return out;
}

}  // namespace dfext
