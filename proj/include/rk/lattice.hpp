#pragma once
// Resonance-lattice algebra: saturation, irreducibility, relative norms,
// adapted bases via successive minima, induced homology classes.
#include <algorithm>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rk/errors.hpp"
#include "rk/intmat.hpp"

namespace rk {

inline constexpr i64 kEntryLimit = 1'000'000;

namespace detail {
inline void check_entries(const IMat& g) {
    for (int r = 0; r < g.rows(); ++r)
        for (int c = 0; c < g.cols(); ++c)
            if (std::abs(g(r, c)) > kEntryLimit)
                throw degenerate_input_error("lattice entries above 10^6 are rejected");
}
} // namespace detail

// Integer lattice in Z^{n+1}; ambient splits into a spatial part (first n
// coordinates) and a temporal part (last coordinate). Generators are columns.
class ResonanceLattice {
  public:
    explicit ResonanceLattice(IMat generators) : gens_(std::move(generators)) {
        if (gens_.rows() < 2 || gens_.cols() < 1)
            throw degenerate_input_error("lattice needs ambient dim >= 2 and >= 1 generator");
        detail::check_entries(gens_);
        snf_ = smith_normal_form(gens_);
        if (snf_.rank != gens_.cols())
            throw degenerate_input_error("rank-deficient lattice generators");
        // no element of the form (0,...,0,k0) with k0 != 0
        IMat spatial = gens_.topRows(gens_.rows() - 1);
        IMat K = integer_kernel(spatial);
        for (int j = 0; j < K.cols(); ++j) {
            i64 t = 0;
            for (int c = 0; c < gens_.cols(); ++c) t += gens_(gens_.rows() - 1, c) * K(c, j);
            if (t != 0)
                throw degenerate_input_error("lattice contains a purely temporal vector");
        }
    }

    int ambient_dim() const { return int(gens_.rows()); }
    int rank() const { return int(gens_.cols()); }
    const IMat& generators() const { return gens_; }

    bool contains(const IVec& k) const { return solve_integer(snf_, k).has_value(); }
    std::optional<IVec> coordinates_of(const IVec& k) const { return solve_integer(snf_, k); }

    bool contains_lattice(const ResonanceLattice& sub) const {
        for (int j = 0; j < sub.rank(); ++j)
            if (!contains(sub.generators().col(j))) return false;
        return true;
    }

  private:
    IMat gens_;
    SmithForm snf_;
};

struct OrderedBasis {
    std::vector<IVec> vectors;
    int split_index = 0; // number of strong vectors

    IMat as_matrix() const {
        IMat m(vectors.at(0).size(), vectors.size());
        for (size_t j = 0; j < vectors.size(); ++j) m.col(Eigen::Index(j)) = vectors[j];
        return m;
    }
};

inline ResonanceLattice saturate(const ResonanceLattice& L) {
    SmithForm f = smith_normal_form(L.generators());
    IMat sat(L.ambient_dim(), L.rank());
    for (int j = 0; j < L.rank(); ++j) sat.col(j) = f.Uinv.col(j);
    return ResonanceLattice(column_hermite_reduce(std::move(sat)));
}

inline bool is_irreducible(const ResonanceLattice& L) {
    SmithForm f = smith_normal_form(L.generators());
    for (int j = 0; j < L.rank(); ++j)
        if (f.S(j, j) != 1) return false;
    return true;
}

namespace detail {

// Integer rows spanning the rational orthogonal complement of span(W).
inline IMat span_complement_rows(const IMat& W) {
    IMat K = integer_kernel(IMat(W.transpose()));
    return K.transpose();
}

inline bool in_real_span(const IMat& complement_rows, const IVec& k) {
    for (int r = 0; r < complement_rows.rows(); ++r) {
        i128 acc = 0;
        for (int c = 0; c < complement_rows.cols(); ++c)
            acc += i128(complement_rows(r, c)) * k(c);
        if (acc != 0) return false;
    }
    return true;
}

// Shortest lattice vector outside span(W), deterministic tie-break:
// sign-normalized, then lexicographically smallest.
inline IVec shortest_outside_span(const ResonanceLattice& L, const IMat& W) {
    const IMat& G = L.generators();
    const int d = L.rank();
    IMat N = span_complement_rows(W);

    i64 radius = 0;
    for (int j = 0; j < d; ++j)
        if (!in_real_span(N, G.col(j))) {
            i64 s = sup_norm(G.col(j));
            if (radius == 0 || s < radius) radius = s;
        }
    if (radius == 0) throw degenerate_input_error("subspace contains the whole lattice");

    // Enumerate by the values of d pivot coordinates of k rather than by
    // basis coefficients: any k in the lattice with |k| <= R has its pivot
    // coordinates inside the box [-R, R]^d, and those determine k uniquely.
    std::vector<int> picked;
    for (int r = 0; r < int(G.rows()) && int(picked.size()) < d; ++r) {
        IMat sub(int(picked.size()) + 1, d);
        for (size_t i = 0; i < picked.size(); ++i) sub.row(Eigen::Index(i)) = G.row(picked[i]);
        sub.row(int(picked.size())) = G.row(r);
        if (smith_normal_form(sub).rank == int(picked.size()) + 1) picked.push_back(r);
    }
    std::vector<std::vector<i128>> sq(static_cast<size_t>(d), std::vector<i128>(static_cast<size_t>(d), 0));
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) sq[size_t(r)][size_t(c)] = G(picked[size_t(r)], c);
    i128 det = exact_det(sq);
    // adjugate via cofactors, so a = adj * vals / det
    std::vector<std::vector<i128>> adj(static_cast<size_t>(d), std::vector<i128>(static_cast<size_t>(d), 0));
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            std::vector<std::vector<i128>> minor;
            for (int rr = 0; rr < d; ++rr) {
                if (rr == r) continue;
                std::vector<i128> row;
                for (int cc = 0; cc < d; ++cc)
                    if (cc != c) row.push_back(sq[size_t(rr)][size_t(cc)]);
                minor.push_back(std::move(row));
            }
            i128 cof = (d == 1) ? 1 : exact_det(minor);
            if ((r + c) % 2 == 1) cof = -cof;
            adj[size_t(c)][size_t(r)] = cof;
        }

    IVec best;
    i64 best_norm = radius;
    IVec a(d);
    auto consider = [&](const IVec& vals) {
        bool integral = true;
        for (int j = 0; j < d && integral; ++j) {
            i128 acc = 0;
            for (int c = 0; c < d; ++c) acc += adj[size_t(j)][size_t(c)] * vals(c);
            if (acc % det != 0)
                integral = false;
            else
                a(j) = i64(acc / det);
        }
        if (!integral || !a.any()) return;
        IVec k = G * a;
        i64 s = sup_norm(k);
        if (s <= best_norm && !in_real_span(N, k)) {
            IVec cand = sign_normalized(k);
            if (best.size() == 0 || s < best_norm || lex_less(cand, best)) {
                best = cand;
                best_norm = s;
            }
        }
    };
    // shells of increasing sup-norm in pivot coordinates; any point whose
    // pivot coordinates sit on shell s has |k| >= s, so once s exceeds the
    // best norm found the search is complete
    for (i64 shell = 1; shell <= radius; ++shell) {
        if (best.size() > 0 && shell > best_norm) break;
        IVec vals = IVec::Constant(d, -shell);
        bool done = false;
        while (!done) {
            i64 m = 0;
            for (int j = 0; j < d; ++j) m = std::max(m, std::abs(vals(j)));
            if (m == shell) consider(vals);
            done = true;
            for (int j = 0; j < d; ++j) {
                if (vals(j) < shell) {
                    ++vals(j);
                    for (int i = 0; i < j; ++i) vals(i) = -shell;
                    done = false;
                    break;
                }
            }
        }
    }
    if (best.size() == 0) throw degenerate_input_error("no lattice vector outside span");
    return best;
}

} // namespace detail

// Z-basis of span(W) meet L, Hermite-reduced.
inline IMat intersection_basis(const ResonanceLattice& L, const IMat& W) {
    IMat N = detail::span_complement_rows(W);
    IMat C = integer_kernel(IMat(N * L.generators()));
    return column_hermite_reduce(IMat(L.generators() * C));
}

inline i64 relative_norm(const ResonanceLattice& L, const ResonanceLattice& Lst) {
    if (Lst.rank() >= L.rank())
        throw degenerate_input_error("relative norm needs rank(Lst) < rank(L)");
    if (!L.contains_lattice(Lst)) throw containment_error("Lst is not contained in L");
    if (!is_irreducible(L) || !is_irreducible(Lst))
        throw degenerate_input_error("relative norm expects irreducible lattices");
    return sup_norm(detail::shortest_outside_span(L, Lst.generators()));
}

// Extends a strong basis to an adapted basis of L. Each prefix [k_1..k_j]
// is a Z-basis of span{k_1..k_j} meet L, and the norm growth obeys
// |k_j| <= Mbar + (d-m) M_j with Mbar the summed strong norms and M_j the
// j-th successive minimum relative to the strong space.
inline OrderedBasis adapted_basis(const OrderedBasis& Bst, const ResonanceLattice& L) {
    const int m = int(Bst.vectors.size());
    const int d = L.rank();
    const int amb = L.ambient_dim();
    if (m >= d) throw degenerate_input_error("strong basis already has full rank");

    for (const IVec& k : Bst.vectors)
        if (!L.contains(k)) throw containment_error("strong basis vector outside L");

    std::vector<IVec> basis = Bst.vectors;   // k_1..k_j
    std::vector<IVec> witnesses = Bst.vectors; // k'_1..k'_j (successive minima)

    // the strong prefix must be a Z-basis of its saturation inside L
    {
        IMat W(amb, m);
        for (int j = 0; j < m; ++j) W.col(j) = Bst.vectors[size_t(j)];
        IMat H = intersection_basis(L, W); // Z-basis of span(Bst) meet L
        SmithForm hf = smith_normal_form(H);
        for (const IVec& k : Bst.vectors) {
            auto x = solve_integer(hf, k);
            if (!x) throw containment_error("strong basis is not inside L");
        }
        // index check: [Bst] and H generate the same lattice
        SmithForm wf = smith_normal_form(W);
        for (int j = 0; j < H.cols(); ++j) {
            if (!solve_integer(wf, IVec(H.col(j))))
                throw containment_error("strong basis is not a Z-basis of its saturation in L");
        }
    }

    for (int j = m; j < d; ++j) {
        IMat W(amb, j);
        for (int i = 0; i < j; ++i) W.col(i) = basis[size_t(i)];
        IVec kp = detail::shortest_outside_span(L, W);
        witnesses.push_back(kp);

        // Z-basis H of span{k_1..k_{j-1}, k'_j} meet L
        IMat Wx(amb, j + 1);
        Wx.leftCols(j) = W;
        Wx.col(j) = kp;
        IMat H = intersection_basis(L, Wx);
        SmithForm hf = smith_normal_form(H);

        // prefix coordinates in H, then complete to a unimodular matrix
        IMat Cm(j + 1, j);
        for (int i = 0; i < j; ++i) {
            auto x = solve_integer(hf, basis[size_t(i)]);
            if (!x) throw rank_error("prefix vector missing from intersection lattice");
            Cm.col(i) = *x;
        }
        SmithForm cf = smith_normal_form(Cm);
        for (int i = 0; i < j; ++i)
            if (cf.S(i, i) != 1)
                throw rank_error("prefix fails the Z-basis property");
        IVec knew = H * IVec(cf.Uinv.col(j));

        // coordinates of knew in the witness basis [k'_1 .. k'_j]
        IMat P(amb, j + 1);
        for (int i = 0; i <= j; ++i) P.col(i) = witnesses[size_t(i)];
        std::vector<Rational> x = solve_rational(P, knew);
        if (x[size_t(j)].sign() == 0) throw rank_error("completion degenerate");
        if (x[size_t(j)].sign() < 0) {
            knew = -knew;
            for (auto& xi : x) xi = xi.negated();
        }
        // reduce earlier coefficients into [0,1) by lattice translations
        for (int i = j - 1; i >= 0; --i) {
            i64 t = x[size_t(i)].floor();
            if (t != 0) knew -= t * witnesses[size_t(i)];
        }
        basis.push_back(knew);
    }
    OrderedBasis out;
    out.vectors = std::move(basis);
    out.split_index = m;
    return out;
}

// Primitive h in Z^s orthogonal to the coordinates of every B_sub vector
// in the B_sup basis; sign fixed so the first nonzero entry is positive.
inline IVec induced_homology(const OrderedBasis& B_sub, const OrderedBasis& B_sup) {
    const int s = int(B_sup.vectors.size());
    if (int(B_sub.vectors.size()) != s - 1)
        throw rank_error("induced homology needs corank one");
    SmithForm sup = smith_normal_form(B_sup.as_matrix());
    IMat A(s - 1, s);
    for (int i = 0; i < s - 1; ++i) {
        auto a = solve_integer(sup, B_sub.vectors[size_t(i)]);
        if (!a) throw containment_error("B_sub vector outside lattice(B_sup)");
        A.row(i) = a->transpose();
    }
    IMat K = integer_kernel(A);
    if (K.cols() != 1) throw rank_error("coordinate matrix kernel is not one-dimensional");
    IVec h = K.col(0);
    i64 g = vec_gcd(h);
    if (g > 1) h /= g;
    return sign_normalized(h);
}

struct GramBound {
    double sigma_min = 0;     // ||(P^T P)^{-1}||^{-1/2}
    double lower_bound = 0;   // c_n^{-1} prod |k_i|^{-1}
    bool holds = false;
};

// Calibrated over the randomized suite (n <= 4, entries <= 20); frozen here.
inline double default_gram_constant(int n) { return 1.0 + 0.75 * n; }

inline GramBound gram_inverse_bound(const IMat& P, double c_n = -1) {
    if (integer_rank(P) != P.cols()) throw rank_error("dependent columns");
    if (c_n <= 0) c_n = default_gram_constant(int(P.rows()) - 1);
    Eigen::MatrixXd Pd = P.cast<double>();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Pd);
    GramBound out;
    out.sigma_min = svd.singularValues()(P.cols() - 1);
    double prod = 1;
    for (int j = 0; j < P.cols(); ++j) prod *= double(sup_norm(IVec(P.col(j))));
    out.lower_bound = 1.0 / (c_n * prod);
    out.holds = out.sigma_min >= out.lower_bound * (1 - 1e-12);
    return out;
}

inline void to_json(nlohmann::json& j, const ResonanceLattice& L) {
    std::vector<std::vector<i64>> gens;
    for (int c = 0; c < L.rank(); ++c) {
        std::vector<i64> g(size_t(L.ambient_dim()));
        for (int r = 0; r < L.ambient_dim(); ++r) g[size_t(r)] = L.generators()(r, c);
        gens.push_back(std::move(g));
    }
    j = nlohmann::json{{"ambient_dim", L.ambient_dim()}, {"generators", gens}};
}

inline ResonanceLattice lattice_from_json(const nlohmann::json& j) {
    auto gens = j.at("generators").get<std::vector<std::vector<i64>>>();
    if (gens.empty()) throw degenerate_input_error("no generators");
    int amb = j.at("ambient_dim").get<int>();
    IMat G(amb, int(gens.size()));
    for (size_t c = 0; c < gens.size(); ++c) {
        if (int(gens[c].size()) != amb) throw degenerate_input_error("generator length mismatch");
        for (int r = 0; r < amb; ++r) G(r, int(c)) = gens[c][size_t(r)];
    }
    return ResonanceLattice(std::move(G));
}

inline void to_json(nlohmann::json& j, const OrderedBasis& B) {
    std::vector<std::vector<i64>> vecs;
    for (const IVec& v : B.vectors) {
        std::vector<i64> e(size_t(v.size()));
        for (int r = 0; r < v.size(); ++r) e[size_t(r)] = v(r);
        vecs.push_back(std::move(e));
    }
    j = nlohmann::json{{"vectors", vecs}, {"split_index", B.split_index}};
}

inline OrderedBasis basis_from_json(const nlohmann::json& j) {
    OrderedBasis b;
    for (const auto& row : j.at("vectors")) {
        auto e = row.get<std::vector<i64>>();
        IVec v(int(e.size()));
        for (size_t r = 0; r < e.size(); ++r) v(int(r)) = e[r];
        b.vectors.push_back(std::move(v));
    }
    b.split_index = j.at("split_index").get<int>();
    return b;
}

} // namespace rk
