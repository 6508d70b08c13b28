#pragma once
// Exact integer matrix algebra: Smith normal form with transform tracking,
// integer kernels, integer linear solves, rational solves via Cramer.
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rk/errors.hpp"

namespace rk {

using i64 = std::int64_t;
using i128 = __int128;

using IMat = Eigen::Matrix<i64, Eigen::Dynamic, Eigen::Dynamic>;
using IVec = Eigen::Matrix<i64, Eigen::Dynamic, 1>;

namespace detail {

inline constexpr i64 kMagLimit = i64(1) << 62;

inline i64 checked_add(i64 a, i64 b) {
    i64 r;
    if (__builtin_add_overflow(a, b, &r) || r > kMagLimit || r < -kMagLimit)
        throw overflow_error("integer overflow in lattice arithmetic");
    return r;
}

inline i64 checked_mul(i64 a, i64 b) {
    i64 r;
    if (__builtin_mul_overflow(a, b, &r) || r > kMagLimit || r < -kMagLimit)
        throw overflow_error("integer overflow in lattice arithmetic");
    return r;
}

} // namespace detail

// U * A * V == S with U, V unimodular; Uinv, Vinv their exact inverses.
// Diagonal of S holds nonnegative elementary divisors, each dividing the next.
struct SmithForm {
    IMat U, Uinv, S, V, Vinv;
    int rank = 0;
};

namespace detail {

struct Mat128 {
    int rows = 0, cols = 0;
    std::vector<i128> a;
    Mat128(int r, int c, bool ident = false) : rows(r), cols(c), a(size_t(r) * size_t(c), 0) {
        if (ident)
            for (int i = 0; i < std::min(r, c); ++i) (*this)(i, i) = 1;
    }
    i128& operator()(int r, int c) { return a[size_t(r) * size_t(cols) + size_t(c)]; }
    i128 operator()(int r, int c) const { return a[size_t(r) * size_t(cols) + size_t(c)]; }
};

inline constexpr i128 kMag128 = i128(1) << 100;

inline i128 cadd128(i128 x, i128 y) {
    i128 r = x + y;
    if (r > kMag128 || r < -kMag128) throw overflow_error("integer overflow in lattice arithmetic");
    return r;
}
inline i128 cmul128(i128 x, i128 y) {
    if (x != 0 && (y > kMag128 / (x < 0 ? -x : x) || y < -(kMag128 / (x < 0 ? -x : x))))
        throw overflow_error("integer overflow in lattice arithmetic");
    return x * y;
}

} // namespace detail

inline SmithForm smith_normal_form(IMat A0) {
    using detail::Mat128;
    using detail::cadd128;
    using detail::cmul128;
    const int rows = int(A0.rows()), cols = int(A0.cols());
    Mat128 A(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) A(r, c) = A0(r, c);
    Mat128 U(rows, rows, true), Uinv(rows, rows, true), V(cols, cols, true), Vinv(cols, cols, true);

    // unimodular 2x2 row mix: row_i' = m11 row_i + m12 row_j, row_j' = m21 row_i + m22 row_j,
    // with m11 m22 - m12 m21 = 1; applied to A and U, inverse column mix applied to Uinv
    auto row_mix = [&](int i, int j, i128 m11, i128 m12, i128 m21, i128 m22) {
        for (int c = 0; c < cols; ++c) {
            i128 ri = cadd128(cmul128(m11, A(i, c)), cmul128(m12, A(j, c)));
            i128 rj = cadd128(cmul128(m21, A(i, c)), cmul128(m22, A(j, c)));
            A(i, c) = ri;
            A(j, c) = rj;
        }
        for (int c = 0; c < rows; ++c) {
            i128 ri = cadd128(cmul128(m11, U(i, c)), cmul128(m12, U(j, c)));
            i128 rj = cadd128(cmul128(m21, U(i, c)), cmul128(m22, U(j, c)));
            U(i, c) = ri;
            U(j, c) = rj;
            i128 ci = cadd128(cmul128(m22, Uinv(c, i)), cmul128(-m21, Uinv(c, j)));
            i128 cj = cadd128(cmul128(-m12, Uinv(c, i)), cmul128(m11, Uinv(c, j)));
            Uinv(c, i) = ci;
            Uinv(c, j) = cj;
        }
    };
    // unimodular 2x2 column mix: col_i' = m11 col_i + m12 col_j, col_j' = m21 col_i + m22 col_j
    auto col_mix = [&](int i, int j, i128 m11, i128 m12, i128 m21, i128 m22) {
        for (int r = 0; r < rows; ++r) {
            i128 ci = cadd128(cmul128(m11, A(r, i)), cmul128(m12, A(r, j)));
            i128 cj = cadd128(cmul128(m21, A(r, i)), cmul128(m22, A(r, j)));
            A(r, i) = ci;
            A(r, j) = cj;
        }
        for (int r = 0; r < cols; ++r) {
            i128 ci = cadd128(cmul128(m11, V(r, i)), cmul128(m12, V(r, j)));
            i128 cj = cadd128(cmul128(m21, V(r, i)), cmul128(m22, V(r, j)));
            V(r, i) = ci;
            V(r, j) = cj;
            i128 ri = cadd128(cmul128(m22, Vinv(i, r)), cmul128(-m21, Vinv(j, r)));
            i128 rj = cadd128(cmul128(-m12, Vinv(i, r)), cmul128(m11, Vinv(j, r)));
            Vinv(i, r) = ri;
            Vinv(j, r) = rj;
        }
    };
    auto row_axpy = [&](int dst, int src, i128 t) { row_mix(src, dst, 1, 0, t, 1); };
    auto col_axpy = [&](int dst, int src, i128 t) { col_mix(src, dst, 1, 0, t, 1); };
    auto row_swap = [&](int i, int j) {
        if (i == j) return;
        for (int c = 0; c < cols; ++c) std::swap(A(i, c), A(j, c));
        for (int c = 0; c < rows; ++c) {
            std::swap(U(i, c), U(j, c));
            std::swap(Uinv(c, i), Uinv(c, j));
        }
    };
    auto col_swap = [&](int i, int j) {
        if (i == j) return;
        for (int r = 0; r < rows; ++r) std::swap(A(r, i), A(r, j));
        for (int r = 0; r < cols; ++r) {
            std::swap(V(r, i), V(r, j));
            std::swap(Vinv(i, r), Vinv(j, r));
        }
    };
    auto row_negate = [&](int i) {
        for (int c = 0; c < cols; ++c) A(i, c) = -A(i, c);
        for (int c = 0; c < rows; ++c) {
            U(i, c) = -U(i, c);
            Uinv(c, i) = -Uinv(c, i);
        }
    };
    auto iabs = [](i128 v) { return v < 0 ? -v : v; };
    auto egcd = [](i128 a, i128 b, i128& s, i128& t) {
        i128 old_r = a, r = b, old_s = 1, ss = 0, old_t = 0, tt = 1;
        while (r != 0) {
            i128 q = old_r / r;
            i128 nr = old_r - q * r, ns = old_s - q * ss, nt = old_t - q * tt;
            old_r = r;
            r = nr;
            old_s = ss;
            ss = ns;
            old_t = tt;
            tt = nt;
        }
        s = old_s;
        t = old_t;
        return old_r;
    };

    const int tmax = std::min(rows, cols);
    for (int t = 0; t < tmax; ++t) {
        int pr = -1, pc = -1;
        for (int r = t; r < rows; ++r)
            for (int c = t; c < cols; ++c)
                if (A(r, c) != 0 && (pr < 0 || iabs(A(r, c)) < iabs(A(pr, pc)))) {
                    pr = r;
                    pc = c;
                }
        if (pr < 0) break;
        row_swap(t, pr);
        col_swap(t, pc);

        // clear column t below the pivot and row t right of it with exact
        // gcd mixes; a mix can reintroduce entries in the other direction,
        // but only while strictly shrinking the pivot, so this terminates
        bool done = false;
        while (!done) {
            for (int r = t + 1; r < rows; ++r) {
                i128 b = A(r, t);
                if (b == 0) continue;
                i128 a = A(t, t);
                if (b % a == 0) {
                    row_axpy(r, t, -(b / a));
                } else {
                    i128 s, w;
                    i128 g = egcd(a, b, s, w);
                    row_mix(t, r, s, w, -(b / g), a / g);
                }
            }
            for (int c = t + 1; c < cols; ++c) {
                i128 b = A(t, c);
                if (b == 0) continue;
                i128 a = A(t, t);
                if (b % a == 0) {
                    col_axpy(c, t, -(b / a));
                } else {
                    i128 s, w;
                    i128 g = egcd(a, b, s, w);
                    col_mix(t, c, s, w, -(b / g), a / g);
                }
            }
            done = true;
            for (int r = t + 1; r < rows; ++r)
                if (A(r, t) != 0) done = false;
        }
        if (A(t, t) < 0) row_negate(t);
    }

    // enforce the divisor chain with 2x2 gcd transforms on the diagonal:
    // diag(a, b) -> diag(g, ab/g) via unimodular row and column mixes
    bool changed = true;
    while (changed) {
        changed = false;
        for (int i = 0; i < tmax; ++i)
            for (int j = i + 1; j < tmax; ++j) {
                i128 a = A(i, i), b = A(j, j);
                if (a == 0 && b != 0) {
                    row_swap(i, j);
                    col_swap(i, j);
                    changed = true;
                    continue;
                }
                if (a == 0 || b % a == 0) continue;
                i128 s, t;
                i128 g = egcd(a, b, s, t);
                col_axpy(i, j, 1);
                row_mix(i, j, s, t, -(b / g), a / g);
                col_axpy(j, i, -t * (b / g));
                if (A(j, j) < 0) row_negate(j);
                changed = true;
            }
    }

    SmithForm f;
    auto shrink = [](const Mat128& M) {
        IMat out(M.rows, M.cols);
        for (int r = 0; r < M.rows; ++r)
            for (int c = 0; c < M.cols; ++c) {
                i128 v = M(r, c);
                if (v > detail::kMagLimit || v < -detail::kMagLimit)
                    throw overflow_error("transform entries exceed 64-bit range");
                out(r, c) = i64(v);
            }
        return out;
    };
    f.U = shrink(U);
    f.Uinv = shrink(Uinv);
    f.V = shrink(V);
    f.Vinv = shrink(Vinv);
    f.S = shrink(A);
    for (int t = 0; t < tmax; ++t)
        if (f.S(t, t) != 0) ++f.rank;
    return f;
}

// Column-style Hermite reduction: unimodular column operations only, so the
// column lattice is unchanged; keeps basis entries small.
inline IMat column_hermite_reduce(IMat A) {
    using detail::checked_add;
    using detail::checked_mul;
    const int rows = int(A.rows()), cols = int(A.cols());
    auto col_axpy = [&](int dst, int src, i64 t) {
        for (int r = 0; r < rows; ++r)
            A(r, dst) = checked_add(A(r, dst), checked_mul(t, A(r, src)));
    };
    int pc = 0;
    for (int r = 0; r < rows && pc < cols; ++r) {
        bool any = true;
        while (any) {
            int jmin = -1;
            for (int j = pc; j < cols; ++j)
                if (A(r, j) != 0 && (jmin < 0 || std::abs(A(r, j)) < std::abs(A(r, jmin))))
                    jmin = j;
            if (jmin < 0) break;
            A.col(pc).swap(A.col(jmin));
            any = false;
            for (int j = pc + 1; j < cols; ++j) {
                if (A(r, j) == 0) continue;
                col_axpy(j, pc, -(A(r, j) / A(r, pc)));
                if (A(r, j) != 0) any = true;
            }
        }
        if (A(r, pc) == 0) continue;
        if (A(r, pc) < 0) A.col(pc) = -A.col(pc);
        for (int j = 0; j < pc; ++j) {
            i64 q = A(r, j) / A(r, pc);
            if (A(r, j) % A(r, pc) < 0) --q;
            if (q != 0) col_axpy(j, pc, -q);
        }
        ++pc;
    }
    return A;
}

// Basis of { x in Z^cols : A x = 0 }, one kernel vector per column.
inline IMat integer_kernel(const IMat& A) {
    SmithForm f = smith_normal_form(A);
    const int cols = int(A.cols());
    IMat K(cols, cols - f.rank);
    for (int j = f.rank; j < cols; ++j) K.col(j - f.rank) = f.V.col(j);
    return column_hermite_reduce(std::move(K));
}

// Integer solution of A x = b, if one exists.
inline std::optional<IVec> solve_integer(const SmithForm& f, const IVec& b) {
    using detail::checked_add;
    using detail::checked_mul;
    const int rows = int(f.U.rows()), cols = int(f.V.rows());
    IVec w = IVec::Zero(rows);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < rows; ++c)
            w(r) = checked_add(w(r), checked_mul(f.U(r, c), b(c)));
    IVec y = IVec::Zero(cols);
    const int tmax = std::min(rows, cols);
    for (int r = 0; r < rows; ++r) {
        i64 d = (r < tmax) ? f.S(r, r) : 0;
        if (d == 0) {
            if (w(r) != 0) return std::nullopt;
        } else {
            if (w(r) % d != 0) return std::nullopt;
            if (r < cols) y(r) = w(r) / d;
        }
    }
    IVec x = IVec::Zero(cols);
    for (int r = 0; r < cols; ++r)
        for (int c = 0; c < cols; ++c)
            x(r) = checked_add(x(r), checked_mul(f.V(r, c), y(c)));
    return x;
}

inline std::optional<IVec> solve_integer(const IMat& A, const IVec& b) {
    return solve_integer(smith_normal_form(A), b);
}

inline int integer_rank(const IMat& A) { return smith_normal_form(A).rank; }

// Exact rational number p/q with q > 0, reduced lazily.
struct Rational {
    i128 num = 0, den = 1;

    static Rational of(i128 n, i128 d) {
        if (d < 0) {
            n = -n;
            d = -d;
        }
        return {n, d};
    }
    i64 floor() const {
        i128 q = num / den;
        if (num % den != 0 && num < 0) --q;
        return i64(q);
    }
    int sign() const { return num > 0 ? 1 : (num < 0 ? -1 : 0); }
    Rational negated() const { return {-num, den}; }
};

// Exact determinant of a square integer matrix (fraction-free Bareiss).
inline i128 exact_det(std::vector<std::vector<i128>> a) {
    const int n = int(a.size());
    i128 prev = 1;
    int sign = 1;
    for (int k = 0; k < n - 1; ++k) {
        if (a[k][k] == 0) {
            int p = -1;
            for (int r = k + 1; r < n; ++r)
                if (a[r][k] != 0) {
                    p = r;
                    break;
                }
            if (p < 0) return 0;
            std::swap(a[k], a[p]);
            sign = -sign;
        }
        for (int i = k + 1; i < n; ++i)
            for (int j = k + 1; j < n; ++j)
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
        prev = a[k][k];
    }
    return sign * a[n - 1][n - 1];
}

// Exact rational solve of B x = b for B with independent columns
// (possibly more rows than columns; consistency is assumed, as when b
// lies in the column span). Uses a row subset with nonzero determinant.
inline std::vector<Rational> solve_rational(const IMat& B, const IVec& b) {
    const int rows = int(B.rows()), k = int(B.cols());
    // pick k rows of B forming an invertible square block, greedily and exactly
    std::vector<int> picked;
    for (int r = 0; r < rows && int(picked.size()) < k; ++r) {
        IMat sub(int(picked.size()) + 1, k);
        for (size_t i = 0; i < picked.size(); ++i) sub.row(Eigen::Index(i)) = B.row(picked[i]);
        sub.row(int(picked.size())) = B.row(r);
        if (smith_normal_form(sub).rank == int(picked.size()) + 1) picked.push_back(r);
    }
    if (int(picked.size()) < k) throw rank_error("dependent columns in rational solve");
    auto square = [&](int replace_col, const IVec& col) {
        std::vector<std::vector<i128>> M(k, std::vector<i128>(k));
        for (int r = 0; r < k; ++r)
            for (int c = 0; c < k; ++c)
                M[r][c] = (c == replace_col) ? i128(col(picked[r])) : i128(B(picked[r], c));
        return M;
    };
    std::vector<std::vector<i128>> base(k, std::vector<i128>(k));
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) base[r][c] = B(picked[r], c);
    i128 det = exact_det(base);
    if (det == 0) throw rank_error("dependent columns in rational solve");
    std::vector<Rational> x(k);
    for (int c = 0; c < k; ++c) x[c] = Rational::of(exact_det(square(c, b)), det);
    // confirm b really lies in the column span (checked over every row)
    for (int r = 0; r < rows; ++r) {
        i128 acc = 0;
        for (int c = 0; c < k; ++c) acc += i128(B(r, c)) * x[c].num * (det / x[c].den);
        if (acc != i128(b(r)) * det) throw rank_error("inconsistent rational system");
    }
    return x;
}

inline i64 vec_gcd(const IVec& v) {
    i64 g = 0;
    for (int i = 0; i < v.size(); ++i) g = std::gcd(g, std::abs(v(i)));
    return g;
}

inline i64 sup_norm(const IVec& v) {
    i64 m = 0;
    for (int i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v(i)));
    return m;
}

// Canonical sign: flip so the first nonzero entry is positive.
inline IVec sign_normalized(IVec v) {
    for (int i = 0; i < v.size(); ++i) {
        if (v(i) > 0) break;
        if (v(i) < 0) {
            v = -v;
            break;
        }
    }
    return v;
}

inline bool lex_less(const IVec& a, const IVec& b) {
    for (int i = 0; i < a.size(); ++i) {
        if (a(i) != b(i)) return a(i) < b(i);
    }
    return false;
}

} // namespace rk
