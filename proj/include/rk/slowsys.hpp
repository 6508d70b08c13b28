#pragma once
// Slow and strong mechanical systems: kinetic forms from the lattice basis,
// block and fine decompositions, Lagrangian duality, the map c -> cbar.
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rk/errors.hpp"
#include "rk/fourier.hpp"
#include "rk/lattice.hpp"

namespace rk {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline constexpr double kCondLimit = 1e12;

// SPD inverse with an explicit conditioning guard.
inline Mat spd_inverse(const Mat& M, const char* what) {
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (lo <= 0 || hi / lo > kCondLimit)
        throw conditioning_error(std::string(what) + ": not SPD or condition number above 1e12");
    return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

struct ConvexModel {
    int dim = 0;        // n
    Mat Q0;             // symmetric n x n, Hessian of H0 at p0
    double D = 2;       // convexity constant

    void validate() const {
        Eigen::SelfAdjointEigenSolver<Mat> es(Q0);
        double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
        if ((Q0 - Q0.transpose()).cwiseAbs().maxCoeff() > 1e-12 || lo < 1.0 / D - 1e-12 ||
            hi > D + 1e-12)
            throw degenerate_input_error("convexity window D^{-1} <= Q0 <= D violated");
    }
};

// Q0 given as a quadratic field of p is frozen at p0 before use.
inline ConvexModel freeze_model(const std::function<Mat(const Vec&)>& field, const Vec& p0,
                                double D) {
    ConvexModel m;
    m.Q0 = field(p0);
    m.dim = int(m.Q0.rows());
    m.D = D;
    m.validate();
    return m;
}

struct SlowSystem {
    int d = 0, m = 0;
    Mat S;                          // d x d kinetic matrix, k_i^T Q(p0) k_j
    TrigPolynomial Ust;             // on T^m
    std::vector<TrigPolynomial> Uwk; // on T^d
    Vec p0;
    OrderedBasis basis;

    // total potential at phi in T^d
    double potential(const std::vector<double>& phi) const {
        std::vector<double> ps(phi.begin(), phi.begin() + m);
        double u = Ust.eval(ps);
        for (const auto& f : Uwk) u += f.eval(phi);
        return u;
    }
};

inline SlowSystem build_slow_system(const ConvexModel& model, const Vec& p0,
                                    const OrderedBasis& B, const FourierHamiltonian& H1) {
    model.validate();
    const int d = int(B.vectors.size());
    const int n = model.dim;
    SlowSystem sys;
    sys.d = d;
    sys.m = B.split_index;
    sys.p0 = p0;
    sys.basis = B;
    sys.S = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double s = 0; // temporal components are killed by Q = diag(Q0, 0)
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    s += double(B.vectors[size_t(i)](a)) * model.Q0(a, b) *
                         double(B.vectors[size_t(j)](b));
            sys.S(i, j) = s;
        }
    Eigen::SelfAdjointEigenSolver<Mat> es(sys.S);
    if (es.eigenvalues().minCoeff() <= 0)
        throw conditioning_error("slow kinetic matrix is not positive definite");
    PotentialSplit split = weak_potential_split(H1, B);
    sys.Ust = std::move(split.Ust);
    sys.Uwk = std::move(split.Uwk);
    return sys;
}

struct BlockDecomposition {
    Mat A, B, C, Ctilde;
    Mat E;                    // upper-unitriangular, E^T S E = blockdiag(A, ztilde)
    std::vector<double> ztilde;
    Mat Ainv;
};

inline double zi_max(const BlockDecomposition& dec) {
    double z = 1;
    for (double v : dec.ztilde) z = std::max(z, std::abs(v));
    return z;
}

inline BlockDecomposition block_decomposition(const SlowSystem& sys) {
    const int d = sys.d, m = sys.m;
    BlockDecomposition dec;
    dec.A = sys.S.topLeftCorner(m, m);
    dec.B = sys.S.topRightCorner(m, d - m);
    dec.C = sys.S.bottomRightCorner(d - m, d - m);
    dec.Ainv = spd_inverse(dec.A, "strong block A");
    dec.Ctilde = dec.C - dec.B.transpose() * dec.Ainv * dec.B;

    // fine decomposition: nested leading blocks X_i, borders y_i, corners z_i
    dec.E = Mat::Identity(d, d);
    for (int i = 1; i <= d - m; ++i) {
        int s = m + i - 1;
        Mat Xi = sys.S.topLeftCorner(s, s);
        Vec yi = sys.S.block(0, s, s, 1);
        double zi = sys.S(s, s);
        Mat Xinv = spd_inverse(Xi, "nested block X_i");
        dec.ztilde.push_back(zi - yi.dot(Xinv * yi));
        Mat Ei = Mat::Identity(d, d);
        Ei.block(0, s, s, 1) = -Xinv * yi;
        dec.E = Ei * dec.E; // E = E_{d-m} ... E_1
    }
    // assembled product must stay upper-unitriangular with the stated diagonal
    Mat D = dec.E.transpose() * sys.S * dec.E;
    for (int i = 0; i < d - m; ++i)
        if (std::abs(D(m + i, m + i) - dec.ztilde[size_t(i)]) > 1e-8 * std::abs(zi_max(dec)))
            throw conditioning_error("fine decomposition lost accuracy");
    return dec;
}

struct CbarResult {
    Vec cbar;   // R^m
    Vec eta;    // R^d, eta = E^{-1} c, eta^st = cbar
};

inline CbarResult cbar(const BlockDecomposition& dec, const Vec& c) {
    const int m = int(dec.A.rows());
    const int d = int(c.size());
    CbarResult out;
    out.cbar = c.head(m) + dec.Ainv * dec.B * c.tail(d - m);
    out.eta = dec.E.partialPivLu().solve(c);
    return out;
}

// L(phi, v) = 1/2 v^T S^{-1} v + U(phi); H(phi, p) = 1/2 p^T S p - U(phi).
struct MechanicalLagrangian {
    Mat Sinv;
    const SlowSystem* sys = nullptr;

    double operator()(const std::vector<double>& phi, const Vec& v) const {
        return 0.5 * v.dot(Sinv * v) + sys->potential(phi);
    }
};

inline MechanicalLagrangian lagrangian_of(const SlowSystem& sys) {
    MechanicalLagrangian L;
    L.Sinv = spd_inverse(sys.S, "kinetic matrix S");
    L.sys = &sys;
    return L;
}

struct SplitEval {
    double direct = 0, coarse = 0, fine = 0, residual = 0;
};

// Evaluates L^s - c.v three ways: directly, through the coarse Schur split,
// and through the fine (fully diagonal) split.
inline SplitEval lagrangian_split_eval(const SlowSystem& sys, const BlockDecomposition& dec,
                                       const Vec& c, const std::vector<double>& phi,
                                       const Vec& v) {
    const int d = sys.d, m = sys.m;
    MechanicalLagrangian L = lagrangian_of(sys);
    SplitEval out;
    out.direct = L(phi, v) - c.dot(v);

    Vec vst = v.head(m), vwk = v.tail(d - m);
    Vec cst = c.head(m), cwk = c.tail(d - m);
    CbarResult cb = cbar(dec, c);

    std::vector<double> phist(phi.begin(), phi.begin() + m);
    double Lst = 0.5 * vst.dot(dec.Ainv * vst) + sys.Ust.eval(phist);
    double Uwk_total = 0;
    for (const auto& f : sys.Uwk) Uwk_total += f.eval(phi);

    Vec wwk = vwk - dec.B.transpose() * dec.Ainv * vst;
    Mat Ctinv = spd_inverse(dec.Ctilde, "Schur complement");
    Vec shifted = wwk - dec.Ctilde * cwk;
    out.coarse = Lst - cb.cbar.dot(vst) + 0.5 * shifted.dot(Ctinv * shifted) -
                 0.5 * cwk.dot(dec.Ctilde * cwk) + Uwk_total;

    // fine split: w_i = v_i^wk - y_i^T X_i^{-1} (leading part of v)
    out.fine = Lst - cb.cbar.dot(vst);
    for (int i = 1; i <= d - m; ++i) {
        int s = m + i - 1;
        Mat Xi = sys.S.topLeftCorner(s, s);
        Vec yi = sys.S.block(0, s, s, 1);
        double wi = v(s) - yi.dot(Xi.llt().solve(v.head(s)));
        double zt = dec.ztilde[size_t(i - 1)];
        double eta_i = cb.eta(s);
        out.fine += 0.5 * (wi - zt * eta_i) * (wi - zt * eta_i) / zt -
                    0.5 * zt * eta_i * eta_i + sys.Uwk[size_t(i - 1)].eval(phi);
    }

    out.residual = std::max({std::abs(out.direct - out.coarse),
                             std::abs(out.direct - out.fine),
                             std::abs(out.coarse - out.fine)});
    return out;
}

struct ZtildeReport {
    std::vector<double> ztilde_inv;
    std::vector<double> bound;    // Mstar * |k_i^wk|^{2i}
    double Mstar = 0;
    bool holds = false;
};

inline double default_ztilde_constant() { return 4.0; }

inline ZtildeReport ztilde_bound_check(const SlowSystem& sys, const BlockDecomposition& dec,
                                       double Mstar = -1) {
    if (Mstar <= 0) Mstar = default_ztilde_constant();
    ZtildeReport rep;
    rep.Mstar = Mstar;
    rep.holds = true;
    for (size_t i = 0; i < dec.ztilde.size(); ++i) {
        double kn = double(sup_norm(sys.basis.vectors[size_t(sys.m) + i]));
        rep.ztilde_inv.push_back(1.0 / dec.ztilde[i]);
        rep.bound.push_back(Mstar * std::pow(kn, 2.0 * double(i + 1)));
        if (rep.ztilde_inv.back() > rep.bound.back()) rep.holds = false;
    }
    return rep;
}

inline void to_json(nlohmann::json& j, const SlowSystem& sys) {
    std::vector<std::vector<double>> S(size_t(sys.d), std::vector<double>(size_t(sys.d)));
    for (int r = 0; r < sys.d; ++r)
        for (int c = 0; c < sys.d; ++c) S[size_t(r)][size_t(c)] = sys.S(r, c);
    std::vector<double> p0(size_t(sys.p0.size()));
    for (int i = 0; i < sys.p0.size(); ++i) p0[size_t(i)] = sys.p0(i);
    nlohmann::json ust, basis;
    to_json(ust, sys.Ust);
    to_json(basis, sys.basis);
    nlohmann::json uwk = nlohmann::json::array();
    for (const auto& f : sys.Uwk) {
        nlohmann::json jf;
        to_json(jf, f);
        uwk.push_back(jf);
    }
    j = nlohmann::json{{"d", sys.d}, {"m", sys.m},   {"S", S},        {"Ust", ust},
                       {"Uwk", uwk}, {"basis", basis}, {"p0", p0}};
}

inline TrigPolynomial trig_from_json(const nlohmann::json& j) {
    TrigPolynomial f;
    f.torus_dim = j.at("torus_dim").get<int>();
    for (const auto& t : j.at("terms"))
        f.terms[t.at("l").get<ModeKey>()] =
            cplx(t.at("re").get<double>(), t.at("im").get<double>());
    return f;
}

inline SlowSystem slow_system_from_json(const nlohmann::json& j) {
    SlowSystem sys;
    sys.d = j.at("d").get<int>();
    sys.m = j.at("m").get<int>();
    auto S = j.at("S").get<std::vector<std::vector<double>>>();
    sys.S.resize(sys.d, sys.d);
    for (int r = 0; r < sys.d; ++r)
        for (int c = 0; c < sys.d; ++c) sys.S(r, c) = S[size_t(r)][size_t(c)];
    sys.Ust = trig_from_json(j.at("Ust"));
    for (const auto& jf : j.at("Uwk")) sys.Uwk.push_back(trig_from_json(jf));
    sys.basis = basis_from_json(j.at("basis"));
    auto p0 = j.at("p0").get<std::vector<double>>();
    sys.p0.resize(Eigen::Index(p0.size()));
    for (size_t i = 0; i < p0.size(); ++i) sys.p0(Eigen::Index(i)) = p0[i];
    return sys;
}

} // namespace rk
