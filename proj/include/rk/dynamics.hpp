#pragma once
// Half-Lagrangian vector fields of the slow system, the trivial lift of the
// strong system, weak-variable rescaling, flow integration, deviation scans.
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "rk/slowsys.hpp"

namespace rk {

// State layout on the universal cover: (phi_st, v_st, phi_wk, I_wk),
// sizes (m, m, d-m, d-m).

struct PotentialDerivs {
    double val = 0;
    Vec grad;   // d
    Mat hess;   // d x d
};

// Derivatives of the total potential U = U_st + sum_j U_wk_j on T^d.
// With weak_only set, the strong part is skipped.
inline PotentialDerivs potential_derivs(const SlowSystem& sys, const std::vector<double>& phi,
                                        bool weak_only = false) {
    const int d = sys.d, m = sys.m;
    PotentialDerivs out;
    out.grad = Vec::Zero(d);
    out.hess = Mat::Zero(d, d);
    if (!weak_only) {
        std::vector<double> ps(phi.begin(), phi.begin() + m);
        out.val += sys.Ust.eval(ps);
        auto g = sys.Ust.grad(ps);
        auto h = sys.Ust.hess(ps);
        for (int i = 0; i < m; ++i) {
            out.grad(i) += g[size_t(i)];
            for (int j = 0; j < m; ++j) out.hess(i, j) += h[size_t(i)][size_t(j)];
        }
    }
    for (const auto& f : sys.Uwk) {
        out.val += f.eval(phi);
        auto g = f.grad(phi);
        auto h = f.hess(phi);
        for (int i = 0; i < d; ++i) {
            out.grad(i) += g[size_t(i)];
            for (int j = 0; j < d; ++j) out.hess(i, j) += h[size_t(i)][size_t(j)];
        }
    }
    return out;
}

struct HalfLagrangianField {
    const SlowSystem* sys = nullptr;
    BlockDecomposition dec;
    Vec sigma;      // d-m rescaling factors, identity when all ones
    double q = 0;
};

inline Vec sigma_for(const SlowSystem& sys, double q) {
    Vec s(sys.d - sys.m);
    for (int j = 0; j < sys.d - sys.m; ++j) {
        double kn = double(sup_norm(sys.basis.vectors[size_t(sys.m + j)]));
        s(j) = std::min(1.0, std::pow(kn, -(q + 1) / 3.0));
    }
    return s;
}

inline HalfLagrangianField make_field(const SlowSystem& sys, double q) {
    HalfLagrangianField f;
    f.sys = &sys;
    f.dec = block_decomposition(sys);
    f.sigma = sigma_for(sys, q);
    f.q = q;
    return f;
}

// Full Lagrangian field: phi' = v, v' = S dU(phi).
inline Vec eval_lagrangian_field(const HalfLagrangianField& f, const Vec& x) {
    const int d = f.sys->d;
    std::vector<double> phi(size_t(d), 0.0);
    for (int i = 0; i < d; ++i) phi[size_t(i)] = x(i);
    PotentialDerivs der = potential_derivs(*f.sys, phi);
    Vec out(2 * d);
    out.head(d) = x.tail(d);
    out.tail(d) = f.sys->S * der.grad;
    return out;
}

// Half-Lagrangian field of the slow system:
//   phi_st' = v_st
//   v_st'   = A dU_st + B dU_wk
//   phi_wk' = B^T A^{-1} v_st + Ctilde I_wk
//   I_wk'   = dU_wk
inline Vec eval_Xs(const HalfLagrangianField& f, const Vec& x) {
    const int d = f.sys->d, m = f.sys->m, w = d - m;
    std::vector<double> phi(size_t(d), 0.0);
    for (int i = 0; i < m; ++i) phi[size_t(i)] = x(i);
    for (int j = 0; j < w; ++j) phi[size_t(m + j)] = x(2 * m + j);
    PotentialDerivs der = potential_derivs(*f.sys, phi);
    Vec vst = x.segment(m, m), Iwk = x.tail(w);
    Vec out(2 * d);
    out.head(m) = vst;
    out.segment(m, m) = f.dec.A * der.grad.head(m) + f.dec.B * der.grad.tail(w);
    out.segment(2 * m, w) = f.dec.B.transpose() * f.dec.Ainv * vst + f.dec.Ctilde * Iwk;
    out.tail(w) = der.grad.tail(w);
    return out;
}

inline Vec sys_strong_grad(const SlowSystem& sys, const std::vector<double>& ps) {
    auto g = sys.Ust.grad(ps);
    Vec out(sys.m);
    for (int i = 0; i < sys.m; ++i) out(i) = g[size_t(i)];
    return out;
}

// Trivial lift of the strong Lagrangian field; weak variables are frozen.
inline Vec eval_XstL(const HalfLagrangianField& f, const Vec& x) {
    const int d = f.sys->d, m = f.sys->m;
    std::vector<double> ps(size_t(m), 0.0);
    for (int i = 0; i < m; ++i) ps[size_t(i)] = x(i);
    Vec g = sys_strong_grad(*f.sys, ps);
    Vec out = Vec::Zero(2 * d);
    out.head(m) = x.segment(m, m);
    out.segment(m, m) = f.dec.A * g;
    return out;
}

// Rescaled slow field in coordinates (phi_st, v_st, Sigma phi_wk, Sigma^{-1} I_wk).
inline Vec eval_Xs_rescaled(const HalfLagrangianField& f, const Vec& x) {
    const int d = f.sys->d, m = f.sys->m, w = d - m;
    Vec y = x;
    for (int j = 0; j < w; ++j) {
        y(2 * m + j) = x(2 * m + j) / f.sigma(j);
        y(2 * m + w + j) = x(2 * m + w + j) * f.sigma(j);
    }
    Vec v = eval_Xs(f, y);
    for (int j = 0; j < w; ++j) {
        v(2 * m + j) *= f.sigma(j);
        v(2 * m + w + j) /= f.sigma(j);
    }
    return v;
}

// Analytic Jacobian of the rescaled slow field.
inline Mat jac_Xs_rescaled(const HalfLagrangianField& f, const Vec& x) {
    const int d = f.sys->d, m = f.sys->m, w = d - m;
    std::vector<double> phi(size_t(d), 0.0);
    for (int i = 0; i < m; ++i) phi[size_t(i)] = x(i);
    for (int j = 0; j < w; ++j) phi[size_t(m + j)] = x(2 * m + j) / f.sigma(j);
    PotentialDerivs der = potential_derivs(*f.sys, phi);
    Mat Sinv = f.sigma.cwiseInverse().asDiagonal();
    Mat Sig = f.sigma.asDiagonal();
    Mat Hss = der.hess.topLeftCorner(m, m);
    Mat Hsw = der.hess.topRightCorner(m, w);
    Mat Hww = der.hess.bottomRightCorner(w, w);

    Mat J = Mat::Zero(2 * d, 2 * d);
    J.block(0, m, m, m) = Mat::Identity(m, m);
    J.block(m, 0, m, m) = f.dec.A * Hss + f.dec.B * Hsw.transpose();
    J.block(m, 2 * m, m, w) = (f.dec.A * Hsw + f.dec.B * Hww) * Sinv;
    J.block(2 * m, m, w, m) = Sig * f.dec.B.transpose() * f.dec.Ainv;
    J.block(2 * m, 2 * m + w, w, w) = Sig * f.dec.Ctilde * Sig;
    J.block(2 * m + w, 0, w, m) = Sinv * Hsw.transpose();
    J.block(2 * m + w, 2 * m, w, w) = Sinv * Hww * Sinv;
    return J;
}

inline Mat jac_XstL(const HalfLagrangianField& f, const Vec& x) {
    const int d = f.sys->d, m = f.sys->m;
    std::vector<double> ps(size_t(m), 0.0);
    for (int i = 0; i < m; ++i) ps[size_t(i)] = x(i);
    auto h = f.sys->Ust.hess(ps);
    Mat J = Mat::Zero(2 * d, 2 * d);
    J.block(0, m, m, m) = Mat::Identity(m, m);
    Mat Hss(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) Hss(i, j) = h[size_t(i)][size_t(j)];
    J.block(m, 0, m, m) = f.dec.A * Hss;
    return J;
}

// Energy of the slow system in half-Lagrangian variables.
inline double half_lagrangian_energy(const HalfLagrangianField& f, const Vec& x) {
    const int d = f.sys->d, m = f.sys->m, w = d - m;
    std::vector<double> phi(size_t(d), 0.0);
    for (int i = 0; i < m; ++i) phi[size_t(i)] = x(i);
    for (int j = 0; j < w; ++j) phi[size_t(m + j)] = x(2 * m + j);
    Vec vst = x.segment(m, m), Iwk = x.tail(w);
    Vec Ist = f.dec.Ainv * (vst - f.dec.B * Iwk);
    Vec I(d);
    I.head(m) = Ist;
    I.tail(w) = Iwk;
    return 0.5 * I.dot(f.sys->S * I) - f.sys->potential(phi);
}

// Classic fourth order Runge-Kutta.
inline Vec integrate_flow(const std::function<Vec(const Vec&)>& X, Vec x, double T,
                          double dt = 1e-3) {
    int steps = int(std::llround(T / dt));
    for (int s = 0; s < steps; ++s) {
        Vec k1 = X(x);
        Vec k2 = X(x + 0.5 * dt * k1);
        Vec k3 = X(x + 0.5 * dt * k2);
        Vec k4 = X(x + dt * k3);
        x += (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return x;
}

// Time-1 map of the rescaled slow field with its differential, integrated
// together through the variational equation.
inline std::pair<Vec, Mat> time1_map_with_jacobian(const HalfLagrangianField& f, const Vec& x0,
                                                   double dt = 1e-3) {
    const int n = int(x0.size());
    Vec x = x0;
    Mat J = Mat::Identity(n, n);
    int steps = int(std::llround(1.0 / dt));
    for (int s = 0; s < steps; ++s) {
        auto rhs = [&](const Vec& xs, const Mat& Js, Vec& dx, Mat& dJ) {
            dx = eval_Xs_rescaled(f, xs);
            dJ = jac_Xs_rescaled(f, xs) * Js;
        };
        Vec k1x, k2x, k3x, k4x;
        Mat k1J, k2J, k3J, k4J;
        rhs(x, J, k1x, k1J);
        rhs(x + 0.5 * dt * k1x, J + 0.5 * dt * k1J, k2x, k2J);
        rhs(x + 0.5 * dt * k2x, J + 0.5 * dt * k2J, k3x, k3J);
        rhs(x + dt * k3x, J + dt * k3J, k4x, k4J);
        x += (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x);
        J += (dt / 6.0) * (k1J + 2 * k2J + 2 * k3J + k4J);
    }
    return {x, J};
}

// Euler-Lagrange residual |phi'' - S dU| along an integrated trajectory,
// with the acceleration recovered by central differences.
inline double el_acceleration_residual(const HalfLagrangianField& f, const Vec& x0, double T,
                                       double dt = 1e-3) {
    auto X = [&](const Vec& x) { return eval_lagrangian_field(f, x); };
    const int d = f.sys->d;
    double h = 1e-3, worst = 0;
    for (double t : {0.25 * T, 0.5 * T, 0.75 * T}) {
        Vec xm = integrate_flow(X, x0, t - h, dt);
        Vec xc = integrate_flow(X, x0, t, dt);
        Vec xp = integrate_flow(X, x0, t + h, dt);
        Vec acc = (xp.head(d) - 2 * xc.head(d) + xm.head(d)) / (h * h);
        std::vector<double> phi(size_t(d), 0.0);
        for (int i = 0; i < d; ++i) phi[size_t(i)] = xc(i);
        Vec expect = f.sys->S * potential_derivs(*f.sys, phi).grad;
        worst = std::max(worst, (acc - expect).cwiseAbs().maxCoeff());
    }
    return worst;
}

// Halton low-discrepancy point in [0,1)^dim.
inline double radical_inverse(int base, int n) {
    double inv = 1.0 / base, r = 0, f = inv;
    while (n > 0) {
        r += f * (n % base);
        n /= base;
        f *= inv;
    }
    return r;
}

struct DeviationReport {
    double c0_strong = 0;   // sup over samples of the (phi_st, v_st) component gap
    double c1 = 0;          // sup over samples of the Jacobian gap, max-abs entry
    double mu = 0;
};

// Samples the gap between the rescaled slow field and the strong lift over
// the box phi in [0,1)^d, |v_st|, |I_wk| <= 2, with a deterministic
// low-discrepancy sequence.
inline DeviationReport rescaled_deviation(const HalfLagrangianField& f, int samples = 4096) {
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    const int d = f.sys->d, m = f.sys->m, w = d - m;
    const int dim = 2 * d;
    DeviationReport rep;
    double mu = 1e300;
    for (int j = 0; j < w; ++j)
        mu = std::min(mu, double(sup_norm(f.sys->basis.vectors[size_t(m + j)])));
    rep.mu = mu;
    for (int s = 0; s < samples; ++s) {
        Vec x(dim);
        for (int i = 0; i < dim; ++i) x(i) = radical_inverse(primes[i % 12], s + 1);
        // angles stay in [0,1); velocity and action slots stretch to [-2,2]
        for (int i = m; i < 2 * m; ++i) x(i) = 4 * x(i) - 2;
        for (int i = 2 * m + w; i < dim; ++i) x(i) = 4 * x(i) - 2;
        Vec gap = eval_Xs_rescaled(f, x) - eval_XstL(f, x);
        rep.c0_strong = std::max(rep.c0_strong, gap.head(2 * m).cwiseAbs().maxCoeff());
        Mat jgap = jac_Xs_rescaled(f, x) - jac_XstL(f, x);
        rep.c1 = std::max(rep.c1, jgap.cwiseAbs().maxCoeff());
    }
    return rep;
}

} // namespace rk
