#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "rk/dynamics.hpp"

using namespace rk;

namespace {

IVec ivec(std::initializer_list<i64> xs) {
    IVec v(int(xs.size()));
    int i = 0;
    for (i64 x : xs) v(i++) = x;
    return v;
}

// one strong and one weak direction; the weak frequency vector has norm mu
SlowSystem mu_family(i64 mu, double q) {
    OrderedBasis B;
    B.vectors = {ivec({1, 0, 0}), ivec({1, mu, 1})};
    B.split_index = 1;
    FourierHamiltonian H;
    H.ambient_dim = 3;
    H.declared_regularity = 20;
    auto put = [&](ModeKey k, double re) {
        H.coefficients[k] = cplx(re, 0);
        H.coefficients[negated(k)] = cplx(re, 0);
    };
    put({1, 0, 0}, -0.15);                                  // strong potential
    put({1, i64(mu), 1}, -0.2 * std::pow(double(mu), -q));  // weak potential
    ConvexModel model;
    model.dim = 2;
    model.Q0 = Mat::Identity(2, 2);
    model.D = 2;
    return build_slow_system(model, Vec::Zero(2), B, H);
}

Vec state(std::initializer_list<double> xs) {
    Vec v(int(xs.size()));
    int i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

} // namespace

TEST_CASE("half-Lagrangian field is the Lagrangian field in mixed variables", "[dynamics]") {
    SlowSystem sys = mu_family(5, 3);
    HalfLagrangianField f = make_field(sys, 3);
    const int m = sys.m, w = sys.d - m;
    Mat Ctinv = spd_inverse(f.dec.Ctilde, "Ctilde");

    std::mt19937 rng(61);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 30; ++trial) {
        Vec xl(2 * sys.d); // Lagrangian state (phi, v)
        for (int i = 0; i < 2 * sys.d; ++i) xl(i) = u(rng);
        Vec vst = xl.segment(sys.d, m), vwk = xl.tail(w);
        Vec Iwk = Ctinv * (vwk - f.dec.B.transpose() * f.dec.Ainv * vst);
        Vec xh(2 * sys.d); // half-Lagrangian state (phi_st, v_st, phi_wk, I_wk)
        xh.head(m) = xl.head(m);
        xh.segment(m, m) = vst;
        xh.segment(2 * m, w) = xl.segment(m, w);
        xh.tail(w) = Iwk;

        Vec Xl = eval_lagrangian_field(f, xl);
        Vec Xh = eval_Xs(f, xh);
        // angle velocities agree
        REQUIRE((Xh.segment(2 * m, w) - Xl.segment(m, w)).cwiseAbs().maxCoeff() < 1e-12);
        REQUIRE((Xh.head(m) - vst).cwiseAbs().maxCoeff() < 1e-12);
        // v_st' agrees with the top block of S dU
        REQUIRE((Xh.segment(m, m) - Xl.segment(sys.d, m)).cwiseAbs().maxCoeff() < 1e-12);
        // v_wk' = B^T A^{-1} v_st' + Ctilde I_wk'
        Vec vwk_dot = f.dec.B.transpose() * f.dec.Ainv * Xh.segment(m, m) +
                      f.dec.Ctilde * Xh.tail(w);
        REQUIRE((vwk_dot - Xl.tail(w)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("slow flow conserves energy", "[dynamics]") {
    SlowSystem sys = mu_family(4, 3);
    HalfLagrangianField f = make_field(sys, 3);
    Vec x0 = state({0.2, 0.7, 0.3, -0.4});
    double e0 = half_lagrangian_energy(f, x0);
    auto X = [&](const Vec& x) { return eval_Xs(f, x); };
    Vec x1 = integrate_flow(X, x0, 5.0);
    REQUIRE_THAT(half_lagrangian_energy(f, x1), Catch::Matchers::WithinAbs(e0, 1e-9));
}

TEST_CASE("Lagrangian and half-Lagrangian flows agree through the change of variables",
          "[dynamics]") {
    SlowSystem sys = mu_family(3, 3);
    HalfLagrangianField f = make_field(sys, 3);
    const int m = sys.m, w = sys.d - m;
    Mat Ctinv = spd_inverse(f.dec.Ctilde, "Ctilde");

    Vec xl = state({0.1, 0.8, 0.5, -0.3}); // (phi, v)
    Vec vst = xl.segment(sys.d, m), vwk = xl.tail(w);
    Vec xh(2 * sys.d);
    xh.head(m) = xl.head(m);
    xh.segment(m, m) = vst;
    xh.segment(2 * m, w) = xl.segment(m, w);
    xh.tail(w) = Ctinv * (vwk - f.dec.B.transpose() * f.dec.Ainv * vst);

    Vec yl = integrate_flow([&](const Vec& x) { return eval_lagrangian_field(f, x); }, xl, 2.0);
    Vec yh = integrate_flow([&](const Vec& x) { return eval_Xs(f, x); }, xh, 2.0);
    REQUIRE((yh.head(m) - yl.head(m)).cwiseAbs().maxCoeff() < 1e-7);
    REQUIRE((yh.segment(2 * m, w) - yl.segment(m, w)).cwiseAbs().maxCoeff() < 1e-7);
    Vec vwk1 = f.dec.B.transpose() * f.dec.Ainv * yh.segment(m, m) + f.dec.Ctilde * yh.tail(w);
    REQUIRE((vwk1 - yl.tail(w)).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("rescaled field is the conjugated field", "[dynamics]") {
    SlowSystem sys = mu_family(6, 4);
    HalfLagrangianField f = make_field(sys, 4);
    const int m = sys.m, w = sys.d - m;
    std::mt19937 rng(67);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        Vec x(2 * sys.d);
        for (int i = 0; i < 2 * sys.d; ++i) x(i) = u(rng);
        // pull back, evaluate, push forward by hand
        Vec y = x;
        for (int j = 0; j < w; ++j) {
            y(2 * m + j) /= f.sigma(j);
            y(2 * m + w + j) *= f.sigma(j);
        }
        Vec v = eval_Xs(f, y);
        for (int j = 0; j < w; ++j) {
            v(2 * m + j) *= f.sigma(j);
            v(2 * m + w + j) /= f.sigma(j);
        }
        REQUIRE((eval_Xs_rescaled(f, x) - v).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("analytic Jacobian matches finite differences", "[dynamics]") {
    SlowSystem sys = mu_family(5, 4);
    HalfLagrangianField f = make_field(sys, 4);
    Vec x = state({0.3, -0.6, 0.15, 0.5});
    Mat J = jac_Xs_rescaled(f, x);
    const double h = 1e-6;
    for (int c = 0; c < 4; ++c) {
        Vec xp = x, xm = x;
        xp(c) += h;
        xm(c) -= h;
        Vec col = (eval_Xs_rescaled(f, xp) - eval_Xs_rescaled(f, xm)) / (2 * h);
        REQUIRE((J.col(c) - col).cwiseAbs().maxCoeff() < 1e-6);
    }
    // the strong lift Jacobian too
    Mat Jl = jac_XstL(f, x);
    for (int c = 0; c < 4; ++c) {
        Vec xp = x, xm = x;
        xp(c) += h;
        xm(c) -= h;
        Vec col = (eval_XstL(f, xp) - eval_XstL(f, xm)) / (2 * h);
        REQUIRE((Jl.col(c) - col).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("time-1 map differential solves the variational equation", "[dynamics]") {
    SlowSystem sys = mu_family(4, 4);
    HalfLagrangianField f = make_field(sys, 4);
    Vec x0 = state({0.25, 0.4, 0.6, -0.2});
    auto [x1, J] = time1_map_with_jacobian(f, x0);

    auto X = [&](const Vec& x) { return eval_Xs_rescaled(f, x); };
    REQUIRE((integrate_flow(X, x0, 1.0) - x1).cwiseAbs().maxCoeff() < 1e-12);
    const double h = 1e-6;
    for (int c = 0; c < 4; ++c) {
        Vec xp = x0, xm = x0;
        xp(c) += h;
        xm(c) -= h;
        Vec col = (integrate_flow(X, xp, 1.0) - integrate_flow(X, xm, 1.0)) / (2 * h);
        REQUIRE((J.col(c) - col).cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("trajectories satisfy the Euler-Lagrange equation", "[dynamics]") {
    SlowSystem sys = mu_family(3, 3);
    HalfLagrangianField f = make_field(sys, 3);
    Vec x0 = state({0.1, 0.45, 0.9, 0.3});
    REQUIRE(el_acceleration_residual(f, x0, 2.0) < 1e-5);
}

TEST_CASE("rescaled deviation decays at the advertised rates", "[dynamics]") {
    const double q = 5;
    DeviationReport lo = rescaled_deviation(make_field(mu_family(4, q), q), 1024);
    DeviationReport hi = rescaled_deviation(make_field(mu_family(16, q), q), 1024);
    REQUIRE(lo.mu == 4);
    REQUIRE(hi.mu == 16);
    double slope_c0 = std::log(hi.c0_strong / lo.c0_strong) / std::log(16.0 / 4.0);
    double slope_c1 = std::log(hi.c1 / lo.c1) / std::log(16.0 / 4.0);
    INFO("slope_c0=" << slope_c0 << " slope_c1=" << slope_c1);
    REQUIRE(slope_c0 <= -(q - 1) + 0.3);
    REQUIRE(slope_c1 <= -(q - 2) / 3 + 0.3);
    REQUIRE(slope_c0 > -2 * q);
    REQUIRE(slope_c1 > -q);
}
