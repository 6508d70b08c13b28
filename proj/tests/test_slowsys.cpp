#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "rk/slowsys.hpp"

using namespace rk;

namespace {

IVec ivec(std::initializer_list<i64> xs) {
    IVec v(int(xs.size()));
    int i = 0;
    for (i64 x : xs) v(i++) = x;
    return v;
}

Vec dvec(std::initializer_list<double> xs) {
    Vec v(int(xs.size()));
    int i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

// hand-filled system for decomposition tests; no potential needed
SlowSystem pinned_system(const Mat& S, int m) {
    SlowSystem sys;
    sys.d = int(S.rows());
    sys.m = m;
    sys.S = S;
    sys.Ust.torus_dim = m;
    sys.Uwk.assign(size_t(sys.d - m), TrigPolynomial{});
    for (auto& f : sys.Uwk) f.torus_dim = sys.d;
    sys.basis.split_index = m;
    for (int i = 0; i < sys.d; ++i) {
        IVec k = IVec::Zero(sys.d + 1);
        k(i) = i < m ? 1 : i + 1; // ad-hoc weak norms for the bound check
        sys.basis.vectors.push_back(k);
    }
    return sys;
}

Mat random_spd(int n, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-1, 1);
    Mat G(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) G(r, c) = u(rng);
    return G * G.transpose() + 0.5 * Mat::Identity(n, n);
}

FourierHamiltonian small_hamiltonian() {
    FourierHamiltonian H;
    H.ambient_dim = 4;
    H.declared_regularity = 20;
    auto put = [&](ModeKey k, cplx a) {
        H.coefficients[k] = a;
        H.coefficients[negated(k)] = std::conj(a);
    };
    put({1, 0, 0, 0}, cplx(0.3, 0.1));
    put({2, 0, 0, 0}, cplx(-0.2, 0.05));
    put({0, 1, 0, 0}, cplx(0.15, -0.1));
    put({1, 2, 1, 1}, cplx(0.12, 0.2));
    put({0, 2, 1, 1}, cplx(-0.07, 0.03));
    return H;
}

OrderedBasis small_basis() {
    OrderedBasis B;
    B.vectors = {ivec({1, 0, 0, 0}), ivec({0, 1, 0, 0}), ivec({0, 2, 1, 1})};
    B.split_index = 1;
    return B;
}

} // namespace

TEST_CASE("kinetic matrix drops temporal components and matches the quadratic form",
          "[slowsys]") {
    ConvexModel model;
    model.dim = 3;
    model.Q0 = (Mat(3, 3) << 1.5, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.8).finished();
    model.D = 2;
    Vec p0 = dvec({0.1, -0.2, 0.0});
    SlowSystem sys = build_slow_system(model, p0, small_basis(), small_hamiltonian());

    REQUIRE(sys.d == 3);
    REQUIRE(sys.m == 1);
    // independent evaluation of k_i^T Q0 k_j on the spatial parts
    Mat K(3, 3);
    K << 1, 0, 0, 0, 1, 2, 0, 0, 1;
    Mat expect = K.transpose() * model.Q0 * K;
    REQUIRE((sys.S - expect).cwiseAbs().maxCoeff() < 1e-14);

    // the temporal entry must not feed the form: bumping it changes nothing
    OrderedBasis B2 = small_basis();
    B2.vectors[2](3) = 7;
    SlowSystem sys2 = build_slow_system(model, p0, B2, small_hamiltonian());
    REQUIRE((sys2.S - sys.S).cwiseAbs().maxCoeff() == 0);

    // degenerate spatial directions are rejected
    OrderedBasis Bbad = small_basis();
    Bbad.vectors[2] = ivec({0, 1, 0, 1}); // same spatial part as the second vector
    REQUIRE_THROWS_AS(build_slow_system(model, p0, Bbad, small_hamiltonian()),
                      conditioning_error);
}

TEST_CASE("convexity window validation", "[slowsys]") {
    ConvexModel m;
    m.dim = 2;
    m.D = 2;
    m.Q0 = (Mat(2, 2) << 1, 0, 0, 3).finished(); // top eigenvalue above D
    REQUIRE_THROWS_AS(m.validate(), degenerate_input_error);
    m.Q0 = (Mat(2, 2) << 1, 0, 0, 1.5).finished();
    REQUIRE_NOTHROW(m.validate());
    auto field = [](const Vec& p) {
        return (Mat(2, 2) << 1 + 0.1 * p(0), 0, 0, 1).finished();
    };
    ConvexModel frozen = freeze_model(field, dvec({1, 0}), 2);
    REQUIRE_THAT(frozen.Q0(0, 0), Catch::Matchers::WithinAbs(1.1, 1e-15));
}

TEST_CASE("block decomposition of a pinned 2x2 kinetic matrix", "[slowsys]") {
    Mat S = (Mat(2, 2) << 2, 1, 1, 2).finished();
    SlowSystem sys = pinned_system(S, 1);
    BlockDecomposition dec = block_decomposition(sys);

    REQUIRE_THAT(dec.A(0, 0), Catch::Matchers::WithinAbs(2.0, 1e-15));
    REQUIRE_THAT(dec.Ctilde(0, 0), Catch::Matchers::WithinAbs(1.5, 1e-14));
    REQUIRE_THAT(dec.E(0, 1), Catch::Matchers::WithinAbs(-0.5, 1e-14));
    REQUIRE_THAT(dec.E(1, 1), Catch::Matchers::WithinAbs(1.0, 1e-15));
    REQUIRE(dec.ztilde.size() == 1);
    REQUIRE_THAT(dec.ztilde[0], Catch::Matchers::WithinAbs(1.5, 1e-14));

    Vec c = dvec({0.4, -0.6});
    CbarResult cb = cbar(dec, c);
    REQUIRE_THAT(cb.cbar(0), Catch::Matchers::WithinAbs(0.4 + 0.5 * (-0.6), 1e-14));
    REQUIRE_THAT(cb.eta(0), Catch::Matchers::WithinAbs(cb.cbar(0), 1e-14));
    REQUIRE_THAT(cb.eta(1), Catch::Matchers::WithinAbs(-0.6, 1e-14));
}

TEST_CASE("block decomposition diagonalizes random kinetic matrices", "[slowsys]") {
    std::mt19937 rng(47);
    for (int trial = 0; trial < 25; ++trial) {
        int d = 4, m = 2;
        Mat S = random_spd(d, rng);
        SlowSystem sys = pinned_system(S, m);
        BlockDecomposition dec = block_decomposition(sys);

        // Schur complement against a direct computation
        Mat A = S.topLeftCorner(m, m), B = S.topRightCorner(m, d - m),
            C = S.bottomRightCorner(d - m, d - m);
        Mat Ct = C - B.transpose() * A.inverse() * B;
        REQUIRE((dec.Ctilde - Ct).cwiseAbs().maxCoeff() < 1e-10);

        // E is upper-unitriangular and E^T S E = blockdiag(A, diag(ztilde))
        for (int i = 0; i < d; ++i) {
            REQUIRE_THAT(dec.E(i, i), Catch::Matchers::WithinAbs(1.0, 1e-12));
            for (int j = 0; j < i; ++j) REQUIRE(dec.E(i, j) == 0);
        }
        Mat D = dec.E.transpose() * S * dec.E;
        REQUIRE((D.topLeftCorner(m, m) - A).cwiseAbs().maxCoeff() < 1e-10);
        REQUIRE((D.topRightCorner(m, d - m)).cwiseAbs().maxCoeff() < 1e-10);
        for (int i = 0; i < d - m; ++i) {
            REQUIRE(dec.ztilde[size_t(i)] > 0);
            REQUIRE_THAT(D(m + i, m + i),
                         Catch::Matchers::WithinAbs(dec.ztilde[size_t(i)], 1e-10));
            for (int j = 0; j < d; ++j)
                if (j != m + i) REQUIRE(std::abs(D(m + i, j)) < 1e-9);
        }

        // dual formula: 1/ztilde_i is the last diagonal entry of the inverse
        // of the leading (m+i) x (m+i) block
        for (int i = 1; i <= d - m; ++i) {
            Mat lead = S.topLeftCorner(m + i, m + i);
            double inv_corner = lead.inverse()(m + i - 1, m + i - 1);
            REQUIRE_THAT(1.0 / dec.ztilde[size_t(i - 1)],
                         Catch::Matchers::WithinRel(inv_corner, 1e-9));
        }

        // eta = E^{-1} c has the strong part cbar
        std::uniform_real_distribution<double> u(-1, 1);
        Vec c(d);
        for (int i = 0; i < d; ++i) c(i) = u(rng);
        CbarResult cb = cbar(dec, c);
        REQUIRE((cb.eta.head(m) - cb.cbar).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("coarse and fine Lagrangian splits agree with the direct value", "[slowsys]") {
    ConvexModel model;
    model.dim = 3;
    model.Q0 = (Mat(3, 3) << 1.2, 0.2, 0.0, 0.2, 0.9, 0.1, 0.0, 0.1, 1.0).finished();
    model.D = 2;
    SlowSystem sys = build_slow_system(model, dvec({0, 0, 0}), small_basis(), small_hamiltonian());
    BlockDecomposition dec = block_decomposition(sys);

    std::mt19937 rng(53);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 40; ++trial) {
        Vec c = dvec({u(rng), u(rng), u(rng)});
        Vec v = dvec({u(rng), u(rng), u(rng)});
        std::vector<double> phi = {u(rng), u(rng), u(rng)};
        SplitEval ev = lagrangian_split_eval(sys, dec, c, phi, v);
        INFO("direct=" << ev.direct << " coarse=" << ev.coarse << " fine=" << ev.fine);
        REQUIRE(ev.residual < 1e-10);
    }
}

TEST_CASE("Lagrangian and Hamiltonian are Legendre duals", "[slowsys]") {
    ConvexModel model;
    model.dim = 3;
    model.Q0 = (Mat(3, 3) << 1.1, -0.1, 0.0, -0.1, 1.4, 0.0, 0.0, 0.0, 0.9).finished();
    model.D = 2;
    SlowSystem sys = build_slow_system(model, dvec({0, 0, 0}), small_basis(), small_hamiltonian());
    MechanicalLagrangian L = lagrangian_of(sys);

    std::mt19937 rng(59);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> phi = {u(rng), u(rng), u(rng)};
        Vec p = dvec({u(rng), u(rng), u(rng)});
        Vec v = sys.S * p;
        double ham = 0.5 * p.dot(sys.S * p) - sys.potential(phi);
        REQUIRE_THAT(L(phi, v) + ham, Catch::Matchers::WithinAbs(p.dot(v), 1e-12));
        // v = Sp maximizes p.v - L(phi, v)
        Vec v2 = v + dvec({0.1, -0.05, 0.2});
        REQUIRE(p.dot(v2) - L(phi, v2) <= p.dot(v) - L(phi, v) + 1e-12);
    }
}

TEST_CASE("corner growth bound on the fine diagonal", "[slowsys]") {
    // S from a basis whose weak vectors have norms 2 and 3 (pinned_system)
    Mat S = (Mat(3, 3) << 2, 0.4, 0.3, 0.4, 1.5, 0.2, 0.3, 0.2, 1.1).finished();
    SlowSystem sys = pinned_system(S, 1);
    BlockDecomposition dec = block_decomposition(sys);
    ZtildeReport rep = ztilde_bound_check(sys, dec);
    REQUIRE(rep.holds);
    REQUIRE(rep.ztilde_inv.size() == 2);
    REQUIRE_THAT(rep.bound[0], Catch::Matchers::WithinAbs(4.0 * 4.0, 1e-12));
    REQUIRE_THAT(rep.bound[1], Catch::Matchers::WithinAbs(4.0 * 81.0, 1e-12));

    // near-singular leading block drives 1/ztilde past any fixed constant
    Mat Sbad = S;
    Sbad(0, 0) = 1;
    Sbad(0, 1) = Sbad(1, 0) = 1;
    Sbad(1, 1) = 1 + 1e-14; // leading 2x2 block is numerically singular
    SlowSystem sysb = pinned_system(Sbad, 1);
    REQUIRE_THROWS_AS(block_decomposition(sysb), conditioning_error);
}

TEST_CASE("spd inverse guards conditioning", "[slowsys]") {
    Mat good = (Mat(2, 2) << 2, 0, 0, 1).finished();
    Mat inv = spd_inverse(good, "test");
    REQUIRE((inv * good - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
    Mat indef = (Mat(2, 2) << 1, 0, 0, -1).finished();
    REQUIRE_THROWS_AS(spd_inverse(indef, "test"), conditioning_error);
    Mat sick = (Mat(2, 2) << 1, 0, 0, 1e-14).finished();
    REQUIRE_THROWS_AS(spd_inverse(sick, "test"), conditioning_error);
}

TEST_CASE("slow system json round trip", "[slowsys]") {
    ConvexModel model;
    model.dim = 3;
    model.Q0 = Mat::Identity(3, 3);
    model.D = 2;
    SlowSystem sys =
        build_slow_system(model, dvec({0.3, 0.7, 0.0}), small_basis(), small_hamiltonian());
    nlohmann::json j;
    to_json(j, sys);
    SlowSystem back = slow_system_from_json(j);
    REQUIRE(back.d == sys.d);
    REQUIRE(back.m == sys.m);
    REQUIRE((back.S - sys.S).cwiseAbs().maxCoeff() == 0);
    REQUIRE(back.Ust.terms == sys.Ust.terms);
    REQUIRE(back.Uwk.size() == sys.Uwk.size());
    for (size_t i = 0; i < back.Uwk.size(); ++i)
        REQUIRE(back.Uwk[i].terms == sys.Uwk[i].terms);
    REQUIRE(back.basis.as_matrix() == sys.basis.as_matrix());
}
