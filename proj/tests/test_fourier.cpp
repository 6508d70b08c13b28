#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "rk/fourier.hpp"

using namespace rk;

namespace {

IVec vec(std::initializer_list<i64> xs) {
    IVec v(int(xs.size()));
    int i = 0;
    for (i64 x : xs) v(i++) = x;
    return v;
}

double eval_hamiltonian(const FourierHamiltonian& H, const std::vector<double>& x) {
    cplx s = 0;
    for (const auto& [k, h] : H.coefficients) {
        double arg = 0;
        for (size_t i = 0; i < k.size(); ++i) arg += double(k[i]) * x[i];
        s += h * std::polar(1.0, 2 * M_PI * arg);
    }
    return s.real();
}

FourierHamiltonian make_hamiltonian(int dim, std::initializer_list<std::pair<ModeKey, cplx>> cs) {
    FourierHamiltonian H;
    H.ambient_dim = dim;
    H.declared_regularity = 20;
    for (const auto& [k, h] : cs) {
        H.coefficients[k] = h;
        H.coefficients[negated(k)] = std::conj(h);
    }
    return H;
}

FourierHamiltonian random_hamiltonian(int dim, int modes, i64 span, std::mt19937& rng) {
    std::uniform_int_distribution<i64> ki(-span, span);
    std::uniform_real_distribution<double> co(-1, 1);
    FourierHamiltonian H;
    H.ambient_dim = dim;
    H.declared_regularity = 20;
    while (int(H.coefficients.size()) < 2 * modes) {
        ModeKey k(size_t(dim), 0);
        bool zero = true;
        for (auto& v : k) {
            v = ki(rng);
            if (v != 0) zero = false;
        }
        if (zero) continue;
        cplx h(co(rng), co(rng));
        H.coefficients[k] = h;
        H.coefficients[negated(k)] = std::conj(h);
    }
    return H;
}

} // namespace

TEST_CASE("lattice projection keeps exactly the resonant modes", "[fourier]") {
    // axis-aligned case: averaging over the second angle
    FourierHamiltonian H = make_hamiltonian(
        2, {{{1, 0}, cplx(0.5, 0.25)}, {{2, 0}, cplx(-0.3, 0.1)}, {{1, 1}, cplx(0.7, 0)},
            {{0, 1}, cplx(0.2, -0.4)}});
    OrderedBasis B;
    B.vectors = {vec({1, 0})};
    B.split_index = 1;
    TrigPolynomial Z = project_to_lattice(H, B);

    REQUIRE(Z.terms.size() == 4);
    REQUIRE(Z.terms.count({1}) == 1);
    REQUIRE(Z.terms.count({2}) == 1);
    REQUIRE(Z.terms.at({1}) == cplx(0.5, 0.25));
    REQUIRE(Z.terms.at({-2}) == cplx(-0.3, -0.1));

    // numeric oracle: average H over the killed direction
    const int N = 64;
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        double psi = u(rng);
        double avg = 0;
        for (int j = 0; j < N; ++j) avg += eval_hamiltonian(H, {psi, double(j) / N});
        avg /= N;
        REQUIRE_THAT(Z.eval({psi}), Catch::Matchers::WithinAbs(avg, 1e-12));
    }
}

TEST_CASE("lattice projection along a diagonal resonance", "[fourier]") {
    FourierHamiltonian H = make_hamiltonian(
        2, {{{1, 1}, cplx(0.4, 0.2)}, {{2, 2}, cplx(0.1, -0.3)}, {{1, -1}, cplx(0.9, 0)},
            {{3, 1}, cplx(0.5, 0.5)}});
    OrderedBasis B;
    B.vectors = {vec({1, 1})};
    B.split_index = 1;
    TrigPolynomial Z = project_to_lattice(H, B);

    REQUIRE(Z.terms.size() == 4);
    REQUIRE(Z.terms.at({1}) == cplx(0.4, 0.2));
    REQUIRE(Z.terms.at({2}) == cplx(0.1, -0.3));

    // coset average oracle: x = (psi - s, s) keeps exactly the k1 = k2 modes
    const int N = 64;
    for (double psi : {0.0, 0.13, 0.72}) {
        double avg = 0;
        for (int j = 0; j < N; ++j) {
            double s = double(j) / N;
            avg += eval_hamiltonian(H, {psi - s, s});
        }
        avg /= N;
        REQUIRE_THAT(Z.eval({psi}), Catch::Matchers::WithinAbs(avg, 1e-12));
    }
}

TEST_CASE("projection rejects a non-Z-basis", "[fourier]") {
    FourierHamiltonian H = make_hamiltonian(2, {{{2, 0}, cplx(1, 0)}});
    OrderedBasis B;
    B.vectors = {vec({2, 0})}; // spans an index-2 sublattice of its saturation
    B.split_index = 1;
    REQUIRE_THROWS_AS(project_to_lattice(H, B), rank_error);
}

TEST_CASE("potential split telescopes to the full projection", "[fourier]") {
    std::mt19937 rng(29);
    for (int trial = 0; trial < 15; ++trial) {
        FourierHamiltonian H = random_hamiltonian(3, 12, 4, rng);
        OrderedBasis B;
        B.vectors = {vec({1, 0, 0}), vec({0, 1, 0}), vec({0, 2, 1})};
        B.split_index = 1;
        PotentialSplit ps = weak_potential_split(H, B);
        REQUIRE(ps.Uwk.size() == 2);

        TrigPolynomial Zfull = project_to_lattice(H, B);
        TrigPolynomial Ust3 = ps.Ust.embedded(3);

        std::uniform_real_distribution<double> u(0, 1);
        for (int s = 0; s < 10; ++s) {
            std::vector<double> phi = {u(rng), u(rng), u(rng)};
            double total = -Ust3.eval(phi);
            for (const auto& Uj : ps.Uwk) total -= Uj.eval(phi);
            REQUIRE_THAT(total, Catch::Matchers::WithinAbs(Zfull.eval(phi), 1e-11));
        }

        // the j-th weak potential only involves the first m+j basis angles
        for (size_t j = 0; j < ps.Uwk.size(); ++j)
            for (const auto& [l, a] : ps.Uwk[j].terms)
                for (size_t i = size_t(B.split_index) + j + 1; i < l.size(); ++i)
                    REQUIRE(l[i] == 0);
    }
}

TEST_CASE("c2 norm: coefficient bound dominates the grid sup", "[fourier]") {
    std::mt19937 rng(31);
    std::uniform_int_distribution<i64> ki(-3, 3);
    std::uniform_real_distribution<double> co(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        TrigPolynomial f;
        f.torus_dim = 2;
        for (int t = 0; t < 6; ++t) {
            ModeKey l = {ki(rng), ki(rng)};
            cplx a(co(rng), co(rng));
            f.add(l, a);
            f.add(negated(l), std::conj(a));
        }
        f.prune();
        double cb = c2_norm(f, C2Method::coefficient_bound);
        double gs = c2_norm(f, C2Method::grid_sup);
        REQUIRE(cb >= gs - 1e-9);
    }

    // pure cosine: both methods are exactly computable
    TrigPolynomial g;
    g.torus_dim = 1;
    g.add({3}, cplx(0.5, 0));
    g.add({-3}, cplx(0.5, 0));
    double w = 2 * M_PI * 3;
    REQUIRE_THAT(c2_norm(g, C2Method::coefficient_bound),
                 Catch::Matchers::WithinRel((1 + w) * (1 + w), 1e-12));
    REQUIRE_THAT(c2_norm(g, C2Method::grid_sup), Catch::Matchers::WithinRel(w * w, 1e-9));
}

TEST_CASE("tail bound decays at the declared rate", "[fourier]") {
    double b8 = tail_bound(12, 2, 8);
    double b16 = tail_bound(12, 2, 16);
    REQUIRE(b8 > b16);
    // exponent is -r + n + 4 = -6
    REQUIRE_THAT(b8 / b16, Catch::Matchers::WithinRel(std::pow(2.0, 6.0), 1e-12));
    REQUIRE_THAT(tail_bound(12, 2, 8, 10.0), Catch::Matchers::WithinRel(10.0 * std::pow(8.0, -6.0), 1e-12));
    REQUIRE_THROWS_AS(tail_bound(5, 2, 8), degenerate_input_error);
    REQUIRE_THROWS_AS(tail_bound(12, 2, 0.5), degenerate_input_error);
}

TEST_CASE("dominance certificate accepts decaying families and rejects others", "[fourier]") {
    const double q = 3;
    auto family = [&](i64 mu, double scale) {
        OrderedBasis B;
        B.vectors = {vec({1, 0, 0}), vec({0, mu, 1})};
        B.split_index = 1;
        TrigPolynomial U;
        U.torus_dim = 3;
        double amp = scale * std::pow(double(mu), -q);
        U.add({0, 1, 0}, cplx(amp / 2, 0));
        U.add({0, -1, 0}, cplx(amp / 2, 0));
        return std::make_pair(B, std::vector<TrigPolynomial>{U});
    };

    for (i64 mu : {4, 16, 64}) {
        auto [B, U] = family(mu, 0.005);
        DominanceCertificate cert = dominance_check(B, U, 1.0, q);
        INFO("mu=" << mu);
        REQUIRE(cert.verdict);
        REQUIRE(cert.mu == double(mu));
        REQUIRE(cert.margin > 0);
    }
    {
        // weak potential too large for the declared decay
        auto [B, U] = family(16, 50.0);
        REQUIRE_FALSE(dominance_check(B, U, 1.0, q).verdict);
    }
    {
        // ordering condition violated: earlier weak vector much larger than later
        OrderedBasis B;
        B.vectors = {vec({1, 0, 0}), vec({0, 100, 1}), vec({0, 1, 2})};
        B.split_index = 1;
        std::vector<TrigPolynomial> U(2);
        U[0].torus_dim = U[1].torus_dim = 3;
        DominanceCertificate cert = dominance_check(B, U, 1.0, q);
        REQUIRE_FALSE(cert.verdict);
    }
}

TEST_CASE("hamiltonian loader symmetry and resonance checks", "[fourier]") {
    nlohmann::json j = {{"ambient_dim", 2},
                        {"declared_regularity", 12},
                        {"coefficients",
                         {{{"k", {1, 0}}, {"re", 0.5}, {"im", 0.25}}}}};
    FourierHamiltonian H = hamiltonian_from_json(j);
    REQUIRE(H.coefficients.size() == 2);
    REQUIRE(H.coefficients.at({-1, 0}) == cplx(0.5, -0.25));
    REQUIRE(H.hermitian());

    nlohmann::json bad = j;
    bad["coefficients"].push_back({{"k", {0, 3}}, {"re", 1.0}});
    REQUIRE_THROWS_AS(hamiltonian_from_json(bad, true, true), degenerate_input_error);
    REQUIRE_NOTHROW(hamiltonian_from_json(bad, true, false));

    nlohmann::json asym = j;
    asym["coefficients"].push_back({{"k", {-1, 0}}, {"re", 9.0}});
    REQUIRE_THROWS_AS(hamiltonian_from_json(asym, false), degenerate_input_error);

    // round trip through json
    nlohmann::json out;
    to_json(out, H);
    FourierHamiltonian H2 = hamiltonian_from_json(out);
    REQUIRE(H2.coefficients == H.coefficients);
}
