#pragma once
// Finite Fourier model of the perturbation, lattice-projected averages,
// strong/weak potential splitting, C2 norms, dominance certificates.
#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include <json.hpp>

#include "rk/errors.hpp"
#include "rk/lattice.hpp"

namespace rk {

using cplx = std::complex<double>;
using ModeKey = std::vector<i64>;

inline ModeKey mode_key(const IVec& k) {
    ModeKey m(size_t(k.size()), 0);
    for (int i = 0; i < k.size(); ++i) m[size_t(i)] = k(i);
    return m;
}

inline ModeKey negated(const ModeKey& k) {
    ModeKey m(k.size());
    for (size_t i = 0; i < k.size(); ++i) m[i] = -k[i];
    return m;
}

inline i64 mode_sup(const ModeKey& k) {
    i64 s = 0;
    for (i64 v : k) s = std::max(s, std::abs(v));
    return s;
}

struct FourierHamiltonian {
    int ambient_dim = 0;
    double declared_regularity = 0;
    std::map<ModeKey, cplx> coefficients;
    std::map<ModeKey, std::vector<cplx>> gradients; // d h_k / dp, optional

    bool hermitian(double tol = 1e-12) const {
        for (const auto& [k, h] : coefficients) {
            auto it = coefficients.find(negated(k));
            if (it == coefficients.end() || std::abs(std::conj(it->second) - h) > tol)
                return false;
        }
        return true;
    }
};

struct TrigPolynomial {
    int torus_dim = 0;
    std::map<ModeKey, cplx> terms;

    void add(const ModeKey& l, cplx a) {
        auto [it, fresh] = terms.emplace(l, a);
        if (!fresh) it->second += a;
    }
    void prune(double tol = 0) {
        for (auto it = terms.begin(); it != terms.end();)
            it = (std::abs(it->second) <= tol) ? terms.erase(it) : std::next(it);
    }

    double eval(const std::vector<double>& phi) const {
        cplx s = 0;
        for (const auto& [l, a] : terms) {
            double arg = 0;
            for (size_t i = 0; i < l.size(); ++i) arg += double(l[i]) * phi[i];
            s += a * std::polar(1.0, 2 * M_PI * arg);
        }
        return s.real();
    }
    // gradient and Hessian in phi
    std::vector<double> grad(const std::vector<double>& phi) const {
        std::vector<cplx> g(size_t(torus_dim), 0.0);
        for (const auto& [l, a] : terms) {
            double arg = 0;
            for (size_t i = 0; i < l.size(); ++i) arg += double(l[i]) * phi[i];
            cplx e = a * std::polar(1.0, 2 * M_PI * arg) * cplx(0, 2 * M_PI);
            for (size_t i = 0; i < l.size(); ++i) g[i] += e * double(l[i]);
        }
        std::vector<double> out(size_t(torus_dim), 0.0);
        for (size_t i = 0; i < out.size(); ++i) out[i] = g[i].real();
        return out;
    }
    std::vector<std::vector<double>> hess(const std::vector<double>& phi) const {
        std::vector<std::vector<double>> h(size_t(torus_dim),
                                           std::vector<double>(size_t(torus_dim), 0.0));
        for (const auto& [l, a] : terms) {
            double arg = 0;
            for (size_t i = 0; i < l.size(); ++i) arg += double(l[i]) * phi[i];
            cplx e = a * std::polar(1.0, 2 * M_PI * arg) * (-4 * M_PI * M_PI);
            for (size_t i = 0; i < l.size(); ++i)
                for (size_t j = 0; j < l.size(); ++j)
                    h[i][j] += (e * double(l[i]) * double(l[j])).real();
        }
        return h;
    }

    TrigPolynomial embedded(int new_dim) const {
        TrigPolynomial out;
        out.torus_dim = new_dim;
        for (const auto& [l, a] : terms) {
            ModeKey ext(size_t(new_dim), 0);
            for (size_t i = 0; i < l.size(); ++i) ext[i] = l[i];
            out.terms.emplace(std::move(ext), a);
        }
        return out;
    }

    TrigPolynomial operator-() const {
        TrigPolynomial out = *this;
        for (auto& [l, a] : out.terms) a = -a;
        return out;
    }
};

inline TrigPolynomial project_to_lattice(const FourierHamiltonian& H1, const OrderedBasis& B) {
    IMat M = B.as_matrix();
    SmithForm f = smith_normal_form(M);
    for (int j = 0; j < M.cols(); ++j)
        if (f.S(j, j) != 1) throw rank_error("projection basis is not a Z-basis");
    TrigPolynomial out;
    out.torus_dim = int(B.vectors.size());
    for (const auto& [k, h] : H1.coefficients) {
        IVec kv(int(k.size()));
        for (size_t i = 0; i < k.size(); ++i) kv(int(i)) = k[i];
        if (auto l = solve_integer(f, kv)) out.terms.emplace(mode_key(*l), h);
    }
    out.prune();
    return out;
}

struct PotentialSplit {
    TrigPolynomial Ust;                   // on T^m
    std::vector<TrigPolynomial> Uwk;      // on T^d, j-th constant beyond axis m+j
};

inline PotentialSplit weak_potential_split(const FourierHamiltonian& H1, const OrderedBasis& B) {
    const int d = int(B.vectors.size());
    const int m = B.split_index;
    std::vector<TrigPolynomial> Z(size_t(d - m) + 1); // Z_{B_m}, ..., Z_{B_d} on T^d
    for (int s = m; s <= d; ++s) {
        OrderedBasis prefix;
        prefix.vectors.assign(B.vectors.begin(), B.vectors.begin() + s);
        prefix.split_index = std::min(m, s);
        Z[size_t(s - m)] = project_to_lattice(H1, prefix).embedded(d);
    }
    PotentialSplit out;
    {
        OrderedBasis strong;
        strong.vectors.assign(B.vectors.begin(), B.vectors.begin() + m);
        strong.split_index = m;
        out.Ust = -project_to_lattice(H1, strong);
    }
    for (int j = 1; j <= d - m; ++j) {
        TrigPolynomial diff = Z[size_t(j)];
        for (const auto& [l, a] : Z[size_t(j - 1)].terms) diff.add(l, -a);
        diff.prune();
        out.Uwk.push_back(-diff);
    }
    return out;
}

enum class C2Method { coefficient_bound, grid_sup };

inline double c2_norm(const TrigPolynomial& f, C2Method method = C2Method::grid_sup) {
    if (f.terms.empty()) return 0;
    if (method == C2Method::coefficient_bound) {
        double s = 0;
        for (const auto& [l, a] : f.terms) {
            double w = 1 + 2 * M_PI * double(mode_sup(l));
            s += w * w * std::abs(a);
        }
        return s;
    }
    const int dim = f.torus_dim;
    const int N = (dim <= 3) ? 64 : 32;
    std::vector<double> phi(size_t(dim), 0.0);
    std::vector<int> idx(size_t(dim), 0);
    double best = 0;
    bool done = false;
    while (!done) {
        for (int i = 0; i < dim; ++i) phi[size_t(i)] = double(idx[size_t(i)]) / N;
        best = std::max(best, std::abs(f.eval(phi)));
        for (double g : f.grad(phi)) best = std::max(best, std::abs(g));
        for (const auto& row : f.hess(phi))
            for (double h : row) best = std::max(best, std::abs(h));
        done = true;
        for (int i = 0; i < dim; ++i) {
            if (++idx[size_t(i)] < N) {
                done = false;
                break;
            }
            idx[size_t(i)] = 0;
        }
    }
    return best;
}

// Predicted C2 norm of the Fourier tail above sup-norm M for regularity r.
inline double default_tail_constant(int n) { return 40.0 * std::pow(4.0, n); }

inline double tail_bound(double r, int n, double M, double C_n = -1) {
    if (r < n + 4) throw degenerate_input_error("tail bound needs r >= n+4");
    if (M < 1) throw degenerate_input_error("tail bound needs M >= 1");
    if (C_n <= 0) C_n = default_tail_constant(n);
    return C_n * std::pow(M, -r + n + 4);
}

struct DominanceCertificate {
    double kappa = 0;
    double q = 0;
    std::vector<std::pair<i64, double>> per_vector; // (|k_j^wk|, ||U^wk_j||_C2)
    bool verdict = false;
    double mu = 0;          // min_j |k_j^wk|
    double margin = 0;      // min over conditions of (allowed - actual)/allowed
};

inline DominanceCertificate dominance_check(const OrderedBasis& B,
                                            const std::vector<TrigPolynomial>& Uwk,
                                            double kappa, double q) {
    const int d = int(B.vectors.size());
    const int m = B.split_index;
    if (int(Uwk.size()) != d - m)
        throw degenerate_input_error("one weak potential per weak vector required");
    DominanceCertificate cert;
    cert.kappa = kappa;
    cert.q = q;
    cert.verdict = true;
    cert.margin = 1;
    std::vector<i64> wk(size_t(d - m));
    for (int j = 0; j < d - m; ++j) wk[size_t(j)] = sup_norm(B.vectors[size_t(m + j)]);
    cert.mu = double(*std::min_element(wk.begin(), wk.end()));
    for (int j = 0; j < d - m; ++j) {
        for (int i = 0; i < j; ++i) {
            double allowed = kappa * (1 + double(wk[size_t(j)]));
            double margin = (allowed - double(wk[size_t(i)])) / allowed;
            cert.margin = std::min(cert.margin, margin);
            if (margin < 0) cert.verdict = false;
        }
        double norm = c2_norm(Uwk[size_t(j)], C2Method::coefficient_bound);
        cert.per_vector.emplace_back(wk[size_t(j)], norm);
        double allowed = kappa * std::pow(double(wk[size_t(j)]), -q);
        double margin = (allowed - norm) / allowed;
        cert.margin = std::min(cert.margin, margin);
        if (margin < 0) cert.verdict = false;
    }
    return cert;
}

inline void to_json(nlohmann::json& j, const TrigPolynomial& f) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [l, a] : f.terms)
        terms.push_back({{"l", l}, {"re", a.real()}, {"im", a.imag()}});
    j = nlohmann::json{{"torus_dim", f.torus_dim}, {"terms", terms}};
}

inline void to_json(nlohmann::json& j, const DominanceCertificate& c) {
    nlohmann::json pv = nlohmann::json::array();
    for (const auto& [k, n] : c.per_vector) pv.push_back({{"k_norm", k}, {"c2_norm", n}});
    j = nlohmann::json{{"kappa", c.kappa},   {"q", c.q},   {"per_vector", pv},
                       {"verdict", c.verdict}, {"mu", c.mu}, {"margin", c.margin}};
}

inline void to_json(nlohmann::json& j, const FourierHamiltonian& H) {
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& [k, h] : H.coefficients)
        coeffs.push_back({{"k", k}, {"re", h.real()}, {"im", h.imag()}});
    j = nlohmann::json{{"ambient_dim", H.ambient_dim},
                       {"declared_regularity", H.declared_regularity},
                       {"coefficients", coeffs}};
}

// Loader: completes Hermitian symmetry when asked, otherwise enforces it.
// With in_resonance_context set, rejects purely temporal indices.
inline FourierHamiltonian hamiltonian_from_json(const nlohmann::json& j,
                                                bool complete_hermitian = true,
                                                bool in_resonance_context = false) {
    FourierHamiltonian H;
    H.ambient_dim = j.at("ambient_dim").get<int>();
    H.declared_regularity = j.at("declared_regularity").get<double>();
    for (const auto& e : j.at("coefficients")) {
        ModeKey k = e.at("k").get<ModeKey>();
        if (int(k.size()) != H.ambient_dim)
            throw degenerate_input_error("coefficient index length mismatch");
        if (in_resonance_context) {
            bool spatial_zero = true;
            for (size_t i = 0; i + 1 < k.size(); ++i)
                if (k[i] != 0) spatial_zero = false;
            if (spatial_zero && k.back() != 0)
                throw degenerate_input_error("purely temporal Fourier index rejected");
        }
        H.coefficients[k] = cplx(e.at("re").get<double>(), e.value("im", 0.0));
    }
    if (complete_hermitian) {
        auto copy = H.coefficients;
        for (const auto& [k, h] : copy) {
            auto neg = negated(k);
            if (!copy.count(neg)) H.coefficients[neg] = std::conj(h);
        }
    }
    if (!H.hermitian()) throw degenerate_input_error("coefficients are not Hermitian-symmetric");
    return H;
}

} // namespace rk
