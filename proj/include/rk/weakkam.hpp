#pragma once
// Discrete weak KAM machinery on torus grids: Lax-Oleinik iteration, the
// effective constant alpha, Peierls barriers, Aubry and Mane sets, calibrated
// curves, rotation numbers, and the alpha-relation experiments.
#include <cstdlib>
#include <limits>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rk/slowsys.hpp"

namespace rk {

inline constexpr double kBarrierInf = 1e18;

struct WeakKamConfig {
    int N = 0;           // grid points per axis; 0 picks 128/48/16 by dimension
    double h = 0.2;      // time step of the discrete action
    int W = 0;           // winding search bound per axis; 0 picks 1 or 2 from |Sc|h
    double tol = 1e-8;   // residual tolerance on the anchored iteration
    int max_iter = 5000;
    double shift_window = 0; // cycling fallback: trailing-shift oscillation
                             // accepted as alpha; 0 picks 1e-2 * h
    int threads = 0;     // 0 reads RK_THREADS, else 1
};

struct GridValueFunction {
    int d = 0, N = 0;
    std::vector<double> values;  // N^d, anchored to 0 at the origin
    double alpha_estimate = 0;
    Vec c;
    int iterations = 0;
    bool value_converged = true; // false when only the shift stabilized (cycling profile)
};

struct BarrierTable {
    int base_index = 0;
    std::vector<double> values;  // h_{L,c}(base, .) over the grid
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("RK_THREADS")) {
        int t = std::atoi(env);
        if (t > 0) return t;
    }
    return 1;
}

// Deterministic parallel sweep: each worker owns a fixed contiguous range.
template <typename F>
inline void parallel_cells(long total, int threads, F&& body) {
    if (threads <= 1) {
        for (long i = 0; i < total; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    long chunk = (total + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        long lo = t * chunk, hi = std::min(total, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (long i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

// Discretized one-step action on the torus grid.
struct DiscreteAction {
    int d = 0, N = 0, W = 1;
    long total = 0;
    double h = 0;
    std::vector<double> hU;    // h * U at each grid point
    std::vector<double> kin;   // per displacement class: min over windings of
                               // h * (kinetic) - c . displacement
    std::vector<long> stride;

    std::vector<int> unflatten(long idx) const {
        std::vector<int> out(size_t(d), 0);
        for (int i = 0; i < d; ++i) {
            out[size_t(i)] = int(idx % N);
            idx /= N;
        }
        return out;
    }
};

inline DiscreteAction build_action(const SlowSystem& sys, const Vec& c,
                                   const WeakKamConfig& cfg) {
    const int d = sys.d;
    if (d > 3) throw degenerate_input_error("weak KAM grids limited to d <= 3");
    DiscreteAction act;
    act.d = d;
    act.N = cfg.N > 0 ? cfg.N : (d == 1 ? 128 : d == 2 ? 48 : 16);
    act.h = cfg.h;
    if (act.h <= 0 || act.h > 1) throw degenerate_input_error("time step must lie in (0, 1]");
    Mat Sinv = spd_inverse(sys.S, "kinetic matrix S");
    double scv = (sys.S * c).cwiseAbs().maxCoeff();
    act.W = cfg.W > 0 ? cfg.W : (scv * act.h > 0.5 ? 2 : 1);
    if (act.W > 3) throw degenerate_input_error("winding bound limited to 3");

    act.total = 1;
    act.stride.assign(size_t(d), 1);
    for (int i = 0; i < d; ++i) {
        act.stride[size_t(i)] = act.total;
        act.total *= act.N;
    }

    act.hU.assign(size_t(act.total), 0.0);
    std::vector<double> phi(size_t(d), 0.0);
    for (long idx = 0; idx < act.total; ++idx) {
        auto g = act.unflatten(idx);
        for (int i = 0; i < d; ++i) phi[size_t(i)] = double(g[size_t(i)]) / act.N;
        act.hU[size_t(idx)] = act.h * sys.potential(phi);
    }

    // winding range {-W-1, ..., W} over the representative in [0,1) covers
    // every displacement x - y + w with w in {-W..W}
    act.kin.assign(size_t(act.total), kBarrierInf);
    const int wlo = -act.W - 1, whi = act.W;
    std::vector<int> wd(size_t(d), wlo);
    Vec disp(d);
    for (long idx = 0; idx < act.total; ++idx) {
        auto g = act.unflatten(idx);
        std::fill(wd.begin(), wd.end(), wlo);
        double best = kBarrierInf;
        bool done = false;
        while (!done) {
            for (int i = 0; i < d; ++i)
                disp(i) = double(g[size_t(i)]) / act.N + wd[size_t(i)];
            Vec v = disp / act.h;
            double val = act.h * 0.5 * v.dot(Sinv * v) - c.dot(disp);
            best = std::min(best, val);
            done = true;
            for (int i = 0; i < d; ++i) {
                if (++wd[size_t(i)] <= whi) {
                    done = false;
                    break;
                }
                wd[size_t(i)] = wlo;
            }
        }
        act.kin[size_t(idx)] = best;
    }
    return act;
}

// One synchronous backward sweep: out(x) = min_y in(y) + hU(y) + kin(x - y).
inline void min_plus_sweep(const DiscreteAction& act, const std::vector<double>& in,
                           std::vector<double>& out, int threads) {
    const int d = act.d, N = act.N;
    parallel_cells(act.total, threads, [&](long x) {
        auto gx = act.unflatten(x);
        double best = kBarrierInf;
        for (long y = 0; y < act.total; ++y) {
            double uy = in[size_t(y)];
            if (uy >= kBarrierInf) continue;
            long rem = y, delta = 0;
            for (int i = 0; i < d; ++i) {
                int yi = int(rem % N);
                rem /= N;
                delta += ((gx[size_t(i)] - yi + N) % N) * act.stride[size_t(i)];
            }
            double val = uy + 0.5 * act.hU[size_t(y)] + act.kin[size_t(delta)];
            if (val < best) best = val;
        }
        // trapezoidal potential weights, half at each endpoint of the step
        out[size_t(x)] = best + 0.5 * act.hU[size_t(x)];
    });
}

} // namespace detail

struct LaxOleinikStep {
    std::vector<double> values;  // anchored
    double shift = 0;            // subtracted constant, -h * alpha at the fixed point
};

inline LaxOleinikStep lax_oleinik_step(const detail::DiscreteAction& act,
                                       const std::vector<double>& u, int threads) {
    LaxOleinikStep out;
    out.values.assign(u.size(), 0.0);
    detail::min_plus_sweep(act, u, out.values, threads);
    out.shift = out.values[0];
    for (double& v : out.values) v -= out.shift;
    return out;
}

// Convenience wrapper building the discretization on the fly.
inline LaxOleinikStep lax_oleinik_step(const SlowSystem& sys, const Vec& c,
                                       const std::vector<double>& u, WeakKamConfig cfg = {}) {
    detail::DiscreteAction act = detail::build_action(sys, c, cfg);
    return lax_oleinik_step(act, u, detail::resolve_threads(cfg.threads));
}

inline GridValueFunction solve_weak_kam(const SlowSystem& sys, const Vec& c,
                                        WeakKamConfig cfg = {}) {
    detail::DiscreteAction act = detail::build_action(sys, c, cfg);
    int threads = detail::resolve_threads(cfg.threads);
    GridValueFunction u;
    u.d = sys.d;
    u.N = act.N;
    u.c = c;
    u.values.assign(size_t(act.total), 0.0);
    double shift = 0;
    std::vector<double> residuals, shifts;
    for (int it = 0; it < cfg.max_iter; ++it) {
        LaxOleinikStep step = lax_oleinik_step(act, u.values, threads);
        double res = 0;
        for (size_t i = 0; i < u.values.size(); ++i)
            res = std::max(res, std::abs(step.values[i] - u.values[i]));
        u.values.swap(step.values);
        shift = step.shift;
        u.iterations = it + 1;
        residuals.push_back(res);
        shifts.push_back(shift);
        if (res < cfg.tol) {
            u.alpha_estimate = -shift / act.h;
            return u;
        }
    }
    // In the rotation regime the iteration can settle into a cycle: the
    // values keep moving but the per-step cost stabilizes. Accept a stable
    // trailing shift as the alpha estimate and flag the profile.
    const size_t window = std::min<size_t>(50, shifts.size());
    auto [lo, hi] = std::minmax_element(shifts.end() - long(window), shifts.end());
    double accept = cfg.shift_window > 0 ? cfg.shift_window : 1e-2 * act.h;
    if (*hi - *lo <= accept) {
        double mean = 0;
        for (size_t i = shifts.size() - window; i < shifts.size(); ++i) mean += shifts[i];
        mean /= double(window);
        u.alpha_estimate = -mean / act.h;
        u.value_converged = false;
        return u;
    }
    std::string tail;
    for (size_t i = residuals.size() > 5 ? residuals.size() - 5 : 0; i < residuals.size(); ++i)
        tail += " " + std::to_string(residuals[i]);
    throw convergence_error("Lax-Oleinik iteration did not converge; last residuals:" + tail);
}

inline BarrierTable peierls_barrier(const SlowSystem& sys, const Vec& c, double alpha,
                                    long base_index, WeakKamConfig cfg = {}, int iters = 200) {
    detail::DiscreteAction act = detail::build_action(sys, c, cfg);
    int threads = detail::resolve_threads(cfg.threads);
    if (base_index < 0 || base_index >= act.total)
        throw degenerate_input_error("barrier base point outside the grid");
    BarrierTable bt;
    bt.base_index = int(base_index);
    std::vector<double> v(size_t(act.total), kBarrierInf), next(size_t(act.total), 0.0);
    v[size_t(base_index)] = 0;
    // elementwise min over the trailing window approximates the liminf
    const int window = 20;
    bt.values.assign(size_t(act.total), kBarrierInf);
    std::vector<double> prev_window(size_t(act.total), kBarrierInf);
    for (int it = 0; it < iters; ++it) {
        detail::min_plus_sweep(act, v, next, threads);
        for (double& x : next)
            if (x < kBarrierInf) x += act.h * alpha;
        v.swap(next);
        if (it >= iters - 2 * window && it < iters - window)
            for (size_t i = 0; i < v.size(); ++i)
                prev_window[i] = std::min(prev_window[i], v[i]);
        if (it >= iters - window)
            for (size_t i = 0; i < v.size(); ++i)
                bt.values[i] = std::min(bt.values[i], v[i]);
        bt.iterations = it + 1;
        if (*std::min_element(v.begin(), v.end()) < -1e8)
            throw conditioning_error("barrier iteration diverges; alpha overestimated");
    }
    double drift = 0;
    for (size_t i = 0; i < v.size(); ++i)
        if (prev_window[i] < kBarrierInf && bt.values[i] < kBarrierInf)
            drift = std::max(drift, std::abs(bt.values[i] - prev_window[i]));
    bt.converged = drift < 1e-4;
    return bt;
}

// Barriers from every grid point; demands a small grid.
inline std::vector<BarrierTable> all_barriers(const SlowSystem& sys, const Vec& c, double alpha,
                                              WeakKamConfig cfg = {}, int iters = 200) {
    detail::DiscreteAction act = detail::build_action(sys, c, cfg);
    if (act.total > 512)
        throw degenerate_input_error("full pairwise barrier needs at most 512 grid points");
    std::vector<BarrierTable> out;
    for (long x = 0; x < act.total; ++x)
        out.push_back(peierls_barrier(sys, c, alpha, x, cfg, iters));
    return out;
}

inline std::vector<int> aubry_set(const std::vector<BarrierTable>& barriers, double tol) {
    std::vector<int> out;
    for (size_t x = 0; x < barriers.size(); ++x)
        if (barriers[x].values[size_t(barriers[x].base_index)] < tol) out.push_back(int(x));
    return out;
}

inline std::vector<int> mane_set(const std::vector<BarrierTable>& barriers,
                                 const std::vector<int>& aubry, double tol) {
    if (aubry.empty()) throw degenerate_input_error("Mane set needs a nonempty Aubry set");
    std::vector<int> out;
    for (size_t y = 0; y < barriers.size(); ++y) {
        double defect = kBarrierInf;
        for (int x : aubry)
            for (int z : aubry) {
                double v = barriers[size_t(x)].values[y] + barriers[y].values[size_t(z)] -
                           barriers[size_t(x)].values[size_t(z)];
                defect = std::min(defect, v);
            }
        if (defect < tol) out.push_back(int(y));
    }
    return out;
}

struct CalibratedCurve {
    std::vector<long> positions;      // grid indices, backward in time
    std::vector<Vec> velocities;      // chord velocities of each backward step
};

inline CalibratedCurve calibrated_curve(const SlowSystem& sys, const GridValueFunction& u,
                                        const Vec& c, long x0, int steps,
                                        WeakKamConfig cfg = {}) {
    detail::DiscreteAction act = detail::build_action(sys, c, cfg);
    Mat Sinv = spd_inverse(sys.S, "kinetic matrix S");
    CalibratedCurve curve;
    long x = x0;
    curve.positions.push_back(x);
    const int wlo = -act.W - 1, whi = act.W;
    for (int s = 0; s < steps; ++s) {
        auto gx = act.unflatten(x);
        double best = kBarrierInf;
        long besty = x;
        Vec bestv = Vec::Zero(act.d);
        for (long y = 0; y < act.total; ++y) {
            auto gy = act.unflatten(y);
            std::vector<int> wd(size_t(act.d), wlo);
            bool done = false;
            while (!done) {
                Vec disp(act.d);
                for (int i = 0; i < act.d; ++i)
                    disp(i) = double(gx[size_t(i)] - gy[size_t(i)]) / act.N + wd[size_t(i)];
                Vec v = disp / act.h;
                double val = u.values[size_t(y)] + 0.5 * act.hU[size_t(y)] +
                             0.5 * act.hU[size_t(x)] + act.h * 0.5 * v.dot(Sinv * v) -
                             c.dot(disp);
                if (val < best) {
                    best = val;
                    besty = y;
                    bestv = v;
                }
                done = true;
                for (int i = 0; i < act.d; ++i) {
                    if (++wd[size_t(i)] <= whi) {
                        done = false;
                        break;
                    }
                    wd[size_t(i)] = wlo;
                }
            }
        }
        curve.velocities.push_back(bestv);
        curve.positions.push_back(besty);
        x = besty;
    }
    return curve;
}

inline Vec rotation_number(const CalibratedCurve& curve) {
    if (curve.velocities.empty()) throw degenerate_input_error("empty trajectory");
    Vec rho = Vec::Zero(curve.velocities.front().size());
    for (const Vec& v : curve.velocities) rho += v;
    return rho / double(curve.velocities.size());
}

// Strong restriction of a slow system: kinetic block A with the strong
// potential only.
inline SlowSystem strong_restriction(const SlowSystem& sys) {
    SlowSystem st;
    st.d = sys.m;
    st.m = sys.m;
    st.S = sys.S.topLeftCorner(sys.m, sys.m);
    st.Ust = sys.Ust;
    st.p0 = sys.p0;
    st.basis.split_index = sys.m;
    st.basis.vectors.assign(sys.basis.vectors.begin(), sys.basis.vectors.begin() + sys.m);
    return st;
}

struct AlphaRelationReport {
    double alpha_slow = 0;
    double alpha_strong = 0;
    double quad = 0;          // 1/2 c_wk . Ctilde c_wk
    double defect = 0;        // |alpha_slow - alpha_strong(cbar) - quad|
    double budget = 0;        // sup |U_wk| + 2 tol
    bool pass = false;
};

inline AlphaRelationReport verify_alpha_relation(const SlowSystem& sys, const Vec& c,
                                                 WeakKamConfig cfg = {}) {
    BlockDecomposition dec = block_decomposition(sys);
    Vec cwk = c.tail(sys.d - sys.m);
    CbarResult cb = cbar(dec, c);
    GridValueFunction us = solve_weak_kam(sys, c, cfg);
    WeakKamConfig scfg = cfg;
    scfg.N = us.N; // same per-axis resolution for the strong comparison
    GridValueFunction ust = solve_weak_kam(strong_restriction(sys), cb.cbar, scfg);

    AlphaRelationReport rep;
    rep.alpha_slow = us.alpha_estimate;
    rep.alpha_strong = ust.alpha_estimate;
    rep.quad = 0.5 * cwk.dot(dec.Ctilde * cwk);
    rep.defect = std::abs(rep.alpha_slow - rep.alpha_strong - rep.quad);
    // sup of the total weak potential sampled on the solver grid
    TrigPolynomial total;
    total.torus_dim = sys.d;
    for (const auto& f : sys.Uwk)
        for (const auto& [l, a] : f.terms) total.add(l, a);
    total.prune();
    double uwk_sup = 0;
    if (!total.terms.empty()) {
        std::vector<double> phi(size_t(sys.d), 0.0);
        long cells = 1;
        for (int i = 0; i < sys.d; ++i) cells *= us.N;
        for (long idx = 0; idx < cells; ++idx) {
            long rem = idx;
            for (int i = 0; i < sys.d; ++i) {
                phi[size_t(i)] = double(rem % us.N) / us.N;
                rem /= us.N;
            }
            uwk_sup = std::max(uwk_sup, std::abs(total.eval(phi)));
        }
    }
    rep.budget = uwk_sup + 2 * cfg.tol;
    rep.pass = rep.defect <= rep.budget;
    return rep;
}

struct SemicontReport {
    std::vector<double> mu;
    std::vector<double> osc;           // weak-angle oscillation of u_i
    std::vector<double> profile_gap;   // anchored gap to the strong profile
    bool monotone = true;              // nonincreasing within 10% slack
};

// For each family member solves the slow weak KAM problem and measures how
// the solution flattens in the weak angles and approaches the strong profile.
inline SemicontReport semicontinuity_experiment(const std::vector<SlowSystem>& family,
                                                const std::vector<Vec>& cs,
                                                WeakKamConfig cfg = {}) {
    if (family.size() != cs.size() || family.empty())
        throw degenerate_input_error("family and cohomology lists must align");
    SemicontReport rep;
    for (size_t i = 0; i < family.size(); ++i) {
        const SlowSystem& sys = family[i];
        const int m = sys.m, w = sys.d - m;
        double mu = 1e300;
        for (int j = 0; j < w; ++j)
            mu = std::min(mu, double(sup_norm(sys.basis.vectors[size_t(m + j)])));
        rep.mu.push_back(mu);

        GridValueFunction u = solve_weak_kam(sys, cs[i], cfg);
        BlockDecomposition dec = block_decomposition(sys);
        CbarResult cb = cbar(dec, cs[i]);
        WeakKamConfig scfg = cfg;
        scfg.N = u.N;
        GridValueFunction ust = solve_weak_kam(strong_restriction(sys), cb.cbar, scfg);

        long strong_cells = 1;
        for (int j = 0; j < m; ++j) strong_cells *= u.N;
        long weak_cells = 1;
        for (int j = 0; j < w; ++j) weak_cells *= u.N;
        double osc = 0, gap = 0;
        for (long s = 0; s < strong_cells; ++s) {
            double lo = kBarrierInf, hi = -kBarrierInf;
            for (long t = 0; t < weak_cells; ++t) {
                double v = u.values[size_t(s + t * strong_cells)];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            osc = std::max(osc, hi - lo);
            gap = std::max(gap, std::abs(u.values[size_t(s)] - ust.values[size_t(s)]));
        }
        rep.osc.push_back(osc);
        rep.profile_gap.push_back(gap);
    }
    for (size_t i = 1; i < rep.osc.size(); ++i) {
        if (rep.osc[i] > 1.1 * rep.osc[i - 1] + 1e-12) rep.monotone = false;
        if (rep.profile_gap[i] > 1.1 * rep.profile_gap[i - 1] + 1e-12) rep.monotone = false;
    }
    return rep;
}

// Discrete Legendre transform of sampled alpha values.
inline std::vector<double> legendre_dual(const std::vector<Vec>& cs,
                                         const std::vector<double>& alphas,
                                         const std::vector<Vec>& rhos) {
    if (cs.size() != alphas.size() || cs.empty())
        throw degenerate_input_error("alpha samples must align with the c-grid");
    std::vector<double> beta;
    for (const Vec& rho : rhos) {
        double best = -kBarrierInf;
        for (size_t i = 0; i < cs.size(); ++i)
            best = std::max(best, cs[i].dot(rho) - alphas[i]);
        beta.push_back(best);
    }
    return beta;
}

inline void to_json(nlohmann::json& j, const GridValueFunction& u) {
    j = nlohmann::json{{"torus_dim", u.d},
                       {"resolution", u.N},
                       {"alpha", u.alpha_estimate},
                       {"iterations", u.iterations},
                       {"values", u.values}};
    std::vector<double> c(size_t(u.c.size()), 0.0);
    for (int i = 0; i < u.c.size(); ++i) c[size_t(i)] = u.c(i);
    j["c"] = c;
}

} // namespace rk
