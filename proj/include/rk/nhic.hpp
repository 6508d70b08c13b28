#pragma once

// Isolating-block certificates for time-1 maps. A block D^s x D^u x Omega
// with stretching and cone conditions forces a Lipschitz center-stable
// graph; we verify the conditions on samples, so a positive verdict is a
// sampled certificate, not a proof.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rk/dynamics.hpp"

namespace rk {

enum class Verdict { pass, fail, inconclusive };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        default: return "inconclusive";
    }
}

// coordinates ordered (x, y, z) = (stable, unstable, center)
struct IsolatingBlockSpec {
    int s = 1, u = 1;
    Vec center_lo, center_hi;   // center box, possibly empty
    double r = 0.5;             // radius of D^s and D^u
    double mu = 2.0;            // cone opening, > 1
    double nu = 1.5;            // unstable expansion, > 1
    int interior_samples = 256;
    int boundary_samples = 128;
    int pair_samples = 64;
    int cone_dirs = 16;
    double resolution = 1e-9;   // margins within this band are inconclusive

    int center_dim() const { return int(center_lo.size()); }
    int dim() const { return s + u + center_dim(); }

    void validate() const {
        if (s < 0 || u < 1 || r <= 0) throw degenerate_input_error("block needs r > 0, u >= 1");
        if (mu <= 1 || nu <= 1) throw degenerate_input_error("cone parameters need mu, nu > 1");
        if (center_lo.size() != center_hi.size() ||
            (center_lo.size() > 0 && (center_hi - center_lo).minCoeff() <= 0))
            throw degenerate_input_error("center box bounds are inconsistent");
    }

    IsolatingBlockSpec swapped() const {
        IsolatingBlockSpec t = *this;
        std::swap(t.s, t.u);
        return t;
    }
};

// map on block coordinates; df optional, central differences otherwise
struct BlockMap {
    std::function<Vec(const Vec&)> f;
    std::function<Vec(const Vec&)> finv;
    std::function<Mat(const Vec&)> df;
    std::function<Mat(const Vec&)> dfinv;
};

struct ConditionReport {
    Verdict verdict = Verdict::inconclusive;
    double margin = 0;      // worst sampled margin, positive passes
    Vec witness;            // sample attaining the margin
};

struct IsolatingBlockReport {
    ConditionReport c1, c2, c3, c4;      // forward map
    ConditionReport i1, i2, i3, i4;      // involuted inverse map
    Verdict overall = Verdict::inconclusive;

    std::vector<const ConditionReport*> all() const {
        return {&c1, &c2, &c3, &c4, &i1, &i2, &i3, &i4};
    }
};

namespace detail {

inline Verdict margin_verdict(double margin, double resolution) {
    if (margin > resolution) return Verdict::pass;
    if (margin < -resolution) return Verdict::fail;
    return Verdict::inconclusive;
}

inline void track_worst(ConditionReport& rep, double margin, const Vec& z) {
    if (rep.witness.size() == 0 || margin < rep.margin) {
        rep.margin = margin;
        rep.witness = z;
    }
}

// Halton point in [0,1)^k starting at a fixed prime offset per axis.
inline Vec halton_point(long idx, int k, int prime_offset = 0) {
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    Vec p(k);
    for (int i = 0; i < k; ++i)
        p(i) = radical_inverse(primes[(i + prime_offset) % 12], int(idx) + 1);
    return p;
}

// ball point of radius r from a cube sample, radial rescaling
inline Vec to_ball(const Vec& cube01, double r) {
    Vec v = 2.0 * cube01 - Vec::Ones(cube01.size());
    double n = v.norm();
    if (n < 1e-14) return Vec::Zero(cube01.size());
    double shell = std::pow(v.cwiseAbs().maxCoeff(), 1.0); // keep boundary reachable
    return v * (r * shell / n);
}

inline Vec block_sample(const IsolatingBlockSpec& spec, long idx, bool boundary_weighted) {
    const int c = spec.center_dim();
    Vec h = halton_point(idx, spec.dim() + 1);
    Vec Z(spec.dim());
    Z.head(spec.s) = to_ball(h.head(spec.s), spec.r);
    Z.segment(spec.s, spec.u) = to_ball(h.segment(spec.s, spec.u), spec.r);
    for (int i = 0; i < c; ++i)
        Z(spec.s + spec.u + i) =
            spec.center_lo(i) + h(spec.s + spec.u + i) * (spec.center_hi(i) - spec.center_lo(i));
    if (boundary_weighted) {
        // push one coordinate group to its boundary, cycling through groups
        long which = idx % 3;
        if (which == 0 && spec.s > 0) {
            Vec x = Z.head(spec.s);
            double n = x.norm();
            Z.head(spec.s) = n > 1e-14 ? Vec(x * (spec.r / n)) : Vec(spec.r * Vec::Unit(spec.s, 0));
        } else if (which == 1) {
            Vec y = Z.segment(spec.s, spec.u);
            double n = y.norm();
            Z.segment(spec.s, spec.u) =
                n > 1e-14 ? Vec(y * (spec.r / n)) : Vec(spec.r * Vec::Unit(spec.u, 0));
        } else if (c > 0) {
            int i = int(idx / 3) % c;
            bool hi = (idx / (3 * c)) % 2;
            Z(spec.s + spec.u + i) = hi ? spec.center_hi(i) : spec.center_lo(i);
        }
        return Z;
    }
    return Z;
}

// point on D^sc x boundary(D^u)
inline Vec boundary_sample(const IsolatingBlockSpec& spec, long idx) {
    Vec Z = block_sample(spec, idx, false);
    Vec y = Z.segment(spec.s, spec.u);
    double n = y.norm();
    Z.segment(spec.s, spec.u) =
        n > 1e-14 ? Vec(y * (spec.r / n)) : Vec(spec.r * Vec::Unit(spec.u, 0));
    return Z;
}

inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& Z,
                       double step = 1e-6) {
    const int n = int(Z.size());
    Mat J(n, n);
    for (int j = 0; j < n; ++j) {
        Vec e = Vec::Unit(n, j);
        J.col(j) = (f(Z + step * e) - f(Z - step * e)) / (2 * step);
    }
    return J;
}

// margin of containment in D^sc: positive means strictly inside
inline double sc_margin(const IsolatingBlockSpec& spec, const Vec& Z) {
    double m = spec.r - Z.head(spec.s).norm();
    if (spec.s == 0) m = spec.r; // no stable part to confine
    for (int i = 0; i < spec.center_dim(); ++i) {
        m = std::min(m, Z(spec.s + spec.u + i) - spec.center_lo(i));
        m = std::min(m, spec.center_hi(i) - Z(spec.s + spec.u + i));
    }
    return m;
}

// direction in the unstable cone of opening mu, from two Halton rows
inline Vec cone_direction(const IsolatingBlockSpec& spec, long idx, int offset) {
    const int n = spec.dim();
    Vec h = halton_point(idx, n + 1, offset);
    Vec v = Vec::Zero(n);
    Vec y = 2.0 * h.segment(spec.s, spec.u) - Vec::Ones(spec.u);
    if (y.norm() < 1e-12) y = Vec::Unit(spec.u, 0);
    y /= y.norm();
    v.segment(spec.s, spec.u) = y;
    // tangential part bounded by sqrt(mu) |v_u|, scaled inside the cone
    int t = spec.s + spec.center_dim();
    if (t > 0) {
        Vec w(t);
        for (int i = 0; i < spec.s; ++i) w(i) = 2 * h(i) - 1;
        for (int i = 0; i < spec.center_dim(); ++i) w(spec.s + i) = 2 * h(spec.s + spec.u + i) - 1;
        if (w.norm() > 1e-12) {
            double scale = 0.95 * std::sqrt(spec.mu) * h(n) / w.norm();
            w *= scale;
            v.head(spec.s) = w.head(spec.s);
            v.tail(spec.center_dim()) = w.tail(spec.center_dim());
        }
    }
    return v / v.norm();
}

inline Vec clamp_to_block(const IsolatingBlockSpec& spec, Vec Z) {
    for (auto [off, len] : {std::pair{0, spec.s}, std::pair{spec.s, spec.u}}) {
        double n = Z.segment(off, len).norm();
        if (len > 0 && n > spec.r) Z.segment(off, len) *= spec.r / n;
    }
    for (int i = 0; i < spec.center_dim(); ++i)
        Z(spec.s + spec.u + i) =
            std::clamp(Z(spec.s + spec.u + i), spec.center_lo(i), spec.center_hi(i));
    return Z;
}

inline bool in_unstable_cone(const IsolatingBlockSpec& spec, const Vec& d) {
    double y2 = d.segment(spec.s, spec.u).squaredNorm();
    double t2 = d.head(spec.s).squaredNorm() + d.tail(spec.center_dim()).squaredNorm();
    return spec.mu * y2 >= t2;
}

// forward conditions C1..C4 for one map
inline void check_forward(const std::function<Vec(const Vec&)>& f,
                          const std::function<Mat(const Vec&)>& df,
                          const IsolatingBlockSpec& spec, ConditionReport& c1,
                          ConditionReport& c2, ConditionReport& c3, ConditionReport& c4) {
    auto jac = df ? df : [&f](const Vec& Z) { return fd_jacobian(f, Z); };

    // C1: image of the block stays in the closed D^sc; a fixed boundary
    // (margin exactly zero) is containment
    for (long i = 0; i < spec.interior_samples; ++i) {
        Vec Z = block_sample(spec, i, i % 2 == 1);
        track_worst(c1, sc_margin(spec, f(Z)), Z);
    }
    c1.verdict = c1.margin >= 0 ? Verdict::pass : margin_verdict(c1.margin, spec.resolution);

    // C2: the unstable boundary is mapped outside D^u
    for (long i = 0; i < spec.boundary_samples; ++i) {
        Vec Z = boundary_sample(spec, i);
        track_worst(c2, f(Z).segment(spec.s, spec.u).norm() - spec.r, Z);
    }
    c2.verdict = margin_verdict(c2.margin, spec.resolution);
    if (c2.verdict == Verdict::pass) {
        // degree-one stretching of pi_u f on the boundary mesh
        if (spec.u == 1) {
            bool ok = true;
            for (long i = 0; i < spec.boundary_samples && ok; ++i) {
                Vec Z = block_sample(spec, i, false);
                Vec zp = Z, zm = Z;
                zp(spec.s) = spec.r;
                zm(spec.s) = -spec.r;
                double a = f(zp)(spec.s), b = f(zm)(spec.s);
                if (a * b >= 0) ok = false;
            }
            if (!ok) c2.verdict = Verdict::fail;
        } else if (spec.u == 2) {
            const int mesh = 64;
            for (long a = 0; a < 4; ++a) {
                Vec Z = block_sample(spec, a, false);
                double winding = 0, prev = 0;
                for (int k = 0; k <= mesh; ++k) {
                    double t = 2 * M_PI * k / mesh;
                    Z(spec.s) = spec.r * std::cos(t);
                    Z(spec.s + 1) = spec.r * std::sin(t);
                    Vec w = f(Z).segment(spec.s, 2);
                    double ang = std::atan2(w(1), w(0));
                    if (k > 0) {
                        double dphi = ang - prev;
                        while (dphi > M_PI) dphi -= 2 * M_PI;
                        while (dphi < -M_PI) dphi += 2 * M_PI;
                        winding += dphi;
                    }
                    prev = ang;
                }
                if (std::abs(std::abs(winding) - 2 * M_PI) > 0.5) c2.verdict = Verdict::fail;
            }
        } else {
            c2.verdict = Verdict::inconclusive; // degree test not sampled beyond u = 2
        }
    }

    // C3/C4: pairwise cone invariance and expansion at graded separations,
    // plus the differential cone test at every base point
    const double seps[3] = {spec.r / 10, spec.r / 3, spec.r};
    for (long i = 0; i < spec.pair_samples; ++i) {
        Vec Z1 = block_sample(spec, i, false);
        Vec F1 = f(Z1);
        Mat J = jac(Z1);
        for (int k = 0; k < spec.cone_dirs; ++k) {
            Vec v = cone_direction(spec, i * spec.cone_dirs + k, 1 + k % 3);
            // differential certificate: DF preserves the cone and expands it
            Vec Jv = J * v;
            double y2 = Jv.segment(spec.s, spec.u).squaredNorm();
            double t2 = Jv.head(spec.s).squaredNorm() + Jv.tail(spec.center_dim()).squaredNorm();
            track_worst(c3, spec.mu * y2 - t2, Z1);
            track_worst(c4, Jv.segment(spec.s, spec.u).norm() -
                                spec.nu * v.segment(spec.s, spec.u).norm(),
                        Z1);
            for (double sep : seps) {
                Vec Z2 = clamp_to_block(spec, Z1 + sep * v);
                Vec d = Z2 - Z1;
                if (d.norm() < 1e-12 || !in_unstable_cone(spec, d)) continue;
                Vec F2 = f(Z2);
                Vec dp = F2 - F1;
                double py2 = dp.segment(spec.s, spec.u).squaredNorm();
                double pt2 =
                    dp.head(spec.s).squaredNorm() + dp.tail(spec.center_dim()).squaredNorm();
                track_worst(c3, spec.mu * py2 - pt2, Z1);
                track_worst(c4, dp.segment(spec.s, spec.u).norm() -
                                    spec.nu * d.segment(spec.s, spec.u).norm(),
                            Z1);
            }
        }
    }
    c3.verdict = margin_verdict(c3.margin, spec.resolution);
    c4.verdict = margin_verdict(c4.margin, spec.resolution);
}

} // namespace detail

// swap stable and unstable coordinates: the inverse map is tested through
// this involution so that the same forward conditions apply
inline Vec involution(const IsolatingBlockSpec& spec, const Vec& Z) {
    Vec W(Z.size());
    W.head(spec.u) = Z.segment(spec.s, spec.u);
    W.segment(spec.u, spec.s) = Z.head(spec.s);
    W.tail(spec.center_dim()) = Z.tail(spec.center_dim());
    return W;
}

inline IsolatingBlockReport check_block_conditions(const BlockMap& F,
                                                   const IsolatingBlockSpec& spec) {
    spec.validate();
    if (!F.f) throw degenerate_input_error("block map is empty");
    IsolatingBlockReport rep;
    detail::check_forward(F.f, F.df, spec, rep.c1, rep.c2, rep.c3, rep.c4);

    if (F.finv) {
        IsolatingBlockSpec tspec = spec.swapped();
        auto g = [&](const Vec& Z) { return involution(spec, F.finv(involution(tspec, Z))); };
        std::function<Mat(const Vec&)> dg;
        if (F.dfinv)
            dg = [&, tspec](const Vec& Z) {
                Mat J = F.dfinv(involution(tspec, Z));
                Mat P = Mat::Zero(spec.dim(), spec.dim());
                for (int i = 0; i < spec.u; ++i) P(i + spec.s, i) = 1;
                for (int i = 0; i < spec.s; ++i) P(i, i + spec.u) = 1;
                for (int i = 0; i < spec.center_dim(); ++i)
                    P(spec.s + spec.u + i, spec.s + spec.u + i) = 1;
                return Mat(P.transpose() * J * P);
            };
        detail::check_forward(g, dg, tspec, rep.i1, rep.i2, rep.i3, rep.i4);
    }

    rep.overall = Verdict::pass;
    for (const ConditionReport* c : rep.all()) {
        if (c->verdict == Verdict::fail) {
            rep.overall = Verdict::fail;
            break;
        }
        if (c->verdict == Verdict::inconclusive) rep.overall = Verdict::inconclusive;
    }
    return rep;
}

// Blend the map toward its fixed-point linearization near the center
// boundary with a cubic smoothstep in |z|_inf, so the modified map keeps
// the truncated center box invariant. The linear model freezes the (x, y)
// Jacobian blocks at (0, 0, z) and is the identity on the center.
inline BlockMap mollified_map(const BlockMap& F, const IsolatingBlockSpec& spec, double inner,
                              double outer) {
    if (!(0 < inner && inner < outer)) throw degenerate_input_error("need 0 < inner < outer");
    auto rho = [inner, outer](const Vec& Z, int c) {
        double m = c > 0 ? Z.tail(c).cwiseAbs().maxCoeff() : 0.0;
        double t = std::clamp((m - inner) / (outer - inner), 0.0, 1.0);
        return t * t * (3 - 2 * t);
    };
    const int s = spec.s, u = spec.u, c = spec.center_dim();
    auto blend = [rho, s, u, c](const std::function<Vec(const Vec&)>& f,
                                const std::function<Mat(const Vec&)>& df, const Vec& Z) {
        double p = rho(Z, c);
        Vec core = Z;
        core.head(s + u).setZero();
        Mat J = df ? df(core) : detail::fd_jacobian(f, core);
        Vec L(Z.size());
        L.head(s) = J.topLeftCorner(s, s) * Z.head(s);
        L.segment(s, u) = J.block(s, s, u, u) * Z.segment(s, u);
        L.tail(c) = Z.tail(c);
        return Vec((1 - p) * f(Z) + p * L);
    };
    BlockMap out;
    out.f = [blend, F](const Vec& Z) { return blend(F.f, F.df, Z); };
    if (F.finv) out.finv = [blend, F](const Vec& Z) { return blend(F.finv, F.dfinv, Z); };
    return out; // Jacobians of the blend fall back to finite differences
}

struct CylinderWitness {
    std::vector<Vec> centers;        // z grid
    std::vector<Vec> xy;             // witness graph values (x, y)
    double invariance_defect = 0;    // sup distance of mapped graph points
    double strong_distance = 0;      // sup |(x, y)| against the flat graph
};

struct PersistenceRecord {
    double mu = 0;                   // weak frequency magnitude of the member
    IsolatingBlockReport report;
    CylinderWitness witness;
    bool aborted = false;
    std::string note;
};

namespace detail {

// side on which a forward orbit escapes D^u (s = u = 1); 0 if it stays
inline int escape_side(const std::function<Vec(const Vec&)>& f, const IsolatingBlockSpec& spec,
                       Vec Z, int max_iters) {
    for (int k = 0; k < max_iters; ++k) {
        Z = f(Z);
        if (std::abs(Z(spec.s)) > spec.r) return Z(spec.s) > 0 ? 1 : -1;
    }
    return 0;
}

// bisect the coordinate at index `slot` so that the orbit of `probe`
// neither escapes left nor right
inline double bisect_staying(const std::function<Vec(const Vec&)>& f,
                             const IsolatingBlockSpec& spec, Vec Z, int slot, int escape_slot,
                             int max_iters) {
    auto side = [&](double v) {
        Vec W = Z;
        W(slot) = v;
        for (int k = 0; k < max_iters; ++k) {
            W = f(W);
            if (std::abs(W(escape_slot)) > spec.r) return W(escape_slot) > 0 ? 1 : -1;
        }
        return 0;
    };
    double lo = -spec.r, hi = spec.r;
    int slo = side(lo), shi = side(hi);
    if (slo == 0) return lo;
    if (shi == 0) return hi;
    if (slo == shi) return 0.5 * (lo + hi); // no bracket: caller sees a large defect
    for (int it = 0; it < 32; ++it) {
        double mid = 0.5 * (lo + hi);
        int sm = side(mid);
        if (sm == 0) return mid;
        (sm == slo ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

// graph witness over a center grid by nested bisection: the forward orbit
// pins the unstable coordinate, the backward orbit pins the stable one
inline CylinderWitness cylinder_witness(const BlockMap& F, const IsolatingBlockSpec& spec,
                                        const std::vector<Vec>& centers, int max_iters = 8,
                                        int rounds = 3) {
    if (spec.s != 1 || spec.u != 1)
        throw degenerate_input_error("graph witness implemented for s = u = 1");
    if (!F.finv) throw degenerate_input_error("graph witness needs the inverse map");
    IsolatingBlockSpec tspec = spec.swapped();
    auto g = [&](const Vec& Z) { return involution(spec, F.finv(involution(tspec, Z))); };

    auto locate = [&](const Vec& z) {
        Vec Z = Vec::Zero(spec.dim());
        Z.tail(spec.center_dim()) = z;
        for (int round = 0; round < rounds; ++round) {
            Z(1) = detail::bisect_staying(F.f, spec, Z, 1, 1, max_iters);
            Vec W = involution(spec, Z);
            W(1) = detail::bisect_staying(g, tspec, W, 1, 1, max_iters);
            Z = involution(tspec, W);
        }
        return Z;
    };

    CylinderWitness wit;
    std::vector<Vec> located;
    for (const Vec& z : centers) {
        Vec Z = locate(z);
        wit.centers.push_back(z);
        wit.xy.push_back(Z.head(2));
        wit.strong_distance = std::max(wit.strong_distance, Z.head(2).norm());
        located.push_back(Z);
    }
    for (const Vec& Z : located) {
        Vec P = F.f(Z);
        Vec Q = locate(P.tail(spec.center_dim()));
        wit.invariance_defect =
            std::max(wit.invariance_defect, (P.head(2) - Q.head(2)).norm());
    }
    return wit;
}

// Time-1 map of the rescaled slow field in hyperbolic block coordinates
// around the strong saddle: x, y are the stable/unstable directions of the
// frozen pendulum linearization, z the rescaled weak phase-action pair.
inline BlockMap slow_block_map(const SlowSystem& sys, double q, double lambda, double dt = 2e-3) {
    if (sys.m != 1) throw degenerate_input_error("block chart assumes one strong angle");
    auto field = std::make_shared<HalfLagrangianField>(make_field(sys, q));
    const int w = sys.d - sys.m;
    auto to_state = [w, lambda](const Vec& Z) {
        Vec x(2 + 2 * w);
        x(0) = Z(0) + Z(1);                 // phi_st
        x(1) = lambda * (Z(1) - Z(0));      // v_st
        x.tail(2 * w) = Z.tail(2 * w);
        return x;
    };
    auto to_block = [w, lambda](const Vec& x) {
        Vec Z(2 + 2 * w);
        Z(0) = 0.5 * (x(0) - x(1) / lambda);
        Z(1) = 0.5 * (x(0) + x(1) / lambda);
        Z.tail(2 * w) = x.tail(2 * w);
        return Z;
    };
    BlockMap bm;
    bm.f = [field, to_state, to_block, dt](const Vec& Z) {
        auto X = [&](const Vec& x) { return eval_Xs_rescaled(*field, x); };
        return to_block(integrate_flow(X, to_state(Z), 1.0, dt));
    };
    bm.finv = [field, to_state, to_block, dt](const Vec& Z) {
        auto X = [&](const Vec& x) { return Vec(-eval_Xs_rescaled(*field, x)); };
        return to_block(integrate_flow(X, to_state(Z), 1.0, dt));
    };
    return bm;
}

// For each family member: build the rescaled time-1 map, mollify the
// center boundary, run the block check, and extract a graph witness. The
// strong-part distance is measured against the unperturbed product
// cylinder x = y = 0 and compared with delta.
inline std::vector<PersistenceRecord> persistence_demo(const std::vector<SlowSystem>& family,
                                                       double q, IsolatingBlockSpec spec,
                                                       double delta, double dt = 2e-3) {
    spec.validate();
    std::vector<PersistenceRecord> out;
    for (const SlowSystem& sys : family) {
        PersistenceRecord rec;
        const int w = sys.d - sys.m;
        double mu = 1e300;
        for (int j = 0; j < w; ++j)
            mu = std::min(mu, double(sup_norm(sys.basis.vectors[size_t(sys.m + j)])));
        rec.mu = mu;

        // saddle rate of the frozen strong pendulum
        std::vector<double> origin(size_t(sys.m), 0.0);
        double lam2 = sys.S(0, 0) * sys.Ust.hess(origin)[0][0];
        if (lam2 <= 0) {
            rec.aborted = true;
            rec.note = "strong fixed point is not hyperbolic";
            out.push_back(rec);
            continue;
        }
        double lambda = std::sqrt(lam2);

        BlockMap raw = slow_block_map(sys, q, lambda, dt);
        double edge = spec.center_dim() > 0 ? spec.center_hi.cwiseAbs().maxCoeff() : 1.0;
        BlockMap F = mollified_map(raw, spec, 0.5 * edge, 0.9 * edge);
        rec.report = check_block_conditions(F, spec);
        if (rec.report.overall == Verdict::fail ||
            rec.report.overall == Verdict::inconclusive) {
            rec.aborted = true;
            rec.note = std::string("block check ") + verdict_name(rec.report.overall);
            out.push_back(rec);
            continue;
        }

        // witness grid inside the untouched part of the center box
        std::vector<Vec> centers;
        if (spec.center_dim() == 2) {
            for (double a : {-0.4 * edge, 0.0, 0.4 * edge})
                for (double b : {-0.4 * edge, 0.0, 0.4 * edge}) {
                    Vec z(2);
                    z << a, b;
                    centers.push_back(z);
                }
        } else {
            centers.push_back(Vec::Zero(spec.center_dim()));
        }
        rec.witness = cylinder_witness(F, spec, centers);
        if (rec.witness.strong_distance >= delta)
            rec.note = "witness distance exceeds delta";
        out.push_back(rec);
    }
    return out;
}

inline void to_json(nlohmann::json& j, const ConditionReport& c) {
    j = {{"verdict", verdict_name(c.verdict)}, {"margin", c.margin}};
    std::vector<double> wp(c.witness.data(), c.witness.data() + c.witness.size());
    j["witness"] = wp;
}

inline void to_json(nlohmann::json& j, const IsolatingBlockReport& r) {
    j = {{"C1", r.c1},      {"C2", r.c2},      {"C3", r.c3},      {"C4", r.c4},
         {"inv_C1", r.i1},  {"inv_C2", r.i2},  {"inv_C3", r.i3},  {"inv_C4", r.i4},
         {"overall", verdict_name(r.overall)}, {"certificate", "sampled certificate"}};
}

} // namespace rk
