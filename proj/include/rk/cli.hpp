#pragma once

// Experiment orchestration: JSON config ingestion with strict validation,
// deterministic family generation, task dispatch, and report emission.
// Reports carry the config hash; wall-clock timing goes to a separate file
// so reports stay byte-identical across reruns and thread counts.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rk/nhic.hpp"
#include "rk/weakkam.hpp"

namespace rk {

inline constexpr int kConfigSchema = 1;
inline constexpr const char* kToolVersion = "rk 0.1.0";

// FNV-1a 64 over the canonical (sorted-key, no-whitespace) JSON dump
inline std::uint64_t config_hash(const nlohmann::json& j) {
    std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::vector<std::string> allowed,
                                const std::string& where) {
    if (!j.is_object()) throw config_error(where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw config_error("unknown key '" + it.key() + "' in " + where);
}

inline Mat mat_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw config_error(where + " must be a nonempty matrix");
    int rows = int(j.size()), cols = int(j[0].size());
    Mat M(rows, cols);
    for (int r = 0; r < rows; ++r) {
        if (int(j[size_t(r)].size()) != cols) throw config_error(where + " rows differ in length");
        for (int c = 0; c < cols; ++c) M(r, c) = j[size_t(r)][size_t(c)].get<double>();
    }
    return M;
}

} // namespace detail

struct FamilyRule {
    std::vector<IVec> strong;       // strong generators
    std::vector<i64> mu_schedule;   // growing weak frequency magnitudes
    double q = 3;                   // decay exponent used by the generator
    double kappa = 2;               // dominance constant
    double amplitude = 0.4;         // weak mode amplitude before mu^{-q} scaling
    std::uint64_t seed = 1;
};

struct NumericParams {
    double q = 3;
    double kappa = 2;
    double dt = 1e-3;
    int grid = 0;       // weak KAM N, 0 = solver default
    double h = 0.2;
    double tol = 1e-8;
    int samples = 4096; // deviation sampling
    std::vector<Vec> cs;
};

struct ExperimentConfig {
    std::string task;
    ConvexModel model;
    FourierHamiltonian perturbation;        // explicit or generated
    bool has_perturbation = false;
    std::vector<OrderedBasis> bases;        // explicit lattices or generated family
    NumericParams params;
    nlohmann::json raw;                     // canonical echo for hashing
};

// Deterministic family: strong block fixed, one weak vector (0,...,mu,1)
// per member, a strong pendulum mode plus one weak mode scaled mu^{-q}.
// Every member must pass the dominance certificate before use.
struct FamilyMember {
    OrderedBasis basis;
    FourierHamiltonian hamiltonian;
    DominanceCertificate certificate;
};

inline std::vector<FamilyMember> generate_family(const FamilyRule& rule) {
    if (rule.strong.empty()) throw config_error("family rule needs a strong basis");
    const int ambient = int(rule.strong.front().size());
    const int m = int(rule.strong.size());
    std::vector<FamilyMember> out;
    std::mt19937_64 rng(rule.seed);
    std::uniform_real_distribution<double> phase(-0.3, 0.3);
    double strong_amp = -0.15 + 0.05 * phase(rng); // fixed by the seed, shared by members
    for (i64 mu : rule.mu_schedule) {
        FamilyMember mem;
        mem.basis.split_index = m;
        mem.basis.vectors = rule.strong;
        IVec kwk = IVec::Zero(ambient);
        kwk(ambient - 2) = mu;
        kwk(ambient - 1) = 1;
        mem.basis.vectors.push_back(kwk);

        FourierHamiltonian& H = mem.hamiltonian;
        H.ambient_dim = ambient;
        H.declared_regularity = rule.q + ambient + 4;
        auto put = [&H](const IVec& k, double re) {
            ModeKey key(size_t(k.size()), 0);
            for (int i = 0; i < k.size(); ++i) key[size_t(i)] = k(i);
            H.coefficients[key] = cplx(re, 0);
            H.coefficients[negated(key)] = cplx(re, 0);
        };
        put(rule.strong.front(), strong_amp);
        put(kwk, -0.5 * rule.amplitude * std::pow(double(mu), -rule.q));

        PotentialSplit split = weak_potential_split(H, mem.basis);
        mem.certificate = dominance_check(mem.basis, split.Uwk, rule.kappa, rule.q);
        if (!mem.certificate.verdict) {
            std::ostringstream os;
            os << "family member mu=" << mu << " fails the dominance certificate (margin "
               << mem.certificate.margin << ")";
            throw config_error(os.str());
        }
        out.push_back(std::move(mem));
    }
    return out;
}

inline FamilyRule family_rule_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j, {"strong", "mu_schedule", "q", "kappa", "amplitude", "seed"}, "lattices.family");
    FamilyRule rule;
    for (const auto& row : j.at("strong")) {
        IVec k(int(row.size()));
        for (int i = 0; i < k.size(); ++i) k(i) = row[size_t(i)].get<i64>();
        rule.strong.push_back(k);
    }
    for (const auto& v : j.at("mu_schedule")) rule.mu_schedule.push_back(v.get<i64>());
    if (j.contains("q")) rule.q = j["q"].get<double>();
    if (j.contains("kappa")) rule.kappa = j["kappa"].get<double>();
    if (j.contains("amplitude")) rule.amplitude = j["amplitude"].get<double>();
    if (j.contains("seed")) rule.seed = j["seed"].get<std::uint64_t>();
    return rule;
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j, {"schema", "task", "model", "perturbation", "lattices", "params"}, "config");
    if (!j.contains("schema") || j["schema"].get<int>() != kConfigSchema)
        throw config_error("config schema version must be " + std::to_string(kConfigSchema));
    ExperimentConfig cfg;
    cfg.raw = j;
    cfg.task = j.at("task").get<std::string>();
    static const std::vector<std::string> tasks = {"basis",    "slow", "rescale-scan", "weakkam",
                                                   "semicont", "nhic", "report"};
    if (std::find(tasks.begin(), tasks.end(), cfg.task) == tasks.end())
        throw config_error("unknown task '" + cfg.task + "'");

    if (j.contains("model")) {
        detail::reject_unknown_keys(j["model"], {"dim", "Q0", "D"}, "model");
        cfg.model.dim = j["model"].at("dim").get<int>();
        cfg.model.Q0 = detail::mat_from_json(j["model"].at("Q0"), "model.Q0");
        if (j["model"].contains("D")) cfg.model.D = j["model"]["D"].get<double>();
        if (cfg.model.Q0.rows() != cfg.model.dim || cfg.model.Q0.cols() != cfg.model.dim)
            throw config_error("model.Q0 shape disagrees with model.dim");
        cfg.model.validate();
    }

    if (j.contains("perturbation")) {
        const auto& p = j["perturbation"];
        detail::reject_unknown_keys(
            p, {"file", "coefficients", "ambient_dim", "declared_regularity"}, "perturbation");
        if (p.contains("file")) {
            std::ifstream in(p["file"].get<std::string>());
            if (!in) throw config_error("perturbation file not found");
            nlohmann::json pj;
            in >> pj;
            cfg.perturbation = hamiltonian_from_json(pj);
        } else {
            cfg.perturbation = hamiltonian_from_json(p);
        }
        cfg.has_perturbation = true;
    }

    if (j.contains("lattices")) {
        const auto& L = j["lattices"];
        detail::reject_unknown_keys(L, {"generators", "split", "family"}, "lattices");
        if (L.contains("family")) {
            for (auto& mem : generate_family(family_rule_from_json(L["family"])))
                cfg.bases.push_back(mem.basis);
        } else {
            OrderedBasis B;
            B.split_index = L.at("split").get<int>();
            for (const auto& row : L.at("generators")) {
                IVec k(int(row.size()));
                for (int i = 0; i < k.size(); ++i) k(i) = row[size_t(i)].get<i64>();
                B.vectors.push_back(k);
            }
            cfg.bases.push_back(B);
        }
    }

    if (j.contains("params")) {
        const auto& p = j["params"];
        detail::reject_unknown_keys(
            p, {"q", "kappa", "dt", "grid", "h", "tol", "samples", "c"}, "params");
        auto& np = cfg.params;
        if (p.contains("q")) np.q = p["q"].get<double>();
        if (p.contains("kappa")) np.kappa = p["kappa"].get<double>();
        if (p.contains("dt")) np.dt = p["dt"].get<double>();
        if (p.contains("grid")) np.grid = p["grid"].get<int>();
        if (p.contains("h")) np.h = p["h"].get<double>();
        if (p.contains("tol")) np.tol = p["tol"].get<double>();
        if (p.contains("samples")) np.samples = p["samples"].get<int>();
        if (p.contains("c"))
            for (const auto& row : p["c"]) {
                Vec c(int(row.size()));
                for (int i = 0; i < c.size(); ++i) c(i) = row[size_t(i)].get<double>();
                np.cs.push_back(c);
            }
        if (np.dt <= 0 || np.dt > 0.1) throw config_error("params.dt out of range (0, 0.1]");
        if (np.h <= 0 || np.h > 1) throw config_error("params.h out of range (0, 1]");
        if (np.tol <= 0 || np.tol > 1e-2) throw config_error("params.tol out of range (0, 1e-2]");
        if (np.q < 2) throw config_error("params.q must be at least 2");
        if (np.grid < 0 || np.grid > 512) throw config_error("params.grid out of range [0, 512]");
        if (np.samples < 16 || np.samples > 1 << 20)
            throw config_error("params.samples out of range [16, 2^20]");
    }
    return cfg;
}

struct RunReport {
    std::string task;
    std::string hash;
    nlohmann::json results;
    bool pass = false;
    double wall_seconds = 0; // emitted separately, excluded from report.json
};

namespace detail {

inline SlowSystem member_system(const ExperimentConfig& cfg, const OrderedBasis& B) {
    if (!cfg.has_perturbation) throw config_error("task needs a perturbation");
    if (cfg.model.dim == 0) throw config_error("task needs a model");
    return build_slow_system(cfg.model, Vec::Zero(cfg.model.dim), B, cfg.perturbation);
}

inline nlohmann::json run_basis(const ExperimentConfig& cfg) {
    if (cfg.bases.empty()) throw config_error("task basis needs lattices");
    nlohmann::json out = nlohmann::json::array();
    for (const OrderedBasis& B : cfg.bases) {
        IMat G(B.vectors.front().size(), int(B.vectors.size()));
        for (int c = 0; c < G.cols(); ++c) G.col(c) = B.vectors[size_t(c)];
        ResonanceLattice L(G);
        OrderedBasis strong;
        strong.split_index = B.split_index;
        strong.vectors.assign(B.vectors.begin(), B.vectors.begin() + B.split_index);
        OrderedBasis adapted = adapted_basis(strong, L);
        nlohmann::json jb;
        to_json(jb, adapted);
        nlohmann::json norms = nlohmann::json::array();
        for (const IVec& k : adapted.vectors) norms.push_back(sup_norm(k));
        out.push_back({{"basis", jb}, {"norms", norms}});
    }
    return {{"adapted", out}, {"pass", true}};
}

inline nlohmann::json run_slow(const ExperimentConfig& cfg) {
    if (cfg.bases.empty()) throw config_error("task slow needs lattices");
    nlohmann::json out = nlohmann::json::array();
    bool pass = true;
    for (const OrderedBasis& B : cfg.bases) {
        SlowSystem sys = member_system(cfg, B);
        BlockDecomposition dec = block_decomposition(sys);
        nlohmann::json js;
        to_json(js, sys);
        Mat D = dec.E.transpose() * sys.S * dec.E;
        D.topLeftCorner(sys.m, sys.m) -= dec.A;
        for (int i = 0; i < sys.d - sys.m; ++i) D(sys.m + i, sys.m + i) -= dec.ztilde[size_t(i)];
        double resid = D.cwiseAbs().maxCoeff();
        bool zb = ztilde_bound_check(sys, dec).holds;
        pass = pass && resid <= 1e-10 && zb;
        out.push_back({{"system", js},
                       {"diag_residual", resid},
                       {"ztilde_ok", zb},
                       {"ztilde", dec.ztilde}});
    }
    return {{"members", out}, {"pass", pass}};
}

inline nlohmann::json run_rescale_scan(const ExperimentConfig& cfg, std::vector<std::string>& csv) {
    if (cfg.bases.size() < 2) throw config_error("rescale-scan needs a family of lattices");
    nlohmann::json rows = nlohmann::json::array();
    std::ostringstream table;
    table << "mu,c0_strong,c1\n";
    std::vector<double> lmu, lc0, lc1;
    for (const OrderedBasis& B : cfg.bases) {
        SlowSystem sys = member_system(cfg, B);
        HalfLagrangianField f = make_field(sys, cfg.params.q);
        DeviationReport dev = rescaled_deviation(f, cfg.params.samples);
        rows.push_back({{"mu", dev.mu}, {"c0_strong", dev.c0_strong}, {"c1", dev.c1}});
        table << dev.mu << "," << dev.c0_strong << "," << dev.c1 << "\n";
        lmu.push_back(std::log(dev.mu));
        if (dev.c0_strong > 0) lc0.push_back(std::log(dev.c0_strong));
        lc1.push_back(std::log(dev.c1));
    }
    auto slope = [](const std::vector<double>& xs, const std::vector<double>& ys) {
        double n = double(ys.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < ys.size(); ++i) {
            sx += xs[i];
            sy += ys[i];
            sxx += xs[i] * xs[i];
            sxy += xs[i] * ys[i];
        }
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    double sc1 = slope(lmu, lc1);
    double sc0 = lc0.size() == lmu.size() ? slope(lmu, lc0) : 0;
    bool pass = sc1 <= -(cfg.params.q - 2) / 3 + 0.3 &&
                (lc0.size() != lmu.size() || sc0 <= -(cfg.params.q - 1) + 0.3);
    csv.push_back(table.str());
    return {{"rows", rows}, {"slope_c0", sc0}, {"slope_c1", sc1}, {"pass", pass}};
}

inline nlohmann::json run_weakkam(const ExperimentConfig& cfg) {
    if (cfg.bases.empty()) throw config_error("task weakkam needs lattices");
    if (cfg.params.cs.empty()) throw config_error("task weakkam needs params.c");
    WeakKamConfig wc;
    wc.N = cfg.params.grid;
    wc.h = cfg.params.h;
    wc.tol = cfg.params.tol;
    nlohmann::json out = nlohmann::json::array();
    bool pass = true;
    for (const OrderedBasis& B : cfg.bases) {
        SlowSystem sys = member_system(cfg, B);
        nlohmann::json solves = nlohmann::json::array();
        for (const Vec& c : cfg.params.cs) {
            if (c.size() != sys.d) throw config_error("cohomology dimension mismatch");
            GridValueFunction u = solve_weak_kam(sys, c, wc);
            AlphaRelationReport rel = verify_alpha_relation(sys, c, wc);
            pass = pass && rel.pass;
            nlohmann::json ju;
            to_json(ju, u);
            solves.push_back({{"solution", ju},
                              {"alpha", u.alpha_estimate},
                              {"alpha_relation_defect", rel.defect},
                              {"alpha_relation_budget", rel.budget},
                              {"alpha_relation_pass", rel.pass}});
        }
        out.push_back(solves);
    }
    return {{"members", out}, {"pass", pass}};
}

inline nlohmann::json run_semicont(const ExperimentConfig& cfg, std::vector<std::string>& csv) {
    if (cfg.bases.size() < 2) throw config_error("semicont needs a family of lattices");
    std::vector<SlowSystem> family;
    std::vector<Vec> cs;
    for (const OrderedBasis& B : cfg.bases) {
        family.push_back(member_system(cfg, B));
        cs.push_back(cfg.params.cs.empty() ? Vec(Vec::Zero(family.back().d))
                                           : cfg.params.cs.front());
    }
    WeakKamConfig wc;
    wc.N = cfg.params.grid;
    wc.h = cfg.params.h;
    wc.tol = cfg.params.tol;
    SemicontReport rep = semicontinuity_experiment(family, cs, wc);
    std::ostringstream table;
    table << "mu,osc,profile_gap\n";
    for (size_t i = 0; i < rep.mu.size(); ++i)
        table << rep.mu[i] << "," << rep.osc[i] << "," << rep.profile_gap[i] << "\n";
    csv.push_back(table.str());
    return {{"mu", rep.mu},
            {"osc", rep.osc},
            {"profile_gap", rep.profile_gap},
            {"monotone", rep.monotone},
            {"pass", rep.monotone}};
}

inline nlohmann::json run_nhic(const ExperimentConfig& cfg, std::vector<std::string>& csv) {
    if (cfg.bases.empty()) throw config_error("task nhic needs lattices");
    std::vector<SlowSystem> family;
    for (const OrderedBasis& B : cfg.bases) family.push_back(member_system(cfg, B));
    const int w = family.front().d - family.front().m;
    std::vector<double> o0(size_t(family.front().m), 0.0);
    double lam2 = family.front().S(0, 0) * family.front().Ust.hess(o0)[0][0];
    if (lam2 <= 0) throw degenerate_input_error("strong fixed point is not hyperbolic");
    IsolatingBlockSpec spec;
    spec.s = 1;
    spec.u = 1;
    spec.center_lo = Vec::Constant(2 * w, -2.0);
    spec.center_hi = Vec::Constant(2 * w, 2.0);
    spec.r = 2e-3;
    spec.mu = 2.0;
    spec.nu = 0.7 * std::exp(std::sqrt(lam2));
    spec.interior_samples = 96;
    spec.boundary_samples = 48;
    spec.pair_samples = 24;
    spec.cone_dirs = 8;
    auto recs = persistence_demo(family, cfg.params.q, spec, 0.1, cfg.params.dt);
    nlohmann::json rows = nlohmann::json::array();
    std::ostringstream table;
    table << "mu,z...,x,y\n";
    bool pass = true;
    for (const auto& rec : recs) {
        nlohmann::json jr;
        to_json(jr, rec.report);
        rows.push_back({{"mu", rec.mu},
                        {"report", jr},
                        {"aborted", rec.aborted},
                        {"note", rec.note},
                        {"invariance_defect", rec.witness.invariance_defect},
                        {"strong_distance", rec.witness.strong_distance}});
        pass = pass && !rec.aborted && rec.report.overall == Verdict::pass;
        for (size_t i = 0; i < rec.witness.centers.size(); ++i) {
            table << rec.mu;
            for (int k = 0; k < rec.witness.centers[i].size(); ++k)
                table << "," << rec.witness.centers[i](k);
            table << "," << rec.witness.xy[i](0) << "," << rec.witness.xy[i](1) << "\n";
        }
    }
    csv.push_back(table.str());
    return {{"members", rows}, {"pass", pass}};
}

inline nlohmann::json run_report(const std::filesystem::path& out_dir) {
    nlohmann::json rows = nlohmann::json::array();
    bool pass = true;
    if (std::filesystem::exists(out_dir))
        for (const auto& entry : std::filesystem::directory_iterator(out_dir)) {
            auto rp = entry.path() / "report.json";
            if (!std::filesystem::exists(rp)) continue;
            std::ifstream in(rp);
            nlohmann::json j;
            in >> j;
            bool p = j.value("pass", false);
            pass = pass && p;
            rows.push_back({{"hash", j.value("hash", "")}, {"task", j.value("task", "")},
                            {"pass", p}});
        }
    return {{"runs", rows}, {"pass", pass}};
}

} // namespace detail

// Runs the configured task and writes out/<config-hash>/report.json plus
// task CSVs and timing.json. Returns the report.
inline RunReport run_experiment(const nlohmann::json& config, const std::filesystem::path& out_root,
                                std::uint64_t seed = 0) {
    auto t0 = std::chrono::steady_clock::now();
    nlohmann::json hashed = config;
    if (seed != 0) hashed["params_seed_override"] = seed; // participates in the hash
    ExperimentConfig cfg = parse_config(config);

    RunReport rep;
    rep.task = cfg.task;
    rep.hash = hash_hex(config_hash(hashed));
    std::filesystem::path dir = out_root / rep.hash;

    std::vector<std::string> csv;
    if (cfg.task == "basis") rep.results = detail::run_basis(cfg);
    else if (cfg.task == "slow") rep.results = detail::run_slow(cfg);
    else if (cfg.task == "rescale-scan") rep.results = detail::run_rescale_scan(cfg, csv);
    else if (cfg.task == "weakkam") rep.results = detail::run_weakkam(cfg);
    else if (cfg.task == "semicont") rep.results = detail::run_semicont(cfg, csv);
    else if (cfg.task == "nhic") rep.results = detail::run_nhic(cfg, csv);
    else rep.results = detail::run_report(out_root);
    rep.pass = rep.results.value("pass", false);

    std::filesystem::create_directories(dir);
    nlohmann::json jr = {{"task", rep.task},
                         {"hash", rep.hash},
                         {"version", kToolVersion},
                         {"results", rep.results},
                         {"pass", rep.pass}};
    std::ofstream(dir / "report.json") << jr.dump(2) << "\n";
    for (size_t i = 0; i < csv.size(); ++i)
        std::ofstream(dir / (rep.task + (csv.size() > 1 ? "-" + std::to_string(i) : "") + ".csv"))
            << csv[i];
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream(dir / "timing.json")
        << nlohmann::json{{"wall_seconds", rep.wall_seconds}}.dump(2) << "\n";
    return rep;
}

} // namespace rk
