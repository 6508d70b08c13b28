#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rk/cli.hpp"

using namespace rk;
namespace fs = std::filesystem;

namespace {

nlohmann::json minimal_basis_config() {
    return {{"schema", 1},
            {"task", "basis"},
            {"lattices", {{"generators", {{1, 0, 0}, {0, 5, 1}}}, {"split", 1}}}};
}

nlohmann::json weakkam_config() {
    return {{"schema", 1},
            {"task", "weakkam"},
            {"model", {{"dim", 2}, {"Q0", {{1.0, 0.0}, {0.0, 1.0}}}, {"D", 2.0}}},
            {"perturbation",
             {{"ambient_dim", 3},
              {"declared_regularity", 20.0},
              {"coefficients",
               {{{"k", {1, 0, 0}}, {"re", -0.15}, {"im", 0.0}},
                {{"k", {0, 5, 1}}, {"re", -0.004}, {"im", 0.0}}}}}},
            {"lattices", {{"generators", {{1, 0, 0}, {0, 5, 1}}}, {"split", 1}}},
            {"params", {{"grid", 16}, {"h", 0.2}, {"tol", 1e-4}, {"c", {{0.1, 0.0}}}}}};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("config validation: unknown keys, schema, ranges", "[cli]") {
    nlohmann::json good = minimal_basis_config();
    REQUIRE_NOTHROW(parse_config(good));

    nlohmann::json j = good;
    j["extra"] = 1;
    REQUIRE_THROWS_AS(parse_config(j), config_error);

    j = good;
    j["lattices"]["typo"] = 1;
    REQUIRE_THROWS_AS(parse_config(j), config_error);

    j = good;
    j["schema"] = 99;
    REQUIRE_THROWS_AS(parse_config(j), config_error);

    j = good;
    j["task"] = "frobnicate";
    REQUIRE_THROWS_AS(parse_config(j), config_error);

    j = weakkam_config();
    j["params"]["dt"] = 0.5;
    REQUIRE_THROWS_AS(parse_config(j), config_error);
    j = weakkam_config();
    j["params"]["tol"] = 1.0;
    REQUIRE_THROWS_AS(parse_config(j), config_error);
    j = weakkam_config();
    j["params"]["grid"] = 4096;
    REQUIRE_THROWS_AS(parse_config(j), config_error);
    j = weakkam_config();
    j["params"]["q"] = 1.0;
    REQUIRE_THROWS_AS(parse_config(j), config_error);
    j = weakkam_config();
    j["model"]["Q0"] = {{1.0, 0.0}};
    REQUIRE_THROWS_AS(parse_config(j), config_error);
}

TEST_CASE("config hash: stable across reparsing, sensitive to content", "[cli]") {
    nlohmann::json a = weakkam_config();
    nlohmann::json b = nlohmann::json::parse(a.dump());
    REQUIRE(config_hash(a) == config_hash(b));
    b["params"]["tol"] = 2e-4;
    REQUIRE(config_hash(a) != config_hash(b));
    REQUIRE(hash_hex(config_hash(a)).size() == 16);
}

TEST_CASE("family generation enforces the dominance certificate", "[cli]") {
    FamilyRule rule;
    rule.strong = {IVec(3)};
    rule.strong[0] << 1, 0, 0;
    rule.mu_schedule = {5, 11, 23};
    rule.q = 3;
    rule.kappa = 2;
    rule.amplitude = 0.4;
    auto members = generate_family(rule);
    REQUIRE(members.size() == 3);
    for (size_t i = 0; i < members.size(); ++i) {
        REQUIRE(members[i].certificate.verdict);
        REQUIRE(members[i].certificate.mu == double(rule.mu_schedule[i]));
        REQUIRE(sup_norm(members[i].basis.vectors.back()) == rule.mu_schedule[i]);
    }

    rule.amplitude = 5e4; // weak potential far above kappa mu^-q
    REQUIRE_THROWS_AS(generate_family(rule), config_error);
}

TEST_CASE("basis task: adapted norms, reproducible report file", "[cli]") {
    fs::path out = fresh_dir("rk-cli-basis");
    RunReport rep = run_experiment(minimal_basis_config(), out);
    REQUIRE(rep.pass);
    REQUIRE(rep.task == "basis");
    auto norms = rep.results["adapted"][0]["norms"];
    REQUIRE(norms[0].get<i64>() == 1);
    REQUIRE(norms[1].get<i64>() == 5);

    fs::path report = out / rep.hash / "report.json";
    REQUIRE(fs::exists(report));
    std::string first = slurp(report);
    REQUIRE_FALSE(first.empty());
    // timing noise must live outside the report
    REQUIRE(first.find("wall_seconds") == std::string::npos);
    REQUIRE(fs::exists(out / rep.hash / "timing.json"));

    RunReport again = run_experiment(minimal_basis_config(), out);
    REQUIRE(again.hash == rep.hash);
    REQUIRE(slurp(report) == first);
    fs::remove_all(out);
}

TEST_CASE("seed override changes the hash but not validity", "[cli]") {
    fs::path out = fresh_dir("rk-cli-seed");
    RunReport a = run_experiment(minimal_basis_config(), out);
    RunReport b = run_experiment(minimal_basis_config(), out, 42);
    REQUIRE(a.hash != b.hash);
    REQUIRE(b.pass);
    fs::remove_all(out);
}

TEST_CASE("rk binary: exit codes and artifacts", "[cli]") {
    const char* bin = std::getenv("RK_BIN");
    if (bin == nullptr) {
        WARN("RK_BIN not set; binary round trip skipped");
        return;
    }
    fs::path dir = fresh_dir("rk-cli-bin");
    fs::path cfg = dir / "config.json";
    std::ofstream(cfg) << minimal_basis_config().dump(2);

    auto run = [&](const std::string& args) {
        std::string cmd = std::string("\"") + bin + "\" " + args + " >/dev/null 2>/dev/null";
        int st = std::system(cmd.c_str());
        return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    };

    fs::path out = dir / "out";
    REQUIRE(run("basis --config " + cfg.string() + " --out " + out.string()) == 0);
    bool have_report = false;
    for (const auto& e : fs::recursive_directory_iterator(out))
        if (e.path().filename() == "report.json") have_report = true;
    REQUIRE(have_report);

    // task mismatch between config and subcommand
    REQUIRE(run("weakkam --config " + cfg.string() + " --out " + out.string()) == 2);

    // malformed JSON: validation exit, no artifacts
    fs::path bad = dir / "bad.json";
    std::ofstream(bad) << "{ not json";
    fs::path out2 = dir / "out2";
    REQUIRE(run("basis --config " + bad.string() + " --out " + out2.string()) == 2);
    REQUIRE_FALSE(fs::exists(out2));

    // unknown key: validation exit
    nlohmann::json junk = minimal_basis_config();
    junk["bogus"] = true;
    fs::path junkp = dir / "junk.json";
    std::ofstream(junkp) << junk.dump();
    REQUIRE(run("basis --config " + junkp.string() + " --out " + out2.string()) == 2);
    fs::remove_all(dir);
}
