#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "rk/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"resonance toolkit: slow systems, rescaling limits, weak KAM, cylinder checks"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::uint64_t seed = 0;
    std::vector<CLI::App*> subs;
    for (const char* task :
         {"basis", "slow", "rescale-scan", "weakkam", "semicont", "nhic", "report"}) {
        CLI::App* sub = app.add_subcommand(task, "");
        sub->add_option("--config", config_path, "JSON experiment config")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "seed override recorded in the config hash");
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);
    std::string task = app.get_subcommands().front()->get_name();

    nlohmann::json config;
    try {
        std::ifstream in(config_path);
        if (!in) throw rk::config_error("cannot open config file " + config_path);
        in >> config;
        if (config.value("task", task) != task)
            throw rk::config_error("config task does not match the subcommand");
        config["task"] = task;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << nlohmann::json{{"error", "validation"}, {"detail", e.what()}}.dump()
                  << "\n";
        return 2;
    } catch (const rk::config_error& e) {
        std::cerr << nlohmann::json{{"error", "validation"}, {"detail", e.what()}}.dump()
                  << "\n";
        return 2;
    }

    try {
        rk::RunReport rep = rk::run_experiment(config, out_dir, seed);
        std::cout << nlohmann::json{{"task", rep.task},
                                    {"hash", rep.hash},
                                    {"pass", rep.pass},
                                    {"report", "report.json"}}
                         .dump()
                  << "\n";
        return rep.pass ? 0 : 3;
    } catch (const rk::config_error& e) {
        std::cerr << nlohmann::json{{"error", "validation"}, {"detail", e.what()}}.dump()
                  << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", "numerical"}, {"detail", e.what()}}.dump() << "\n";
        return 3;
    }
}
