#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ftlsim/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ftlsim: federated transfer-learning simulator for hospital CT twins"};
    app.require_subcommand(1);

    CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
    std::string config_path;
    std::string method_name;
    std::string out_dir;
    std::uint64_t seed = 0;
    run->add_option("--config", config_path, "path to key = value config file")->required();
    auto* method_opt =
        run->add_option("--method", method_name, "override method: fl, cfl, ftl, or all");
    auto* seed_opt = run->add_option("--seed", seed, "override the experiment seed");
    auto* out_opt = run->add_option("--out-dir", out_dir, "override the output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        ftlsim::ExperimentConfig config = ftlsim::parse_config_file(config_path);
        if (method_opt->count() > 0) {
            try {
                config.method = ftlsim::parse_method(method_name);
            } catch (const ftlsim::ConfigError& e) {
                throw ftlsim::ConfigError("--method: " + std::string(e.what()));
            }
        }
        if (seed_opt->count() > 0) config.seed = seed;
        if (out_opt->count() > 0) config.out_dir = out_dir;
        ftlsim::run_experiment(config);
    } catch (const ftlsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
