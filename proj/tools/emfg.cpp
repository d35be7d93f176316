#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "emfg/app.hpp"
#include "emfg/detail/parallel.hpp"

int main(int argc, char** argv) {
    CLI::App cli{"Extended deterministic mean-field game solver"};
    std::string sub;
    emfg::RunConfig rc;
    std::string problem, out;
    cli.add_option("subcommand", sub, "solve | oracle | check | master | probe-uniqueness")
        ->required()
        ->check(CLI::IsMember({"solve", "oracle", "check", "master", "probe-uniqueness"}));
    cli.add_option("--config", problem, "problem JSON file")->required();
    cli.add_option("--out", out, "output directory")->required();
    cli.add_option("--seed", rc.seed, "RNG seed for sampled ensembles and probes");
    cli.add_option("--override", rc.overrides, "dotted.key=json_value applied to the problem document");
    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return cli.exit(e);
        std::cerr << "ERROR invalid_argument: " << e.what() << '\n';
        return 1;
    }
    try {
        rc.subcommand = emfg::parse_subcommand(sub);
        rc.problem = problem;
        rc.out = out;
        rc.threads = emfg::detail::threads_from_env();
        return emfg::run(rc);
    } catch (const emfg::Error& e) {
        std::cerr << "ERROR " << emfg::to_string(e.code()) << ": " << e.what() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "ERROR internal: " << e.what() << '\n';
    }
    return 1;
}
