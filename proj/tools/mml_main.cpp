#include "mml/driver.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

std::map<std::string, double> parse_sets(const std::vector<std::string>& sets)
{
    std::map<std::string, double> out;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw CLI::ValidationError("--set", "expected name=value, got '" + s + "'");
        const std::string name = s.substr(0, eq), value = s.substr(eq + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(value, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != value.size() || value.empty())
            throw CLI::ValidationError("--set", "'" + value + "' is not a number");
        out[name] = v;
    }
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"mml: compile and simulate Mechanica modelling-language models"};
    app.require_subcommand(1);

    std::vector<std::string> check_files;
    auto* check = app.add_subcommand("check", "compile models and print the analysis report");
    check->add_option("files", check_files, "model files, merged in order")->required()->check(CLI::ExistingFile);

    mml::RunConfig cfg;
    std::vector<std::string> sets;
    auto* run = app.add_subcommand("run", "simulate models and write trajectories");
    run->add_option("files", cfg.paths, "model files, merged in order")->required()->check(CLI::ExistingFile);
    run->add_option("--dt", cfg.dt, "time step")->capture_default_str()->check(CLI::PositiveNumber);
    run->add_option("--steps", cfg.steps, "number of steps")->capture_default_str();
    run->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    run->add_option("--out", cfg.out, "output directory")->capture_default_str();
    run->add_option("--stride", cfg.stride, "steps between samples")->capture_default_str()->check(CLI::Range(1ULL, ~0ULL));
    run->add_option("--set", sets, "override a model parameter, name=value")->take_all();
    run->add_option("--format", cfg.format, "species table format")
        ->capture_default_str()
        ->check(CLI::IsMember({"csv", "tsv", "json"}));
    run->add_option("--resume", cfg.resume, "continue from a checkpoint")->check(CLI::ExistingFile);
    run->add_flag("!--no-particles", cfg.particles, "skip particles.jsonl");

    try {
        app.parse(argc, argv);
        cfg.overrides = parse_sets(sets);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : mml::kExitCompile;
    }

    if (*check)
        return mml::run_check(check_files, std::cout, std::cerr);
    return mml::run_simulation(cfg, std::cout, std::cerr);
}
