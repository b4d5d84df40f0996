#include <iostream>

#include <CLI11.hpp>

#include "nlfb/cli.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Nonlocal free-boundary simulator: simulate, solve semi-waves, fit rates, verify."};
    app.require_subcommand(1);

    std::string config;
    std::vector<std::string> sets;
    std::string out;
    int jobs = 1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "scenario JSON")->check(CLI::ExistingFile);
        sub->add_option("--set", sets, "override K=V (dotted path), repeatable")->take_all();
        sub->add_option("--out", out, "output directory (default: output.dir of the config)");
        sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    };
    for (const char* name : {"simulate", "semiwave", "rates", "verify", "sweep"}) {
        static const std::map<std::string, std::string> help = {
            {"simulate", "run the solver, write trajectory and snapshots"},
            {"semiwave", "semi-wave profile and speed (optionally c* and the stationary profile)"},
            {"rates", "run, then fit the spreading rate"},
            {"verify", "fixture certificates and numerical oracles"},
            {"sweep", "fan out one command over a parameter grid"},
        };
        add_common(app.add_subcommand(name, help.at(name)));
    }
    auto* rep = app.add_subcommand("report", "aggregate pass/fail table of an output directory");
    rep->add_option("--out", out, "output directory to aggregate")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "report")
        return nlfb::report(out, std::cout, std::cerr);

    nlfb::ScenarioConfig cfg;
    try {
        cfg = config.empty() ? nlfb::resolve_config(nlohmann::json::object(), sets) : nlfb::resolve_config_file(config, sets);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    if (!out.empty())
        cfg.output.dir = out;
    return nlfb::execute(command, cfg, cfg.output.dir, jobs, std::cout, std::cerr);
}
