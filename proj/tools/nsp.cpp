#include "nsp/harness/cli.hpp"
#include "nsp/parallel.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::string read_file(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw nsp::harness::ConfigError("cannot read " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Navier-Stokes-Poisson spectral solver and energy diagnostics"};
    app.require_subcommand(1);
    app.footer("Config keys (section.key = value):\n" + nsp::harness::config_help()
               + "\nNSP_THREADS caps worker threads. Exit codes: 0 ok, 1 assertion failure, "
                 "2 config error, 3 numerical abort.");

    std::string config_path;
    std::string out_dir;
    bool assert_mode = false;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"run", "nonlinear run with energy monitoring"},
        {"linear", "linear reference run and damping margins"},
        {"refine", "Friedrichs cutoff doubling n, 2n, 4n, ..."},
        {"perturb", "difference of runs from data and data + delta"},
        {"check-lemmas", "Littlewood-Paley lemma ratios on random fields"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "key-value config file")->required();
        sub->add_flag("--assert", assert_mode, "exit 1 if any assertion fails");
        sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? nsp::harness::exit_ok : nsp::harness::exit_config;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    nsp::harness::RunConfig cfg;
    try {
        cfg = nsp::harness::parse_config(read_file(config_path));
        if (!out_dir.empty())
            cfg.out_dir = out_dir;
        cfg.threads = nsp::thread_limit();
    } catch (const std::exception& e) {
        std::cerr << "nsp: " << e.what() << "\n";
        return nsp::harness::exit_config;
    }
    return nsp::harness::dispatch(command, cfg, assert_mode);
}
