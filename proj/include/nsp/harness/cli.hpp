#pragma once

#include "nsp/harness/experiments.hpp"

#include <iostream>
#include <string>

namespace nsp::harness {

enum ExitCode { exit_ok = 0, exit_assertion = 1, exit_config = 2, exit_abort = 3 };

/// Runs one experiment and maps its outcome to the CLI exit code.
inline int dispatch(const std::string& command, const RunConfig& cfg, bool assert_mode,
                    std::ostream& log = std::cout, std::ostream& err = std::cerr)
{
    try {
        ExperimentResult result;
        if (command == "run")
            result = experiment_nonlinear(cfg, log);
        else if (command == "linear")
            result = experiment_linear(cfg, log);
        else if (command == "refine")
            result = experiment_refine(cfg, log);
        else if (command == "perturb")
            result = experiment_perturb(cfg, log);
        else if (command == "check-lemmas")
            result = experiment_check_lemmas(cfg, log);
        else
            throw ConfigError("unknown command '" + command + "'");
        return assert_mode && !result.all_pass() ? exit_assertion : exit_ok;
    } catch (const ConfigError& e) {
        err << "nsp: " << e.what() << "\n";
        return exit_config;
    } catch (const StabilityViolation& e) {
        err << "nsp: initial data violate the step-size bound: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        err << "nsp: numerical abort: " << e.what() << "\n";
        return exit_abort;
    }
}

}  // namespace nsp::harness
