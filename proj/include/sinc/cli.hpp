#pragma once

#include "sinc/driver.hpp"
#include "sinc/synthetic.hpp"
#include "sinc/types.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace sinc {

/// Every key=value setting understood by the CLI, merged from the built-in
/// defaults, the config file and command-line overrides (later wins).
using Settings = std::map<std::string, std::string>;

const Settings& default_settings();

/// key = value per line; '#' starts a comment. Unknown keys are InvalidArgument.
Settings parse_config(const std::string& text, const std::string& source = "<config>");

struct RunManifest {
    std::string command;  // simulate, fit, grid or evaluate
    std::string counts;
    std::string covariates;
    std::string truth;
    std::string estimate;
    std::string out;
    std::string config;
    Settings overrides;
};

Settings resolve_settings(const RunManifest& manifest);

Hyperparameters hyperparameters_from(const Settings& s);
FitConfig fit_config_from(const Settings& s);
GraphSpec graph_spec_from(const Settings& s);
/// Comma-separated values, or the default grid when the setting is empty.
std::vector<double> nu0_grid_from(const Settings& s);

/// 2 usage, 3 input data, 4 numerical failure, 5 file system.
int exit_code(ErrorKind kind);

/// Runs one command; progress and timestamps go to log, never into output files.
int run_command(const RunManifest& manifest, std::ostream& log);

}  // namespace sinc
