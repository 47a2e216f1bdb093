#include "sinc/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <utility>

int main(int argc, char** argv)
{
    CLI::App app{"Joint sparse network and covariate selection for microbiome counts"};
    app.require_subcommand(1);

    sinc::RunManifest manifest;
    std::string seed, threads, nu0, nu0_grid, sparsity_target;
    bool learn_tau = false, b_zero = false, omega_identity = false;
    std::vector<std::string> sets;

    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "write a synthetic dataset and its ground truth"},
        {"fit", "one fit at a fixed nu0"},
        {"grid", "fits over a nu0 grid and picks one by edge sparsity"},
        {"evaluate", "score a fit or grid directory against ground truth"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--counts", manifest.counts, "count matrix (rows = samples)");
        sub->add_option("--covariates", manifest.covariates, "covariate matrix (rows = samples)");
        sub->add_option("--out", manifest.out, "output directory");
        sub->add_option("--config", manifest.config, "key = value settings file");
        sub->add_option("--truth", manifest.truth, "ground-truth directory from simulate");
        sub->add_option("--estimate", manifest.estimate, "fit or grid output directory");
        sub->add_option("--seed", seed);
        sub->add_option("--threads", threads);
        sub->add_option("--nu0", nu0);
        sub->add_option("--nu0-grid", nu0_grid, "comma-separated nu0 values");
        sub->add_option("--sparsity-target", sparsity_target);
        sub->add_flag("--learn-tau", learn_tau);
        sub->add_flag("--constrain-b-zero", b_zero);
        sub->add_flag("--constrain-omega-identity", omega_identity);
        sub->add_option("--set", sets, "override any setting as key=value");
        sub->callback([&manifest, sub] { manifest.command = sub->get_name(); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    auto& o = manifest.overrides;
    for (const std::string& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::cerr << "--set expects key=value, got '" << kv << "'\n";
            return 2;
        }
        o[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (!seed.empty()) o["seed"] = seed;
    if (!threads.empty()) o["threads"] = threads;
    if (!nu0.empty()) o["nu0"] = nu0;
    if (!nu0_grid.empty()) o["nu0_grid"] = nu0_grid;
    if (!sparsity_target.empty()) o["sparsity_target"] = sparsity_target;
    if (learn_tau) o["learn_tau"] = "true";
    if (b_zero) o["constrain_b_zero"] = "true";
    if (omega_identity) o["constrain_omega_identity"] = "true";

    try {
        return sinc::run_command(manifest, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
