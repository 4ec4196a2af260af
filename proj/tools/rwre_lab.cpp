// rwre-lab: experiment runner for random walks in space-time random
// environments. Subcommands are experiment suite names plus `describe`;
// every flag overrides the config key of the same name.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "../src/experiments.hpp"

using rwre::ordered_json;

namespace {

struct Overrides {
    std::int64_t n = -1, N = -1, M = -1, N_pairs = -1;
    std::uint64_t master_seed = 0;
    bool have_seed = false;
    double epsilon = -1.0, tol = -1.0;
    std::string centering, observable, output_dir;
    int threads = 0;
    std::int64_t support_cap = -1;
};

void apply_overrides(rwre::ExperimentConfig& cfg, const Overrides& ov) {
    if (ov.n >= 0) cfg.n = ov.n;
    if (ov.N >= 0) cfg.N = ov.N;
    if (ov.M >= 0) cfg.M = ov.M;
    if (ov.N_pairs >= 0) cfg.N_pairs = ov.N_pairs;
    if (ov.have_seed) cfg.master_seed = ov.master_seed;
    if (ov.epsilon >= 0.0) cfg.epsilon = ov.epsilon;
    if (ov.tol > 0.0) cfg.tol = ov.tol;
    if (!ov.centering.empty()) cfg.centering = ov.centering;
    if (!ov.observable.empty()) cfg.observable = ov.observable;
    if (!ov.output_dir.empty()) cfg.output_dir = ov.output_dir;
    if (ov.support_cap >= 0) cfg.support_cap = static_cast<std::size_t>(ov.support_cap);
}

int load_config(const std::string& path, const std::string& experiment, const Overrides& ov,
                rwre::ExperimentConfig& out) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "error: cannot open config file '" << path << "'\n";
        return 2;
    }
    ordered_json j;
    try {
        in >> j;
    } catch (const ordered_json::exception& e) {
        std::cerr << "error: config parse failed: " << e.what() << "\n";
        return 2;
    }
    if (!experiment.empty()) j["experiment"] = experiment;
    try {
        out = rwre::parse_config(j);
    } catch (const rwre::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    apply_overrides(out, ov);
    // Re-validate after overrides.
    try {
        out = rwre::parse_config(rwre::config_to_json(out));
    } catch (const rwre::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return -1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"verification lab for random walks in space-time random environments"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides ov;
    bool describe_only = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON configuration file")->required();
        cmd->add_option("--n", ov.n, "walk length override");
        cmd->add_option("--N", ov.N, "replica count override");
        cmd->add_option("--M", ov.M, "environment count override");
        cmd->add_option("--N_pairs", ov.N_pairs, "pair count override");
        cmd->add_option("--master_seed", ov.master_seed, "master seed override")
            ->each([&](const std::string&) { ov.have_seed = true; });
        cmd->add_option("--epsilon", ov.epsilon, "resolvent epsilon override");
        cmd->add_option("--tol", ov.tol, "resolvent tolerance override");
        cmd->add_option("--centering", ov.centering, "both|deterministic|quenched");
        cmd->add_option("--observable", ov.observable, "ergodic observable override");
        cmd->add_option("--output_dir", ov.output_dir, "output directory override");
        cmd->add_option("--threads", ov.threads, "worker count override");
        cmd->add_option("--support_cap", ov.support_cap, "DP support cap override");
    };

    std::vector<CLI::App*> subs;
    for (const char* name : rwre::kExperimentNames) {
        CLI::App* cmd = app.add_subcommand(name, std::string("run the ") + name + " suite");
        add_common(cmd);
        subs.push_back(cmd);
    }
    CLI::App* desc = app.add_subcommand("describe", "print the plan without computing");
    add_common(desc);

    CLI11_PARSE(app, argc, argv);

    std::string experiment;
    for (std::size_t i = 0; i < subs.size(); ++i)
        if (subs[i]->parsed()) experiment = rwre::kExperimentNames[i];
    if (desc->parsed()) describe_only = true;

    rwre::ExperimentConfig cfg;
    int rc = load_config(config_path, experiment, ov, cfg);
    if (rc >= 0) return rc;

    if (describe_only) {
        std::cout << rwre::describe(cfg);
        return 0;
    }
    int status = rwre::run_experiment(cfg, ov.threads);
    if (status == 0) std::cout << "PASS " << cfg.experiment << "\n";
    else if (status == 1) std::cout << "FAIL " << cfg.experiment << " (statistical test failed)\n";
    else if (status == 2) std::cerr << "error: configuration/validation failure\n";
    else if (status == 3) std::cerr << "error: resource cap exceeded\n";
    return status;
}
