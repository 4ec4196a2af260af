#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rwre/site_law.hpp"
#include "rwre/verify.hpp"

namespace rwre {

using ordered_json = nlohmann::ordered_json;

// Pass/fail thresholds; every one of these is echoed into the emitted report.
struct Thresholds {
    double ks_p_min = 0.001;
    double cov_rel_err_max = 0.05;
    double increment_corr_max = 0.05;
    double z_max = 4.0;
    double scaling_slope_min = 0.20;
    double scaling_slope_max = 0.30;
    double collision_slope_min = 0.4;
    double collision_slope_max = 0.6;
    double decay_slope_min = -0.35;
    double decay_slope_max = -0.15;
    double rn_alpha_max = 0.35;
    double qv_rel_dev_max = 0.10;
    double lindeberg_max = 0.01;
    double lindeberg_threshold = 0.1;
    double diffusion_abs_slack = 0.05;
    double resolvent_residual_factor = 2.0;  // residuals pass below factor*tol
    double identity_residual_max = 1e-9;
    double bridge_residual_max = 1e-9;
    double ergodic_z_max = 4.0;
    double density_z_max = 4.0;
};

struct ExperimentConfig {
    std::string experiment;  // simulate|clt|collisions|scaling|corrector|mg-check|ergodic|density|all
    SiteLaw law;
    std::uint64_t master_seed = 1;
    std::int64_t n = 256;
    std::int64_t N = 1000;
    std::int64_t M = 200;
    std::int64_t N_pairs = 10000;
    std::vector<std::int64_t> ladder;        // scaling suite
    std::vector<std::int64_t> decay_ladder;  // scaling suite, optional
    std::vector<std::int64_t> rn_ladder;     // corrector suite
    std::int64_t rn_samples = 100;
    double rn_tol = 1e-2;
    std::vector<double> eps_ladder;  // corrector suite, diffusion coincidence
    double epsilon = 0.0;            // 0 -> default 1/n
    double tol = 1e-8;
    std::vector<double> t_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<RVec> directions;  // empty -> default axes (+ diagonal)
    std::string centering = "both";
    std::string observable = "pi:0";
    std::int64_t baseline_samples = 4096;
    std::vector<std::int64_t> density_ns = {1, 2, 4, 8};
    std::int64_t resolvent_sites = 100;
    std::int64_t deco_paths = 20;
    std::int64_t bridge_pairs = 50;
    std::int64_t bridge_len = 16;
    std::int64_t mg_paths = 50;
    std::int64_t gamma_M = 2000;
    Thresholds thresholds;
    std::size_t support_cap = 10'000'000;
    int threads = 0;  // 0 -> RWRE_LAB_THREADS env var, then hardware
    std::string output_dir = "out";
};

extern const char* const kExperimentNames[9];
bool is_experiment_name(const std::string& s);

SiteLaw law_from_json(const ordered_json& j);
ordered_json law_to_json(const SiteLaw& law);

// Parses and validates; throws ConfigError on any problem.
ExperimentConfig parse_config(const ordered_json& j);
ordered_json config_to_json(const ExperimentConfig& c);

int resolve_threads(const ExperimentConfig& c, int cli_override);

// Executes the named suite, writing summary.json, CSV data files, and
// manifest.json under output_dir. Returns the process exit status:
// 0 pass, 1 statistical failure, 2 config error, 3 resource cap.
int run_experiment(const ExperimentConfig& config, int cli_threads = 0);

// Prints the operation plan, cost estimates, and all thresholds; runs nothing.
std::string describe(const ExperimentConfig& config);

}  // namespace rwre
