#include "experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "rwre/corrector.hpp"
#include "rwre/errors.hpp"
#include "rwre/parallel.hpp"
#include "rwre/report.hpp"

namespace rwre {

namespace fs = std::filesystem;

const char* const kExperimentNames[9] = {"simulate", "clt",      "collisions",
                                         "scaling",  "corrector", "mg-check",
                                         "ergodic",  "density",  "all"};

bool is_experiment_name(const std::string& s) {
    for (const char* n : kExperimentNames)
        if (s == n) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

SiteLaw law_from_json(const ordered_json& j) {
    try {
        StepSupport sup;
        sup.nu = j.at("nu").get<int>();
        for (const auto& s : j.at("steps")) {
            IVec z(sup.nu);
            if (static_cast<int>(s.size()) != sup.nu)
                throw ConfigError("step with wrong dimension in law");
            for (int i = 0; i < sup.nu; ++i) z[i] = s.at(std::size_t(i)).get<std::int64_t>();
            sup.steps.push_back(z);
        }
        std::string variant = j.at("variant").get<std::string>();
        if (variant == "dirichlet")
            return validate_spec(SiteLaw::dirichlet(sup, j.at("alphas").get<std::vector<double>>()));
        if (variant == "deterministic")
            return validate_spec(
                SiteLaw::deterministic(sup, j.at("vector").get<std::vector<double>>()));
        if (variant == "mixture") {
            std::vector<MixtureComponent> comps;
            for (const auto& c : j.at("components")) {
                MixtureComponent mc;
                mc.weight = c.at("weight").get<double>();
                mc.probs = c.at("vector").get<std::vector<double>>();
                comps.push_back(std::move(mc));
            }
            return validate_spec(SiteLaw::mixture(sup, std::move(comps)));
        }
        throw ConfigError("unknown law variant '" + variant + "'");
    } catch (const ordered_json::exception& e) {
        throw ConfigError(std::string("bad law schema: ") + e.what());
    }
}

ordered_json law_to_json(const SiteLaw& law) {
    ordered_json j;
    j["nu"] = law.support.nu;
    ordered_json steps = ordered_json::array();
    for (const auto& z : law.support.steps) {
        ordered_json s = ordered_json::array();
        for (int i = 0; i < law.support.nu; ++i) s.push_back(z[i]);
        steps.push_back(s);
    }
    j["steps"] = steps;
    j["variant"] = law_kind_name(law.kind);
    switch (law.kind) {
        case LawKind::Dirichlet: j["alphas"] = law.alphas; break;
        case LawKind::Deterministic: j["vector"] = law.fixed; break;
        case LawKind::Mixture: {
            ordered_json comps = ordered_json::array();
            for (const auto& c : law.components)
                comps.push_back({{"weight", c.weight}, {"vector", c.probs}});
            j["components"] = comps;
            break;
        }
    }
    return j;
}

namespace {

template <typename T>
void read_if(const ordered_json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const ordered_json::exception& e) {
            throw ConfigError("bad value for '" + std::string(key) + "': " + e.what());
        }
    }
}

}  // namespace

ExperimentConfig parse_config(const ordered_json& j) {
    ExperimentConfig c;
    try {
        c.experiment = j.at("experiment").get<std::string>();
    } catch (const ordered_json::exception&) {
        throw ConfigError("config needs an 'experiment' field");
    }
    if (!is_experiment_name(c.experiment))
        throw ConfigError("unknown experiment '" + c.experiment + "'");
    if (!j.contains("law")) throw ConfigError("config needs a 'law' object");
    try {
        c.law = law_from_json(j.at("law"));
    } catch (const Error& e) {
        throw ConfigError(std::string("law validation failed: ") + e.what());
    }

    read_if(j, "master_seed", c.master_seed);
    read_if(j, "n", c.n);
    read_if(j, "N", c.N);
    read_if(j, "M", c.M);
    read_if(j, "N_pairs", c.N_pairs);
    read_if(j, "ladder", c.ladder);
    read_if(j, "decay_ladder", c.decay_ladder);
    read_if(j, "rn_ladder", c.rn_ladder);
    read_if(j, "rn_samples", c.rn_samples);
    read_if(j, "rn_tol", c.rn_tol);
    read_if(j, "eps_ladder", c.eps_ladder);
    read_if(j, "epsilon", c.epsilon);
    read_if(j, "tol", c.tol);
    read_if(j, "t_grid", c.t_grid);
    read_if(j, "centering", c.centering);
    read_if(j, "observable", c.observable);
    read_if(j, "baseline_samples", c.baseline_samples);
    read_if(j, "density_ns", c.density_ns);
    read_if(j, "resolvent_sites", c.resolvent_sites);
    read_if(j, "deco_paths", c.deco_paths);
    read_if(j, "bridge_pairs", c.bridge_pairs);
    read_if(j, "bridge_len", c.bridge_len);
    read_if(j, "mg_paths", c.mg_paths);
    read_if(j, "gamma_M", c.gamma_M);
    read_if(j, "support_cap", c.support_cap);
    read_if(j, "threads", c.threads);
    read_if(j, "output_dir", c.output_dir);

    if (j.contains("directions")) {
        for (const auto& d : j.at("directions")) {
            RVec v(c.law.support.nu);
            if (static_cast<int>(d.size()) != v.nu)
                throw ConfigError("direction with wrong dimension");
            for (int i = 0; i < v.nu; ++i) v[i] = d.at(std::size_t(i)).get<double>();
            c.directions.push_back(v);
        }
    }
    if (j.contains("thresholds")) {
        const auto& t = j.at("thresholds");
        read_if(t, "ks_p_min", c.thresholds.ks_p_min);
        read_if(t, "cov_rel_err_max", c.thresholds.cov_rel_err_max);
        read_if(t, "increment_corr_max", c.thresholds.increment_corr_max);
        read_if(t, "z_max", c.thresholds.z_max);
        read_if(t, "scaling_slope_min", c.thresholds.scaling_slope_min);
        read_if(t, "scaling_slope_max", c.thresholds.scaling_slope_max);
        read_if(t, "collision_slope_min", c.thresholds.collision_slope_min);
        read_if(t, "collision_slope_max", c.thresholds.collision_slope_max);
        read_if(t, "decay_slope_min", c.thresholds.decay_slope_min);
        read_if(t, "decay_slope_max", c.thresholds.decay_slope_max);
        read_if(t, "rn_alpha_max", c.thresholds.rn_alpha_max);
        read_if(t, "qv_rel_dev_max", c.thresholds.qv_rel_dev_max);
        read_if(t, "lindeberg_max", c.thresholds.lindeberg_max);
        read_if(t, "lindeberg_threshold", c.thresholds.lindeberg_threshold);
        read_if(t, "diffusion_abs_slack", c.thresholds.diffusion_abs_slack);
        read_if(t, "resolvent_residual_factor", c.thresholds.resolvent_residual_factor);
        read_if(t, "identity_residual_max", c.thresholds.identity_residual_max);
        read_if(t, "bridge_residual_max", c.thresholds.bridge_residual_max);
        read_if(t, "ergodic_z_max", c.thresholds.ergodic_z_max);
        read_if(t, "density_z_max", c.thresholds.density_z_max);
    }

    if (c.n < 1) throw ConfigError("n must be >= 1");
    if (c.N < 1) throw ConfigError("N must be >= 1");
    if (c.M < 2) throw ConfigError("M must be >= 2");
    if (c.epsilon < 0.0) throw ConfigError("epsilon must be positive (or 0 for the 1/n default)");
    if (c.tol <= 0.0) throw ConfigError("tol must be positive");
    if (c.centering != "both" && c.centering != "deterministic" && c.centering != "quenched")
        throw ConfigError("centering must be both|deterministic|quenched");
    for (double t : c.t_grid)
        if (t < 0.0 || t > 1.0) throw ConfigError("t_grid values must lie in [0,1]");
    for (std::size_t i = 1; i < c.ladder.size(); ++i)
        if (c.ladder[i] <= c.ladder[i - 1]) throw ConfigError("ladder must be increasing");
    if (c.output_dir.empty()) throw ConfigError("output_dir must not be empty");
    return c;
}

ordered_json config_to_json(const ExperimentConfig& c) {
    ordered_json j;
    j["experiment"] = c.experiment;
    j["law"] = law_to_json(c.law);
    j["master_seed"] = c.master_seed;
    j["n"] = c.n;
    j["N"] = c.N;
    j["M"] = c.M;
    j["N_pairs"] = c.N_pairs;
    j["ladder"] = c.ladder;
    j["decay_ladder"] = c.decay_ladder;
    j["rn_ladder"] = c.rn_ladder;
    j["rn_samples"] = c.rn_samples;
    j["rn_tol"] = c.rn_tol;
    j["eps_ladder"] = c.eps_ladder;
    j["epsilon"] = c.epsilon;
    j["tol"] = c.tol;
    j["t_grid"] = c.t_grid;
    ordered_json dirs = ordered_json::array();
    for (const auto& d : c.directions) {
        ordered_json v = ordered_json::array();
        for (int i = 0; i < d.nu; ++i) v.push_back(d[i]);
        dirs.push_back(v);
    }
    j["directions"] = dirs;
    j["centering"] = c.centering;
    j["observable"] = c.observable;
    j["baseline_samples"] = c.baseline_samples;
    j["density_ns"] = c.density_ns;
    j["resolvent_sites"] = c.resolvent_sites;
    j["deco_paths"] = c.deco_paths;
    j["bridge_pairs"] = c.bridge_pairs;
    j["bridge_len"] = c.bridge_len;
    j["mg_paths"] = c.mg_paths;
    j["gamma_M"] = c.gamma_M;
    j["thresholds"] = {{"ks_p_min", c.thresholds.ks_p_min},
                       {"cov_rel_err_max", c.thresholds.cov_rel_err_max},
                       {"increment_corr_max", c.thresholds.increment_corr_max},
                       {"z_max", c.thresholds.z_max},
                       {"scaling_slope_min", c.thresholds.scaling_slope_min},
                       {"scaling_slope_max", c.thresholds.scaling_slope_max},
                       {"collision_slope_min", c.thresholds.collision_slope_min},
                       {"collision_slope_max", c.thresholds.collision_slope_max},
                       {"decay_slope_min", c.thresholds.decay_slope_min},
                       {"decay_slope_max", c.thresholds.decay_slope_max},
                       {"rn_alpha_max", c.thresholds.rn_alpha_max},
                       {"qv_rel_dev_max", c.thresholds.qv_rel_dev_max},
                       {"lindeberg_max", c.thresholds.lindeberg_max},
                       {"lindeberg_threshold", c.thresholds.lindeberg_threshold},
                       {"diffusion_abs_slack", c.thresholds.diffusion_abs_slack},
                       {"resolvent_residual_factor", c.thresholds.resolvent_residual_factor},
                       {"identity_residual_max", c.thresholds.identity_residual_max},
                       {"bridge_residual_max", c.thresholds.bridge_residual_max},
                       {"ergodic_z_max", c.thresholds.ergodic_z_max},
                       {"density_z_max", c.thresholds.density_z_max}};
    j["support_cap"] = c.support_cap;
    j["threads"] = c.threads;
    j["output_dir"] = c.output_dir;
    return j;
}

int resolve_threads(const ExperimentConfig& c, int cli_override) {
    if (cli_override > 0) return cli_override;
    if (c.threads > 0) return c.threads;
    if (const char* env = std::getenv("RWRE_LAB_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return default_threads();
}

// ---------------------------------------------------------------------------
// Suite implementations. Each returns a JSON test block and appends CSVs.
// ---------------------------------------------------------------------------

namespace {

struct RunContext {
    const ExperimentConfig& cfg;
    int threads;
    DpLimits limits;
    fs::path dir;
    std::vector<fs::path> files;  // everything written, for manifest/cleanup

    CsvWriter open_csv(const std::string& name, const std::vector<std::string>& header) {
        fs::path p = dir / name;
        files.push_back(p);
        return CsvWriter(p, header);
    }
    double eps_default(std::int64_t n) const {
        return cfg.epsilon > 0.0 ? cfg.epsilon : 1.0 / double(n);
    }
};

ordered_json mat_to_json(const Mat& m) {
    ordered_json rows = ordered_json::array();
    for (int i = 0; i < m.nu; ++i) {
        ordered_json r = ordered_json::array();
        for (int j = 0; j < m.nu; ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

ordered_json fit_to_json(const ExponentFit& f) {
    ordered_json j;
    j["slope"] = f.slope;
    j["slope_se"] = f.slope_se;
    j["intercept"] = f.intercept;
    j["r_squared"] = f.r_squared;
    j["dropped_smallest"] = f.dropped_smallest;
    j["degenerate"] = f.degenerate;
    return j;
}

ordered_json run_simulate(RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    EnvironmentView env(cfg.law, cfg.master_seed);
    auto paths = sample_batch(env, cfg.n, cfg.N, cfg.master_seed, ctx.threads);

    std::vector<std::string> header = {"replica", "k"};
    for (int i = 0; i < env.nu(); ++i) header.push_back("x_" + std::to_string(i + 1));
    CsvWriter csv = ctx.open_csv("simulate_paths.csv", header);
    for (std::int64_t r = 0; r < cfg.N; ++r) {
        const Path& p = paths[std::size_t(r)];
        for (std::int64_t k = 0; k <= cfg.n; ++k) {
            std::vector<std::string> row = {format_int(r), format_int(k)};
            for (int i = 0; i < env.nu(); ++i)
                row.push_back(format_int(p.positions[std::size_t(k)][i]));
            csv.write_row(row);
        }
    }
    csv.close();

    RVec mean(env.nu());
    for (const auto& p : paths) mean += RVec::from(p.positions[std::size_t(cfg.n)]);
    mean = (1.0 / double(cfg.N)) * mean;
    ordered_json j;
    j["name"] = "simulate";
    j["paths"] = cfg.N;
    j["steps"] = cfg.n;
    ordered_json mj = ordered_json::array();
    for (int i = 0; i < env.nu(); ++i) mj.push_back(mean[i]);
    j["endpoint_mean"] = mj;
    j["pass"] = true;
    return j;
}

ordered_json clt_report_json(const CltReport& rep) {
    ordered_json j;
    j["n"] = rep.n;
    j["N"] = rep.N;
    j["centering"] = rep.centering == Centering::Deterministic ? "deterministic" : "quenched";
    j["covariance"] = mat_to_json(rep.covariance);
    j["reference"] = mat_to_json(rep.reference);
    j["cov_rel_error"] = rep.cov_rel_error;
    ordered_json ks = ordered_json::array();
    for (const auto& d : rep.ks) {
        ordered_json e;
        ordered_json th = ordered_json::array();
        for (int i = 0; i < d.direction.nu; ++i) th.push_back(d.direction[i]);
        e["direction"] = th;
        e["statistic"] = d.statistic;
        e["p_value"] = d.p_value;
        e["p_adjusted"] = d.p_adjusted;
        ks.push_back(e);
    }
    j["ks"] = ks;
    ordered_json inc = ordered_json::array();
    for (const auto& ic : rep.increments)
        inc.push_back({{"t0", ic.t0}, {"t1", ic.t1}, {"t2", ic.t2}, {"max_abs_corr", ic.max_abs_corr}});
    j["increment_corr"] = inc;
    j["thresholds"] = {{"ks_p_min", rep.thresholds.ks_p_min},
                       {"cov_rel_err_max", rep.thresholds.cov_rel_err_max},
                       {"increment_corr_max", rep.thresholds.increment_corr_max}};
    j["degenerate_input"] = rep.degenerate_input;
    j["pass"] = rep.pass;
    return j;
}

ordered_json run_clt(RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    EnvironmentView env(cfg.law, cfg.master_seed);
    CltThresholds th{cfg.thresholds.ks_p_min, cfg.thresholds.cov_rel_err_max,
                     cfg.thresholds.increment_corr_max};
    std::vector<RVec> dirs = cfg.directions.empty() ? default_directions(env.nu()) : cfg.directions;

    std::vector<Centering> cents;
    if (cfg.centering == "both" || cfg.centering == "deterministic")
        cents.push_back(Centering::Deterministic);
    if (cfg.centering == "both" || cfg.centering == "quenched")
        cents.push_back(Centering::Quenched);

    ordered_json j;
    j["name"] = "clt";
    ordered_json reports = ordered_json::array();
    bool pass = true;
    for (Centering cent : cents) {
        CltReport rep = clt_quenched(env, cfg.n, cfg.N, dirs, cfg.t_grid, cent, cfg.master_seed,
                                     th, ctx.threads, ctx.limits);
        reports.push_back(clt_report_json(rep));
        pass = pass && rep.pass;

        std::string tag = cent == Centering::Deterministic ? "det" : "quenched";
        std::vector<std::string> header = {"replica"};
        for (int i = 0; i < env.nu(); ++i) header.push_back("b_" + std::to_string(i + 1));
        CsvWriter csv = ctx.open_csv("clt_endpoint_" + tag + ".csv", header);
        // Re-derive endpoint samples for the CSV (deterministic replay).
        const RVec v_bar = law_mean_step(cfg.law);
        std::vector<RVec> center;
        if (cent == Centering::Quenched)
            center = quenched_mean_at(env, {cfg.n}, ctx.limits);
        const double root_n = std::sqrt(double(cfg.n));
        std::vector<RVec> endpoints(static_cast<std::size_t>(cfg.N));
        parallel_for(cfg.N, ctx.threads, [&](std::int64_t i) {
            Path p = sample_path(env, cfg.n, replica_seed_for(cfg.master_seed, i));
            RVec ctr = cent == Centering::Deterministic ? double(cfg.n) * v_bar : center[0];
            endpoints[std::size_t(i)] =
                (1.0 / root_n) * (RVec::from(p.positions[std::size_t(cfg.n)]) - ctr);
        });
        for (std::int64_t i = 0; i < cfg.N; ++i) {
            std::vector<std::string> row = {format_int(i)};
            for (int c = 0; c < env.nu(); ++c)
                row.push_back(format_double(endpoints[std::size_t(i)][c]));
            csv.write_row(row);
        }
        csv.close();
    }
    j["reports"] = reports;
    j["pass"] = pass;
    return j;
}

ordered_json run_collisions(RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    CollisionIdentityReport rep = collision_identity_test(
        cfg.law, cfg.n, cfg.M, cfg.N_pairs, cfg.master_seed, cfg.thresholds.z_max, ctx.limits,
        ctx.threads);

    AnnealedParams params = annealed_params(cfg.law);
    CollisionSum cs = collision_sum(params, cfg.n, ctx.limits);
    CsvWriter csv = ctx.open_csv("collisions_chain.csv", {"k", "return_prob", "cumulative"});
    for (std::size_t k = 0; k < cs.return_prob.size(); ++k)
        csv.write_row({format_int(std::int64_t(k)), format_double(cs.return_prob[k]),
                       format_double(cs.cumulative[k])});
    csv.close();

    ordered_json j;
    j["name"] = "collisions";
    j["n"] = rep.n;
    j["M"] = rep.M;
    j["N_pairs"] = rep.N_pairs;
    j["exact"] = rep.exact;
    j["dp_mean"] = rep.dp_mean;
    j["dp_se"] = rep.dp_se;
    j["mc_mean"] = rep.mc_mean;
    j["mc_se"] = rep.mc_se;
    j["z_dp"] = rep.z_dp;
    j["z_mc"] = rep.z_mc;
    j["z_dp_mc"] = rep.z_dp_mc;
    j["z_max"] = rep.z_max;
    j["pass"] = rep.pass;
    return j;
}

ordered_json run_scaling(RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    if (cfg.ladder.empty()) throw ConfigError("scaling experiment needs a 'ladder'");
    ScalingReport rep =
        variance_scaling(cfg.law, cfg.master_seed, cfg.ladder, cfg.M, ctx.limits, ctx.threads);

    CsvWriter vcsv = ctx.open_csv("scaling_variance.csv", {"n", "V", "SE"});
    for (const auto& p : rep.variance_points)
        vcsv.write_row({format_int(p.n), format_double(p.value), format_double(p.se)});
    vcsv.close();
    CsvWriter ccsv = ctx.open_csv("scaling_collision.csv", {"n", "cumulative"});
    for (std::size_t i = 0; i < rep.collision_ns.size(); ++i)
        ccsv.write_row({format_int(rep.collision_ns[i]), format_double(rep.collision_cumulative[i])});
    ccsv.close();

    ordered_json j;
    j["name"] = "scaling";
    j["variance_fit"] = fit_to_json(rep.variance_fit);
    j["collision_fit"] = fit_to_json(rep.collision_fit);
    j["variance_capped_after"] = rep.variance_capped_after;
    j["collision_capped_after"] = rep.collision_capped_after;
    bool pass = true;
    bool checked = false;
    if (!rep.variance_fit.degenerate) {
        checked = true;
        pass = pass && rep.variance_fit.slope >= cfg.thresholds.scaling_slope_min &&
               rep.variance_fit.slope <= cfg.thresholds.scaling_slope_max;
    }
    if (!rep.collision_fit.degenerate) {
        checked = true;
        pass = pass && rep.collision_fit.slope >= cfg.thresholds.collision_slope_min &&
               rep.collision_fit.slope <= cfg.thresholds.collision_slope_max;
    }
    j["degenerate"] = !checked;

    if (!cfg.decay_ladder.empty()) {
        EnvironmentView env(cfg.law, cfg.master_seed);
        ExponentFit decay = centering_decay(env, cfg.decay_ladder, ctx.limits);
        CsvWriter dcsv = ctx.open_csv("scaling_decay.csv", {"n", "value"});
        for (const auto& p : decay.points)
            dcsv.write_row({format_double(p.n), format_double(p.value)});
        dcsv.close();
        j["decay_fit"] = fit_to_json(decay);
        if (!decay.degenerate)
            pass = pass && decay.slope >= cfg.thresholds.decay_slope_min &&
                   decay.slope <= cfg.thresholds.decay_slope_max;
    }
    j["pass"] = pass;
    return j;
}

// Random interior site for residual spot checks: endpoint of a short walk,
// plus a level offset, so sites vary over levels and positions.
IVec spot_site(const EnvironmentView& env, Stream& s, std::int64_t level_span, std::int64_t* level) {
    *level = std::int64_t(s.next_u01() * double(level_span));
    IVec x(env.nu());
    for (std::int64_t k = 0; k < *level; ++k) {
        std::vector<double> pi = env.transition(k, x);
        x += env.support().steps[std::size_t(pick_step(pi, s.next_u01()))];
    }
    return x;
}

ordered_json run_corrector(RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    EnvironmentView env(cfg.law, cfg.master_seed);
    const RVec v_bar = law_mean_step(cfg.law);
    const double eps = ctx.eps_default(cfg.n);
    ResolventParams params = make_resolvent_params(cfg.law, eps, cfg.tol);

    ordered_json j;
    j["name"] = "corrector";
    j["epsilon"] = params.epsilon;
    j["tol"] = params.tol;
    j["K"] = params.K;
    bool pass = true;

    // (a) resolvent equation residual at random sites, Pi h through the
    // independent neighbor sum.
    {
        Stream s(mix64(cfg.master_seed ^ 0x524553ull));
        double max_resid = 0.0, max_mart = 0.0;
        for (std::int64_t i = 0; i < cfg.resolvent_sites; ++i) {
            std::int64_t level = 0;
            IVec a = spot_site(env, s, 16, &level);
            RVec h_a = resolvent_h(env.shifted(level, a), params, ctx.limits);
            std::vector<double> pi = env.transition(level, a);
            RVec pih(env.nu());
            RVec mart(env.nu());
            for (std::size_t zi = 0; zi < env.support().steps.size(); ++zi) {
                const IVec& z = env.support().steps[zi];
                RVec h_b = resolvent_h(env.shifted(level + 1, a + z), params, ctx.limits);
                pih += pi[zi] * h_b;
                mart += pi[zi] * (h_b - (1.0 + params.epsilon) * h_a +
                                  (env.local_drift(level, a) - v_bar));
            }
            RVec g_a = env.local_drift(level, a) - v_bar;
            RVec resid = (1.0 + params.epsilon) * h_a - pih - g_a;
            max_resid = std::max(max_resid, resid.norm());
            max_mart = std::max(max_mart, mart.norm());
        }
        j["resolvent_sites"] = cfg.resolvent_sites;
        j["max_resolvent_residual"] = max_resid;
        j["max_martingale_mean"] = max_mart;
        double bound = cfg.thresholds.resolvent_residual_factor * params.tol;
        j["residual_bound"] = bound;
        pass = pass && max_resid <= bound && max_mart <= bound;
    }

    // (b) decomposition identity on sampled paths.
    {
        double max_identity = 0.0;
        CsvWriter csv = ctx.open_csv(
            "corrector_decomposition.csv",
            {"path", "n", "epsilon", "K", "xbar", "m_eps", "s_eps", "r_eps", "r_n",
             "identity_residual"});
        for (std::int64_t i = 0; i < cfg.deco_paths; ++i) {
            Path p = sample_path(env, cfg.n, replica_seed_for(cfg.master_seed ^ 0xDECull, i));
            DecompositionRecord rec = decompose(p, env, params, ctx.limits);
            max_identity = std::max(max_identity, rec.identity_residual);
            csv.write_row({format_int(i), format_int(rec.n), format_double(rec.epsilon),
                           format_int(rec.K), format_double(rec.xbar.norm()),
                           format_double(rec.m_eps.norm()), format_double(rec.s_eps.norm()),
                           format_double(rec.r_eps.norm()), format_double(rec.r_n.norm()),
                           format_double(rec.identity_residual)});
        }
        csv.close();
        j["decomposition_paths"] = cfg.deco_paths;
        j["max_identity_residual"] = max_identity;
        pass = pass && max_identity <= cfg.thresholds.identity_residual_max;
    }

    // (c) cocycle: admissible bridge pairs must telescope identically.
    {
        Stream s(mix64(cfg.master_seed ^ 0x425249ull));
        double max_gap = 0.0;
        std::int64_t made = 0;
        for (std::int64_t i = 0; i < cfg.bridge_pairs; ++i) {
            Path a = sample_path(env, cfg.bridge_len,
                                 replica_seed_for(cfg.master_seed ^ 0xAAull, i));
            // Rejection-sample a second admissible path to the same endpoint.
            std::vector<int> b_steps;
            for (int attempt = 0; attempt < 4096 && b_steps.empty(); ++attempt) {
                Path b = sample_path(env, cfg.bridge_len,
                                     replica_seed_for(cfg.master_seed ^ 0xBBull,
                                                      i * 4096 + attempt));
                if (b.positions.back() == a.positions.back()) b_steps = b.steps;
            }
            if (b_steps.empty()) continue;
            ++made;
            RVec sum_a = chi_path_sum(env, a.steps, params, ctx.limits);
            RVec sum_b = chi_path_sum(env, b_steps, params, ctx.limits);
            max_gap = std::max(max_gap, (sum_a - sum_b).norm());
        }
        j["bridge_pairs"] = made;
        j["max_bridge_gap"] = max_gap;
        pass = pass && made > 0 && max_gap <= cfg.thresholds.bridge_residual_max;
        (void)s;
    }

    // (d) |R_n|^2 growth exponent with eps = 1/n per ladder point.
    if (!cfg.rn_ladder.empty()) {
        CsvWriter csv = ctx.open_csv("corrector_rn.csv", {"n", "mean_rn_sq", "se"});
        std::vector<FitPoint> pts;
        for (std::int64_t n : cfg.rn_ladder) {
            ResolventParams rp = make_resolvent_params(cfg.law, 1.0 / double(n), cfg.rn_tol);
            std::vector<double> vals(static_cast<std::size_t>(cfg.rn_samples));
            parallel_for(cfg.rn_samples, ctx.threads, [&](std::int64_t i) {
                EnvironmentView e(cfg.law,
                                  environment_seed_for(cfg.master_seed ^ std::uint64_t(n), i));
                Path p = sample_path(e, n, replica_seed_for(cfg.master_seed ^ 0x524eull, i));
                DecompositionRecord rec = decompose(p, e, rp, ctx.limits);
                vals[std::size_t(i)] = rec.r_n.norm_sq();
            });
            MeanSe ms = mean_se(vals);
            csv.write_row({format_int(n), format_double(ms.mean), format_double(ms.se)});
            pts.push_back({double(n), ms.mean, ms.se});
        }
        csv.close();
        ExponentFit fit = fit_log_log(std::move(pts));
        j["rn_fit"] = fit_to_json(fit);
        double alpha_hat = 0.5 * fit.slope;
        j["rn_alpha_hat"] = alpha_hat;
        if (!fit.degenerate) pass = pass && alpha_hat <= cfg.thresholds.rn_alpha_max;
    }

    // (e) diffusion-matrix coincidence along the eps ladder.
    if (!cfg.eps_ladder.empty()) {
        Mat ref = annealed_params(cfg.law).step_cov;
        CsvWriter csv = ctx.open_csv("corrector_diffusion.csv", {"epsilon", "max_abs_err", "max_se"});
        std::vector<double> errs, ses;
        for (double e : cfg.eps_ladder) {
            ResolventParams rp = make_resolvent_params(cfg.law, e, cfg.tol);
            MatrixEstimate est = limit_diffusion_matrix(cfg.law, rp, cfg.master_seed, cfg.M, 0,
                                                        ctx.threads, ctx.limits);
            double err = (est.value - ref).max_abs();
            double se = est.se.max_abs();
            errs.push_back(err);
            ses.push_back(se);
            csv.write_row({format_double(e), format_double(err), format_double(se)});
        }
        csv.close();
        bool monotone = true;
        for (std::size_t i = 1; i < errs.size(); ++i)
            monotone = monotone && errs[i] <= errs[i - 1] + ses[i] + ses[i - 1];
        bool final_ok =
            errs.back() <= 4.0 * ses.back() + cfg.thresholds.diffusion_abs_slack;
        j["diffusion_errors"] = errs;
        j["diffusion_monotone"] = monotone;
        j["diffusion_final_ok"] = final_ok;
        pass = pass && monotone && final_ok;
    }

    j["pass"] = pass;
    return j;
}

ordered_json run_mg_check(RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    const double eps = cfg.epsilon > 0.0 ? cfg.epsilon : 1.0 / 64.0;
    ResolventParams params = make_resolvent_params(cfg.law, eps, cfg.tol);
    Mat gamma = annealed_params(cfg.law).step_cov;
    if (params.K > 0) {
        MatrixEstimate est = limit_diffusion_matrix(cfg.law, params, cfg.master_seed, cfg.gamma_M,
                                                    0, ctx.threads, ctx.limits);
        gamma = est.value;
    }

    std::vector<double> devs(static_cast<std::size_t>(cfg.mg_paths)), linds(devs), 
        maxinc(devs);
    parallel_for(cfg.mg_paths, ctx.threads, [&](std::int64_t i) {
        EnvironmentView env(cfg.law, environment_seed_for(cfg.master_seed ^ 0x6d67ull, i));
        Path p = sample_path(env, cfg.n, replica_seed_for(cfg.master_seed ^ 0x6d67ull, i));
        MgHypothesesReport rep = mg_hypotheses(env, p, params, cfg.t_grid, gamma,
                                               {cfg.thresholds.lindeberg_threshold}, ctx.limits);
        devs[std::size_t(i)] = rep.sup_rel_dev;
        linds[std::size_t(i)] = rep.lindeberg[0].second;
        maxinc[std::size_t(i)] = rep.max_increment;
    });

    CsvWriter csv = ctx.open_csv("mg_check.csv", {"path", "sup_rel_dev", "lindeberg", "max_increment"});
    for (std::int64_t i = 0; i < cfg.mg_paths; ++i)
        csv.write_row({format_int(i), format_double(devs[std::size_t(i)]),
                       format_double(linds[std::size_t(i)]), format_double(maxinc[std::size_t(i)])});
    csv.close();

    MeanSe dev = mean_se(devs);
    MeanSe lind = mean_se(linds);
    double max_inc = 0.0;
    for (double v : maxinc) max_inc = std::max(max_inc, v);

    ordered_json j;
    j["name"] = "mg-check";
    j["n"] = cfg.n;
    j["epsilon"] = params.epsilon;
    j["paths"] = cfg.mg_paths;
    j["gamma"] = mat_to_json(gamma);
    j["mean_sup_rel_dev"] = dev.mean;
    j["mean_lindeberg"] = lind.mean;
    j["lindeberg_threshold"] = cfg.thresholds.lindeberg_threshold;
    j["max_increment"] = max_inc;
    bool pass = dev.mean < cfg.thresholds.qv_rel_dev_max &&
                lind.mean < cfg.thresholds.lindeberg_max;
    j["pass"] = pass;
    return j;
}

ordered_json run_ergodic(RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    EnvironmentView env(cfg.law, cfg.master_seed);
    Path p = sample_path(env, cfg.n, replica_seed_for(cfg.master_seed ^ 0x657267ull, 0));
    ErgodicReport rep = ergodic_average(env, p, cfg.observable, cfg.baseline_samples);

    CsvWriter csv = ctx.open_csv("ergodic_series.csv", {"m", "running_avg"});
    for (std::size_t m = 0; m < rep.running_avg.size(); ++m)
        csv.write_row({format_int(std::int64_t(m) + 1), format_double(rep.running_avg[m])});
    csv.close();

    double se = std::sqrt(rep.path_se * rep.path_se + rep.baseline_se * rep.baseline_se);
    double z = se > 0.0 ? (rep.final_avg - rep.baseline_mean) / se : 0.0;
    ordered_json j;
    j["name"] = "ergodic";
    j["observable"] = rep.observable;
    j["n"] = cfg.n;
    j["final_avg"] = rep.final_avg;
    j["baseline_mean"] = rep.baseline_mean;
    j["baseline_se"] = rep.baseline_se;
    j["path_se"] = rep.path_se;
    j["z"] = z;
    j["z_max"] = cfg.thresholds.ergodic_z_max;
    j["pass"] = std::abs(z) < cfg.thresholds.ergodic_z_max;
    return j;
}

ordered_json run_density(RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    double f0 = density_f(EnvironmentView(cfg.law, cfg.master_seed), 0, ctx.limits);

    CsvWriter csv = ctx.open_csv("density.csv", {"n", "mean_f_n", "se"});
    ordered_json points = ordered_json::array();
    bool pass = f0 == 1.0;
    for (std::int64_t n : cfg.density_ns) {
        std::vector<double> vals(static_cast<std::size_t>(cfg.M));
        parallel_for(cfg.M, ctx.threads, [&](std::int64_t i) {
            EnvironmentView env(cfg.law, environment_seed_for(cfg.master_seed ^ 0x64656eull, i));
            vals[std::size_t(i)] = density_f(env, n, ctx.limits);
        });
        MeanSe ms = mean_se(vals);
        csv.write_row({format_int(n), format_double(ms.mean), format_double(ms.se)});
        double z = ms.se > 0.0 ? (ms.mean - 1.0) / ms.se : 0.0;
        points.push_back({{"n", n}, {"mean", ms.mean}, {"se", ms.se}, {"z", z}});
        pass = pass && std::abs(z) < cfg.thresholds.density_z_max;
    }
    csv.close();

    ordered_json j;
    j["name"] = "density";
    j["f_0"] = f0;
    j["M"] = cfg.M;
    j["points"] = points;
    j["z_max"] = cfg.thresholds.density_z_max;
    j["pass"] = pass;
    return j;
}

ordered_json run_suite(RunContext& ctx, const std::string& name) {
    if (name == "simulate") return run_simulate(ctx);
    if (name == "clt") return run_clt(ctx);
    if (name == "collisions") return run_collisions(ctx);
    if (name == "scaling") return run_scaling(ctx);
    if (name == "corrector") return run_corrector(ctx);
    if (name == "mg-check") return run_mg_check(ctx);
    if (name == "ergodic") return run_ergodic(ctx);
    if (name == "density") return run_density(ctx);
    throw ConfigError("unknown experiment '" + name + "'");
}

std::string iso_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

}  // namespace

int run_experiment(const ExperimentConfig& config, int cli_threads) {
    const auto start = std::chrono::steady_clock::now();
    RunContext ctx{config, resolve_threads(config, cli_threads),
                   DpLimits{config.support_cap}, fs::path(config.output_dir), {}};

    auto cleanup = [&] {
        for (const auto& p : ctx.files) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    };

    try {
        fs::create_directories(ctx.dir);

        std::vector<std::string> suites;
        if (config.experiment == "all") {
            for (const char* n : kExperimentNames)
                if (std::string(n) != "all") suites.push_back(n);
        } else {
            suites.push_back(config.experiment);
        }

        // The resolved worker count must stay out of the digested payloads.
        ordered_json summary;
        summary["experiment"] = config.experiment;
        summary["config"] = config_to_json(config);
        ordered_json tests = ordered_json::array();
        bool pass = true;
        for (const auto& s : suites) {
            ordered_json t = run_suite(ctx, s);
            pass = pass && t.at("pass").get<bool>();
            tests.push_back(std::move(t));
        }
        summary["tests"] = tests;
        summary["pass"] = pass;

        fs::path summary_path = ctx.dir / "summary.json";
        {
            std::ofstream out(summary_path, std::ios::binary);
            out << summary.dump(2) << "\n";
        }
        ctx.files.push_back(summary_path);

        ordered_json manifest;
        manifest["artifact_version"] = "0.1.0";
        manifest["config"] = config_to_json(config);
        manifest["timestamp"] = iso_timestamp();
        ordered_json files = ordered_json::array();
        for (const auto& p : ctx.files) {
            files.push_back({{"name", p.filename().string()},
                             {"bytes", fs::file_size(p)},
                             {"digest", "fnv1a64:" + digest_file(p)}});
        }
        manifest["files"] = files;
        const auto elapsed = std::chrono::steady_clock::now() - start;
        manifest["total_runtime_s"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count() / 1000.0;
        {
            std::ofstream out(ctx.dir / "manifest.json", std::ios::binary);
            out << manifest.dump(2) << "\n";
        }
        return pass ? 0 : 1;
    } catch (const ResourceError&) {
        cleanup();
        return 3;
    } catch (const ConfigError&) {
        cleanup();
        return 2;
    } catch (const Error&) {
        cleanup();
        return 2;
    }
}

std::string describe(const ExperimentConfig& config) {
    const int nu = config.law.support.nu;
    const double cone = std::pow(2.0 * double(config.n) *
                                     double(config.law.support.max_abs_coord()) + 1.0,
                                 nu);
    std::string out;
    auto line = [&](const std::string& s) { out += s + "\n"; };
    line("experiment plan: " + config.experiment);
    line("law: " + law_kind_name(config.law.kind) + ", nu=" + std::to_string(nu) + ", |S|=" +
         std::to_string(config.law.support.size()));
    line("master_seed: " + std::to_string(config.master_seed));
    line("support cap: " + std::to_string(config.support_cap) + " entries per DP level");

    auto plan_for = [&](const std::string& name) {
        if (name == "simulate") {
            line("simulate: sample_batch N=" + std::to_string(config.N) + " paths of n=" +
                 std::to_string(config.n) + " -> CSV dump (" +
                 std::to_string(config.N * (config.n + 1)) + " rows)");
        } else if (name == "clt") {
            line("clt: sample_batch (N=" + std::to_string(config.N) + ", n=" +
                 std::to_string(config.n) + "), annealed_params, quenched_mean_series (" +
                 config.centering + " centering), KS per direction, increment correlations");
            line("  thresholds: ks_p_min=" + format_double(config.thresholds.ks_p_min) +
                 " cov_rel_err_max=" + format_double(config.thresholds.cov_rel_err_max) +
                 " increment_corr_max=" + format_double(config.thresholds.increment_corr_max));
        } else if (name == "collisions") {
            line("collisions: collision_sum(n=" + std::to_string(config.n) +
                 "), variance_quenched_mean(M=" + std::to_string(config.M) +
                 "), sample_pair x " + std::to_string(config.N_pairs));
            line("  threshold: |z| < " + format_double(config.thresholds.z_max));
            double chain = std::pow(4.0 * double(config.n) *
                                        double(config.law.support.max_abs_coord()) + 1.0,
                                    nu);
            line("  estimated collision-chain support at depth n: " + format_double(chain));
            if (chain > double(config.support_cap))
                line("  WARNING: estimate exceeds the support cap; expect ResourceError");
        } else if (name == "scaling") {
            std::string lad;
            for (auto n : config.ladder) lad += std::to_string(n) + " ";
            line("scaling: variance_quenched_mean over ladder [ " + lad + "] with M=" +
                 std::to_string(config.M) + ", collision_sum fit, optional centering_decay");
            line("  slope bands: variance [" + format_double(config.thresholds.scaling_slope_min) +
                 "," + format_double(config.thresholds.scaling_slope_max) + "], collision [" +
                 format_double(config.thresholds.collision_slope_min) + "," +
                 format_double(config.thresholds.collision_slope_max) + "], decay [" +
                 format_double(config.thresholds.decay_slope_min) + "," +
                 format_double(config.thresholds.decay_slope_max) + "]");
            if (!config.ladder.empty()) {
                double lvl = std::pow(2.0 * double(config.ladder.back()) *
                                          double(config.law.support.max_abs_coord()) + 1.0,
                                      nu);
                line("  estimated max DP level support: " + format_double(lvl));
                if (lvl > double(config.support_cap))
                    line("  WARNING: estimate exceeds the support cap; expect ResourceError "
                         "(capped ladder points are dropped and recorded)");
            }
        } else if (name == "corrector") {
            double eps = config.epsilon > 0.0 ? config.epsilon : 1.0 / double(config.n);
            ResolventParams p = make_resolvent_params(config.law, eps, config.tol);
            line("corrector: resolvent_h residuals at " + std::to_string(config.resolvent_sites) +
                 " sites (epsilon=" + format_double(eps) + ", K=" + std::to_string(p.K) +
                 "), decompose on " + std::to_string(config.deco_paths) + " paths, " +
                 std::to_string(config.bridge_pairs) + " chi bridges, R_n ladder, diffusion eps-ladder");
            line("  bounds: residual <= " + format_double(config.thresholds.resolvent_residual_factor) +
                 "*tol, identity <= " + format_double(config.thresholds.identity_residual_max) +
                 ", bridge gap <= " + format_double(config.thresholds.bridge_residual_max) +
                 ", alpha_hat <= " + format_double(config.thresholds.rn_alpha_max));
        } else if (name == "mg-check") {
            line("mg-check: limit_diffusion_matrix (M=" + std::to_string(config.gamma_M) +
                 ") then mg_hypotheses on " + std::to_string(config.mg_paths) + " paths of n=" +
                 std::to_string(config.n));
            line("  thresholds: qv_rel_dev < " + format_double(config.thresholds.qv_rel_dev_max) +
                 ", lindeberg(" + format_double(config.thresholds.lindeberg_threshold) + ") < " +
                 format_double(config.thresholds.lindeberg_max));
        } else if (name == "ergodic") {
            line("ergodic: one path of n=" + std::to_string(config.n) + ", observable " +
                 config.observable + ", baseline " + std::to_string(config.baseline_samples) +
                 " fresh sites, |z| < " + format_double(config.thresholds.ergodic_z_max));
        } else if (name == "density") {
            std::string ns;
            for (auto n : config.density_ns) ns += std::to_string(n) + " ";
            line("density: density_f over M=" + std::to_string(config.M) + " environments at n in [ " +
                 ns + "], |z| < " + format_double(config.thresholds.density_z_max));
        }
    };
    if (config.experiment == "all") {
        line("suites in fixed order:");
        for (const char* n : kExperimentNames)
            if (std::string(n) != "all") plan_for(n);
    } else {
        plan_for(config.experiment);
    }
    line("walk cone size at depth n (upper bound on occupation support): " + format_double(cone));
    return out;
}

}  // namespace rwre
