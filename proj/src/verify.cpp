#include "rwre/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "rwre/errors.hpp"
#include "rwre/parallel.hpp"

namespace rwre {

std::vector<RVec> default_directions(int nu) {
    std::vector<RVec> dirs;
    for (int i = 0; i < nu; ++i) {
        RVec e(nu);
        e[i] = 1.0;
        dirs.push_back(e);
    }
    if (nu > 1) {
        RVec ones(nu);
        for (int i = 0; i < nu; ++i) ones[i] = 1.0 / std::sqrt(double(nu));
        dirs.push_back(ones);
    }
    return dirs;
}

CltReport clt_quenched(const EnvironmentView& env, std::int64_t n, std::int64_t N,
                       const std::vector<RVec>& directions, const std::vector<double>& t_grid,
                       Centering centering, std::uint64_t batch_seed,
                       const CltThresholds& thresholds, int threads, const DpLimits& limits) {
    const int nu = env.nu();
    CltReport rep;
    rep.n = n;
    rep.N = N;
    rep.centering = centering;
    rep.thresholds = thresholds;
    rep.reference = annealed_params(env.law()).step_cov;
    const RVec v_bar = law_mean_step(env.law());

    // Time-grid indices [n t] and the centerings at those indices.
    std::vector<std::int64_t> idx;
    for (double t : t_grid) {
        if (t < 0.0 || t > 1.0) throw IndexError("t grid point outside [0,1]");
        idx.push_back(static_cast<std::int64_t>(std::floor(double(n) * t)));
    }
    std::vector<std::int64_t> uniq = idx;
    uniq.push_back(n);  // endpoint always evaluated
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

    std::vector<RVec> center(uniq.size());
    if (centering == Centering::Deterministic) {
        for (std::size_t j = 0; j < uniq.size(); ++j) center[j] = double(uniq[j]) * v_bar;
    } else {
        center = quenched_mean_at(env, uniq, limits);
    }
    auto center_at = [&](std::int64_t k) {
        auto it = std::lower_bound(uniq.begin(), uniq.end(), k);
        return center[std::size_t(it - uniq.begin())];
    };

    const double root_n = std::sqrt(double(n));
    const std::size_t T = t_grid.size();
    // Per-replica scaled values at the grid points plus the endpoint.
    std::vector<RVec> vals(std::size_t(N) * (T + 1));
    parallel_for(N, threads, [&](std::int64_t i) {
        Path p = sample_path(env, n, replica_seed_for(batch_seed, i));
        for (std::size_t j = 0; j < T; ++j) {
            std::int64_t k = idx[j];
            vals[std::size_t(i) * (T + 1) + j] =
                (1.0 / root_n) * (RVec::from(p.positions[std::size_t(k)]) - center_at(k));
        }
        vals[std::size_t(i) * (T + 1) + T] =
            (1.0 / root_n) * (RVec::from(p.positions[std::size_t(n)]) - center_at(n));
    });

    // Endpoint covariance (uncentered second moment has mean ~0; use the
    // sample covariance around the empirical mean).
    RVec mean(nu);
    for (std::int64_t i = 0; i < N; ++i) mean += vals[std::size_t(i) * (T + 1) + T];
    mean = (1.0 / double(N)) * mean;
    Mat cov(nu);
    for (std::int64_t i = 0; i < N; ++i) {
        RVec d = vals[std::size_t(i) * (T + 1) + T] - mean;
        cov += Mat::outer(d, d);
    }
    cov = (1.0 / double(N - 1)) * cov;
    rep.covariance = cov;
    const double ref_norm = rep.reference.frobenius();
    std::int64_t max_idx = 0;
    for (auto k : idx) max_idx = std::max(max_idx, k);
    rep.degenerate_input = (ref_norm == 0.0) || max_idx == 0;
    rep.cov_rel_error = ref_norm > 0.0 ? (cov - rep.reference).frobenius() / ref_norm : 0.0;

    // Directional KS against the standard normal.
    std::vector<double> proj(static_cast<std::size_t>(N));
    for (const auto& theta : directions) {
        double scale = rep.reference.quad(theta);
        if (scale <= 0.0)
            throw DegenerateDirectionError("direction with theta^T D theta = 0");
        const double inv = 1.0 / std::sqrt(scale);
        for (std::int64_t i = 0; i < N; ++i)
            proj[std::size_t(i)] = vals[std::size_t(i) * (T + 1) + T].dot(theta) * inv;
        KsResult ks = ks_normal_test(proj);
        DirectionKs dk;
        dk.direction = theta;
        dk.statistic = ks.statistic;
        dk.p_value = ks.p_value;
        dk.p_adjusted = std::min(1.0, ks.p_value * double(directions.size()));
        rep.ks.push_back(dk);
    }

    // Correlation of consecutive disjoint increments, per coordinate.
    std::vector<double> a(static_cast<std::size_t>(N)), b(a);
    for (std::size_t j = 0; j + 2 < T; ++j) {
        if (idx[j] == idx[j + 1] || idx[j + 1] == idx[j + 2]) continue;
        IncrementCorr ic;
        ic.t0 = t_grid[j];
        ic.t1 = t_grid[j + 1];
        ic.t2 = t_grid[j + 2];
        for (int c = 0; c < nu; ++c) {
            for (std::int64_t i = 0; i < N; ++i) {
                const RVec& v0 = vals[std::size_t(i) * (T + 1) + j];
                const RVec& v1 = vals[std::size_t(i) * (T + 1) + j + 1];
                const RVec& v2 = vals[std::size_t(i) * (T + 1) + j + 2];
                a[std::size_t(i)] = v1[c] - v0[c];
                b[std::size_t(i)] = v2[c] - v1[c];
            }
            ic.max_abs_corr = std::max(ic.max_abs_corr, std::abs(pearson_correlation(a, b)));
        }
        rep.increments.push_back(ic);
    }

    bool pass = rep.cov_rel_error < thresholds.cov_rel_err_max;
    for (const auto& dk : rep.ks) pass = pass && dk.p_adjusted > thresholds.ks_p_min;
    for (const auto& ic : rep.increments)
        pass = pass && ic.max_abs_corr < thresholds.increment_corr_max;
    rep.pass = pass;
    return rep;
}

ExponentFit centering_decay(const EnvironmentView& env, const std::vector<std::int64_t>& ladder,
                            const DpLimits& limits) {
    if (ladder.size() < 4) throw Error("centering_decay needs a ladder of at least 4 points");
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (ladder[i] <= ladder[i - 1]) throw Error("ladder must be increasing");
    std::vector<double> values = centered_mean_max_at(env, ladder, limits);
    std::vector<FitPoint> pts;
    for (std::size_t i = 0; i < ladder.size(); ++i)
        pts.push_back({double(ladder[i]), values[i], 0.0});
    return fit_log_log(std::move(pts));
}

ScalingReport variance_scaling(const SiteLaw& law, std::uint64_t seed,
                               const std::vector<std::int64_t>& ladder, std::int64_t M,
                               const DpLimits& limits, int threads) {
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (ladder[i] <= ladder[i - 1]) throw Error("ladder must be increasing");
    ScalingReport rep;

    // Variance of the quenched mean; ladder points that blow the support cap
    // are dropped from the back (recorded), never approximated.
    std::vector<std::int64_t> vlad = ladder;
    for (;;) {
        try {
            rep.variance_points = variance_quenched_mean(law, seed, M, vlad, limits, threads);
            break;
        } catch (const ResourceError&) {
            if (vlad.size() <= 1) throw;
            vlad.pop_back();
            rep.variance_capped_after = std::int64_t(vlad.size());
        }
    }
    std::vector<FitPoint> vpts;
    for (const auto& p : rep.variance_points) {
        double root = std::sqrt(std::max(p.value, 0.0));
        double se = root > 0.0 ? 0.5 * p.se / root : 0.0;
        vpts.push_back({double(p.n), root, se});
    }
    rep.variance_fit = fit_log_log(std::move(vpts));

    AnnealedParams params = annealed_params(law);
    std::vector<std::int64_t> clad = ladder;
    CollisionSum cs;
    for (;;) {
        try {
            cs = collision_sum(params, clad.back(), limits);
            break;
        } catch (const ResourceError&) {
            if (clad.size() <= 1) throw;
            clad.pop_back();
            rep.collision_capped_after = std::int64_t(clad.size());
        }
    }
    std::vector<FitPoint> cpts;
    for (std::int64_t n : clad) {
        double cum = cs.cumulative[std::size_t(n - 1)];
        rep.collision_ns.push_back(n);
        rep.collision_cumulative.push_back(cum);
        cpts.push_back({double(n), cum, 0.0});
    }
    rep.collision_fit = fit_log_log(std::move(cpts));
    return rep;
}

MgHypothesesReport mg_hypotheses(const EnvironmentView& env, const Path& path,
                                 const ResolventParams& params, const std::vector<double>& t_grid,
                                 const Mat& gamma_ref,
                                 const std::vector<double>& lindeberg_thresholds,
                                 const DpLimits& limits) {
    const int nu = env.nu();
    const int ks = env.num_steps();
    const std::int64_t n = path.n;
    const auto& steps = env.support().steps;

    MgHypothesesReport rep;
    rep.n = n;
    rep.epsilon = params.epsilon;
    rep.gamma_ref = gamma_ref;

    // h_eps at every child of every visited site, one shared sweep.
    std::vector<std::vector<IVec>> required(std::size_t(n) + 1);
    required[0] = {path.positions[0]};
    for (std::int64_t l = 1; l <= n; ++l)
        for (const auto& z : steps) required[std::size_t(l)].push_back(path.positions[std::size_t(l - 1)] + z);
    ResolventField field(env, required, params, limits);

    const double root_n = std::sqrt(double(n));
    std::vector<Mat> cond_cov(static_cast<std::size_t>(n), Mat(nu));  // C_k = E(Y_k Y_k^T | F_{k-1}), scaled
    rep.lindeberg.reserve(lindeberg_thresholds.size());
    std::vector<double> lind(lindeberg_thresholds.size(), 0.0);
    std::vector<double> pi(static_cast<std::size_t>(ks));
    std::vector<RVec> y(static_cast<std::size_t>(ks), RVec(nu));
    for (std::int64_t k = 1; k <= n; ++k) {
        const IVec& a = path.positions[std::size_t(k - 1)];
        env.transition_into(k - 1, a, pi);
        RVec drift(nu);
        for (int zi = 0; zi < ks; ++zi)
            for (int c = 0; c < nu; ++c)
                drift[c] += pi[std::size_t(zi)] * double(steps[std::size_t(zi)][c]);
        RVec pih(nu);
        for (int zi = 0; zi < ks; ++zi)
            pih += pi[std::size_t(zi)] * field.h_at(k, a + steps[std::size_t(zi)]);

        RVec cond_mean(nu);
        Mat ck(nu);
        for (int zi = 0; zi < ks; ++zi) {
            y[std::size_t(zi)] = RVec::from(steps[std::size_t(zi)]) - drift +
                                 (field.h_at(k, a + steps[std::size_t(zi)]) - pih);
            ck += pi[std::size_t(zi)] * Mat::outer(y[std::size_t(zi)], y[std::size_t(zi)]);
            cond_mean += pi[std::size_t(zi)] * y[std::size_t(zi)];
            const double mag = y[std::size_t(zi)].norm() / root_n;
            for (std::size_t ti = 0; ti < lindeberg_thresholds.size(); ++ti)
                if (mag >= lindeberg_thresholds[ti])
                    lind[ti] += pi[std::size_t(zi)] * mag * mag;
        }
        cond_cov[std::size_t(k - 1)] = (1.0 / double(n)) * ck;
        rep.max_cond_mean = std::max(rep.max_cond_mean, cond_mean.norm());
        rep.max_increment =
            std::max(rep.max_increment, y[std::size_t(path.steps[std::size_t(k - 1)])].norm() / root_n);
    }
    for (std::size_t ti = 0; ti < lindeberg_thresholds.size(); ++ti)
        rep.lindeberg.emplace_back(lindeberg_thresholds[ti], lind[ti]);

    const double gnorm = gamma_ref.frobenius();
    Mat running(nu);
    std::int64_t done = 0;
    for (double t : t_grid) {
        auto kt = static_cast<std::int64_t>(std::floor(double(n) * t));
        while (done < kt) {
            running += cond_cov[std::size_t(done)];
            ++done;
        }
        QvPoint qp;
        qp.t = t;
        qp.qv = running;
        qp.rel_dev = gnorm > 0.0 ? (running - t * gamma_ref).frobenius() / gnorm : 0.0;
        if (t > 0.0) rep.sup_rel_dev = std::max(rep.sup_rel_dev, qp.rel_dev);
        rep.qv_curve.push_back(qp);
    }
    return rep;
}

CollisionIdentityReport collision_identity_test(const SiteLaw& law, std::int64_t n,
                                                std::int64_t M, std::int64_t N_pairs,
                                                std::uint64_t seed, double z_max,
                                                const DpLimits& limits, int threads) {
    CollisionIdentityReport rep;
    rep.n = n;
    rep.M = M;
    rep.N_pairs = N_pairs;
    rep.z_max = z_max;

    AnnealedParams params = annealed_params(law);
    CollisionSum cs = collision_sum(params, n, limits);
    rep.exact = params.drift_var * cs.cumulative[std::size_t(n - 1)];

    auto v = variance_quenched_mean(law, seed, M, {n}, limits, threads);
    rep.dp_mean = v[0].value;
    rep.dp_se = v[0].se;

    // Pair simulation: fresh environment per pair, collision count over
    // k = 0..n-1 (the k = 0 term is 1 by construction).
    std::vector<double> counts(static_cast<std::size_t>(N_pairs));
    parallel_for(N_pairs, threads, [&](std::int64_t i) {
        EnvironmentView env(law, environment_seed_for(seed ^ 0x70616972ull, i));
        auto [pa, pb] = sample_pair(env, n, replica_seed_for(seed, 2 * i),
                                    replica_seed_for(seed, 2 * i + 1));
        double c = 0.0;
        for (std::int64_t k = 0; k < n; ++k)
            if (pa.positions[std::size_t(k)] == pb.positions[std::size_t(k)]) c += 1.0;
        counts[std::size_t(i)] = c;
    });
    MeanSe mc = mean_se(counts);
    rep.mc_mean = params.drift_var * mc.mean;
    rep.mc_se = params.drift_var * mc.se;

    auto zscore = [](double a, double b, double se) { return se > 0.0 ? (a - b) / se : 0.0; };
    rep.z_dp = zscore(rep.dp_mean, rep.exact, rep.dp_se);
    rep.z_mc = zscore(rep.mc_mean, rep.exact, rep.mc_se);
    double comb = std::sqrt(rep.dp_se * rep.dp_se + rep.mc_se * rep.mc_se);
    rep.z_dp_mc = zscore(rep.dp_mean, rep.mc_mean, comb > 0.0 ? comb : 0.0);
    rep.pass = std::abs(rep.z_dp) < z_max && std::abs(rep.z_mc) < z_max &&
               std::abs(rep.z_dp_mc) < z_max;
    return rep;
}

ErgodicReport ergodic_average(const EnvironmentView& env, const Path& path,
                              const std::string& observable, std::int64_t baseline_samples) {
    const RVec v_bar = law_mean_step(env.law());
    const int ks = env.num_steps();

    // Psi(level, site): a bounded local functional of the view at the walker.
    auto make_psi = [&]() -> std::function<double(std::int64_t, const IVec&)> {
        if (observable.rfind("pi:", 0) == 0) {
            int j = std::stoi(observable.substr(3));
            if (j < 0 || j >= ks) throw UnknownObservableError("pi index out of range");
            return [&, j](std::int64_t l, const IVec& s) {
                return env.transition(l, s)[std::size_t(j)];
            };
        }
        if (observable == "drift_sq") {
            return [&](std::int64_t l, const IVec& s) {
                return (env.local_drift(l, s) - v_bar).norm_sq();
            };
        }
        if (observable.rfind("drift:", 0) == 0) {
            int c = std::stoi(observable.substr(6));
            if (c < 0 || c >= env.nu()) throw UnknownObservableError("drift coordinate out of range");
            return [&, c](std::int64_t l, const IVec& s) { return env.local_drift(l, s)[c]; };
        }
        throw UnknownObservableError("unknown observable '" + observable + "'");
    };
    auto psi = make_psi();

    ErgodicReport rep;
    rep.observable = observable;
    rep.running_avg.reserve(std::size_t(path.n));
    double acc = 0.0, acc2 = 0.0;
    for (std::int64_t m = 0; m < path.n; ++m) {
        double v = psi(m, path.positions[std::size_t(m)]);
        acc += v;
        acc2 += v * v;
        rep.running_avg.push_back(acc / double(m + 1));
    }
    rep.final_avg = rep.running_avg.empty() ? 0.0 : rep.running_avg.back();
    if (path.n > 1) {
        double m1 = acc / double(path.n);
        double var = (acc2 - double(path.n) * m1 * m1) / double(path.n - 1);
        rep.path_se = std::sqrt(std::max(var, 0.0) / double(path.n));
    }

    // Fresh sites beyond the walk's levels give an i.i.d. baseline.
    std::vector<double> base(static_cast<std::size_t>(baseline_samples));
    for (std::int64_t j = 0; j < baseline_samples; ++j)
        base[std::size_t(j)] = psi(path.n + 1 + j, IVec(env.nu()));
    MeanSe ms = mean_se(base);
    rep.baseline_mean = ms.mean;
    rep.baseline_se = ms.se;
    rep.baseline_samples = baseline_samples;
    return rep;
}

}  // namespace rwre
