#include "rwre/dp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "rwre/errors.hpp"
#include "rwre/parallel.hpp"
#include "rwre/walk.hpp"

namespace rwre {

namespace {

// ---------------------------------------------------------------------------
// 1D dense rows. Sites form an arithmetic lattice first + stride*i, which is
// preserved by any step set (stride divides all step differences).
// ---------------------------------------------------------------------------

struct Steps1D {
    std::vector<std::int64_t> z;  // step values in support order
    std::int64_t zmin = 0, zmax = 0, stride = 1;
};

Steps1D steps_1d(const std::vector<IVec>& steps) {
    Steps1D st;
    for (const auto& s : steps) st.z.push_back(s[0]);
    st.zmin = *std::min_element(st.z.begin(), st.z.end());
    st.zmax = *std::max_element(st.z.begin(), st.z.end());
    std::int64_t g = 0;
    for (auto z : st.z) g = std::gcd(g, z - st.zmin);
    st.stride = g == 0 ? 1 : g;
    return st;
}

struct Row1D {
    std::int64_t first = 0;
    std::int64_t stride = 1;
    std::vector<double> w;

    std::int64_t site(std::size_t i) const { return first + stride * std::int64_t(i); }
    // Index of a site, or -1 when off the lattice / out of range.
    std::int64_t index_of(std::int64_t s) const {
        std::int64_t d = s - first;
        if (d < 0 || d % stride != 0) return -1;
        d /= stride;
        return d < std::int64_t(w.size()) ? d : -1;
    }
};

// Per-site transition rows at one level, ascending site order.
void sample_rows_1d(const EnvironmentView& env, std::int64_t level, const Row1D& row,
                    std::vector<double>& pis) {
    const int k = env.num_steps();
    const std::uint64_t lk = env.absorbed_level_key(level);
    pis.resize(row.w.size() * std::size_t(k));
    IVec site(1);
    for (std::size_t i = 0; i < row.w.size(); ++i) {
        site[0] = row.site(i);
        env.transition_from_level_key(lk, env.absolute_site(site),
                                      {pis.data() + i * std::size_t(k), std::size_t(k)});
    }
}

// next(x+z) += cur(x) * pi_x(z), accumulated in fixed step order per slot.
Row1D advance_1d(const Row1D& cur, const Steps1D& st, const std::vector<double>& pis, int k,
                 const DpLimits& limits) {
    Row1D next;
    next.stride = cur.stride;
    next.first = cur.first + st.zmin;
    const std::size_t count = cur.w.size() + std::size_t((st.zmax - st.zmin) / cur.stride);
    if (count > limits.max_support)
        throw ResourceError("DP level support " + std::to_string(count) + " exceeds cap " +
                            std::to_string(limits.max_support));
    next.w.assign(count, 0.0);
    for (int zi = 0; zi < k; ++zi) {
        const std::size_t off = std::size_t((st.z[std::size_t(zi)] - st.zmin) / cur.stride);
        for (std::size_t i = 0; i < cur.w.size(); ++i)
            next.w[i + off] += cur.w[i] * pis[i * std::size_t(k) + std::size_t(zi)];
    }
    return next;
}

// ---------------------------------------------------------------------------
// Generic sparse rows, packed keys ascending. Summation order is fixed
// smallest-to-largest key with steps in support order, so sums are
// bit-reproducible.
// ---------------------------------------------------------------------------

struct SparseRow {
    std::vector<std::int64_t> key;
    std::vector<double> w;
};

std::int64_t pack_delta(const IVec& z) {
    std::int64_t d = 0;
    for (int i = 0; i < z.nu; ++i) d = (d << 21) + z[i];
    return d;
}

// acc += shift(src by delta, scaled entrywise by weights); linear merge.
void merge_shifted(SparseRow& acc, const SparseRow& src, std::int64_t delta,
                   const std::vector<double>& scale) {
    SparseRow out;
    out.key.reserve(acc.key.size() + src.key.size());
    out.w.reserve(acc.key.size() + src.key.size());
    std::size_t a = 0, b = 0;
    while (a < acc.key.size() || b < src.key.size()) {
        std::int64_t ka = a < acc.key.size() ? acc.key[a] : INT64_MAX;
        std::int64_t kb = b < src.key.size() ? src.key[b] + delta : INT64_MAX;
        if (ka < kb) {
            out.key.push_back(ka);
            out.w.push_back(acc.w[a++]);
        } else if (kb < ka) {
            out.key.push_back(kb);
            out.w.push_back(src.w[b] * scale[b]);
            ++b;
        } else {
            out.key.push_back(ka);
            out.w.push_back(acc.w[a] + src.w[b] * scale[b]);
            ++a;
            ++b;
        }
    }
    acc = std::move(out);
}

void check_packable(const EnvironmentView& env, std::int64_t n) {
    std::int64_t reach = (n + 1) * env.support().max_abs_coord();
    for (int i = 0; i < env.nu(); ++i) {
        std::int64_t o = std::abs(env.origin_site()[i]);
        if (o + reach >= (std::int64_t(1) << 19))
            throw ResourceError("DP extent exceeds packable coordinate range");
    }
}

void sample_rows_nd(const EnvironmentView& env, std::int64_t level, const SparseRow& row,
                    std::vector<double>& pis) {
    const int k = env.num_steps();
    const std::uint64_t lk = env.absorbed_level_key(level);
    pis.resize(row.key.size() * std::size_t(k));
    for (std::size_t i = 0; i < row.key.size(); ++i) {
        IVec site = unpack_site(row.key[i], env.nu());
        env.transition_from_level_key(lk, env.absolute_site(site),
                                      {pis.data() + i * std::size_t(k), std::size_t(k)});
    }
}

SparseRow advance_nd(const SparseRow& cur, const std::vector<IVec>& steps,
                     const std::vector<double>& pis, const DpLimits& limits) {
    const int k = static_cast<int>(steps.size());
    SparseRow next;
    std::vector<double> scale(cur.key.size());
    for (int zi = 0; zi < k; ++zi) {
        for (std::size_t i = 0; i < cur.key.size(); ++i)
            scale[i] = pis[i * std::size_t(k) + std::size_t(zi)];
        merge_shifted(next, cur, pack_delta(steps[std::size_t(zi)]), scale);
        if (next.key.size() > limits.max_support)
            throw ResourceError("DP level support exceeds cap " +
                                std::to_string(limits.max_support));
    }
    return next;
}

// ---------------------------------------------------------------------------
// Quenched-walk DP driver. Emits, for k = 0..n, the exact level mean, and for
// k = 0..n-1 the expected centered one-step drift (Pi^k g).
// ---------------------------------------------------------------------------

template <typename EmitMean, typename EmitDrift>
void run_quenched_dp(const EnvironmentView& env, std::int64_t n, const DpLimits& limits,
                     EmitMean&& emit_mean, EmitDrift&& emit_drift) {
    const int k = env.num_steps();
    const int nu = env.nu();
    const RVec v_bar = law_mean_step(env.law());
    const auto& steps = env.support().steps;

    if (nu == 1) {
        const Steps1D st = steps_1d(steps);
        Row1D row;
        row.stride = st.stride;
        row.w = {1.0};
        std::vector<double> pis;
        for (std::int64_t lvl = 0;; ++lvl) {
            RVec mean(1);
            for (std::size_t i = 0; i < row.w.size(); ++i)
                mean[0] += row.w[i] * double(row.site(i));
            emit_mean(lvl, mean);
            if (lvl == n) break;
            sample_rows_1d(env, lvl, row, pis);
            RVec drift(1);
            for (std::size_t i = 0; i < row.w.size(); ++i) {
                double d = 0.0;
                for (int zi = 0; zi < k; ++zi)
                    d += pis[i * std::size_t(k) + std::size_t(zi)] * double(st.z[std::size_t(zi)]);
                drift[0] += row.w[i] * (d - v_bar[0]);
            }
            emit_drift(lvl, drift);
            row = advance_1d(row, st, pis, k, limits);
        }
        return;
    }

    check_packable(env, n);
    SparseRow row;
    row.key = {pack_site(IVec(nu))};
    row.w = {1.0};
    std::vector<double> pis;
    for (std::int64_t lvl = 0;; ++lvl) {
        RVec mean(nu);
        for (std::size_t i = 0; i < row.key.size(); ++i) {
            IVec site = unpack_site(row.key[i], nu);
            for (int c = 0; c < nu; ++c) mean[c] += row.w[i] * double(site[c]);
        }
        emit_mean(lvl, mean);
        if (lvl == n) break;
        sample_rows_nd(env, lvl, row, pis);
        RVec drift(nu);
        for (std::size_t i = 0; i < row.key.size(); ++i) {
            RVec d(nu);
            for (int zi = 0; zi < k; ++zi)
                for (int c = 0; c < nu; ++c)
                    d[c] += pis[i * std::size_t(k) + std::size_t(zi)] *
                            double(steps[std::size_t(zi)][c]);
            for (int c = 0; c < nu; ++c) drift[c] += row.w[i] * (d[c] - v_bar[c]);
        }
        emit_drift(lvl, drift);
        row = advance_nd(row, steps, pis, limits);
    }
}

}  // namespace

RVec law_mean_step(const SiteLaw& law) {
    LawMoments mom = law_moments(law);
    RVec v(law.support.nu);
    for (std::size_t j = 0; j < law.support.steps.size(); ++j)
        for (int i = 0; i < law.support.nu; ++i)
            v[i] += mom.mean[j] * double(law.support.steps[j][i]);
    return v;
}

// ---------------------------------------------------------------------------

double OccupationSlab::prob_at(std::int64_t k, const IVec& site) const {
    const auto& lvl = levels[std::size_t(k)];
    auto it = std::lower_bound(lvl.begin(), lvl.end(), site,
                               [](const auto& e, const IVec& s) { return e.first < s; });
    if (it != lvl.end() && it->first == site) return it->second;
    return 0.0;
}

double OccupationSlab::level_sum(std::int64_t k) const {
    double s = 0.0;
    for (const auto& e : levels[std::size_t(k)]) s += e.second;
    return s;
}

OccupationSlab occupation(const EnvironmentView& env, std::int64_t n, const DpLimits& limits) {
    if (n < 0) throw Error("occupation depth must be nonnegative");
    check_packable(env, n);
    const int nu = env.nu();

    OccupationSlab slab;
    slab.n = n;
    SparseRow row;
    row.key = {pack_site(IVec(nu))};
    row.w = {1.0};
    std::size_t total = 0;
    std::vector<double> pis;
    for (std::int64_t lvl = 0;; ++lvl) {
        std::vector<std::pair<IVec, double>> mat;
        mat.reserve(row.key.size());
        for (std::size_t i = 0; i < row.key.size(); ++i)
            if (row.w[i] != 0.0) mat.emplace_back(unpack_site(row.key[i], nu), row.w[i]);
        total += mat.size();
        if (total > limits.max_support)
            throw ResourceError("occupation slab exceeds cap of " +
                                std::to_string(limits.max_support) + " entries");
        slab.levels.push_back(std::move(mat));
        if (lvl == n) break;
        sample_rows_nd(env, lvl, row, pis);
        row = advance_nd(row, env.support().steps, pis, limits);
    }
    return slab;
}

QuenchedMeanSeries quenched_mean_series(const EnvironmentView& env, std::int64_t n,
                                        const DpLimits& limits) {
    if (n < 1) throw Error("quenched_mean_series needs n >= 1");
    QuenchedMeanSeries out;
    out.n = n;
    out.mean.resize(std::size_t(n) + 1);
    out.drift_series.resize(std::size_t(n));
    run_quenched_dp(
        env, n, limits, [&](std::int64_t k, const RVec& m) { out.mean[std::size_t(k)] = m; },
        [&](std::int64_t k, const RVec& d) { out.drift_series[std::size_t(k)] = d; });
    return out;
}

std::vector<RVec> quenched_mean_at(const EnvironmentView& env,
                                   const std::vector<std::int64_t>& checkpoints,
                                   const DpLimits& limits) {
    if (checkpoints.empty()) return {};
    std::vector<RVec> out(checkpoints.size());
    std::size_t next = 0;
    run_quenched_dp(
        env, checkpoints.back(), limits,
        [&](std::int64_t k, const RVec& m) {
            while (next < checkpoints.size() && checkpoints[next] == k) out[next++] = m;
        },
        [](std::int64_t, const RVec&) {});
    return out;
}

std::vector<double> centered_mean_max_at(const EnvironmentView& env,
                                         const std::vector<std::int64_t>& checkpoints,
                                         const DpLimits& limits) {
    if (checkpoints.empty()) return {};
    std::vector<double> out(checkpoints.size());
    std::size_t next = 0;
    double running_max = 0.0;
    // mean[k] - k v telescopes as the running drift sum, which is exactly
    // zero for noiseless laws instead of carrying the level-mean rounding.
    RVec acc(env.nu());
    run_quenched_dp(
        env, checkpoints.back(), limits,
        [&](std::int64_t k, const RVec&) {
            running_max = std::max(running_max, acc.norm());
            while (next < checkpoints.size() && checkpoints[next] == k) {
                out[next] = running_max / std::sqrt(double(checkpoints[next]));
                ++next;
            }
        },
        [&](std::int64_t, const RVec& d) { acc += d; });
    return out;
}

AnnealedParams annealed_params(const SiteLaw& law) {
    const auto& steps = law.support.steps;
    const int k = static_cast<int>(steps.size());
    const LawMoments mom = law_moments(law);

    AnnealedParams p;
    p.nu = law.support.nu;
    p.mean_step = law_mean_step(law);
    p.step_cov = Mat(p.nu);
    for (int i = 0; i < k; ++i) {
        RVec c = RVec::from(steps[std::size_t(i)]) - p.mean_step;
        p.step_cov += mom.mean[std::size_t(i)] * Mat::outer(c, c);
    }
    p.drift_var = 0.0;
    for (int i = 0; i < k; ++i) {
        RVec ci = RVec::from(steps[std::size_t(i)]) - p.mean_step;
        for (int j = 0; j < k; ++j) {
            RVec cj = RVec::from(steps[std::size_t(j)]) - p.mean_step;
            p.drift_var += ci.dot(cj) * mom.second[std::size_t(i)][std::size_t(j)];
        }
    }

    std::map<IVec, double> q0, qh;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            IVec y = steps[std::size_t(j)] - steps[std::size_t(i)];
            q0[y] += mom.second[std::size_t(i)][std::size_t(j)];
            qh[y] += mom.mean[std::size_t(i)] * mom.mean[std::size_t(j)];
        }
    p.q_at_origin.assign(q0.begin(), q0.end());
    p.q_away.assign(qh.begin(), qh.end());
    return p;
}

CollisionSum collision_sum(const AnnealedParams& params, std::int64_t n, const DpLimits& limits) {
    if (n < 1) throw Error("collision_sum needs n >= 1");
    // Combined displacement support, with per-kernel weights aligned to it.
    std::map<IVec, std::pair<double, double>> combined;  // y -> (q0, qh)
    for (const auto& [y, w] : params.q_at_origin) combined[y].first = w;
    for (const auto& [y, w] : params.q_away) combined[y].second = w;
    std::vector<IVec> ys;
    std::vector<double> w0, wh;
    for (const auto& [y, w] : combined) {
        ys.push_back(y);
        w0.push_back(w.first);
        wh.push_back(w.second);
    }
    const int k = static_cast<int>(ys.size());

    CollisionSum out;
    out.return_prob.reserve(std::size_t(n));
    out.cumulative.reserve(std::size_t(n));
    double running = 0.0;

    if (params.nu == 1) {
        Steps1D st = steps_1d(ys);
        Row1D row;
        row.stride = st.stride;
        row.w = {1.0};
        for (std::int64_t lvl = 0; lvl < n; ++lvl) {
            std::int64_t oi = row.index_of(0);
            double at0 = oi >= 0 ? row.w[std::size_t(oi)] : 0.0;
            out.return_prob.push_back(at0);
            running += at0;
            out.cumulative.push_back(running);
            if (lvl + 1 == n) break;

            Row1D next;
            next.stride = row.stride;
            next.first = row.first + st.zmin;
            const std::size_t count = row.w.size() + std::size_t((st.zmax - st.zmin) / row.stride);
            if (count > limits.max_support)
                throw ResourceError("collision chain support exceeds cap of " +
                                    std::to_string(limits.max_support) + " entries");
            next.w.assign(count, 0.0);
            for (int zi = 0; zi < k; ++zi) {
                const std::size_t off = std::size_t((st.z[std::size_t(zi)] - st.zmin) / row.stride);
                const double q = wh[std::size_t(zi)];
                for (std::size_t i = 0; i < row.w.size(); ++i) next.w[i + off] += row.w[i] * q;
            }
            if (at0 != 0.0) {
                for (int zi = 0; zi < k; ++zi) {
                    std::int64_t t = next.index_of(st.z[std::size_t(zi)]);
                    next.w[std::size_t(t)] += at0 * (w0[std::size_t(zi)] - wh[std::size_t(zi)]);
                }
            }
            row = std::move(next);
        }
        return out;
    }

    std::int64_t max_coord = 0;
    for (const auto& y : ys)
        for (int i = 0; i < params.nu; ++i) max_coord = std::max(max_coord, std::abs(y[i]));
    if ((n + 1) * max_coord >= (std::int64_t(1) << 19))
        throw ResourceError("collision chain extent exceeds packable range");

    SparseRow row;
    row.key = {pack_site(IVec(params.nu))};
    row.w = {1.0};
    const std::int64_t origin_key = pack_site(IVec(params.nu));
    std::vector<double> scale;
    for (std::int64_t lvl = 0; lvl < n; ++lvl) {
        auto it = std::lower_bound(row.key.begin(), row.key.end(), origin_key);
        double at0 = (it != row.key.end() && *it == origin_key)
                         ? row.w[std::size_t(it - row.key.begin())]
                         : 0.0;
        out.return_prob.push_back(at0);
        running += at0;
        out.cumulative.push_back(running);
        if (lvl + 1 == n) break;

        SparseRow next;
        scale.assign(row.key.size(), 0.0);
        for (int zi = 0; zi < k; ++zi) {
            std::fill(scale.begin(), scale.end(), wh[std::size_t(zi)]);
            merge_shifted(next, row, pack_delta(ys[std::size_t(zi)]), scale);
            if (next.key.size() > limits.max_support)
                throw ResourceError("collision chain support exceeds cap of " +
                                    std::to_string(limits.max_support) + " entries");
        }
        if (at0 != 0.0) {
            SparseRow atom;
            atom.key = {origin_key};
            atom.w = {at0};
            std::vector<double> s1(1);
            for (int zi = 0; zi < k; ++zi) {
                s1[0] = w0[std::size_t(zi)] - wh[std::size_t(zi)];
                merge_shifted(next, atom, pack_delta(ys[std::size_t(zi)]), s1);
            }
        }
        row = std::move(next);
    }
    return out;
}

std::uint64_t environment_seed_for(std::uint64_t seed, std::int64_t i) {
    return absorb(mix64(seed ^ kDomainEnvSet), static_cast<std::uint64_t>(i));
}

std::vector<VariancePoint> variance_quenched_mean(const SiteLaw& law, std::uint64_t seed,
                                                  std::int64_t M,
                                                  const std::vector<std::int64_t>& ladder,
                                                  const DpLimits& limits, int threads) {
    if (M < 2) throw Error("variance_quenched_mean needs M >= 2 environments");
    const RVec v_bar = law_mean_step(law);
    std::vector<std::vector<double>> sq(static_cast<std::size_t>(M));  // per env, per ladder point
    parallel_for(M, threads, [&](std::int64_t i) {
        EnvironmentView env(law, environment_seed_for(seed, i));
        std::vector<RVec> means = quenched_mean_at(env, ladder, limits);
        auto& slot = sq[std::size_t(i)];
        slot.resize(ladder.size());
        for (std::size_t j = 0; j < ladder.size(); ++j)
            slot[j] = (means[j] - double(ladder[j]) * v_bar).norm_sq();
    });

    std::vector<VariancePoint> out;
    for (std::size_t j = 0; j < ladder.size(); ++j) {
        double mean = 0.0;
        for (std::int64_t i = 0; i < M; ++i) mean += sq[std::size_t(i)][j];
        mean /= double(M);
        double var = 0.0;
        for (std::int64_t i = 0; i < M; ++i) {
            double d = sq[std::size_t(i)][j] - mean;
            var += d * d;
        }
        var /= double(M - 1);
        out.push_back({ladder[j], mean, std::sqrt(var / double(M))});
    }
    return out;
}

std::vector<VariancePoint> variance_quenched_mean_mc(const SiteLaw& law, std::uint64_t seed,
                                                     std::int64_t M, std::int64_t inner,
                                                     const std::vector<std::int64_t>& ladder,
                                                     int threads) {
    if (M < 2 || inner < 2) throw Error("variance_quenched_mean_mc needs M >= 2 and inner >= 2");
    const RVec v_bar = law_mean_step(law);
    const int nu = law.support.nu;
    const std::int64_t depth = ladder.back();
    std::vector<std::vector<double>> sq(static_cast<std::size_t>(M));
    parallel_for(M, threads, [&](std::int64_t i) {
        EnvironmentView env(law, environment_seed_for(seed, i));
        // Mean and coordinatewise second moment of the endpoint over replicas.
        std::vector<RVec> acc(ladder.size(), RVec(nu));
        std::vector<RVec> acc2(ladder.size(), RVec(nu));
        for (std::int64_t r = 0; r < inner; ++r) {
            Path p = sample_path(env, depth, replica_seed_for(seed ^ 0x6d63u, i * inner + r));
            for (std::size_t j = 0; j < ladder.size(); ++j) {
                RVec x = RVec::from(p.positions[std::size_t(ladder[j])]);
                acc[j] += x;
                for (int c = 0; c < nu; ++c) acc2[j][c] += x[c] * x[c];
            }
        }
        auto& slot = sq[std::size_t(i)];
        slot.resize(ladder.size());
        for (std::size_t j = 0; j < ladder.size(); ++j) {
            RVec m = (1.0 / double(inner)) * acc[j];
            // |m_hat|^2 is biased up by tr(cov)/inner; subtract the unbiased
            // within-environment correction so the cross-check is comparable.
            double tr_cov = 0.0;
            for (int c = 0; c < nu; ++c) {
                double s2 = (acc2[j][c] - double(inner) * m[c] * m[c]) / double(inner - 1);
                tr_cov += s2;
            }
            slot[j] = (m - double(ladder[j]) * v_bar).norm_sq() - tr_cov / double(inner);
        }
    });

    std::vector<VariancePoint> out;
    for (std::size_t j = 0; j < ladder.size(); ++j) {
        double mean = 0.0;
        for (std::int64_t i = 0; i < M; ++i) mean += sq[std::size_t(i)][j];
        mean /= double(M);
        double var = 0.0;
        for (std::int64_t i = 0; i < M; ++i) {
            double d = sq[std::size_t(i)][j] - mean;
            var += d * d;
        }
        var /= double(M - 1);
        out.push_back({ladder[j], mean, std::sqrt(var / double(M))});
    }
    return out;
}

double density_f(const EnvironmentView& env, std::int64_t n, const DpLimits& limits) {
    if (n < 0) throw Error("density_f needs n >= 0");
    if (n == 0) return 1.0;
    check_packable(env, n);
    const int nu = env.nu();
    const int k = env.num_steps();
    const auto& steps = env.support().steps;

    // phi_{-j}(x) = P_{(-j,x)}(walk is at site 0 at level 0); gather backward.
    SparseRow phi;
    phi.key = {pack_site(IVec(nu))};
    phi.w = {1.0};
    std::vector<double> pi(static_cast<std::size_t>(k));
    for (std::int64_t j = 0; j < n; ++j) {
        // Target support: union over z of (current support shifted by -z).
        std::vector<std::int64_t> keys;
        for (int zi = 0; zi < k; ++zi) {
            std::int64_t delta = pack_delta(steps[std::size_t(zi)]);
            std::vector<std::int64_t> merged;
            merged.reserve(keys.size() + phi.key.size());
            std::size_t a = 0, b = 0;
            while (a < keys.size() || b < phi.key.size()) {
                std::int64_t ka = a < keys.size() ? keys[a] : INT64_MAX;
                std::int64_t kb = b < phi.key.size() ? phi.key[b] - delta : INT64_MAX;
                if (ka < kb) merged.push_back(keys[a++]);
                else if (kb < ka) {
                    merged.push_back(kb);
                    ++b;
                } else {
                    merged.push_back(ka);
                    ++a;
                    ++b;
                }
            }
            keys = std::move(merged);
        }
        if (keys.size() > limits.max_support)
            throw ResourceError("density DP support exceeds cap of " +
                                std::to_string(limits.max_support) + " entries");

        SparseRow next;
        next.key = std::move(keys);
        next.w.assign(next.key.size(), 0.0);
        const std::uint64_t lk = env.absorbed_level_key(-(j + 1));
        for (std::size_t i = 0; i < next.key.size(); ++i) {
            IVec x = unpack_site(next.key[i], nu);
            env.transition_from_level_key(lk, env.absolute_site(x), pi);
            double acc = 0.0;
            for (int zi = 0; zi < k; ++zi) {
                std::int64_t target = next.key[i] + pack_delta(steps[std::size_t(zi)]);
                auto it = std::lower_bound(phi.key.begin(), phi.key.end(), target);
                if (it != phi.key.end() && *it == target)
                    acc += pi[std::size_t(zi)] * phi.w[std::size_t(it - phi.key.begin())];
            }
            next.w[i] = acc;
        }
        phi = std::move(next);
    }
    double f = 0.0;
    for (double w : phi.w) f += w;
    return f;
}

}  // namespace rwre
