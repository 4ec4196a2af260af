#include "rwre/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rwre/errors.hpp"
#include "rwre/parallel.hpp"

namespace rwre {

namespace {

std::int64_t pack_delta(const IVec& z) {
    std::int64_t d = 0;
    for (int i = 0; i < z.nu; ++i) d = (d << 21) + z[i];
    return d;
}

void validate_params(const SiteLaw& law, const ResolventParams& p) {
    if (!(p.epsilon > 0.0)) throw Error("resolvent epsilon must be positive");
    if (!(p.tol > 0.0)) throw Error("resolvent tol must be positive");
    ResolventParams min = make_resolvent_params(law, p.epsilon, p.tol);
    if (p.K < min.K)
        throw Error("resolvent depth K=" + std::to_string(p.K) +
                     " below the guaranteed-tail bound " + std::to_string(min.K));
}

}  // namespace

double g_sup_bound(const SiteLaw& law) {
    // Deterministic laws have D(w) = v identically, so g vanishes.
    if (law.kind == LawKind::Deterministic) return 0.0;
    RVec v_bar = law_mean_step(law);
    double m = 0.0;
    for (const auto& z : law.support.steps)
        m = std::max(m, (RVec::from(z) - v_bar).norm());
    return 2.0 * m;
}

ResolventParams make_resolvent_params(const SiteLaw& law, double epsilon, double tol) {
    if (!(epsilon > 0.0)) throw Error("resolvent epsilon must be positive");
    if (!(tol > 0.0)) throw Error("resolvent tol must be positive");
    ResolventParams p;
    p.epsilon = epsilon;
    p.tol = tol;
    double gmax = g_sup_bound(law);
    if (gmax == 0.0) {
        p.K = 0;  // g vanishes identically; h_eps is the zero function
        return p;
    }
    double ratio = gmax / (epsilon * tol);
    p.K = ratio <= 1.0
              ? 1
              : static_cast<std::int64_t>(std::ceil(std::log(ratio) / std::log1p(epsilon)));
    p.K = std::max<std::int64_t>(p.K, 1);
    return p;
}

RVec resolvent_h(const EnvironmentView& at_site, const ResolventParams& params,
                 const DpLimits& limits) {
    validate_params(at_site.law(), params);
    const int nu = at_site.nu();
    if (params.K == 0) return RVec(nu);
    QuenchedMeanSeries qms = quenched_mean_series(at_site, params.K, limits);
    RVec h(nu);
    const double lam = 1.0 / (1.0 + params.epsilon);
    double w = 1.0;
    for (std::int64_t k = 1; k <= params.K; ++k) {
        w *= lam;
        h += w * qms.drift_series[std::size_t(k - 1)];
    }
    return h;
}

// ---------------------------------------------------------------------------
// ResolventField: one backward sweep over the union of downward cones from
// the required sites, truncated K levels below the highest required level.
// ---------------------------------------------------------------------------

ResolventField::ResolventField(const EnvironmentView& env,
                               const std::vector<std::vector<IVec>>& required,
                               const ResolventParams& params, const DpLimits& limits)
    : eps_(params.epsilon) {
    validate_params(env.law(), params);
    if (required.empty()) throw Error("ResolventField needs at least level 0");
    const std::int64_t top = static_cast<std::int64_t>(required.size()) - 1;
    const int nu = env.nu();
    const int k = env.num_steps();
    const auto& steps = env.support().steps;
    const RVec v_bar = law_mean_step(env.law());
    values_.resize(required.size());

    if (params.K == 0) {
        for (std::int64_t l = 0; l <= top; ++l) {
            auto req = required[std::size_t(l)];
            std::sort(req.begin(), req.end());
            for (const auto& s : req) values_[std::size_t(l)].emplace_back(s, RVec(nu));
        }
        return;
    }
    const std::int64_t bottom = top + params.K - 1;

    if (nu == 1) {
        std::vector<std::int64_t> z;
        for (const auto& s : steps) z.push_back(s[0]);
        const std::int64_t zmin = *std::min_element(z.begin(), z.end());
        const std::int64_t zmax = *std::max_element(z.begin(), z.end());
        std::int64_t g = 0;
        for (auto v : z) g = std::gcd(g, v - zmin);
        if (g == 0) g = 1;

        std::vector<std::int64_t> lo(std::size_t(bottom) + 1), hi(std::size_t(bottom) + 1);
        for (std::int64_t l = 0; l <= bottom; ++l) {
            bool have = false;
            if (l > 0) {
                lo[std::size_t(l)] = lo[std::size_t(l - 1)] + zmin;
                hi[std::size_t(l)] = hi[std::size_t(l - 1)] + zmax;
                have = true;
            }
            if (l <= top) {
                for (const auto& s : required[std::size_t(l)]) {
                    if (!have) {
                        lo[std::size_t(l)] = hi[std::size_t(l)] = s[0];
                        have = true;
                    } else {
                        lo[std::size_t(l)] = std::min(lo[std::size_t(l)], s[0]);
                        hi[std::size_t(l)] = std::max(hi[std::size_t(l)], s[0]);
                    }
                }
            }
            if (!have) throw Error("ResolventField: level without sites");
            if ((hi[std::size_t(l)] - lo[std::size_t(l)]) % g != 0)
                throw Error("ResolventField: required site off the reachable lattice");
            std::size_t count = std::size_t((hi[std::size_t(l)] - lo[std::size_t(l)]) / g) + 1;
            if (count > limits.max_support)
                throw ResourceError("resolvent sweep level support exceeds cap");
        }

        std::vector<double> below, row, pi(static_cast<std::size_t>(k));
        for (std::int64_t l = bottom; l >= 0; --l) {
            const std::size_t count = std::size_t((hi[std::size_t(l)] - lo[std::size_t(l)]) / g) + 1;
            row.assign(count, 0.0);
            const std::uint64_t lk = env.absorbed_level_key(l);
            const double inv = 1.0 / (1.0 + params.epsilon);
            IVec site(1);
            for (std::size_t i = 0; i < count; ++i) {
                const std::int64_t s = lo[std::size_t(l)] + g * std::int64_t(i);
                site[0] = s;
                env.transition_from_level_key(lk, env.absolute_site(site), pi);
                double acc = -v_bar[0];
                for (int zi = 0; zi < k; ++zi) acc += pi[std::size_t(zi)] * double(z[std::size_t(zi)]);
                if (l < bottom) {
                    for (int zi = 0; zi < k; ++zi) {
                        const std::size_t j =
                            std::size_t((s + z[std::size_t(zi)] - lo[std::size_t(l + 1)]) / g);
                        acc += pi[std::size_t(zi)] * below[j];
                    }
                }
                row[i] = acc * inv;
            }
            if (l <= top) {
                auto req = required[std::size_t(l)];
                std::sort(req.begin(), req.end());
                req.erase(std::unique(req.begin(), req.end()), req.end());
                auto& out = values_[std::size_t(l)];
                for (const auto& s : req) {
                    RVec h(1);
                    h[0] = row[std::size_t((s[0] - lo[std::size_t(l)]) / g)];
                    out.emplace_back(s, h);
                }
            }
            below = std::move(row);
            row.clear();
        }
        return;
    }

    // Generic sparse sweep (nu >= 2): needed-site keys per level, then a
    // backward pass with binary-search child lookups.
    std::vector<std::vector<std::int64_t>> need(std::size_t(bottom) + 1);
    for (std::int64_t l = 0; l <= bottom; ++l) {
        std::vector<std::int64_t> keys;
        if (l > 0) {
            for (const auto& zst : steps) {
                const std::int64_t delta = pack_delta(zst);
                std::vector<std::int64_t> merged;
                const auto& prev = need[std::size_t(l - 1)];
                merged.reserve(keys.size() + prev.size());
                std::size_t a = 0, b = 0;
                while (a < keys.size() || b < prev.size()) {
                    std::int64_t ka = a < keys.size() ? keys[a] : INT64_MAX;
                    std::int64_t kb = b < prev.size() ? prev[b] + delta : INT64_MAX;
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
        }
        if (l <= top) {
            for (const auto& s : required[std::size_t(l)]) {
                std::int64_t key = pack_site(s);
                auto it = std::lower_bound(keys.begin(), keys.end(), key);
                if (it == keys.end() || *it != key) keys.insert(it, key);
            }
        }
        if (keys.empty()) throw Error("ResolventField: level without sites");
        if (keys.size() > limits.max_support)
            throw ResourceError("resolvent sweep level support exceeds cap");
        need[std::size_t(l)] = std::move(keys);
    }

    std::vector<double> below, row, pi(static_cast<std::size_t>(k));
    for (std::int64_t l = bottom; l >= 0; --l) {
        const auto& keys = need[std::size_t(l)];
        row.assign(keys.size() * std::size_t(nu), 0.0);
        const std::uint64_t lk = env.absorbed_level_key(l);
        const double inv = 1.0 / (1.0 + params.epsilon);
        for (std::size_t i = 0; i < keys.size(); ++i) {
            IVec site = unpack_site(keys[i], nu);
            env.transition_from_level_key(lk, env.absolute_site(site), pi);
            RVec acc(nu);
            for (int zi = 0; zi < k; ++zi)
                for (int c = 0; c < nu; ++c)
                    acc[c] += pi[std::size_t(zi)] * double(steps[std::size_t(zi)][c]);
            acc -= v_bar;
            if (l < bottom) {
                const auto& nxt = need[std::size_t(l + 1)];
                for (int zi = 0; zi < k; ++zi) {
                    std::int64_t target = keys[i] + pack_delta(steps[std::size_t(zi)]);
                    auto it = std::lower_bound(nxt.begin(), nxt.end(), target);
                    const std::size_t j = std::size_t(it - nxt.begin());
                    for (int c = 0; c < nu; ++c)
                        acc[c] += pi[std::size_t(zi)] * below[j * std::size_t(nu) + std::size_t(c)];
                }
            }
            for (int c = 0; c < nu; ++c) row[i * std::size_t(nu) + std::size_t(c)] = acc[c] * inv;
        }
        if (l <= top) {
            auto req = required[std::size_t(l)];
            std::sort(req.begin(), req.end());
            req.erase(std::unique(req.begin(), req.end()), req.end());
            auto& out = values_[std::size_t(l)];
            for (const auto& s : req) {
                std::int64_t key = pack_site(s);
                auto it = std::lower_bound(keys.begin(), keys.end(), key);
                const std::size_t j = std::size_t(it - keys.begin());
                RVec h(nu);
                for (int c = 0; c < nu; ++c) h[c] = row[j * std::size_t(nu) + std::size_t(c)];
                out.emplace_back(s, h);
            }
        }
        below = std::move(row);
        row.clear();
    }
}

const RVec& ResolventField::h_at(std::int64_t level, const IVec& site) const {
    const auto& lvl = values_[std::size_t(level)];
    auto it = std::lower_bound(lvl.begin(), lvl.end(), site,
                               [](const auto& e, const IVec& s) { return e.first < s; });
    if (it == lvl.end() || !(it->first == site))
        throw Error("ResolventField: site " + site.str() + " was not requested at level " +
                    std::to_string(level));
    return it->second;
}

RVec H_eps(const EnvironmentView& env, std::int64_t level, const IVec& a, const IVec& b,
           const ResolventParams& params, const DpLimits& limits) {
    if (env.support().index_of(b - a) < 0)
        throw InvalidStepError("displacement " + (b - a).str() + " is not an allowed step");
    RVec h_a = resolvent_h(env.shifted(level, a), params, limits);
    RVec h_b = resolvent_h(env.shifted(level + 1, b), params, limits);
    RVec g_a = env.local_drift(level, a) - law_mean_step(env.law());
    return h_b - (1.0 + params.epsilon) * h_a + g_a;
}

namespace {

DecompositionRecord decompose_from_field(const Path& path, const EnvironmentView& env,
                                         const ResolventParams& params,
                                         const ResolventField& field) {
    const int nu = env.nu();
    const std::int64_t n = path.n;
    const RVec v_bar = law_mean_step(env.law());

    DecompositionRecord rec;
    rec.n = n;
    rec.epsilon = params.epsilon;
    rec.K = params.K;
    RVec sum_d(nu), m_eps(nu), s_eps(nu);
    RVec h_prev = field.h_at(0, path.positions[0]);
    const RVec h_first = h_prev;
    for (std::int64_t k = 0; k < n; ++k) {
        const IVec& a = path.positions[std::size_t(k)];
        RVec d = env.local_drift(k, a);
        RVec g = d - v_bar;
        sum_d += d;
        s_eps += h_prev;
        RVec h_next = field.h_at(k + 1, path.positions[std::size_t(k + 1)]);
        m_eps += h_next - (1.0 + params.epsilon) * h_prev + g;
        h_prev = h_next;
    }
    rec.xbar = RVec::from(path.positions[std::size_t(n)]) - sum_d;
    rec.m_eps = m_eps;
    rec.s_eps = s_eps;
    rec.r_eps = h_first - h_prev;
    RVec centered = RVec::from(path.positions[std::size_t(n)]) - double(n) * v_bar;
    rec.identity_residual =
        (centered - (rec.xbar + rec.m_eps + params.epsilon * rec.s_eps + rec.r_eps)).norm();
    rec.r_n = centered - rec.xbar - rec.m_eps;
    return rec;
}

}  // namespace

DecompositionRecord decompose(const Path& path, const EnvironmentView& env,
                              const ResolventParams& params, const DpLimits& limits) {
    std::vector<std::vector<IVec>> required(std::size_t(path.n) + 1);
    for (std::int64_t l = 0; l <= path.n; ++l)
        required[std::size_t(l)] = {path.positions[std::size_t(l)]};
    ResolventField field(env, required, params, limits);
    return decompose_from_field(path, env, params, field);
}

bool reachable(const StepSupport& support, std::int64_t m, const IVec& x,
               const DpLimits& limits) {
    if (m < 0) return false;
    if (m == 0) {
        for (int i = 0; i < x.nu; ++i)
            if (x[i] != 0) return false;
        return true;
    }
    std::vector<std::int64_t> cur = {pack_site(IVec(support.nu))};
    for (std::int64_t l = 0; l < m; ++l) {
        std::vector<std::int64_t> next;
        for (const auto& z : support.steps) {
            const std::int64_t delta = pack_delta(z);
            std::vector<std::int64_t> merged;
            merged.reserve(next.size() + cur.size());
            std::size_t a = 0, b = 0;
            while (a < next.size() || b < cur.size()) {
                std::int64_t ka = a < next.size() ? next[a] : INT64_MAX;
                std::int64_t kb = b < cur.size() ? cur[b] + delta : INT64_MAX;
                if (ka < kb) merged.push_back(next[a++]);
                else if (kb < ka) {
                    merged.push_back(kb);
                    ++b;
                } else {
                    merged.push_back(ka);
                    ++a;
                    ++b;
                }
            }
            next = std::move(merged);
        }
        if (next.size() > limits.max_support)
            throw ResourceError("reachability set exceeds support cap");
        cur = std::move(next);
    }
    return std::binary_search(cur.begin(), cur.end(), pack_site(x));
}

RVec chi(const EnvironmentView& env, std::int64_t m, const IVec& x,
         const ResolventParams& params, const DpLimits& limits) {
    if (!reachable(env.support(), m, x, limits))
        throw UnreachableError("site " + x.str() + " is not reachable in " + std::to_string(m) +
                               " steps");
    if (m == 0) return RVec(env.nu());
    std::vector<std::vector<IVec>> required(std::size_t(m) + 1);
    required[0] = {IVec(env.nu())};
    required[std::size_t(m)] = {x};
    ResolventField field(env, required, params, limits);
    return field.h_at(0, IVec(env.nu())) - field.h_at(m, x);
}

RVec chi_path_sum(const EnvironmentView& env, const std::vector<int>& step_indices,
                  const ResolventParams& params, const DpLimits& limits) {
    const std::int64_t m = static_cast<std::int64_t>(step_indices.size());
    std::vector<std::vector<IVec>> required(std::size_t(m) + 1);
    IVec pos(env.nu());
    required[0] = {pos};
    for (std::int64_t l = 0; l < m; ++l) {
        pos += env.support().steps[std::size_t(step_indices[std::size_t(l)])];
        required[std::size_t(l + 1)] = {pos};
    }
    ResolventField field(env, required, params, limits);
    RVec sum(env.nu());
    pos = IVec(env.nu());
    for (std::int64_t l = 0; l < m; ++l) {
        IVec next = pos + env.support().steps[std::size_t(step_indices[std::size_t(l)])];
        sum += field.h_at(l, pos) - field.h_at(l + 1, next);
        pos = next;
    }
    return sum;
}

double cocycle_residual(const Path& path, const EnvironmentView& env,
                        const ResolventParams& params, CocycleDetail* detail,
                        const DpLimits& limits) {
    const std::int64_t n = path.n;
    const int nu = env.nu();
    const RVec v_bar = law_mean_step(env.law());

    // [n v] target, componentwise floor on the E-part.
    IVec y(nu);
    for (int i = 0; i < nu; ++i) y[i] = static_cast<std::int64_t>(std::floor(double(n) * v_bar[i]));

    // Snap to the nearest reachable site at level n when needed (flagged).
    bool snapped = false;
    if (!reachable(env.support(), n, y, limits)) {
        snapped = true;
        // Walk the exact reachable set; nearest by Euclidean distance, ties
        // resolved by site order.
        std::vector<std::int64_t> cur = {pack_site(IVec(nu))};
        for (std::int64_t l = 0; l < n; ++l) {
            std::vector<std::int64_t> next;
            for (const auto& z : env.support().steps) {
                const std::int64_t delta = pack_delta(z);
                std::vector<std::int64_t> merged;
                std::size_t a = 0, b = 0;
                while (a < next.size() || b < cur.size()) {
                    std::int64_t ka = a < next.size() ? next[a] : INT64_MAX;
                    std::int64_t kb = b < cur.size() ? cur[b] + delta : INT64_MAX;
                    if (ka < kb) merged.push_back(next[a++]);
                    else if (kb < ka) {
                        merged.push_back(kb);
                        ++b;
                    } else {
                        merged.push_back(ka);
                        ++a;
                        ++b;
                    }
                }
                next = std::move(merged);
            }
            cur = std::move(next);
        }
        double best = -1.0;
        IVec best_site(nu);
        for (auto key : cur) {
            IVec s = unpack_site(key, nu);
            double d = (s - y).norm2();
            if (best < 0.0 || d < best) {
                best = d;
                best_site = s;
            }
        }
        y = best_site;
    }

    std::vector<std::vector<IVec>> required(std::size_t(n) + 1);
    for (std::int64_t l = 0; l <= n; ++l) required[std::size_t(l)] = {path.positions[std::size_t(l)]};
    required[std::size_t(n)].push_back(y);
    ResolventField field(env, required, params, limits);
    DecompositionRecord rec = decompose_from_field(path, env, params, field);

    const RVec h0 = field.h_at(0, path.positions[0]);
    const RVec hy = field.h_at(n, y);
    const RVec hx = field.h_at(n, path.positions[std::size_t(n)]);
    RVec chi_total = h0 - hx;
    double residual = (rec.r_n - chi_total).norm();
    if (detail) {
        detail->residual = residual;
        detail->chi_total = chi_total;
        detail->env_part = h0 - hy;
        detail->rel_part = hy - hx;
        detail->env_target = y;
        detail->env_target_snapped = snapped;
        detail->rel_target_reachable = (path.positions[std::size_t(n)] == y);
        detail->epsilon = params.epsilon;
    }
    return residual;
}

MatrixEstimate limit_diffusion_matrix(const SiteLaw& law, const ResolventParams& params,
                                      std::uint64_t seed, std::int64_t M,
                                      std::int64_t steps_per_env, int threads,
                                      const DpLimits& limits) {
    if (M < 2) throw Error("limit_diffusion_matrix needs M >= 2 environments");
    const int nu = law.support.nu;
    const int k = static_cast<int>(law.support.steps.size());
    const auto& steps = law.support.steps;

    std::vector<Mat> contrib(static_cast<std::size_t>(M), Mat(nu));
    parallel_for(M, threads, [&](std::int64_t i) {
        EnvironmentView env(law, environment_seed_for(seed, i));
        std::vector<std::vector<IVec>> required(2);
        required[0] = {IVec(nu)};
        for (const auto& z : steps) required[1].push_back(z);
        ResolventField field(env, required, params, limits);

        std::vector<double> pi = env.transition(0, IVec(nu));
        RVec drift(nu);
        for (int zi = 0; zi < k; ++zi)
            for (int c = 0; c < nu; ++c)
                drift[c] += pi[std::size_t(zi)] * double(steps[std::size_t(zi)][c]);
        RVec pih(nu);
        for (int zi = 0; zi < k; ++zi)
            pih += pi[std::size_t(zi)] * field.h_at(1, steps[std::size_t(zi)]);

        Mat c_env(nu);
        if (steps_per_env <= 0) {
            for (int zi = 0; zi < k; ++zi) {
                RVec y = RVec::from(steps[std::size_t(zi)]) - drift +
                         (field.h_at(1, steps[std::size_t(zi)]) - pih);
                c_env += pi[std::size_t(zi)] * Mat::outer(y, y);
            }
        } else {
            Stream s(absorb(mix64(seed ^ 0x44494646ull), static_cast<std::uint64_t>(i)));
            for (std::int64_t r = 0; r < steps_per_env; ++r) {
                int zi = pick_step(pi, s.next_u01());
                RVec y = RVec::from(steps[std::size_t(zi)]) - drift +
                         (field.h_at(1, steps[std::size_t(zi)]) - pih);
                c_env += Mat::outer(y, y);
            }
            c_env = (1.0 / double(steps_per_env)) * c_env;
        }
        contrib[std::size_t(i)] = c_env;
    });

    MatrixEstimate est;
    est.samples = M;
    est.epsilon = params.epsilon;
    est.value = Mat(nu);
    est.se = Mat(nu);
    for (std::int64_t i = 0; i < M; ++i) est.value += contrib[std::size_t(i)];
    est.value = (1.0 / double(M)) * est.value;
    Mat var(nu);
    for (std::int64_t i = 0; i < M; ++i) {
        Mat d = contrib[std::size_t(i)] - est.value;
        for (int a = 0; a < nu; ++a)
            for (int b = 0; b < nu; ++b) var(a, b) += d(a, b) * d(a, b);
    }
    for (int a = 0; a < nu; ++a)
        for (int b = 0; b < nu; ++b) est.se(a, b) = std::sqrt(var(a, b) / double(M - 1) / double(M));
    return est;
}

}  // namespace rwre
