#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "rwre/dp.hpp"
#include "rwre/errors.hpp"
#include "rwre/stats.hpp"
#include "rwre/walk.hpp"
#include "test_util.hpp"

using namespace rwre;
using namespace rwre::test;

namespace {

// Brute-force oracle: enumerate every step sequence of length n with its
// exact quenched probability. Independent of the level-DP code path.
struct Enumerated {
    std::map<IVec, double> endpoint;                  // law of X_n
    std::vector<RVec> mean;                           // E X_k, k = 0..n
    std::vector<std::map<IVec, double>> level_laws;   // law of X_k
};

Enumerated enumerate_paths(const EnvironmentView& env, std::int64_t n) {
    const auto& steps = env.support().steps;
    const int k = env.num_steps();
    Enumerated out;
    out.mean.assign(std::size_t(n) + 1, RVec(env.nu()));
    out.level_laws.assign(std::size_t(n) + 1, {});
    out.level_laws[0][IVec(env.nu())] = 1.0;

    struct Node {
        IVec pos;
        double prob;
    };
    std::vector<Node> layer = {{IVec(env.nu()), 1.0}};
    for (std::int64_t lvl = 0; lvl < n; ++lvl) {
        std::vector<Node> next;
        for (const auto& node : layer) {
            auto pi = env.transition(lvl, node.pos);
            for (int z = 0; z < k; ++z)
                next.push_back({node.pos + steps[std::size_t(z)], node.prob * pi[std::size_t(z)]});
        }
        layer = std::move(next);
        for (const auto& node : layer) out.level_laws[std::size_t(lvl) + 1][node.pos] += node.prob;
    }
    for (std::int64_t lvl = 0; lvl <= n; ++lvl) {
        for (const auto& [pos, p] : out.level_laws[std::size_t(lvl)])
            for (int c = 0; c < env.nu(); ++c) out.mean[std::size_t(lvl)][c] += p * double(pos[c]);
    }
    out.endpoint = out.level_laws[std::size_t(n)];
    return out;
}

}  // namespace

TEST_CASE("occupation matches exhaustive path enumeration") {
    for (const SiteLaw& law : {dirichlet11_1d(), dirichlet_skew_1d()}) {
        EnvironmentView env(law, 42);
        const std::int64_t n = 7;
        Enumerated ref = enumerate_paths(env, n);
        OccupationSlab slab = occupation(env, n);
        REQUIRE(slab.levels.size() == std::size_t(n) + 1);
        for (std::int64_t lvl = 0; lvl <= n; ++lvl) {
            CHECK(slab.level_sum(lvl) == doctest::Approx(1.0).epsilon(1e-12));
            for (const auto& [pos, p] : ref.level_laws[std::size_t(lvl)])
                CHECK(slab.prob_at(lvl, pos) == doctest::Approx(p).epsilon(1e-12));
        }
    }
    // nu = 2 with a Dirichlet law exercises the sparse path.
    EnvironmentView env2(dirichlet_2d(0.8), 7);
    Enumerated ref2 = enumerate_paths(env2, 4);
    OccupationSlab slab2 = occupation(env2, 4);
    for (const auto& [pos, p] : ref2.endpoint)
        CHECK(slab2.prob_at(4, pos) == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("occupation single-step example for the quarter law") {
    EnvironmentView env(quarter_2d(), 1);
    OccupationSlab slab = occupation(env, 1);
    REQUIRE(slab.levels[1].size() == 4);
    for (const auto& [pos, p] : slab.levels[1]) CHECK(p == doctest::Approx(0.25));
}

TEST_CASE("occupation rho_2(0) closed form and MC frequency") {
    EnvironmentView env(dirichlet11_1d(), 42);
    auto pi0 = env.transition(0, IVec(1));
    auto pi_left = env.transition(1, IVec(1, {-1}));
    auto pi_right = env.transition(1, IVec(1, {1}));
    // Return to 0 after 2 steps: left-then-right or right-then-left.
    double expect = pi0[0] * pi_left[1] + pi0[1] * pi_right[0];
    OccupationSlab slab = occupation(env, 2);
    CHECK(slab.prob_at(2, IVec(1)) == doctest::Approx(expect).epsilon(1e-14));

    const std::int64_t N = 1'000'000;
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < N; ++i) {
        Path p = sample_path(env, 2, replica_seed_for(4242, i));
        if (p.positions[2][0] == 0) ++hits;
    }
    double freq = double(hits) / double(N);
    double se = std::sqrt(expect * (1.0 - expect) / double(N));
    CHECK(std::abs(freq - expect) < 4.0 * se);
}

TEST_CASE("occupation respects the support cap") {
    EnvironmentView env(dirichlet11_1d(), 1);
    DpLimits tiny;
    tiny.max_support = 10;
    CHECK_THROWS_AS(occupation(env, 32, tiny), ResourceError);
}

TEST_CASE("quenched mean series matches enumeration and telescopes exactly") {
    EnvironmentView env(dirichlet_skew_1d(), 11);
    const std::int64_t n = 7;
    Enumerated ref = enumerate_paths(env, n);
    QuenchedMeanSeries qms = quenched_mean_series(env, n);
    for (std::int64_t k = 0; k <= n; ++k)
        CHECK(qms.mean[std::size_t(k)][0] == doctest::Approx(ref.mean[std::size_t(k)][0]).epsilon(1e-12));

    // Telescoping: mean[k] - k v = sum_{j<k} drift_series[j], exactly.
    const RVec v_bar = law_mean_step(env.law());
    RVec acc(1);
    for (std::int64_t k = 0; k <= n; ++k) {
        CHECK(std::abs((qms.mean[std::size_t(k)][0] - double(k) * v_bar[0]) - acc[0]) < 1e-10);
        if (k < n) acc += qms.drift_series[std::size_t(k)];
    }
}

TEST_CASE("telescoping holds to 1e-10 at depth 4096") {
    EnvironmentView env(dirichlet11_1d(), 3);
    const std::int64_t n = 4096;
    QuenchedMeanSeries qms = quenched_mean_series(env, n);
    const RVec v_bar = law_mean_step(env.law());
    double acc = 0.0;
    double worst = 0.0;
    for (std::int64_t k = 0; k <= n; ++k) {
        worst = std::max(worst, std::abs(qms.mean[std::size_t(k)][0] - double(k) * v_bar[0] - acc));
        if (k < n) acc += qms.drift_series[std::size_t(k)][0];
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("quenched mean: deterministic law gives k*v exactly, zero drift series") {
    EnvironmentView env(quarter_2d(), 5);
    QuenchedMeanSeries qms = quenched_mean_series(env, 32);
    for (std::int64_t k = 0; k < 32; ++k) {
        CHECK(qms.drift_series[std::size_t(k)].norm() == 0.0);
        // v_bar = 0 for the quarter law; the level mean only carries rounding.
        CHECK(qms.mean[std::size_t(k)].norm() < 1e-12);
    }
}

TEST_CASE("quenched mean at n=1 is the local drift") {
    EnvironmentView env(dirichlet11_1d(), 21);
    QuenchedMeanSeries qms = quenched_mean_series(env, 1);
    RVec d = env.local_drift(0, IVec(1));
    const RVec v_bar = law_mean_step(env.law());
    CHECK(qms.drift_series[0][0] == doctest::Approx(d[0] - v_bar[0]).epsilon(1e-14));
    CHECK(qms.mean[1][0] == doctest::Approx(d[0]).epsilon(1e-14));
}

TEST_CASE("quenched mean vs Monte Carlo at depth 64") {
    EnvironmentView env(dirichlet11_1d(), 7);
    const std::int64_t n = 64, N = 1'000'000;
    QuenchedMeanSeries qms = quenched_mean_series(env, n);
    double sum = 0, sum2 = 0;
    for (std::int64_t i = 0; i < N; ++i) {
        Path p = sample_path(env, n, replica_seed_for(123, i));
        double x = double(p.positions[std::size_t(n)][0]);
        sum += x;
        sum2 += x * x;
    }
    double mc = sum / double(N);
    double se = std::sqrt((sum2 / double(N) - mc * mc) / double(N));
    CHECK(std::abs(mc - qms.mean[std::size_t(n)][0]) < 4.0 * se);
}

TEST_CASE("streaming checkpoint variants agree with the full series") {
    EnvironmentView env(dirichlet11_1d(), 31);
    QuenchedMeanSeries qms = quenched_mean_series(env, 128);
    auto at = quenched_mean_at(env, {1, 16, 128});
    CHECK(at[0][0] == qms.mean[1][0]);
    CHECK(at[1][0] == qms.mean[16][0]);
    CHECK(at[2][0] == qms.mean[128][0]);

    const RVec v_bar = law_mean_step(env.law());
    auto mx = centered_mean_max_at(env, {128});
    double expect = 0.0;
    for (std::int64_t k = 0; k <= 128; ++k)
        expect = std::max(expect, std::abs(qms.mean[std::size_t(k)][0] - double(k) * v_bar[0]));
    CHECK(mx[0] == doctest::Approx(expect / std::sqrt(128.0)).epsilon(1e-14));
}

TEST_CASE("annealed parameters for Dirichlet(1,1) on {-1,+1}") {
    AnnealedParams p = annealed_params(dirichlet11_1d());
    CHECK(p.mean_step[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(p.step_cov(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.drift_var == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    auto kernel_at = [](const Kernel& q, std::int64_t y) {
        for (const auto& [v, w] : q)
            if (v[0] == y) return w;
        return 0.0;
    };
    CHECK(kernel_at(p.q_at_origin, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(kernel_at(p.q_at_origin, 2) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
    CHECK(kernel_at(p.q_at_origin, -2) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
    CHECK(kernel_at(p.q_away, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(kernel_at(p.q_away, 2) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(kernel_at(p.q_away, -2) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("annealed parameters: kernels are symmetric probability vectors") {
    for (const SiteLaw& law : {dirichlet_skew_1d(), dirichlet_2d(0.6)}) {
        AnnealedParams p = annealed_params(law);
        double s0 = 0, sh = 0;
        for (const auto& [y, w] : p.q_at_origin) {
            s0 += w;
            bool found = false;
            for (const auto& [y2, w2] : p.q_at_origin)
                if (y2 == IVec(y.nu) - y) {
                    CHECK(w2 == doctest::Approx(w).epsilon(1e-13));
                    found = true;
                }
            CHECK(found);
        }
        for (const auto& [y, w] : p.q_away) sh += w;
        CHECK(s0 == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(sh == doctest::Approx(1.0).epsilon(1e-13));
        // Convexity: collision kernel at 0 dominates the product kernel.
        auto at0 = [](const Kernel& q) {
            for (const auto& [v, w] : q) {
                bool zero = true;
                for (int i = 0; i < v.nu; ++i) zero = zero && v[i] == 0;
                if (zero) return w;
            }
            return 0.0;
        };
        CHECK(at0(p.q_at_origin) >= at0(p.q_away));
    }
}

TEST_CASE("deterministic law: no environment noise in the annealed parameters") {
    AnnealedParams p = annealed_params(quarter_2d());
    CHECK(p.drift_var == doctest::Approx(0.0).epsilon(1e-15));
    REQUIRE(p.q_at_origin.size() == p.q_away.size());
    for (std::size_t i = 0; i < p.q_at_origin.size(); ++i) {
        CHECK(p.q_at_origin[i].first == p.q_away[i].first);
        CHECK(p.q_at_origin[i].second == doctest::Approx(p.q_away[i].second).epsilon(1e-14));
    }
}

TEST_CASE("collision chain: first step and conservation") {
    AnnealedParams p = annealed_params(dirichlet11_1d());
    CollisionSum one = collision_sum(p, 1);
    CHECK(one.return_prob.size() == 1);
    CHECK(one.return_prob[0] == 1.0);
    CHECK(one.cumulative[0] == 1.0);

    CollisionSum cs = collision_sum(p, 64);
    CHECK(cs.return_prob[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    for (double q : cs.return_prob) {
        CHECK(q >= 0.0);
        CHECK(q <= 1.0);
    }
    // Cumulative is increasing.
    for (std::size_t k = 1; k < cs.cumulative.size(); ++k)
        CHECK(cs.cumulative[k] >= cs.cumulative[k - 1]);
}

TEST_CASE("collision chain matches MC pair collision counts") {
    const SiteLaw law = dirichlet11_1d();
    AnnealedParams p = annealed_params(law);
    const std::int64_t n = 16, pairs = 100'000;
    CollisionSum cs = collision_sum(p, n);
    double sum = 0, sum2 = 0;
    for (std::int64_t i = 0; i < pairs; ++i) {
        EnvironmentView env(law, environment_seed_for(61, i));
        auto [a, b] = sample_pair(env, n, replica_seed_for(62, i), replica_seed_for(63, i));
        double c = 0;
        for (std::int64_t k = 0; k < n; ++k)
            if (a.positions[std::size_t(k)] == b.positions[std::size_t(k)]) c += 1.0;
        sum += c;
        sum2 += c * c;
    }
    double mc = sum / double(pairs);
    double se = std::sqrt((sum2 / double(pairs) - mc * mc) / double(pairs));
    CHECK(std::abs(mc - cs.cumulative[std::size_t(n - 1)]) < 4.0 * se);
}

TEST_CASE("collision chain in three dimensions is transient (bounded partial sums)") {
    AnnealedParams p = annealed_params(dirichlet_3d());
    CollisionSum cs = collision_sum(p, 32, DpLimits{20'000'000});
    std::vector<FitPoint> pts;
    for (std::int64_t n : {4, 8, 16, 32})
        pts.push_back({double(n), cs.cumulative[std::size_t(n - 1)], 0.0});
    ExponentFit fit = fit_log_log(pts);
    CHECK(fit.slope < 0.15);
}

TEST_CASE("variance of the quenched mean: closed forms and the collision identity") {
    SUBCASE("deterministic law has zero variance") {
        auto v = variance_quenched_mean(quarter_2d(), 1, 8, {1, 4});
        CHECK(v[0].value == 0.0);
        CHECK(v[1].value == 0.0);
    }
    SUBCASE("V(1) equals the drift variance") {
        auto v = variance_quenched_mean(dirichlet11_1d(), 17, 3000, {1});
        CHECK(std::abs(v[0].value - 1.0 / 3.0) < 4.0 * v[0].se);
    }
    SUBCASE("V(n) = E|g|^2 * collision sum") {
        const std::int64_t n = 64;
        AnnealedParams p = annealed_params(dirichlet11_1d());
        CollisionSum cs = collision_sum(p, n);
        double expect = p.drift_var * cs.cumulative[std::size_t(n - 1)];
        auto v = variance_quenched_mean(dirichlet11_1d(), 29, 1500, {n}, {}, 2);
        CHECK(std::abs(v[0].value - expect) < 4.0 * v[0].se);
    }
    SUBCASE("nested-MC cross-check agrees with the exact-DP variance") {
        const std::int64_t n = 16;
        auto exact = variance_quenched_mean(dirichlet11_1d(), 37, 2000, {n}, {}, 2);
        auto mc = variance_quenched_mean_mc(dirichlet11_1d(), 37, 400, 200, {n}, 2);
        double comb = std::sqrt(exact[0].se * exact[0].se + mc[0].se * mc[0].se);
        CHECK(std::abs(exact[0].value - mc[0].value) < 4.0 * comb);
    }
}

TEST_CASE("density f_n: exact base cases and unit annealed mean") {
    EnvironmentView det(quarter_2d(), 1);
    CHECK(density_f(det, 0) == 1.0);
    CHECK(density_f(det, 1) == doctest::Approx(1.0).epsilon(1e-14));

    const std::int64_t M = 2000;
    for (std::int64_t n : {1, 4}) {
        std::vector<double> vals(static_cast<std::size_t>(M));
        for (std::int64_t i = 0; i < M; ++i) {
            EnvironmentView env(dirichlet11_1d(), environment_seed_for(71, i));
            vals[std::size_t(i)] = density_f(env, n);
        }
        MeanSe ms = mean_se(vals);
        CHECK(std::abs(ms.mean - 1.0) < 4.0 * ms.se);
    }
}

TEST_CASE("density f_n via enumeration on a fixed environment") {
    // f_n = sum over starts x at level -n of P_x(X_n = 0). Enumerate from a
    // shifted view: starting at (-n, x) equals starting at (0,0) of the view
    // shifted by (-n, x), and landing on 0 at level 0 means displacement -x.
    EnvironmentView env(dirichlet11_1d(), 5);
    const std::int64_t n = 4;
    double total = 0.0;
    for (std::int64_t x = -n; x <= n; ++x) {
        EnvironmentView from = shift_view(env, -n, IVec(1, {x}));
        Enumerated ref = enumerate_paths(from, n);
        auto it = ref.endpoint.find(IVec(1, {-x}));
        if (it != ref.endpoint.end()) total += it->second;
    }
    CHECK(density_f(env, n) == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("MC/DP agreement in total variation at depth 32") {
    EnvironmentView env(dirichlet11_1d(), 13);
    const std::int64_t n = 32, N = 1'000'000;
    OccupationSlab slab = occupation(env, n);
    std::map<std::int64_t, double> freq;
    for (std::int64_t i = 0; i < N; ++i) {
        Path p = sample_path(env, n, replica_seed_for(888, i));
        freq[p.positions[std::size_t(n)][0]] += 1.0 / double(N);
    }
    double tv = 0.0;
    for (const auto& [site, prob] : slab.levels[std::size_t(n)]) {
        auto it = freq.find(site[0]);
        tv += std::abs((it == freq.end() ? 0.0 : it->second) - prob);
    }
    tv *= 0.5;
    double bound = 5.0 * std::sqrt(double(slab.levels[std::size_t(n)].size()) / double(N));
    CHECK(tv < bound);
}

TEST_CASE("collision_sum respects the support cap") {
    AnnealedParams p = annealed_params(dirichlet11_1d());
    DpLimits tiny;
    tiny.max_support = 5;
    CHECK_THROWS_AS(collision_sum(p, 64, tiny), ResourceError);
}
