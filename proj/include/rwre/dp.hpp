#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rwre/environment.hpp"

namespace rwre {

struct DpLimits {
    // Hard cap on DP table entries; exceeding it raises ResourceError rather
    // than silently truncating probabilities.
    std::size_t max_support = 10'000'000;
};

// Exact level-by-level law of the quenched walk: sparse tables, entries
// sorted by site, pruned of exact zeros.
struct OccupationSlab {
    std::int64_t n = 0;
    std::vector<std::vector<std::pair<IVec, double>>> levels;  // k = 0..n

    double prob_at(std::int64_t k, const IVec& site) const;
    double level_sum(std::int64_t k) const;
};

// E_0^w(X_k) and the expected centered drift k steps ahead, both exact.
struct QuenchedMeanSeries {
    std::int64_t n = 0;
    std::vector<RVec> mean;          // k = 0..n, E-part of the quenched mean
    std::vector<RVec> drift_series;  // k = 0..n-1, sum_x rho_k(x) (drift(k,x) - v_bar)
};

// Probability kernel on E, sorted by displacement.
using Kernel = std::vector<std::pair<IVec, double>>;

// Annealed objects computable in closed form from the law's moments.
struct AnnealedParams {
    int nu = 1;
    RVec mean_step;        // v_bar: full velocity is e_1 + v_bar
    Mat step_cov;          // E-block of the annealed diffusion matrix
    double drift_var = 0;  // E|g|^2 = E|D - v|^2
    Kernel q_at_origin;    // collision-chain kernel from 0 (shared site)
    Kernel q_away;         // collision-chain kernel away from 0
};

struct CollisionSum {
    std::vector<double> return_prob;  // P(Y_k = 0), k = 0..n-1; k=0 term is 1
    std::vector<double> cumulative;   // partial sums of return_prob
};

struct VariancePoint {
    std::int64_t n = 0;
    double value = 0;  // V(n) estimate
    double se = 0;
};

OccupationSlab occupation(const EnvironmentView& env, std::int64_t n, const DpLimits& limits = {});

QuenchedMeanSeries quenched_mean_series(const EnvironmentView& env, std::int64_t n,
                                        const DpLimits& limits = {});

// Streaming variants that keep only the running level. checkpoints must be
// increasing; the largest sets the DP depth.
std::vector<RVec> quenched_mean_at(const EnvironmentView& env,
                                   const std::vector<std::int64_t>& checkpoints,
                                   const DpLimits& limits = {});

// n^{-1/2} max_{k<=n} |E_0^w(X_k) - k v_bar| at each checkpoint n, computed
// through the exactly-telescoping drift sums.
std::vector<double> centered_mean_max_at(const EnvironmentView& env,
                                         const std::vector<std::int64_t>& checkpoints,
                                         const DpLimits& limits = {});

AnnealedParams annealed_params(const SiteLaw& law);

// Exact distribution of the two-walker difference chain: homogeneous
// symmetric walk with kernel q_away, perturbed at the origin by q_at_origin.
CollisionSum collision_sum(const AnnealedParams& params, std::int64_t n,
                           const DpLimits& limits = {});

// V(n) = E |E_0^w(X_n) - n v_bar|^2 over M sampled environments, with the
// per-environment mean computed by exact DP (environment sampling is the
// only noise source).
std::vector<VariancePoint> variance_quenched_mean(const SiteLaw& law, std::uint64_t seed,
                                                  std::int64_t M,
                                                  const std::vector<std::int64_t>& ladder,
                                                  const DpLimits& limits = {}, int threads = 1);

// Noisier nested-MC cross-check of the same quantity (documented slower):
// the inner quenched mean is itself estimated from `inner` sampled paths.
std::vector<VariancePoint> variance_quenched_mean_mc(const SiteLaw& law, std::uint64_t seed,
                                                     std::int64_t M, std::int64_t inner,
                                                     const std::vector<std::int64_t>& ladder,
                                                     int threads = 1);

// f_n = sum over level -n sites of the probability of hitting site 0 at
// level 0, by backward DP. f_0 = 1 exactly.
double density_f(const EnvironmentView& env, std::int64_t n, const DpLimits& limits = {});

// Environment seed for the i-th replica of an environment ensemble.
std::uint64_t environment_seed_for(std::uint64_t seed, std::int64_t i);

// E-part of the annealed mean step (v_bar), from the law's closed-form moments.
RVec law_mean_step(const SiteLaw& law);

}  // namespace rwre
