#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rwre/corrector.hpp"
#include "rwre/dp.hpp"
#include "rwre/stats.hpp"
#include "rwre/walk.hpp"

namespace rwre {

struct CltThresholds {
    double ks_p_min = 0.001;          // on Bonferroni-adjusted p-values
    double cov_rel_err_max = 0.05;    // Frobenius, relative to the reference
    double increment_corr_max = 0.05;
};

struct DirectionKs {
    RVec direction;
    double statistic = 0.0;
    double p_value = 1.0;
    double p_adjusted = 1.0;  // Bonferroni: min(1, p * #directions)
};

struct IncrementCorr {
    double t0 = 0.0, t1 = 0.0, t2 = 0.0;
    double max_abs_corr = 0.0;  // over coordinates
};

struct CltReport {
    std::int64_t n = 0, N = 0;
    Centering centering = Centering::Deterministic;
    Mat covariance;        // sample covariance of B_n(1)
    Mat reference;         // annealed step covariance
    double cov_rel_error = 0.0;
    std::vector<DirectionKs> ks;
    std::vector<IncrementCorr> increments;
    CltThresholds thresholds;
    bool degenerate_input = false;
    bool pass = false;
};

// Default direction set: the nu coordinate axes plus the normalized all-ones
// diagonal (deduplicated for nu = 1).
std::vector<RVec> default_directions(int nu);

// Samples N paths in the fixed environment, forms B_n (or the quenched-
// centered variant), and tests endpoint covariance, directional Gaussianity,
// and increment decorrelation against the annealed reference.
CltReport clt_quenched(const EnvironmentView& env, std::int64_t n, std::int64_t N,
                       const std::vector<RVec>& directions, const std::vector<double>& t_grid,
                       Centering centering, std::uint64_t batch_seed,
                       const CltThresholds& thresholds = {}, int threads = 1,
                       const DpLimits& limits = {});

// n^{-1/2} max_{k<=n} |E_0^w(X_k) - k v_bar| over the ladder, log-log fitted.
ExponentFit centering_decay(const EnvironmentView& env, const std::vector<std::int64_t>& ladder,
                            const DpLimits& limits = {});

struct ScalingReport {
    std::vector<VariancePoint> variance_points;
    ExponentFit variance_fit;     // slope of log sqrt(V(n)) vs log n
    std::vector<double> collision_cumulative;  // aligned with collision_ns
    std::vector<std::int64_t> collision_ns;
    ExponentFit collision_fit;    // slope of log cumsum vs log n
    // Ladder points beyond these indices hit the support cap and were
    // dropped; -1 when everything fit.
    std::int64_t variance_capped_after = -1;
    std::int64_t collision_capped_after = -1;
};

ScalingReport variance_scaling(const SiteLaw& law, std::uint64_t seed,
                               const std::vector<std::int64_t>& ladder, std::int64_t M,
                               const DpLimits& limits = {}, int threads = 1);

struct QvPoint {
    double t = 0.0;
    Mat qv;              // sum_{k<=nt} E(Y_k Y_k^T | F_{k-1})
    double rel_dev = 0.0;  // ||qv - t Gamma||_F / ||Gamma||_F
};

struct MgHypothesesReport {
    std::int64_t n = 0;
    double epsilon = 0.0;
    Mat gamma_ref;
    std::vector<QvPoint> qv_curve;
    double sup_rel_dev = 0.0;  // over t > 0 grid points
    std::vector<std::pair<double, double>> lindeberg;  // (threshold, exact sum)
    double max_increment = 0.0;      // realized max |Y_{n,k}|
    double max_cond_mean = 0.0;      // max_k |sum_z pi_z Y| (martingale check)
};

// Builds the martingale difference array Y_{n,k} along the path and checks
// the invariance-principle hypotheses: quadratic variation against t*Gamma,
// exact Lindeberg sums, and the maximal increment.
MgHypothesesReport mg_hypotheses(const EnvironmentView& env, const Path& path,
                                 const ResolventParams& params, const std::vector<double>& t_grid,
                                 const Mat& gamma_ref,
                                 const std::vector<double>& lindeberg_thresholds,
                                 const DpLimits& limits = {});

struct CollisionIdentityReport {
    std::int64_t n = 0, M = 0, N_pairs = 0;
    double exact = 0.0;        // E|g|^2 * sum_k P(Y_k = 0), exact DP
    double dp_mean = 0.0, dp_se = 0.0;  // V(n) over M environments
    double mc_mean = 0.0, mc_se = 0.0;  // E|g|^2 * MC pair-collision count
    double z_dp = 0.0, z_mc = 0.0, z_dp_mc = 0.0;
    double z_max = 4.0;
    bool pass = false;
};

// Three-way check of ||sum Pi^k g||^2 = ||g||^2 * expected collisions.
CollisionIdentityReport collision_identity_test(const SiteLaw& law, std::int64_t n,
                                                std::int64_t M, std::int64_t N_pairs,
                                                std::uint64_t seed, double z_max = 4.0,
                                                const DpLimits& limits = {}, int threads = 1);

struct ErgodicReport {
    std::string observable;
    std::vector<double> running_avg;  // running average after m = 1..n steps
    double final_avg = 0.0;
    double path_se = 0.0;        // SE of the along-path average (levels are fresh)
    double baseline_mean = 0.0;  // i.i.d. estimate of E(Psi) over fresh sites
    double baseline_se = 0.0;
    std::int64_t baseline_samples = 0;
};

// Running averages of a named local observable along the walk:
//   "pi:<index>"  one transition-vector coordinate,
//   "drift_sq"    |D - v_bar|^2,
//   "drift:<coord>" one local-drift coordinate.
ErgodicReport ergodic_average(const EnvironmentView& env, const Path& path,
                              const std::string& observable, std::int64_t baseline_samples = 4096);

}  // namespace rwre
