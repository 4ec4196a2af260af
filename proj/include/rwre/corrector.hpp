#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rwre/dp.hpp"
#include "rwre/walk.hpp"

namespace rwre {

// Truncation parameters for the resolvent series
//   h_eps = sum_{k>=1} (1+eps)^{-k} Pi^{k-1} g.
// K >= ln(g_max/(eps*tol)) / ln(1+eps) guarantees the dropped tail is at most
// tol per coordinate, using the sup bound |Pi^k g| <= g_max.
struct ResolventParams {
    double epsilon = 0.0;
    double tol = 0.0;
    std::int64_t K = 0;
};

// Sup-norm bound on |g| = |D - v| used by the truncation-depth bound.
double g_sup_bound(const SiteLaw& law);

// Smallest K satisfying the tail bound (0 when the law is noiseless).
ResolventParams make_resolvent_params(const SiteLaw& law, double epsilon, double tol);

// Truncated resolvent corrector evaluated at the view's origin via the
// literal series: one forward quenched-mean DP of depth K.
RVec resolvent_h(const EnvironmentView& at_site, const ResolventParams& params,
                 const DpLimits& limits = {});

// h_eps on a whole trapezoid of sites in one backward sweep of the resolvent
// recursion h(l,x) = (g(l,x) + sum_z pi_z h(l+1,x+z)) / (1+eps), truncated at
// depth K below the highest requested level. Values agree with the forward
// series up to the shared tail bound, and are bit-stable functions of
// (seed, level, site, bottom level).
class ResolventField {
  public:
    // required[l] lists the sites at level l whose values the caller reads;
    // levels run 0..required.size()-1.
    ResolventField(const EnvironmentView& env, const std::vector<std::vector<IVec>>& required,
                   const ResolventParams& params, const DpLimits& limits = {});

    const RVec& h_at(std::int64_t level, const IVec& site) const;
    double epsilon() const { return eps_; }

  private:
    double eps_;
    std::vector<std::vector<std::pair<IVec, RVec>>> values_;  // per level, sorted
};

// Martingale increment H_eps(w0,w1) = h_eps(w1) - Pi h_eps(w0) for the
// transition from site a at `level` to site b at level+1, evaluated through
// the resolvent identity Pi h = (1+eps) h - g. Throws InvalidStepError when
// b - a is not in the step support.
RVec H_eps(const EnvironmentView& env, std::int64_t level, const IVec& a, const IVec& b,
           const ResolventParams& params, const DpLimits& limits = {});

// Per-path values of the martingale decomposition
//   X_n - n v = Xbar_n + M_n^eps + eps S_n^eps + R_n^eps.
struct DecompositionRecord {
    std::int64_t n = 0;
    RVec xbar;   // X_n - sum_k D(T_{X_k} w)
    RVec m_eps;  // sum of H_eps increments
    RVec s_eps;  // sum of h_eps along the path
    RVec r_eps;  // h_eps(w) - h_eps(T_{X_n} w)
    RVec r_n;    // (X_n - n v) - Xbar_n - M_n^eps  (= eps S + R^eps exactly)
    double identity_residual = 0.0;
    double epsilon = 0.0;
    std::int64_t K = 0;
};

DecompositionRecord decompose(const Path& path, const EnvironmentView& env,
                              const ResolventParams& params, const DpLimits& limits = {});

// Sites reachable from the origin in exactly m steps (m-fold sumset of S).
bool reachable(const StepSupport& support, std::int64_t m, const IVec& x,
               const DpLimits& limits = {});

// Corrector chi(x at level m, w) = h_eps(w) - h_eps(T_{(m,x)} w), the exact
// telescoped value of the f_eps path sum. Throws UnreachableError when no
// admissible path exists.
RVec chi(const EnvironmentView& env, std::int64_t m, const IVec& x,
         const ResolventParams& params, const DpLimits& limits = {});

// The same quantity recomputed term by term along an explicit admissible
// path given as step indices; agrees with chi() to rounding.
RVec chi_path_sum(const EnvironmentView& env, const std::vector<int>& step_indices,
                  const ResolventParams& params, const DpLimits& limits = {});

struct CocycleDetail {
    double residual = 0.0;   // | r_n - chi(X_n) |
    RVec chi_total;          // chi at (n, X_n)
    RVec env_part;           // chi at (n, snapped [n v_bar]) -- environment fluctuations
    RVec rel_part;           // remainder from the shifted view; env+rel == total exactly
    IVec env_target;         // the (possibly snapped) [n v_bar] site
    bool env_target_snapped = false;
    bool rel_target_reachable = false;  // only when X_n equals the env target
    double epsilon = 0.0;
};

// Residual of the cocycle relation r_n = chi(X_n, w) at fixed eps, with the
// split into an environment part at [n v_bar] and a shifted remainder.
double cocycle_residual(const Path& path, const EnvironmentView& env,
                        const ResolventParams& params, CocycleDetail* detail = nullptr,
                        const DpLimits& limits = {});

struct MatrixEstimate {
    Mat value;
    Mat se;
    std::int64_t samples = 0;
    double epsilon = 0.0;
};

// Monte Carlo estimate of E[(X_1 - D + H_eps)(X_1 - D + H_eps)^T] over M
// fresh environments (E-block). steps_per_env = 0 averages the one-step
// conditional exactly per environment; > 0 samples that many quenched steps.
MatrixEstimate limit_diffusion_matrix(const SiteLaw& law, const ResolventParams& params,
                                      std::uint64_t seed, std::int64_t M,
                                      std::int64_t steps_per_env = 0, int threads = 1,
                                      const DpLimits& limits = {});

}  // namespace rwre
