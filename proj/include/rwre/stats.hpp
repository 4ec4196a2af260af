#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rwre/rng.hpp"

namespace rwre {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    std::int64_t n = 0;
};

MeanSe mean_se(std::span<const double> xs);

double pearson_correlation(std::span<const double> xs, std::span<const double> ys);

// Survival function of the Kolmogorov distribution,
//   Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2),
// evaluated through the dual theta series for small lambda where the
// alternating series converges slowly. Terms are added until below 1e-12
// (at most 100).
double kolmogorov_survival(double lambda);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::int64_t n = 0;
};

// One-sample KS test against the standard normal CDF. The p-value uses the
// asymptotic Kolmogorov distribution with Stephens' effective sample size
// lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) * D. Throws
// InsufficientSamplesError below 20 samples.
KsResult ks_normal_test(std::span<const double> samples);

// Same statistic against an arbitrary CDF.
KsResult ks_test(std::span<const double> samples, double (*cdf)(double));

// Two-sample KS test (effective size n1*n2/(n1+n2)).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

// Regularized incomplete gamma Q(a,x) (upper), series / continued fraction.
double gamma_q(double a, double x);

// Chi-squared upper tail with k degrees of freedom.
double chi_squared_survival(double x, int dof);

struct FitPoint {
    double n = 0.0;
    double value = 0.0;
    double se = 0.0;
};

// Least-squares fit of log(value) against log(n) over points with value > 0.
// When r^2 < 0.9 and at least four positive points remain, the smallest-n
// point is dropped once (pre-asymptotic transient) and the drop is recorded.
struct ExponentFit {
    std::vector<FitPoint> points;
    double slope = 0.0;
    double slope_se = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    bool dropped_smallest = false;
    bool degenerate = false;  // fewer than two positive values; fit skipped
};

ExponentFit fit_log_log(std::vector<FitPoint> points);

}  // namespace rwre
