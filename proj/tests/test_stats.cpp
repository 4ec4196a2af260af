#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rwre/errors.hpp"
#include "rwre/stats.hpp"

using namespace rwre;

namespace {

// Direct high-precision evaluation of the alternating Kolmogorov series,
// independent of the implementation's small-lambda branch.
long double kolmogorov_series_ref(long double lambda) {
    long double sum = 0.0L;
    long double sign = 1.0L;
    for (int j = 1; j <= 400; ++j) {
        sum += sign * 2.0L * std::exp(-2.0L * j * j * lambda * lambda);
        sign = -sign;
    }
    return sum;
}

}  // namespace

TEST_CASE("kolmogorov survival matches the direct series") {
    for (double lam : {0.4, 0.6, 0.9, 1.0, 1.17, 1.19, 1.5, 2.0, 3.0}) {
        double ref = double(kolmogorov_series_ref(lam));
        CHECK(kolmogorov_survival(lam) == doctest::Approx(ref).epsilon(1e-9));
    }
    CHECK(kolmogorov_survival(1e-12) == 1.0);
    CHECK(kolmogorov_survival(5.0) < 1e-20);
}

TEST_CASE("ks_normal_test on near-perfect quantile samples") {
    const int N = 1000;
    std::vector<double> q;
    for (int i = 1; i <= N; ++i) q.push_back(normal_quantile(double(i) / double(N + 1)));
    KsResult r = ks_normal_test(q);
    CHECK(r.statistic < 0.01);
    CHECK(r.p_value > 0.99);
}

TEST_CASE("ks_normal_test rejects degenerate samples") {
    std::vector<double> c(1000, 0.7);
    KsResult r = ks_normal_test(c);
    CHECK(r.p_value < 1e-6);
}

TEST_CASE("ks_normal_test throws below 20 samples") {
    std::vector<double> few(19, 0.0);
    CHECK_THROWS_AS(ks_normal_test(few), InsufficientSamplesError);
}

TEST_CASE("ks calibration: seeded normals pass at better than twice nominal") {
    // 200 seeded repetitions at nominal level 0.05: expect <= 20 rejections.
    int rejects_05 = 0, rejects_001 = 0;
    for (int rep = 0; rep < 200; ++rep) {
        Stream s(absorb(777, std::uint64_t(rep)));
        std::vector<double> x(10000);
        for (auto& v : x) v = sample_normal(s);
        KsResult r = ks_normal_test(x);
        if (r.p_value <= 0.05) ++rejects_05;
        if (r.p_value <= 0.001) ++rejects_001;
    }
    CHECK(rejects_05 <= 20);
    // The acceptance threshold p > 0.001 should almost never reject a true
    // normal: at most 2 in 200 (nominal 0.2).
    CHECK(rejects_001 <= 2);
}

TEST_CASE("two-sample KS separates equal and shifted distributions") {
    Stream s(991);
    std::vector<double> a(5000), b(5000), c(5000);
    for (auto& v : a) v = sample_normal(s);
    for (auto& v : b) v = sample_normal(s);
    for (auto& v : c) v = sample_normal(s) + 0.2;
    CHECK(ks_two_sample(a, b).p_value > 0.01);
    CHECK(ks_two_sample(a, c).p_value < 1e-6);
}

TEST_CASE("gamma_q special values") {
    // Q(1,x) = exp(-x).
    for (double x : {0.1, 1.0, 3.0, 10.0}) {
        CHECK(gamma_q(1.0, x) == doctest::Approx(std::exp(-x)).epsilon(1e-12));
        // Q(1/2, x) = erfc(sqrt(x)).
        CHECK(gamma_q(0.5, x) == doctest::Approx(std::erfc(std::sqrt(x))).epsilon(1e-12));
    }
    CHECK(gamma_q(2.0, 0.0) == 1.0);
    // Chi-squared(1) critical value.
    CHECK(chi_squared_survival(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("fit_log_log recovers exact power laws") {
    std::vector<FitPoint> pts;
    for (double n : {16.0, 32.0, 64.0, 128.0, 256.0}) pts.push_back({n, 3.0 * std::pow(n, 0.25), 0.0});
    ExponentFit f = fit_log_log(pts);
    CHECK(!f.degenerate);
    CHECK(!f.dropped_smallest);
    CHECK(f.slope == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(f.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit_log_log drops a pre-asymptotic smallest point once") {
    std::vector<FitPoint> pts = {{4.0, 80.0, 0.0}};  // far off the line
    for (double n : {16.0, 32.0, 64.0, 128.0}) pts.push_back({n, std::pow(n, 0.5), 0.0});
    ExponentFit f = fit_log_log(pts);
    CHECK(f.dropped_smallest);
    CHECK(f.slope == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("fit_log_log flags degenerate inputs") {
    std::vector<FitPoint> pts = {{16.0, 0.0, 0.0}, {32.0, 0.0, 0.0}, {64.0, 0.0, 0.0}};
    CHECK(fit_log_log(pts).degenerate);
}

TEST_CASE("mean_se and pearson basics") {
    std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
    MeanSe m = mean_se(xs);
    CHECK(m.mean == doctest::Approx(2.5));
    CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
    std::vector<double> ys = {2.0, 4.0, 6.0, 8.0};
    CHECK(pearson_correlation(xs, ys) == doctest::Approx(1.0));
    std::vector<double> zs = {4.0, 3.0, 2.0, 1.0};
    CHECK(pearson_correlation(xs, zs) == doctest::Approx(-1.0));
}
