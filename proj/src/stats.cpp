#include "rwre/stats.hpp"

#include <algorithm>
#include <cmath>

#include "rwre/errors.hpp"

namespace rwre {

MeanSe mean_se(std::span<const double> xs) {
    MeanSe r;
    r.n = static_cast<std::int64_t>(xs.size());
    if (r.n == 0) return r;
    double sum = 0.0;
    for (double x : xs) sum += x;
    r.mean = sum / double(r.n);
    if (r.n < 2) return r;
    double var = 0.0;
    for (double x : xs) var += (x - r.mean) * (x - r.mean);
    var /= double(r.n - 1);
    r.se = std::sqrt(var / double(r.n));
    return r;
}

double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double kolmogorov_survival(double lambda) {
    if (lambda <= 1e-10) return 1.0;
    if (lambda < 1.18) {
        // CDF via the theta-function form, accurate for small lambda.
        const double t = std::exp(-M_PI * M_PI / (8.0 * lambda * lambda));
        const double cdf =
            std::sqrt(2.0 * M_PI) / lambda * (t + std::pow(t, 9.0) + std::pow(t, 25.0));
        return std::clamp(1.0 - cdf, 0.0, 1.0);
    }
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        double term = 2.0 * std::exp(-2.0 * double(j) * double(j) * lambda * lambda);
        sum += sign * term;
        if (term < 1e-12) break;
        sign = -sign;
    }
    return std::clamp(sum, 0.0, 1.0);
}

namespace {

KsResult ks_from_statistic(double d, std::int64_t n) {
    KsResult r;
    r.statistic = d;
    r.n = n;
    const double sn = std::sqrt(double(n));
    r.p_value = kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
    return r;
}

}  // namespace

// The empirical CDF is evaluated at atom midpoints: for an atom at value v
// carrying counts (c_before, c_after] the comparison point is
// (c_before + c_after) / 2N. For atomless samples this differs from the
// classical two-sided statistic by at most 1/2N; for lattice-valued samples
// (scaled walk endpoints) it removes the half-atom bias that would otherwise
// reject against any continuous reference. Values within a 1e-12 relative
// gap count as one atom: projections of distinct lattice points onto a
// direction can round to doubles one ulp apart. The resulting p-values are
// slightly conservative.
KsResult ks_test(std::span<const double> samples, double (*cdf)(double)) {
    if (samples.size() < 20)
        throw InsufficientSamplesError("KS test needs at least 20 samples, got " +
                                       std::to_string(samples.size()));
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = double(sorted.size());
    auto same_atom = [](double a, double b) {
        return b - a <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
    };
    double d = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && same_atom(sorted[i], sorted[j])) ++j;
        const double f = cdf(sorted[i]);
        const double mid = (double(i) + double(j)) / (2.0 * n);
        d = std::max(d, std::abs(mid - f));
        i = j;
    }
    return ks_from_statistic(d, static_cast<std::int64_t>(sorted.size()));
}

KsResult ks_normal_test(std::span<const double> samples) {
    return ks_test(samples, [](double x) { return normal_cdf(x); });
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 20 || b.size() < 20)
        throw InsufficientSamplesError("two-sample KS needs at least 20 samples per side");
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < sa.size() && j < sb.size()) {
        double x = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] <= x) ++i;
        while (j < sb.size() && sb[j] <= x) ++j;
        d = std::max(d, std::abs(double(i) / double(sa.size()) - double(j) / double(sb.size())));
    }
    const double ne = double(sa.size()) * double(sb.size()) / double(sa.size() + sb.size());
    KsResult r;
    r.statistic = d;
    r.n = static_cast<std::int64_t>(ne);
    const double sn = std::sqrt(ne);
    r.p_value = kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
    return r;
}

namespace {

double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw Error("gamma_q domain");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_contfrac(a, x);
}

double chi_squared_survival(double x, int dof) { return gamma_q(0.5 * double(dof), 0.5 * x); }

ExponentFit fit_log_log(std::vector<FitPoint> points) {
    auto fit_once = [](const std::vector<FitPoint>& pts, ExponentFit& out) {
        std::vector<double> lx, ly;
        for (const auto& p : pts)
            if (p.value > 0.0 && p.n > 0.0) {
                lx.push_back(std::log(p.n));
                ly.push_back(std::log(p.value));
            }
        const std::size_t m = lx.size();
        if (m < 2) {
            out.degenerate = true;
            return;
        }
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < m; ++i) {
            mx += lx[i];
            my += ly[i];
        }
        mx /= double(m);
        my /= double(m);
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < m; ++i) {
            sxx += (lx[i] - mx) * (lx[i] - mx);
            sxy += (lx[i] - mx) * (ly[i] - my);
        }
        out.slope = sxy / sxx;
        out.intercept = my - out.slope * mx;
        double ss_res = 0, ss_tot = 0;
        for (std::size_t i = 0; i < m; ++i) {
            double r = ly[i] - (out.intercept + out.slope * lx[i]);
            ss_res += r * r;
            ss_tot += (ly[i] - my) * (ly[i] - my);
        }
        out.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
        out.slope_se = m > 2 ? std::sqrt(ss_res / double(m - 2) / sxx) : 0.0;
        out.degenerate = false;
    };

    ExponentFit fit;
    fit.points = points;
    fit_once(points, fit);
    if (fit.degenerate) return fit;

    std::size_t positive = 0;
    for (const auto& p : points)
        if (p.value > 0.0) ++positive;
    if (fit.r_squared < 0.9 && positive >= 4) {
        std::vector<FitPoint> trimmed(points.begin() + 1, points.end());
        ExponentFit refit;
        refit.points = points;
        fit_once(trimmed, refit);
        if (!refit.degenerate) {
            refit.dropped_smallest = true;
            return refit;
        }
    }
    return fit;
}

}  // namespace rwre
