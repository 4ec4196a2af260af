#pragma once

#include <cmath>
#include <cstdint>

#include "rwre/grid.hpp"

namespace rwre {

// Counter-based randomness built on the splitmix64 finalizer (Steele, Lea,
// Flood 2014 / Vigna's public-domain splitmix64). Every random quantity in
// the library is a pure function of (key, counter), which gives O(1) random
// access into an unbounded environment and bit-exact reproducibility under
// any degree of parallelism.

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// i-th output of the splitmix64 sequence seeded at `state`.
constexpr std::uint64_t stream_word(std::uint64_t state, std::uint64_t i) {
    return mix64(state + (i + 1) * kGolden);
}

// Signed -> unsigned without sign holes, so negative levels/sites key cleanly.
constexpr std::uint64_t zigzag(std::int64_t v) {
    return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

// Key schedule: absorb one word into a key. The odd multiplier keeps the
// absorb argument injective in w; mix64 is a bijection, so distinct word
// sequences collide only by 2^-64 accident.
constexpr std::uint64_t absorb(std::uint64_t key, std::uint64_t w) {
    return mix64(key + kGolden + w * 0xD1342543DE82EF95ull);
}

// Domain separators keep environment, walk, and batch streams disjoint.
inline constexpr std::uint64_t kDomainEnv = 0x454e5600ull;     // "ENV"
inline constexpr std::uint64_t kDomainWalk = 0x57414c4bull;    // "WALK"
inline constexpr std::uint64_t kDomainBatch = 0x42415443ull;   // "BATC"
inline constexpr std::uint64_t kDomainEnvSet = 0x454e5653ull;  // "ENVS"

inline std::uint64_t site_key(std::uint64_t master_seed, std::int64_t level, const IVec& site) {
    std::uint64_t k = absorb(mix64(master_seed ^ kDomainEnv), zigzag(level));
    for (int i = 0; i < site.nu; ++i) k = absorb(k, zigzag(site[i]));
    return k;
}

// Partial key with the level absorbed; finish per site with site_key_finish.
// Used by DP level sweeps that touch every site of a level once.
inline std::uint64_t level_key(std::uint64_t master_seed, std::int64_t level) {
    return absorb(mix64(master_seed ^ kDomainEnv), zigzag(level));
}

inline std::uint64_t site_key_finish(std::uint64_t lvl_key, const IVec& site) {
    std::uint64_t k = lvl_key;
    for (int i = 0; i < site.nu; ++i) k = absorb(k, zigzag(site[i]));
    return k;
}

// Uniform in the open interval (0,1); never returns 0 or 1 so logs are safe.
// Both terms and their sum are exact multiples of 2^-53 below 1, so the
// range is [2^-53, 1 - 2^-53] with no boundary rounding.
constexpr double u01(std::uint64_t x) {
    return double(x >> 12) * 0x1.0p-52 + 0x1.0p-53;
}

// Sequential view of a counter stream; the counter advances per draw, so
// rejection samplers stay deterministic functions of the key.
class Stream {
  public:
    explicit Stream(std::uint64_t key) : key_(key) {}
    std::uint64_t next_word() { return stream_word(key_, counter_++); }
    double next_u01() { return u01(next_word()); }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Inverse standard normal CDF, Acklam's rational approximation refined with
// one Halley step against erfc; good to ~1e-15 over (0,1).
inline double normal_quantile(double p) {
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement.
    double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double sample_normal(Stream& s) { return normal_quantile(s.next_u01()); }

// Marsaglia-Tsang gamma sampler; the alpha<1 boost uses one extra uniform.
inline double sample_gamma(Stream& s, double alpha) {
    if (alpha < 1.0) {
        double u = s.next_u01();
        return sample_gamma(s, alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / (3.0 * std::sqrt(d));
    for (;;) {
        double x = sample_normal(s);
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        double u = s.next_u01();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
}

}  // namespace rwre
