#include "rwre/walk.hpp"

#include <cmath>

#include "rwre/errors.hpp"
#include "rwre/parallel.hpp"

namespace rwre {

std::uint64_t walk_uniform_key(std::uint64_t replica_seed) {
    return mix64(replica_seed ^ kDomainWalk);
}

int pick_step(std::span<const double> pi, double u) {
    double cum = 0.0;
    const int k = static_cast<int>(pi.size());
    for (int j = 0; j < k; ++j) {
        cum += pi[static_cast<std::size_t>(j)];
        if (u < cum) return j;
    }
    return k - 1;  // u landed in the rounding slack above the last cumulative
}

Path sample_path(const EnvironmentView& env, std::int64_t n, std::uint64_t replica_seed) {
    Path p;
    p.n = n;
    p.replica_seed = replica_seed;
    p.steps.reserve(static_cast<std::size_t>(n));
    p.positions.reserve(static_cast<std::size_t>(n) + 1);
    p.positions.emplace_back(env.nu());

    const std::uint64_t ukey = walk_uniform_key(replica_seed);
    const auto& steps = env.support().steps;
    std::vector<double> pi(static_cast<std::size_t>(env.num_steps()));
    IVec pos(env.nu());
    for (std::int64_t k = 0; k < n; ++k) {
        env.transition_into(k, pos, pi);
        double u = u01(stream_word(ukey, static_cast<std::uint64_t>(k)));
        int j = pick_step(pi, u);
        p.steps.push_back(j);
        pos += steps[static_cast<std::size_t>(j)];
        p.positions.push_back(pos);
    }
    return p;
}

std::pair<Path, Path> sample_pair(const EnvironmentView& env, std::int64_t n,
                                  std::uint64_t seed_a, std::uint64_t seed_b) {
    if (seed_a == seed_b)
        throw SeedCollisionError("paired walkers need distinct replica seeds");
    return {sample_path(env, n, seed_a), sample_path(env, n, seed_b)};
}

std::uint64_t replica_seed_for(std::uint64_t batch_seed, std::int64_t i) {
    return absorb(mix64(batch_seed ^ kDomainBatch), static_cast<std::uint64_t>(i));
}

std::vector<Path> sample_batch(const EnvironmentView& env, std::int64_t n, std::int64_t N,
                               std::uint64_t batch_seed, int threads) {
    std::vector<Path> out(static_cast<std::size_t>(N));
    parallel_for(N, threads, [&](std::int64_t i) {
        out[static_cast<std::size_t>(i)] = sample_path(env, n, replica_seed_for(batch_seed, i));
    });
    return out;
}

Path annealed_path(const StepSupport& support, const std::vector<double>& p, std::int64_t n,
                   std::uint64_t seed) {
    double sum = 0.0;
    for (double x : p) {
        if (x < 0.0) throw NormalizationError("annealed kernel has a negative entry");
        sum += x;
    }
    if (std::abs(sum - 1.0) > kNormHardCap)
        throw NormalizationError("annealed kernel sums to " + std::to_string(sum));

    Path path;
    path.n = n;
    path.replica_seed = seed;
    path.steps.reserve(static_cast<std::size_t>(n));
    path.positions.reserve(static_cast<std::size_t>(n) + 1);
    path.positions.emplace_back(support.nu);
    const std::uint64_t ukey = walk_uniform_key(seed);
    IVec pos(support.nu);
    for (std::int64_t k = 0; k < n; ++k) {
        double u = u01(stream_word(ukey, static_cast<std::uint64_t>(k)));
        int j = pick_step(p, u);
        path.steps.push_back(j);
        pos += support.steps[static_cast<std::size_t>(j)];
        path.positions.push_back(pos);
    }
    return path;
}

ScaledPath scale_path(const Path& path, const std::vector<double>& t_grid,
                      const std::vector<RVec>& centering_series, Centering kind) {
    ScaledPath sp;
    sp.t_grid = t_grid;
    sp.centering = kind;
    const double root_n = std::sqrt(double(path.n));
    for (double t : t_grid) {
        auto idx = static_cast<std::int64_t>(std::floor(double(path.n) * t));
        if (idx < 0 || idx > path.n)
            throw IndexError("time grid point " + std::to_string(t) + " outside [0,1]");
        if (static_cast<std::size_t>(idx) >= centering_series.size())
            throw IndexError("centering series too short for index " + std::to_string(idx));
        RVec v = RVec::from(path.positions[static_cast<std::size_t>(idx)]) -
                 centering_series[static_cast<std::size_t>(idx)];
        sp.values.push_back((path.n > 0 ? 1.0 / root_n : 0.0) * v);
    }
    return sp;
}

std::vector<RVec> deterministic_centering(const RVec& v_bar, std::int64_t n) {
    std::vector<RVec> out;
    out.reserve(static_cast<std::size_t>(n) + 1);
    for (std::int64_t k = 0; k <= n; ++k) out.push_back(double(k) * v_bar);
    return out;
}

}  // namespace rwre
