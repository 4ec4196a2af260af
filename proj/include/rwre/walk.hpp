#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rwre/environment.hpp"

namespace rwre {

// One quenched trajectory in E-coordinates; the time component of the full
// lattice position is the index k itself.
struct Path {
    std::int64_t n = 0;
    std::vector<int> steps;       // indices into the step support, length n
    std::vector<IVec> positions;  // length n+1, positions[0] = 0
    std::uint64_t replica_seed = 0;
};

enum class Centering { Deterministic, Quenched };

struct ScaledPath {
    std::vector<double> t_grid;
    std::vector<RVec> values;  // (X_[nt] - centering([nt])) / sqrt(n)
    Centering centering = Centering::Deterministic;
};

// Walk randomness is keyed by (replica_seed, time index) and is independent
// of position, so a path is a deterministic function of (environment, seed).
std::uint64_t walk_uniform_key(std::uint64_t replica_seed);

// Inverse-CDF pick of a step index given the uniform u. Fixed step order.
int pick_step(std::span<const double> pi, double u);

Path sample_path(const EnvironmentView& env, std::int64_t n, std::uint64_t replica_seed);

// Two walkers driven by the same environment, conditionally independent
// given it. Throws SeedCollisionError when the seeds coincide.
std::pair<Path, Path> sample_pair(const EnvironmentView& env, std::int64_t n,
                                  std::uint64_t seed_a, std::uint64_t seed_b);

std::uint64_t replica_seed_for(std::uint64_t batch_seed, std::int64_t i);

// N replicas with seeds derived from batch_seed; the collection is identical
// regardless of execution order or degree of parallelism.
std::vector<Path> sample_batch(const EnvironmentView& env, std::int64_t n, std::int64_t N,
                               std::uint64_t batch_seed, int threads = 1);

// Homogeneous walk with i.i.d. steps of law p (the annealed kernel).
Path annealed_path(const StepSupport& support, const std::vector<double>& p, std::int64_t n,
                   std::uint64_t seed);

// centering_series must provide an entry for every index [n*t], t in t_grid.
ScaledPath scale_path(const Path& path, const std::vector<double>& t_grid,
                      const std::vector<RVec>& centering_series, Centering kind);

// Convenience: deterministic centering series k -> k * v_bar for k = 0..n.
std::vector<RVec> deterministic_centering(const RVec& v_bar, std::int64_t n);

}  // namespace rwre
