#pragma once

#include <memory>
#include <span>
#include <vector>

#include "rwre/rng.hpp"
#include "rwre/site_law.hpp"

namespace rwre {

// A deterministic, seed-keyed, lazily generated space-time environment with a
// movable origin. Queries are pure functions of (master_seed, absolute level,
// absolute site), so any number of views into the same seed agree wherever
// they overlap and may be read concurrently without coordination.
class EnvironmentView {
  public:
    EnvironmentView(SiteLaw law, std::uint64_t master_seed)
        : law_(std::make_shared<const SiteLaw>(validate_spec(std::move(law)))),
          master_seed_(master_seed),
          origin_site_((*law_).support.nu) {}

    const SiteLaw& law() const { return *law_; }
    const StepSupport& support() const { return law_->support; }
    int nu() const { return law_->support.nu; }
    int num_steps() const { return law_->support.size(); }
    std::uint64_t master_seed() const { return master_seed_; }
    std::int64_t origin_level() const { return origin_level_; }
    const IVec& origin_site() const { return origin_site_; }

    // Transition probability vector at (level, site) relative to the origin.
    void transition_into(std::int64_t level, const IVec& site, std::span<double> out) const {
        fill_vector(site_key(master_seed_, origin_level_ + level, origin_site_ + site), out);
    }
    std::vector<double> transition(std::int64_t level, const IVec& site) const {
        std::vector<double> out(static_cast<std::size_t>(num_steps()));
        transition_into(level, site, out);
        return out;
    }
    // Variant for level sweeps: the caller holds the absorbed level key.
    void transition_from_level_key(std::uint64_t lvl_key, const IVec& abs_site,
                                   std::span<double> out) const {
        fill_vector(site_key_finish(lvl_key, abs_site), out);
    }
    std::uint64_t absorbed_level_key(std::int64_t level) const {
        return level_key(master_seed_, origin_level_ + level);
    }
    IVec absolute_site(const IVec& site) const { return origin_site_ + site; }

    // E-part of the one-step quenched mean displacement at (level, site).
    RVec local_drift(std::int64_t level, const IVec& site) const;

    // View with the origin moved by (dlevel, dsite): implements the shift
    // T_{(dlevel,dsite)}; composition of shifts adds displacements.
    EnvironmentView shifted(std::int64_t dlevel, const IVec& dsite) const {
        EnvironmentView v(*this);
        v.origin_level_ += dlevel;
        v.origin_site_ += dsite;
        return v;
    }

  private:
    void fill_vector(std::uint64_t key, std::span<double> out) const;

    std::shared_ptr<const SiteLaw> law_;
    std::uint64_t master_seed_;
    std::int64_t origin_level_ = 0;
    IVec origin_site_;
};

inline std::vector<double> transition_vector(const EnvironmentView& env, std::int64_t level,
                                             const IVec& site) {
    return env.transition(level, site);
}

inline EnvironmentView shift_view(const EnvironmentView& env, std::int64_t m, const IVec& x) {
    return env.shifted(m, x);
}

}  // namespace rwre
