#pragma once

#include <string>
#include <vector>

#include "rwre/grid.hpp"

namespace rwre {

// Allowed spatial displacements S (E-coordinates). Each walk step also
// advances the time level by one; that component is implicit.
struct StepSupport {
    int nu = 1;
    std::vector<IVec> steps;  // pairwise distinct, order fixed (inverse-CDF order)

    int size() const { return static_cast<int>(steps.size()); }
    // Index of a step vector, or -1.
    int index_of(const IVec& z) const {
        for (int i = 0; i < size(); ++i)
            if (steps[static_cast<std::size_t>(i)] == z) return i;
        return -1;
    }
    std::int64_t max_abs_coord() const {
        std::int64_t m = 0;
        for (const auto& z : steps)
            for (int i = 0; i < nu; ++i) m = std::max(m, std::abs(z[i]));
        return m;
    }
};

enum class LawKind { Dirichlet, Mixture, Deterministic };

struct MixtureComponent {
    double weight = 0.0;
    std::vector<double> probs;
};

// Distribution of one site's transition probability vector over the steps.
struct SiteLaw {
    StepSupport support;
    LawKind kind = LawKind::Deterministic;
    std::vector<double> alphas;                 // Dirichlet
    std::vector<MixtureComponent> components;   // Mixture
    std::vector<double> fixed;                  // Deterministic

    static SiteLaw dirichlet(StepSupport s, std::vector<double> a) {
        SiteLaw l;
        l.support = std::move(s);
        l.kind = LawKind::Dirichlet;
        l.alphas = std::move(a);
        return l;
    }
    static SiteLaw mixture(StepSupport s, std::vector<MixtureComponent> comps) {
        SiteLaw l;
        l.support = std::move(s);
        l.kind = LawKind::Mixture;
        l.components = std::move(comps);
        return l;
    }
    static SiteLaw deterministic(StepSupport s, std::vector<double> v) {
        SiteLaw l;
        l.support = std::move(s);
        l.kind = LawKind::Deterministic;
        l.fixed = std::move(v);
        return l;
    }
};

// Silent renormalization below this; hard NormalizationError above the hard cap.
inline constexpr double kNormTol = 1e-12;
inline constexpr double kNormHardCap = 1e-9;

// Checks all SiteLaw invariants (normalization, positivity, distinct steps,
// ellipticity) and returns the law with vectors renormalized. Throws
// NormalizationError / EllipticityError / EmptySupportError.
SiteLaw validate_spec(SiteLaw law);

struct LawMoments {
    std::vector<double> mean;                 // p(z)   = E pi_z
    std::vector<std::vector<double>> second;  // m(z,z') = E pi_z pi_z'
};

// Closed-form first and second moments of the site law.
LawMoments law_moments(const SiteLaw& law);

std::string law_kind_name(LawKind k);

}  // namespace rwre
