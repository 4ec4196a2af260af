#include "rwre/site_law.hpp"

#include <algorithm>
#include <cmath>

#include "rwre/errors.hpp"

namespace rwre {

namespace {

void check_and_renormalize(std::vector<double>& v, const char* what) {
    double sum = 0.0;
    for (double x : v) {
        if (x < -kNormHardCap)
            throw NormalizationError(std::string(what) + ": negative entry " + std::to_string(x));
        sum += x;
    }
    if (std::abs(sum - 1.0) > kNormHardCap)
        throw NormalizationError(std::string(what) + ": entries sum to " + std::to_string(sum));
    for (double& x : v) x = std::max(x, 0.0) / sum;
}

}  // namespace

SiteLaw validate_spec(SiteLaw law) {
    const int k = law.support.size();
    if (law.support.nu < 1 || law.support.nu > kMaxDim)
        throw EmptySupportError("spatial dimension must be in [1," + std::to_string(kMaxDim) + "]");
    if (k == 0) throw EmptySupportError("step support is empty");
    for (const auto& z : law.support.steps)
        if (z.nu != law.support.nu) throw EmptySupportError("step dimension mismatch");
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j)
            if (law.support.steps[size_t(i)] == law.support.steps[size_t(j)])
                throw EmptySupportError("duplicate step " + law.support.steps[size_t(i)].str());

    const double elliptic_margin = 1.0 - 1e-12;
    switch (law.kind) {
        case LawKind::Dirichlet: {
            if (static_cast<int>(law.alphas.size()) != k)
                throw NormalizationError("alpha count does not match step count");
            for (double a : law.alphas)
                if (!(a > 0.0)) throw NormalizationError("Dirichlet alphas must be positive");
            // A Dirichlet vector on >= 2 steps has all entries in (0,1) a.s.
            if (k < 2) throw EllipticityError("single-step support makes the walk deterministic");
            break;
        }
        case LawKind::Mixture: {
            if (law.components.empty()) throw NormalizationError("mixture has no components");
            double wsum = 0.0;
            bool elliptic = false;
            for (auto& comp : law.components) {
                if (comp.weight < -kNormHardCap)
                    throw NormalizationError("mixture weight is negative");
                wsum += comp.weight;
                if (static_cast<int>(comp.probs.size()) != k)
                    throw NormalizationError("mixture component length does not match step count");
                check_and_renormalize(comp.probs, "mixture component");
                double mx = *std::max_element(comp.probs.begin(), comp.probs.end());
                if (comp.weight > 0.0 && mx < elliptic_margin) elliptic = true;
            }
            if (std::abs(wsum - 1.0) > kNormHardCap)
                throw NormalizationError("mixture weights sum to " + std::to_string(wsum));
            for (auto& comp : law.components) comp.weight /= wsum;
            if (!elliptic)
                throw EllipticityError("no positively weighted component has max entry < 1");
            break;
        }
        case LawKind::Deterministic: {
            if (static_cast<int>(law.fixed.size()) != k)
                throw NormalizationError("vector length does not match step count");
            check_and_renormalize(law.fixed, "deterministic vector");
            double mx = *std::max_element(law.fixed.begin(), law.fixed.end());
            if (mx >= elliptic_margin)
                throw EllipticityError("deterministic vector puts full mass on one step");
            break;
        }
    }
    return law;
}

LawMoments law_moments(const SiteLaw& law) {
    const int k = law.support.size();
    LawMoments mom;
    mom.mean.assign(size_t(k), 0.0);
    mom.second.assign(size_t(k), std::vector<double>(size_t(k), 0.0));

    switch (law.kind) {
        case LawKind::Dirichlet: {
            double a0 = 0.0;
            for (double a : law.alphas) a0 += a;
            for (int i = 0; i < k; ++i) mom.mean[size_t(i)] = law.alphas[size_t(i)] / a0;
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j)
                    mom.second[size_t(i)][size_t(j)] =
                        law.alphas[size_t(i)] * (law.alphas[size_t(j)] + (i == j ? 1.0 : 0.0)) /
                        (a0 * (a0 + 1.0));
            break;
        }
        case LawKind::Mixture: {
            for (const auto& comp : law.components) {
                for (int i = 0; i < k; ++i) {
                    mom.mean[size_t(i)] += comp.weight * comp.probs[size_t(i)];
                    for (int j = 0; j < k; ++j)
                        mom.second[size_t(i)][size_t(j)] +=
                            comp.weight * comp.probs[size_t(i)] * comp.probs[size_t(j)];
                }
            }
            break;
        }
        case LawKind::Deterministic: {
            for (int i = 0; i < k; ++i) {
                mom.mean[size_t(i)] = law.fixed[size_t(i)];
                for (int j = 0; j < k; ++j)
                    mom.second[size_t(i)][size_t(j)] = law.fixed[size_t(i)] * law.fixed[size_t(j)];
            }
            break;
        }
    }
    return mom;
}

std::string law_kind_name(LawKind k) {
    switch (k) {
        case LawKind::Dirichlet: return "dirichlet";
        case LawKind::Mixture: return "mixture";
        case LawKind::Deterministic: return "deterministic";
    }
    return "?";
}

}  // namespace rwre
