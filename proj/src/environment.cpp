#include "rwre/environment.hpp"

#include <cmath>

namespace rwre {

void EnvironmentView::fill_vector(std::uint64_t key, std::span<double> out) const {
    const SiteLaw& law = *law_;
    const std::size_t k = out.size();
    switch (law.kind) {
        case LawKind::Deterministic: {
            for (std::size_t i = 0; i < k; ++i) out[i] = law.fixed[i];
            return;
        }
        case LawKind::Mixture: {
            double u = u01(stream_word(key, 0));
            double cum = 0.0;
            const auto& comps = law.components;
            std::size_t pick = comps.size() - 1;
            for (std::size_t c = 0; c < comps.size(); ++c) {
                cum += comps[c].weight;
                if (u < cum) {
                    pick = c;
                    break;
                }
            }
            for (std::size_t i = 0; i < k; ++i) out[i] = comps[pick].probs[i];
            return;
        }
        case LawKind::Dirichlet: {
            // Beta(1,1) on two steps is uniform; skip the gamma machinery on
            // the hot path.
            if (k == 2 && law.alphas[0] == 1.0 && law.alphas[1] == 1.0) {
                double u = u01(stream_word(key, 0));
                out[0] = u;
                out[1] = 1.0 - u;
                return;
            }
            Stream s(key);
            double total = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                out[i] = sample_gamma(s, law.alphas[i]);
                total += out[i];
            }
            for (std::size_t i = 0; i < k; ++i) out[i] /= total;
            return;
        }
    }
}

RVec EnvironmentView::local_drift(std::int64_t level, const IVec& site) const {
    const auto& steps = law_->support.steps;
    std::vector<double> pi = transition(level, site);
    RVec d(nu());
    for (std::size_t j = 0; j < steps.size(); ++j)
        for (int i = 0; i < nu(); ++i) d[i] += pi[j] * double(steps[j][i]);
    return d;
}

}  // namespace rwre
