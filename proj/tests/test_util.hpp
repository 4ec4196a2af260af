#pragma once

#include <cstdint>
#include <vector>

#include "rwre/site_law.hpp"

namespace rwre::test {

// Dirichlet(1,1) on S = {-1,+1}: the workhorse nu=1 law. Beta(1,1) moments
// give p = (1/2,1/2), E u^2 = 1/3, E u(1-u) = 1/6.
inline SiteLaw dirichlet11_1d() {
    StepSupport s;
    s.nu = 1;
    s.steps = {IVec(1, {-1}), IVec(1, {1})};
    return SiteLaw::dirichlet(s, {1.0, 1.0});
}

// Deterministic quarter law on the four nu=2 axis steps (classical Donsker).
inline SiteLaw quarter_2d() {
    StepSupport s;
    s.nu = 2;
    s.steps = {IVec(2, {-1, 0}), IVec(2, {0, -1}), IVec(2, {0, 1}), IVec(2, {1, 0})};
    return SiteLaw::deterministic(s, {0.25, 0.25, 0.25, 0.25});
}

// Dirichlet on the four nu=2 axis steps.
inline SiteLaw dirichlet_2d(double a = 1.0) {
    StepSupport s;
    s.nu = 2;
    s.steps = {IVec(2, {-1, 0}), IVec(2, {0, -1}), IVec(2, {0, 1}), IVec(2, {1, 0})};
    return SiteLaw::dirichlet(s, {a, a, a, a});
}

// Asymmetric nu=1 Dirichlet over {-1,0,+2}; nonzero v_bar, gappy support.
inline SiteLaw dirichlet_skew_1d() {
    StepSupport s;
    s.nu = 1;
    s.steps = {IVec(1, {-1}), IVec(1, {0}), IVec(1, {2})};
    return SiteLaw::dirichlet(s, {0.5, 1.5, 2.0});
}

// Dirichlet on the six nu=3 axis steps.
inline SiteLaw dirichlet_3d() {
    StepSupport s;
    s.nu = 3;
    s.steps = {IVec(3, {-1, 0, 0}), IVec(3, {0, -1, 0}), IVec(3, {0, 0, -1}),
               IVec(3, {0, 0, 1}),  IVec(3, {0, 1, 0}),  IVec(3, {1, 0, 0})};
    return SiteLaw::dirichlet(s, {1, 1, 1, 1, 1, 1});
}

}  // namespace rwre::test
