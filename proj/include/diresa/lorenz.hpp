#pragma once

#include <array>
#include <cstddef>

#include "diresa/matrix.hpp"

namespace diresa {

using Vec3 = std::array<double, 3>;

/// Lorenz '63 system parameters plus integration controls.
struct LorenzParams {
    double sigma = 10.0;
    double r = 28.0;
    double b = 8.0 / 3.0;
    double dt = 0.0025;
    Vec3 initial{1.0, 0.0, 1.0};
    std::size_t transient_steps = 1000;
    std::size_t total_steps = 100000;
};

/// Right-hand side (sigma(y-x), x(r-z)-y, xy-bz).
Vec3 lorenz_rhs(const Vec3& state, const LorenzParams& params);

/// Classical fourth-order Runge-Kutta update over one step of size dt.
Vec3 rk4_step(const Vec3& state, double dt, const LorenzParams& params);

/// Integrates from params.initial, discards the transient, and returns the
/// raw trajectory as a total_steps x 3 matrix of post-step states.
Matrix integrate_lorenz(const LorenzParams& params);

} // namespace diresa
