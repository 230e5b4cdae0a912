#include "diresa/lorenz.hpp"

#include <cmath>
#include <string>

#include "diresa/errors.hpp"

namespace diresa {

namespace {

constexpr double kDivergenceBound = 1e6;

bool finite3(const Vec3& v) {
    return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
}

} // namespace

Vec3 lorenz_rhs(const Vec3& s, const LorenzParams& p) {
    return {p.sigma * (s[1] - s[0]), s[0] * (p.r - s[2]) - s[1], s[0] * s[1] - p.b * s[2]};
}

Vec3 rk4_step(const Vec3& s, double dt, const LorenzParams& p) {
    const Vec3 k1 = lorenz_rhs(s, p);
    const Vec3 s2{s[0] + 0.5 * dt * k1[0], s[1] + 0.5 * dt * k1[1], s[2] + 0.5 * dt * k1[2]};
    const Vec3 k2 = lorenz_rhs(s2, p);
    const Vec3 s3{s[0] + 0.5 * dt * k2[0], s[1] + 0.5 * dt * k2[1], s[2] + 0.5 * dt * k2[2]};
    const Vec3 k3 = lorenz_rhs(s3, p);
    const Vec3 s4{s[0] + dt * k3[0], s[1] + dt * k3[1], s[2] + dt * k3[2]};
    const Vec3 k4 = lorenz_rhs(s4, p);
    Vec3 out;
    for (int i = 0; i < 3; ++i) {
        out[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if (!finite3(out)) {
        throw DivergenceError("rk4 step produced a non-finite state from (" +
                              std::to_string(s[0]) + ", " + std::to_string(s[1]) + ", " +
                              std::to_string(s[2]) + ") with dt " + std::to_string(dt));
    }
    return out;
}

Matrix integrate_lorenz(const LorenzParams& p) {
    if (p.dt <= 0.0) throw ConfigError("lorenz dt must be positive");
    if (p.total_steps == 0) throw ConfigError("lorenz total_steps must be positive");

    Vec3 state = p.initial;
    for (std::size_t i = 0; i < p.transient_steps; ++i) {
        state = rk4_step(state, p.dt, p);
    }
    Matrix trajectory(p.total_steps, 3);
    for (std::size_t i = 0; i < p.total_steps; ++i) {
        state = rk4_step(state, p.dt, p);
        for (int j = 0; j < 3; ++j) {
            if (std::abs(state[j]) > kDivergenceBound) {
                throw DivergenceError("trajectory diverged at retained step " + std::to_string(i) +
                                      ", coordinate " + std::to_string(j));
            }
            trajectory(i, static_cast<std::size_t>(j)) = state[j];
        }
    }
    return trajectory;
}

} // namespace diresa
