#include "doctest.h"

#include <array>
#include <cmath>

#include "diresa/dataset.hpp"
#include "diresa/errors.hpp"
#include "diresa/lorenz.hpp"

using namespace diresa;

namespace {

/// Independent classical Runge-Kutta reference, written against the raw
/// equations rather than the library helpers.
Vec3 reference_rk4(Vec3 s, double dt, double sigma, double r, double b) {
    auto f = [&](const Vec3& v) -> Vec3 {
        return {sigma * (v[1] - v[0]), v[0] * (r - v[2]) - v[1], v[0] * v[1] - b * v[2]};
    };
    auto axpy = [](const Vec3& v, double a, const Vec3& d) -> Vec3 {
        return {v[0] + a * d[0], v[1] + a * d[1], v[2] + a * d[2]};
    };
    const Vec3 k1 = f(s);
    const Vec3 k2 = f(axpy(s, dt / 2, k1));
    const Vec3 k3 = f(axpy(s, dt / 2, k2));
    const Vec3 k4 = f(axpy(s, dt, k3));
    Vec3 out;
    for (int i = 0; i < 3; ++i) {
        out[i] = s[i] + dt * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) / 6.0;
    }
    return out;
}

double dist3(const Vec3& a, std::size_t row, const Matrix& m) {
    double acc = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        const double d = a[j] - m(row, j);
        acc += d * d;
    }
    return std::sqrt(acc);
}

} // namespace

TEST_SUITE("lorenz") {

TEST_CASE("right-hand side matches the hand-computed value") {
    LorenzParams p; // sigma 10, r 28, b 8/3
    const Vec3 d = lorenz_rhs({1.0, 2.0, 3.0}, p);
    CHECK(d[0] == doctest::Approx(10.0));
    CHECK(d[1] == doctest::Approx(23.0));
    CHECK(d[2] == doctest::Approx(-6.0));
}

TEST_CASE("one integration step matches an independent implementation") {
    LorenzParams p;
    const Vec3 starts[] = {{1.0, 0.0, 1.0}, {-5.0, 7.0, 20.0}, {0.1, 0.1, 0.1}};
    for (const Vec3& s : starts) {
        const Vec3 got = rk4_step(s, p.dt, p);
        const Vec3 want = reference_rk4(s, p.dt, p.sigma, p.r, p.b);
        for (int i = 0; i < 3; ++i) {
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));
        }
    }
}

TEST_CASE("full trajectory matches the step-by-step reference") {
    LorenzParams p;
    p.dt = 0.005;
    p.transient_steps = 10;
    p.total_steps = 500;
    const Matrix traj = integrate_lorenz(p);
    REQUIRE(traj.rows() == 500);
    REQUIRE(traj.cols() == 3);

    Vec3 s = p.initial;
    for (std::size_t i = 0; i < p.transient_steps; ++i) {
        s = reference_rk4(s, p.dt, p.sigma, p.r, p.b);
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < p.total_steps; ++i) {
        s = reference_rk4(s, p.dt, p.sigma, p.r, p.b);
        worst = std::max(worst, dist3(s, i, traj));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("halving dt shrinks the error at fourth order") {
    // Integrate to T = 0.5: long enough for errors to accumulate, short
    // enough that the chaotic amplification factor stays smooth and the
    // classical 2^4 convergence ratio is visible.
    auto run_to_t = [](double dt) {
        LorenzParams p;
        p.dt = dt;
        p.transient_steps = 0;
        p.total_steps = static_cast<std::size_t>(std::llround(0.5 / dt));
        const Matrix traj = integrate_lorenz(p);
        Vec3 out{traj(traj.rows() - 1, 0), traj(traj.rows() - 1, 1), traj(traj.rows() - 1, 2)};
        return out;
    };
    const Vec3 coarse = run_to_t(0.01);
    const Vec3 fine = run_to_t(0.005);
    const Vec3 ref = run_to_t(0.000625);

    auto err = [&](const Vec3& v) {
        double acc = 0.0;
        for (int i = 0; i < 3; ++i) acc += (v[i] - ref[i]) * (v[i] - ref[i]);
        return std::sqrt(acc);
    };
    const double ratio = err(coarse) / err(fine);
    // A fourth-order scheme gains about 2^4 = 16 per halving.
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);
}

TEST_CASE("the attractor trajectory stays bounded") {
    LorenzParams p;
    p.total_steps = 20000;
    const Matrix traj = integrate_lorenz(p);
    for (double v : traj.storage()) {
        CHECK(std::abs(v) < 100.0);
    }
}

TEST_CASE("an unstable step size raises a divergence error") {
    LorenzParams p;
    p.dt = 5.0;
    p.transient_steps = 0;
    p.total_steps = 100;
    CHECK_THROWS_AS(integrate_lorenz(p), DivergenceError);
}

TEST_CASE("invalid integration controls are configuration errors") {
    LorenzParams p;
    p.dt = 0.0;
    CHECK_THROWS_AS(integrate_lorenz(p), ConfigError);
    p.dt = -0.1;
    CHECK_THROWS_AS(integrate_lorenz(p), ConfigError);
    p.dt = 0.0025;
    p.total_steps = 0;
    CHECK_THROWS_AS(integrate_lorenz(p), ConfigError);
}

TEST_CASE("generated dataset is scaled to [0,1] with temporal splits") {
    LorenzParams p;
    p.total_steps = 1000;
    p.transient_steps = 100;
    const Dataset ds = generate_dataset(p);
    REQUIRE(ds.data.rows() == 1000);
    REQUIRE(ds.data.cols() == 3);

    for (std::size_t j = 0; j < 3; ++j) {
        double lo = 1.0;
        double hi = 0.0;
        for (std::size_t i = 0; i < ds.data.rows(); ++i) {
            lo = std::min(lo, ds.data(i, j));
            hi = std::max(hi, ds.data(i, j));
        }
        CHECK(lo == doctest::Approx(0.0));
        CHECK(hi == doctest::Approx(1.0));
    }
    CHECK(ds.train.begin == 0);
    CHECK(ds.train.end == 800);
    CHECK(ds.validation.begin == 800);
    CHECK(ds.validation.end == 900);
    CHECK(ds.test.begin == 900);
    CHECK(ds.test.end == 1000);
    CHECK(ds.has_scaling());
    CHECK_FALSE(ds.provenance.empty());

    // Scaling is invertible back to the raw trajectory.
    const Matrix raw = integrate_lorenz(p);
    const Matrix back = unscale_01(ds.data, ds.feature_min, ds.feature_max);
    double worst = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        worst = std::max(worst, std::abs(raw.storage()[i] - back.storage()[i]));
    }
    CHECK(worst < 1e-10);
}

} // TEST_SUITE
