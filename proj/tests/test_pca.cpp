#include "doctest.h"

#include <cmath>
#include <vector>

#include "diresa/errors.hpp"
#include "diresa/losses.hpp"
#include "diresa/pca.hpp"
#include "diresa/rng.hpp"

using namespace diresa;

namespace {

Matrix symmetric_random(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = rng.uniform(-2.0, 2.0);
            a(i, j) = v;
            a(j, i) = v;
        }
    }
    return a;
}

double frob_norm(const Matrix& a) {
    double acc = 0.0;
    for (double v : a.storage()) acc += v * v;
    return std::sqrt(acc);
}

Matrix gaussian_cloud(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(n, d);
    for (double& v : x.storage()) v = rng.normal();
    return x;
}

} // namespace

TEST_SUITE("pca") {

TEST_CASE("2x2 eigensystem matches the closed form") {
    const Matrix a = Matrix::from_rows({{2.0, 1.0}, {1.0, 2.0}});
    const EigenResult eig = jacobi_eigen_sym(a);
    REQUIRE(eig.values.size() == 2);
    CHECK(eig.values[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(eig.values[1] == doctest::Approx(1.0).epsilon(1e-12));
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(eig.vectors(0, 0)) == doctest::Approx(inv_sqrt2));
    CHECK(std::abs(eig.vectors(0, 1)) == doctest::Approx(inv_sqrt2));
    CHECK(eig.vectors(0, 0) * eig.vectors(0, 1) > 0.0); // same sign: (1,1) direction
    CHECK(eig.vectors(1, 0) * eig.vectors(1, 1) < 0.0); // opposite: (1,-1) direction
}

TEST_CASE("a diagonal matrix yields sorted diagonal entries and unit axes") {
    const Matrix a = Matrix::from_rows({{1.0, 0.0, 0.0}, {0.0, 5.0, 0.0}, {0.0, 0.0, 3.0}});
    const EigenResult eig = jacobi_eigen_sym(a);
    CHECK(eig.values[0] == doctest::Approx(5.0));
    CHECK(eig.values[1] == doctest::Approx(3.0));
    CHECK(eig.values[2] == doctest::Approx(1.0));
    CHECK(eig.vectors(0, 1) == doctest::Approx(1.0));
    CHECK(eig.vectors(1, 2) == doctest::Approx(1.0));
    CHECK(eig.vectors(2, 0) == doctest::Approx(1.0));
}

TEST_CASE("random symmetric matrices decompose to machine precision") {
    const Matrix a = symmetric_random(8, 77);
    const EigenResult eig = jacobi_eigen_sym(a);
    const double scale = frob_norm(a);

    for (std::size_t k = 0; k + 1 < 8; ++k) {
        CHECK(eig.values[k] >= eig.values[k + 1]); // descending
    }
    // Residual ||A v - lambda v|| is tiny for every pair.
    for (std::size_t k = 0; k < 8; ++k) {
        for (std::size_t i = 0; i < 8; ++i) {
            double av = 0.0;
            for (std::size_t j = 0; j < 8; ++j) av += a(i, j) * eig.vectors(k, j);
            CHECK(std::abs(av - eig.values[k] * eig.vectors(k, i)) < 1e-10 * scale);
        }
    }
    // Rows are orthonormal.
    for (std::size_t p = 0; p < 8; ++p) {
        for (std::size_t q = 0; q < 8; ++q) {
            double dot = 0.0;
            for (std::size_t j = 0; j < 8; ++j) dot += eig.vectors(p, j) * eig.vectors(q, j);
            CHECK(std::abs(dot - (p == q ? 1.0 : 0.0)) < 1e-10);
        }
    }
    // The trace is preserved by the spectrum.
    double trace = 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
        trace += a(i, i);
        sum += eig.values[i];
    }
    CHECK(sum == doctest::Approx(trace).epsilon(1e-12));
}

TEST_CASE("points on a line compress to one exact component") {
    Rng rng(5);
    const double ux = 3.0 / 5.0;
    const double uy = 4.0 / 5.0;
    Matrix x(300, 2);
    std::vector<double> ts(300);
    for (std::size_t i = 0; i < 300; ++i) {
        const double t = rng.uniform(-2.0, 2.0);
        ts[i] = t;
        x(i, 0) = 10.0 + t * ux; // offset checks the centering too
        x(i, 1) = -3.0 + t * uy;
    }
    const PcaModel model = fit_pca(x, 1);
    // The single component aligns with the line direction.
    const double align = std::abs(model.components(0, 0) * ux + model.components(0, 1) * uy);
    CHECK(align == doctest::Approx(1.0).epsilon(1e-10));
    // Its eigenvalue is the population variance of the parameter t.
    double mu = 0.0;
    for (double t : ts) mu += t;
    mu /= 300.0;
    double var = 0.0;
    for (double t : ts) var += (t - mu) * (t - mu);
    var /= 300.0;
    CHECK(model.eigenvalues[0] == doctest::Approx(var).epsilon(1e-10));
    CHECK(std::abs(model.eigenvalues[1]) < 1e-12 * var);
    // Reconstruction is exact for data already on the line.
    const Matrix back = pca_inverse(model, pca_transform(model, x));
    CHECK(loss_recon(x, back) < 1e-20);
}

TEST_CASE("an isotropic cloud spreads variance evenly") {
    const Matrix x = gaussian_cloud(20000, 3, 8);
    const PcaModel model = fit_pca(x, 2);
    REQUIRE(model.eigenvalues.size() == 3);
    for (double ev : model.eigenvalues) {
        CHECK(ev == doctest::Approx(1.0).epsilon(0.05));
    }
}

TEST_CASE("reconstruction error equals the discarded eigenvalue mass") {
    Rng rng(9);
    // Anisotropic data: stretch each axis differently and mix with a shear.
    Matrix x(500, 4);
    for (std::size_t i = 0; i < 500; ++i) {
        const double a = rng.normal() * 3.0;
        const double b = rng.normal() * 1.5;
        const double c = rng.normal() * 0.8;
        const double d = rng.normal() * 0.2;
        x(i, 0) = a + 0.3 * b;
        x(i, 1) = b - 0.2 * c;
        x(i, 2) = c + 0.1 * a;
        x(i, 3) = d + 0.5 * c;
    }
    for (std::size_t latent = 1; latent <= 3; ++latent) {
        const PcaModel model = fit_pca(x, latent);
        const Matrix back = pca_inverse(model, pca_transform(model, x));
        const double mse = loss_recon(x, back);
        double discarded = 0.0;
        for (std::size_t k = latent; k < 4; ++k) discarded += model.eigenvalues[k];
        CHECK(mse * 4.0 == doctest::Approx(discarded).epsilon(1e-9));
    }
}

TEST_CASE("transforming after an inverse is idempotent") {
    const Matrix x = gaussian_cloud(200, 3, 10);
    const PcaModel model = fit_pca(x, 2);
    const Matrix z = pca_transform(model, x);
    const Matrix z2 = pca_transform(model, pca_inverse(model, z));
    for (std::size_t i = 0; i < z.size(); ++i) {
        CHECK(z2.storage()[i] == doctest::Approx(z.storage()[i]).epsilon(1e-12));
    }
}

TEST_CASE("the fitted mean maps to the latent origin") {
    const Matrix x = gaussian_cloud(100, 3, 11);
    const PcaModel model = fit_pca(x, 2);
    Matrix mean_row(1, 3);
    for (std::size_t j = 0; j < 3; ++j) mean_row(0, j) = model.mean[j];
    const Matrix z = pca_transform(model, mean_row);
    CHECK(std::abs(z(0, 0)) < 1e-12);
    CHECK(std::abs(z(0, 1)) < 1e-12);
}

TEST_CASE("degenerate fits are rejected") {
    const Matrix too_few = gaussian_cloud(3, 3, 12); // needs n > d
    CHECK_THROWS_AS(fit_pca(too_few, 1), DegenerateError);

    const Matrix x = gaussian_cloud(10, 3, 13);
    CHECK_THROWS_AS(fit_pca(x, 0), ConfigError);
    CHECK_THROWS_AS(fit_pca(x, 4), ConfigError);

    Matrix constant(10, 2, 1.0);
    CHECK_THROWS_AS(fit_pca(constant, 1), DegenerateError);
}

} // TEST_SUITE
