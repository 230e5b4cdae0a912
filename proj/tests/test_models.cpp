#include "doctest.h"

#include <cmath>
#include <variant>
#include <vector>

#include "diresa/errors.hpp"
#include "diresa/models.hpp"

using namespace diresa;

namespace {

ModelSpec lorenz_spec(Variant v) {
    ModelSpec spec;
    spec.variant = v;
    spec.input_dim = 3;
    spec.hidden_widths = {40, 20};
    spec.latent_dim = 2;
    return spec;
}

Matrix random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (double& v : m.storage()) v = rng.uniform();
    return m;
}

} // namespace

TEST_SUITE("models") {

TEST_CASE("trainable parameter counts for the benchmark topology") {
    // Dense encoder 3->40->20->2 plus mirrored decoder: 1022 + 1023 = 2045.
    CHECK(param_count(build_model(lorenz_spec(Variant::AE), 1)) == 2045);
    CHECK(param_count(build_model(lorenz_spec(Variant::DIRESA), 1)) == 2045);
    CHECK(param_count(build_model(lorenz_spec(Variant::CRAE), 1)) == 2045);
    // Batch norm after the latent projection adds gamma and beta: +4.
    CHECK(param_count(build_model(lorenz_spec(Variant::BNAE), 1)) == 2049);
    // Two latent heads replace the single projection: 2045 + 42 = 2087.
    CHECK(param_count(build_model(lorenz_spec(Variant::VAE), 1)) == 2087);
}

TEST_CASE("builds are deterministic per seed") {
    const ModelParams a = build_model(lorenz_spec(Variant::DIRESA), 42);
    const ModelParams b = build_model(lorenz_spec(Variant::DIRESA), 42);
    CHECK(flatten_params(a) == flatten_params(b));
    const ModelParams c = build_model(lorenz_spec(Variant::DIRESA), 43);
    CHECK(flatten_params(a) != flatten_params(c));
}

TEST_CASE("the batch-normalized variant ends its encoder with batch norm") {
    const ModelParams m = build_model(lorenz_spec(Variant::BNAE), 7);
    REQUIRE_FALSE(m.encoder.layers.empty());
    CHECK(std::holds_alternative<BatchNormLayer>(m.encoder.layers.back()));
    const ModelParams plain = build_model(lorenz_spec(Variant::AE), 7);
    CHECK(std::holds_alternative<DenseLayer>(plain.encoder.layers.back()));
}

TEST_CASE("invalid specs are rejected") {
    ModelSpec spec = lorenz_spec(Variant::AE);
    spec.latent_dim = 0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = lorenz_spec(Variant::AE);
    spec.latent_dim = 3; // must compress
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = lorenz_spec(Variant::AE);
    spec.hidden_widths = {};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = lorenz_spec(Variant::AE);
    spec.hidden_widths = {40, 0};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("variant and distance names round trip") {
    for (Variant v : {Variant::AE, Variant::BNAE, Variant::CRAE, Variant::VAE, Variant::DIRESA}) {
        CHECK(variant_from_name(variant_name(v)) == v);
    }
    for (DistanceKind k :
         {DistanceKind::mse, DistanceKind::msle, DistanceKind::corr, DistanceKind::logcorr}) {
        CHECK(distance_kind_from_name(distance_kind_name(k)) == k);
    }
    CHECK_THROWS_AS(variant_from_name("nope"), ConfigError);
    CHECK_THROWS_AS(distance_kind_from_name("nope"), ConfigError);
}

TEST_CASE("distance layer computes per-row euclidean distances") {
    const Matrix a = Matrix::from_rows({{0.0, 0.0}, {1.0, 1.0}});
    const Matrix b = Matrix::from_rows({{3.0, 4.0}, {1.0, 1.0}});
    const auto d = distance_layer(a, b);
    REQUIRE(d.size() == 2);
    CHECK(d[0] == doctest::Approx(5.0));
    CHECK(d[1] == doctest::Approx(0.0));
    CHECK_THROWS_AS(distance_layer(a, Matrix::from_rows({{1.0}})), DimensionError);
}

TEST_CASE("twin batches are accepted exactly when the model wants them") {
    ModelParams diresa_model = build_model(lorenz_spec(Variant::DIRESA), 3);
    ModelParams ae = build_model(lorenz_spec(Variant::AE), 3);
    const Matrix batch = random_batch(4, 3, 10);
    const Matrix twin = random_batch(4, 3, 11);

    CHECK_THROWS_AS(forward(diresa_model, batch, nullptr, nullptr, PassMode::infer), ConfigError);
    CHECK_THROWS_AS(forward(ae, batch, &twin, nullptr, PassMode::infer), ConfigError);
    const Matrix short_twin = random_batch(3, 3, 12);
    CHECK_THROWS_AS(forward(diresa_model, batch, &short_twin, nullptr, PassMode::infer),
                    DimensionError);
    CHECK_NOTHROW(forward(diresa_model, batch, &twin, nullptr, PassMode::infer));
}

TEST_CASE("twin encoder shares the primary encoder weights") {
    ModelParams model = build_model(lorenz_spec(Variant::DIRESA), 21);
    const Matrix batch = random_batch(6, 3, 1);
    // Same rows on both inputs must embed identically: one set of weights.
    const ForwardBundle bundle = forward(model, batch, &batch, nullptr, PassMode::infer);
    CHECK(bundle.latent == bundle.twin_latent);
    for (double d : bundle.d_z) CHECK(d == 0.0);
    for (double d : bundle.d_x) CHECK(d == 0.0);

    const Matrix twin = random_batch(6, 3, 2);
    const ForwardBundle mixed = forward(model, batch, &twin, nullptr, PassMode::infer);
    const Matrix direct = encode(model, twin);
    CHECK(mixed.twin_latent == direct);
}

TEST_CASE("distance outputs match the pairwise formula") {
    ModelParams model = build_model(lorenz_spec(Variant::DIRESA), 9);
    const Matrix batch = random_batch(5, 3, 30);
    const Matrix twin = random_batch(5, 3, 31);
    const ForwardBundle bundle = forward(model, batch, &twin, nullptr, PassMode::infer);
    REQUIRE(bundle.d_x.size() == 5);
    REQUIRE(bundle.d_z.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        double dx = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            const double d = batch(i, j) - twin(i, j);
            dx += d * d;
        }
        CHECK(bundle.d_x[i] == doctest::Approx(std::sqrt(dx)).epsilon(1e-12));
        double dz = 0.0;
        for (std::size_t j = 0; j < 2; ++j) {
            const double d = bundle.latent(i, j) - bundle.twin_latent(i, j);
            dz += d * d;
        }
        CHECK(bundle.d_z[i] == doctest::Approx(std::sqrt(dz)).epsilon(1e-12));
    }
}

TEST_CASE("vae inference encodes to the mean head") {
    ModelParams model = build_model(lorenz_spec(Variant::VAE), 5);
    const Matrix batch = random_batch(7, 3, 40);
    const ForwardBundle bundle = forward(model, batch, nullptr, nullptr, PassMode::infer);
    CHECK(bundle.vae_sample == bundle.vae_mean);
    CHECK(encode(model, batch) == bundle.vae_mean);
    CHECK(bundle.reconstruction.rows() == 7);
    CHECK(bundle.reconstruction.cols() == 3);
}

TEST_CASE("vae training samples with the reparameterization identity") {
    ModelParams model = build_model(lorenz_spec(Variant::VAE), 5);
    const Matrix batch = random_batch(6, 3, 41);
    Rng rng(123);
    ForwardTapes tapes;
    const ForwardBundle bundle = forward(model, batch, nullptr, &rng, PassMode::train, &tapes);
    REQUIRE(bundle.vae_eps.rows() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            const double expected = bundle.vae_mean(i, j) +
                                    std::exp(0.5 * bundle.vae_logvar(i, j)) * bundle.vae_eps(i, j);
            CHECK(bundle.vae_sample(i, j) == doctest::Approx(expected).epsilon(1e-14));
        }
    }
    ModelParams model2 = build_model(lorenz_spec(Variant::VAE), 5);
    CHECK_THROWS_AS(forward(model2, batch, nullptr, nullptr, PassMode::train), ConfigError);
}

TEST_CASE("encode and decode compose into the inference reconstruction") {
    for (Variant v : {Variant::AE, Variant::BNAE, Variant::CRAE, Variant::VAE}) {
        ModelParams model = build_model(lorenz_spec(v), 60);
        const Matrix batch = random_batch(5, 3, 61);
        const ForwardBundle bundle = forward(model, batch, nullptr, nullptr, PassMode::infer);
        const Matrix composed = decode(model, encode(model, batch));
        REQUIRE(composed.same_shape(bundle.reconstruction));
        for (std::size_t i = 0; i < composed.size(); ++i) {
            CHECK(composed.storage()[i] ==
                  doctest::Approx(bundle.reconstruction.storage()[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("flat parameters round trip through the model") {
    for (Variant v : {Variant::AE, Variant::BNAE, Variant::VAE, Variant::DIRESA}) {
        ModelParams model = build_model(lorenz_spec(v), 71);
        std::vector<double> flat = flatten_params(model);
        REQUIRE(flat.size() == param_count(model));
        for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = std::sin(double(i));
        load_flat_params(model, flat);
        CHECK(flatten_params(model) == flat);
        std::vector<double> wrong(flat.size() + 1, 0.0);
        CHECK_THROWS_AS(load_flat_params(model, wrong), DimensionError);
    }
}

} // TEST_SUITE
