#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diresa/nn.hpp"

namespace diresa {

enum class Variant { AE, BNAE, CRAE, VAE, DIRESA };
enum class DistanceKind { mse, msle, corr, logcorr };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);
const char* distance_kind_name(DistanceKind k);
DistanceKind distance_kind_from_name(const std::string& name);

/// Architecture description for one autoencoder variant.
struct ModelSpec {
    Variant variant = Variant::AE;
    std::size_t input_dim = 3;
    std::vector<std::size_t> hidden_widths{40, 20};
    std::size_t latent_dim = 2;
    DistanceKind distance_loss = DistanceKind::mse; // meaningful only for DIRESA

    bool uses_cov_loss() const { return variant == Variant::CRAE || variant == Variant::DIRESA; }
    bool uses_kl_loss() const { return variant == Variant::VAE; }
    bool uses_distance_loss() const { return variant == Variant::DIRESA; }
    bool annealed() const { return uses_cov_loss() || uses_kl_loss(); }

    void validate() const; // throws ConfigError
};

/// Parameter storage for one model. The DIRESA twin branch is not stored: both
/// encoder passes run through the single `encoder` stack, so weight sharing is
/// structural. For the VAE, `encoder` is the shared trunk up to the last
/// hidden width and the two heads project to latent mean / log-variance.
struct ModelParams {
    ModelSpec spec;
    LayerStack encoder;
    LayerStack vae_mean_head;
    LayerStack vae_logvar_head;
    LayerStack decoder;
};

ModelParams build_model(const ModelSpec& spec, std::uint64_t seed);

/// Outputs of one forward pass; unused fields stay empty.
struct ForwardBundle {
    Matrix reconstruction;
    Matrix latent;
    Matrix twin_latent;        // DIRESA
    std::vector<double> d_x;   // DIRESA: per-row input distance
    std::vector<double> d_z;   // DIRESA: per-row latent distance
    Matrix vae_mean;
    Matrix vae_logvar;
    Matrix vae_sample;
    Matrix vae_eps; // noise actually used (train mode)
};

/// Per-layer tapes recorded by a train-mode forward, consumed by backward.
struct ForwardTapes {
    Tape encoder;
    Tape twin_encoder;
    Tape mean_head;
    Tape logvar_head;
    Tape twin_mean_head;
    Tape decoder;
};

/// Runs the variant's forward pass. twin_batch must be present exactly for
/// DIRESA; rng drives VAE sampling in train mode. Tapes are recorded when
/// requested (train mode only).
ForwardBundle forward(ModelParams& model, const Matrix& batch, const Matrix* twin_batch,
                      Rng* rng, PassMode mode, ForwardTapes* tapes = nullptr);

/// Per-row Euclidean distance between aligned rows of a and b.
std::vector<double> distance_layer(const Matrix& a, const Matrix& b);

/// Deterministic inference-mode encode/decode (VAE encodes to the mean head).
Matrix encode(const ModelParams& model, const Matrix& batch);
Matrix decode(const ModelParams& model, const Matrix& latent);

/// Gradient accumulators mirroring ModelParams.
struct ModelGrads {
    StackGrads encoder;
    StackGrads mean_head;
    StackGrads logvar_head;
    StackGrads decoder;

    static ModelGrads zeros_like(const ModelParams& model);
    void set_zero();
};

/// Trainable parameter count / flat views in declared order:
/// encoder, vae mean head, vae logvar head, decoder.
std::size_t param_count(const ModelParams& model);
std::vector<double> flatten_params(const ModelParams& model);
std::vector<double> flatten_grads(const ModelGrads& grads);
void load_flat_params(ModelParams& model, std::span<const double> flat);

} // namespace diresa
