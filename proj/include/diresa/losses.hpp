#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "diresa/matrix.hpp"
#include "diresa/models.hpp"

namespace diresa {

/// Weight factors for the active loss components. Reconstruction and distance
/// weights are fixed to 1; the covariance / KL weight is driven by annealing.
struct LossWeights {
    double w_recon = 1.0;
    double w_cov = 0.0;
    double w_dist = 1.0;
    double w_kl = 0.0;
};

/// Mean over all elements of the squared reconstruction error.
double loss_recon(const Matrix& x, const Matrix& x_hat);

/// Normalized squared sum of the off-diagonal latent covariance entries:
/// sum_{i != j} cov_ij(z)^2 / (L (L-1)), population covariance per batch.
double loss_cov(const Matrix& z);

/// Distance-matching losses between input and latent pair distances.
double loss_dist(std::span<const double> d_x, std::span<const double> d_z, DistanceKind kind);

/// KL divergence of N(mean, exp(logvar)) from the standard normal, averaged
/// over the batch: -0.5 mean_batch sum_dim (1 + logvar - mean^2 - exp(logvar)).
double loss_kl(const Matrix& mean, const Matrix& logvar);

/// Per-component record of one loss evaluation; inactive components absent.
struct LossComponents {
    double total = 0.0;
    std::optional<double> recon;
    std::optional<double> cov;
    std::optional<double> dist;
    std::optional<double> kl;
};

/// Weighted sum of the components active for the given spec.
LossComponents total_loss(const ForwardBundle& bundle, const Matrix& batch,
                          const LossWeights& weights, const ModelSpec& spec);

// Analytic gradients (same conventions as the losses above).
Matrix grad_loss_recon(const Matrix& x, const Matrix& x_hat); // d/d x_hat
Matrix grad_loss_cov(const Matrix& z);                        // d/d z
std::vector<double> grad_loss_dist(std::span<const double> d_x, std::span<const double> d_z,
                                   DistanceKind kind); // d/d d_z
void grad_loss_kl(const Matrix& mean, const Matrix& logvar, Matrix& dmean,
                  Matrix& dlogvar); // d/d mean, d/d logvar

/// Annealing controller for the covariance / KL weight factor.
struct AnnealState {
    double weight = 0.0;
    double step = 0.2;
    double target = 2e-5;
    bool stopped = false;
    std::optional<std::size_t> stopped_epoch; // first epoch trained with the frozen weight
};

/// Epoch-end update: while running, weight += step if the observed validation
/// covariance (or KL) loss is above target; reaching the target freezes the
/// weight and records the next epoch as the schedule trigger.
AnnealState anneal_update(AnnealState state, double observed_loss, std::size_t epoch);

struct TrainConfig; // defined in train.hpp

/// Learning rate for an epoch: base until the trigger epoch (annealing stop,
/// or the fallback epoch for non-annealed variants), then halved at each
/// subsequent 10-epoch boundary.
double lr_for_epoch(const TrainConfig& config, std::size_t epoch, const AnnealState& anneal,
                    bool annealed_variant);

} // namespace diresa
