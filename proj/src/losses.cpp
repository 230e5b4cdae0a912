#include "diresa/losses.hpp"

#include <cmath>

#include "diresa/errors.hpp"
#include "diresa/train.hpp"

namespace diresa {

double loss_recon(const Matrix& x, const Matrix& x_hat) {
    if (!x.same_shape(x_hat)) throw DimensionError("reconstruction loss shape mismatch");
    if (x.empty()) throw DimensionError("reconstruction loss on empty matrix");
    double acc = 0.0;
    const auto& a = x.storage();
    const auto& b = x_hat.storage();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

Matrix grad_loss_recon(const Matrix& x, const Matrix& x_hat) {
    if (!x.same_shape(x_hat)) throw DimensionError("reconstruction loss shape mismatch");
    Matrix grad(x.rows(), x.cols());
    const double scale = 2.0 / static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        grad.storage()[i] = scale * (x_hat.storage()[i] - x.storage()[i]);
    }
    return grad;
}

namespace {

/// Population covariance matrix of z's columns (L x L).
Matrix covariance_of(const Matrix& z) {
    const std::size_t n = z.rows();
    const std::size_t l = z.cols();
    std::vector<double> mu = column_means(z);
    Matrix cov(l, l);
    for (std::size_t k = 0; k < n; ++k) {
        const double* row = z.row(k).data();
        for (std::size_t i = 0; i < l; ++i) {
            const double ci = row[i] - mu[i];
            for (std::size_t j = i; j < l; ++j) {
                cov(i, j) += ci * (row[j] - mu[j]);
            }
        }
    }
    for (std::size_t i = 0; i < l; ++i) {
        for (std::size_t j = i; j < l; ++j) {
            cov(i, j) /= static_cast<double>(n);
            cov(j, i) = cov(i, j);
        }
    }
    return cov;
}

} // namespace

double loss_cov(const Matrix& z) {
    const std::size_t n = z.rows();
    const std::size_t l = z.cols();
    if (n < 2) throw DegenerateError("covariance loss needs at least 2 rows");
    if (l < 2) throw DegenerateError("covariance loss needs at least 2 latent components");
    const Matrix cov = covariance_of(z);
    double acc = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
        for (std::size_t j = 0; j < l; ++j) {
            if (i != j) acc += cov(i, j) * cov(i, j);
        }
    }
    return acc / static_cast<double>(l * (l - 1));
}

Matrix grad_loss_cov(const Matrix& z) {
    const std::size_t n = z.rows();
    const std::size_t l = z.cols();
    if (n < 2 || l < 2) throw DegenerateError("covariance loss gradient on degenerate batch");
    const Matrix cov = covariance_of(z);
    const std::vector<double> mu = column_means(z);
    const double scale = 4.0 / (static_cast<double>(l * (l - 1)) * static_cast<double>(n));
    Matrix grad(n, l);
    for (std::size_t a = 0; a < n; ++a) {
        const double* row = z.row(a).data();
        double* g = grad.row(a).data();
        for (std::size_t b = 0; b < l; ++b) {
            double acc = 0.0;
            for (std::size_t j = 0; j < l; ++j) {
                if (j != b) acc += cov(b, j) * (row[j] - mu[j]);
            }
            g[b] = scale * acc;
        }
    }
    return grad;
}

namespace {

struct CorrParts {
    double rho;
    double sab, saa, sbb;
    double ma, mb;
};

CorrParts corr_parts(std::span<const double> a, std::span<const double> b) {
    CorrParts parts{};
    const std::size_t m = a.size();
    parts.ma = 0.0;
    parts.mb = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        parts.ma += a[i];
        parts.mb += b[i];
    }
    parts.ma /= static_cast<double>(m);
    parts.mb /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double da = a[i] - parts.ma;
        const double db = b[i] - parts.mb;
        parts.sab += da * db;
        parts.saa += da * da;
        parts.sbb += db * db;
    }
    if (parts.saa <= 0.0 || parts.sbb <= 0.0) {
        throw DegenerateError("correlation distance loss on a zero-variance distance vector");
    }
    parts.rho = parts.sab / std::sqrt(parts.saa * parts.sbb);
    return parts;
}

std::vector<double> log1_of(std::span<const double> d) {
    std::vector<double> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = std::log(d[i] + 1.0);
    return out;
}

} // namespace

double loss_dist(std::span<const double> d_x, std::span<const double> d_z, DistanceKind kind) {
    if (d_x.size() != d_z.size()) throw DimensionError("distance loss length mismatch");
    const std::size_t m = d_x.size();
    if (m == 0) throw DimensionError("distance loss on empty vectors");
    switch (kind) {
    case DistanceKind::mse: {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double d = d_x[i] - d_z[i];
            acc += d * d;
        }
        return acc / static_cast<double>(m);
    }
    case DistanceKind::msle: {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double d = std::log(d_x[i] + 1.0) - std::log(d_z[i] + 1.0);
            acc += d * d;
        }
        return acc / static_cast<double>(m);
    }
    case DistanceKind::corr: {
        if (m < 2) throw DegenerateError("correlation distance loss needs at least 2 pairs");
        return 1.0 - corr_parts(d_x, d_z).rho;
    }
    default: { // logcorr
        if (m < 2) throw DegenerateError("correlation distance loss needs at least 2 pairs");
        const auto u = log1_of(d_x);
        const auto v = log1_of(d_z);
        return 1.0 - corr_parts(u, v).rho;
    }
    }
}

std::vector<double> grad_loss_dist(std::span<const double> d_x, std::span<const double> d_z,
                                   DistanceKind kind) {
    if (d_x.size() != d_z.size()) throw DimensionError("distance loss length mismatch");
    const std::size_t m = d_x.size();
    std::vector<double> grad(m, 0.0);
    switch (kind) {
    case DistanceKind::mse: {
        const double scale = 2.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) grad[i] = scale * (d_z[i] - d_x[i]);
        return grad;
    }
    case DistanceKind::msle: {
        const double scale = 2.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double u = std::log(d_x[i] + 1.0);
            const double v = std::log(d_z[i] + 1.0);
            grad[i] = scale * (v - u) / (d_z[i] + 1.0);
        }
        return grad;
    }
    case DistanceKind::corr: {
        const CorrParts p = corr_parts(d_x, d_z);
        const double denom = std::sqrt(p.saa * p.sbb);
        for (std::size_t i = 0; i < m; ++i) {
            const double da = d_x[i] - p.ma;
            const double db = d_z[i] - p.mb;
            grad[i] = -(da / denom - p.rho * db / p.sbb);
        }
        return grad;
    }
    default: { // logcorr
        const auto u = log1_of(d_x);
        const auto v = log1_of(d_z);
        const CorrParts p = corr_parts(u, v);
        const double denom = std::sqrt(p.saa * p.sbb);
        for (std::size_t i = 0; i < m; ++i) {
            const double da = u[i] - p.ma;
            const double db = v[i] - p.mb;
            grad[i] = -(da / denom - p.rho * db / p.sbb) / (d_z[i] + 1.0);
        }
        return grad;
    }
    }
}

double loss_kl(const Matrix& mean, const Matrix& logvar) {
    if (!mean.same_shape(logvar)) throw DimensionError("KL loss shape mismatch");
    const std::size_t n = mean.rows();
    if (n == 0) throw DimensionError("KL loss on empty batch");
    double acc = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const double mu = mean.storage()[i];
        const double lv = logvar.storage()[i];
        if (!std::isfinite(mu) || !std::isfinite(lv)) {
            throw DivergenceError("non-finite VAE head output in KL loss");
        }
        acc += 1.0 + lv - mu * mu - std::exp(lv);
    }
    return -0.5 * acc / static_cast<double>(n);
}

void grad_loss_kl(const Matrix& mean, const Matrix& logvar, Matrix& dmean, Matrix& dlogvar) {
    if (!mean.same_shape(logvar)) throw DimensionError("KL loss shape mismatch");
    const double inv_n = 1.0 / static_cast<double>(mean.rows());
    dmean = Matrix(mean.rows(), mean.cols());
    dlogvar = Matrix(mean.rows(), mean.cols());
    for (std::size_t i = 0; i < mean.size(); ++i) {
        dmean.storage()[i] = mean.storage()[i] * inv_n;
        dlogvar.storage()[i] = 0.5 * (std::exp(logvar.storage()[i]) - 1.0) * inv_n;
    }
}

LossComponents total_loss(const ForwardBundle& bundle, const Matrix& batch,
                          const LossWeights& weights, const ModelSpec& spec) {
    LossComponents comps;
    comps.recon = loss_recon(batch, bundle.reconstruction);
    comps.total = weights.w_recon * *comps.recon;
    if (spec.uses_cov_loss()) {
        comps.cov = loss_cov(bundle.latent);
        comps.total += weights.w_cov * *comps.cov;
    }
    if (spec.uses_distance_loss()) {
        comps.dist = loss_dist(bundle.d_x, bundle.d_z, spec.distance_loss);
        comps.total += weights.w_dist * *comps.dist;
    }
    if (spec.uses_kl_loss()) {
        comps.kl = loss_kl(bundle.vae_mean, bundle.vae_logvar);
        comps.total += weights.w_kl * *comps.kl;
    }
    return comps;
}

AnnealState anneal_update(AnnealState state, double observed_loss, std::size_t epoch) {
    if (state.stopped) return state;
    if (observed_loss <= state.target) {
        state.stopped = true;
        state.stopped_epoch = epoch + 1; // first epoch trained under the frozen weight
        return state;
    }
    // Keep the weight an exact multiple of the step.
    const auto increments = static_cast<long>(std::llround(state.weight / state.step));
    state.weight = state.step * static_cast<double>(increments + 1);
    return state;
}

double lr_for_epoch(const TrainConfig& config, std::size_t epoch, const AnnealState& anneal,
                    bool annealed_variant) {
    std::size_t trigger;
    if (annealed_variant) {
        if (!anneal.stopped) return config.base_lr;
        trigger = *anneal.stopped_epoch;
    } else {
        trigger = config.fallback_lr_start_epoch;
    }
    if (epoch < trigger) return config.base_lr;
    const std::size_t halvings = (epoch - trigger) / config.lr_halving_period;
    return config.base_lr / std::pow(2.0, static_cast<double>(halvings));
}

} // namespace diresa
