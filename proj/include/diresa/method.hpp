#pragma once

#include <memory>
#include <string>

#include "diresa/models.hpp"
#include "diresa/pca.hpp"

namespace diresa {

/// Uniform encode/decode view over every DR technique the toolkit evaluates.
class DrMethod {
public:
    virtual ~DrMethod() = default;
    virtual std::string kind() const = 0;
    virtual std::size_t input_dim() const = 0;
    virtual std::size_t latent_dim() const = 0;
    virtual Matrix encode(const Matrix& batch) const = 0;
    virtual Matrix decode(const Matrix& latent) const = 0;
};

/// Trained autoencoder variant.
class NnMethod : public DrMethod {
public:
    explicit NnMethod(ModelParams model) : model_(std::move(model)) {}

    std::string kind() const override { return variant_name(model_.spec.variant); }
    std::size_t input_dim() const override { return model_.spec.input_dim; }
    std::size_t latent_dim() const override { return model_.spec.latent_dim; }
    Matrix encode(const Matrix& batch) const override { return diresa::encode(model_, batch); }
    Matrix decode(const Matrix& latent) const override { return diresa::decode(model_, latent); }

    const ModelParams& model() const { return model_; }

private:
    ModelParams model_;
};

/// Fitted PCA baseline.
class PcaMethod : public DrMethod {
public:
    explicit PcaMethod(PcaModel model) : model_(std::move(model)) {}

    std::string kind() const override { return "PCA"; }
    std::size_t input_dim() const override { return model_.input_dim(); }
    std::size_t latent_dim() const override { return model_.latent_dim(); }
    Matrix encode(const Matrix& batch) const override { return pca_transform(model_, batch); }
    Matrix decode(const Matrix& latent) const override { return pca_inverse(model_, latent); }

    const PcaModel& model() const { return model_; }

private:
    PcaModel model_;
};

/// Debug embedding: latent space equals the original space.
class IdentityMethod : public DrMethod {
public:
    explicit IdentityMethod(std::size_t dim) : dim_(dim) {}

    std::string kind() const override { return "identity"; }
    std::size_t input_dim() const override { return dim_; }
    std::size_t latent_dim() const override { return dim_; }
    Matrix encode(const Matrix& batch) const override { return batch; }
    Matrix decode(const Matrix& latent) const override { return latent; }

private:
    std::size_t dim_;
};

} // namespace diresa
