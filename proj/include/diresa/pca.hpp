#pragma once

#include <vector>

#include "diresa/matrix.hpp"

namespace diresa {

/// Exact linear DR baseline: top eigenpairs of the data covariance matrix.
struct PcaModel {
    std::vector<double> mean;
    Matrix components;               // latent_dim x input_dim, rows orthonormal
    std::vector<double> eigenvalues; // all input_dim values, descending

    std::size_t input_dim() const { return mean.size(); }
    std::size_t latent_dim() const { return components.rows(); }
};

struct EigenResult {
    std::vector<double> values;  // descending
    Matrix vectors;              // row i is the eigenvector of values[i]
};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Vectors are normalized with the largest-magnitude entry positive.
EigenResult jacobi_eigen_sym(Matrix a);

/// Centers the data, forms the population covariance, and keeps the top
/// latent_dim eigenpairs.
PcaModel fit_pca(const Matrix& train, std::size_t latent_dim);

Matrix pca_transform(const PcaModel& model, const Matrix& batch);
Matrix pca_inverse(const PcaModel& model, const Matrix& latent);

} // namespace diresa
