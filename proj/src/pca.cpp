#include "diresa/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "diresa/errors.hpp"

namespace diresa {

EigenResult jacobi_eigen_sym(Matrix a) {
    const std::size_t n = a.rows();
    if (n == 0 || a.cols() != n) throw DimensionError("jacobi requires a square matrix");

    Matrix v = Matrix::identity(n);
    double norm = 0.0;
    for (double x : a.storage()) norm += x * x;
    norm = std::sqrt(norm);
    const double tol = std::max(1e-300, 1e-15 * norm);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        }
        if (std::sqrt(2.0 * off) < tol) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (a(i, i) != a(j, j)) return a(i, i) > a(j, j);
        return i < j;
    });

    EigenResult result;
    result.values.resize(n);
    result.vectors = Matrix(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t col = order[r];
        result.values[r] = a(col, col);
        // Column col of v is the eigenvector; store it as row r with the
        // largest-magnitude entry made positive for a reproducible sign.
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (std::abs(v(k, col)) > best) {
                best = std::abs(v(k, col));
                arg = k;
            }
        }
        const double flip = v(arg, col) < 0.0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < n; ++k) result.vectors(r, k) = flip * v(k, col);
    }
    return result;
}

PcaModel fit_pca(const Matrix& train, std::size_t latent_dim) {
    const std::size_t n = train.rows();
    const std::size_t d = train.cols();
    if (latent_dim == 0 || latent_dim > d) throw ConfigError("pca latent_dim out of range");
    if (n <= d) throw DegenerateError("pca needs more rows than features");

    PcaModel model;
    model.mean = column_means(train);
    Matrix cov(d, d);
    for (std::size_t k = 0; k < n; ++k) {
        const double* row = train.row(k).data();
        for (std::size_t i = 0; i < d; ++i) {
            const double ci = row[i] - model.mean[i];
            for (std::size_t j = i; j < d; ++j) {
                cov(i, j) += ci * (row[j] - model.mean[j]);
            }
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            cov(i, j) /= static_cast<double>(n); // population covariance
            cov(j, i) = cov(i, j);
        }
        total += cov(i, i);
    }
    if (total <= 0.0) throw DegenerateError("pca on rank-zero data");

    EigenResult eigen = jacobi_eigen_sym(cov);
    model.eigenvalues = eigen.values;
    model.components = Matrix(latent_dim, d);
    for (std::size_t r = 0; r < latent_dim; ++r) {
        for (std::size_t k = 0; k < d; ++k) model.components(r, k) = eigen.vectors(r, k);
    }
    return model;
}

Matrix pca_transform(const PcaModel& model, const Matrix& batch) {
    const std::size_t d = model.input_dim();
    const std::size_t l = model.latent_dim();
    if (batch.cols() != d) throw DimensionError("pca transform width mismatch");
    Matrix z(batch.rows(), l);
    for (std::size_t i = 0; i < batch.rows(); ++i) {
        const double* x = batch.row(i).data();
        for (std::size_t r = 0; r < l; ++r) {
            const double* w = model.components.row(r).data();
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) acc += (x[k] - model.mean[k]) * w[k];
            z(i, r) = acc;
        }
    }
    return z;
}

Matrix pca_inverse(const PcaModel& model, const Matrix& latent) {
    const std::size_t d = model.input_dim();
    const std::size_t l = model.latent_dim();
    if (latent.cols() != l) throw DimensionError("pca inverse width mismatch");
    Matrix x(latent.rows(), d);
    for (std::size_t i = 0; i < latent.rows(); ++i) {
        const double* z = latent.row(i).data();
        double* out = x.row(i).data();
        for (std::size_t k = 0; k < d; ++k) out[k] = model.mean[k];
        for (std::size_t r = 0; r < l; ++r) {
            const double* w = model.components.row(r).data();
            for (std::size_t k = 0; k < d; ++k) out[k] += z[r] * w[k];
        }
    }
    return x;
}

} // namespace diresa
