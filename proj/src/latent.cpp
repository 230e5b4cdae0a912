#include "diresa/latent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "diresa/binio.hpp"
#include "diresa/errors.hpp"
#include "diresa/losses.hpp"

namespace diresa {

namespace {

double total_variance(const Matrix& m) {
    const std::vector<double> vars = column_variances(m);
    double acc = 0.0;
    for (double v : vars) acc += v;
    return acc;
}

void check_finite(const Matrix& m, const char* what) {
    for (double v : m.storage()) {
        if (!std::isfinite(v)) throw DivergenceError(std::string(what) + " contains non-finite values");
    }
}

} // namespace

ComponentOrdering order_components(const DrMethod& method, const Matrix& split_data) {
    if (split_data.rows() < 2) throw DimensionError("component ordering needs at least 2 rows");
    const Matrix z = method.encode(split_data);
    check_finite(z, "encoded split");
    const std::size_t l = z.cols();
    const std::vector<double> mu = column_means(z);

    const double data_var = total_variance(split_data);
    if (data_var <= 0.0) throw DegenerateError("split data has zero variance");

    std::vector<double> decoded_var(l, 0.0);
    Matrix pinned(z.rows(), l);
    for (std::size_t j = 0; j < l; ++j) {
        for (std::size_t i = 0; i < z.rows(); ++i) {
            double* row = pinned.row(i).data();
            for (std::size_t k = 0; k < l; ++k) row[k] = mu[k];
            row[j] = z(i, j);
        }
        const Matrix decoded = method.decode(pinned);
        check_finite(decoded, "decoded component sweep");
        decoded_var[j] = total_variance(decoded);
    }

    ComponentOrdering ordering;
    ordering.order.resize(l);
    std::iota(ordering.order.begin(), ordering.order.end(), 0);
    std::sort(ordering.order.begin(), ordering.order.end(), [&](std::size_t a, std::size_t b) {
        if (decoded_var[a] != decoded_var[b]) return decoded_var[a] > decoded_var[b];
        return a < b;
    });
    ordering.decoded_variance.resize(l);
    ordering.explained_fraction.resize(l);
    for (std::size_t r = 0; r < l; ++r) {
        ordering.decoded_variance[r] = decoded_var[ordering.order[r]];
        ordering.explained_fraction[r] = decoded_var[ordering.order[r]] / data_var;
    }

    const Matrix recon = method.decode(z);
    const double mse = loss_recon(split_data, recon);
    // MSE is a per-element mean; scale by the feature count to compare with
    // the summed per-feature variance.
    ordering.unexplained_fraction = mse * static_cast<double>(split_data.cols()) / data_var;
    return ordering;
}

std::vector<double> decoded_component_delta(const DrMethod& method, const Matrix& split_data,
                                            std::size_t j) {
    const Matrix z = method.encode(split_data);
    const std::size_t l = z.cols();
    if (j >= l) throw DimensionError("latent component index out of range");
    const std::vector<double> mu = column_means(z);
    const std::vector<double> var = column_variances(z);
    const double sigma = std::sqrt(var[j]);
    if (sigma == 0.0) return std::vector<double>(split_data.cols(), 0.0);

    Matrix probe(2, l);
    for (std::size_t k = 0; k < l; ++k) {
        probe(0, k) = mu[k];
        probe(1, k) = mu[k];
    }
    probe(0, j) = mu[j] + sigma;
    probe(1, j) = mu[j] - sigma;
    const Matrix decoded = method.decode(probe);
    std::vector<double> delta(decoded.cols());
    for (std::size_t k = 0; k < decoded.cols(); ++k) delta[k] = decoded(0, k) - decoded(1, k);
    return delta;
}

ExplainedVariance explained_variance(const DrMethod& method, const Matrix& split_data) {
    const ComponentOrdering ordering = order_components(method, split_data);
    ExplainedVariance out;
    out.fractions = ordering.explained_fraction;
    out.unexplained = ordering.unexplained_fraction;
    return out;
}

void export_scatter(std::span<const double> d_orig, std::span<const double> d_lat,
                    const std::string& path) {
    if (d_orig.size() != d_lat.size()) throw DimensionError("scatter vectors differ in length");
    std::ostringstream os;
    os << "d_orig,d_lat\n";
    char buf[80];
    for (std::size_t i = 0; i < d_orig.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", d_orig[i], d_lat[i]);
        os << buf;
    }
    write_file_atomic(path, os.str());
}

void write_component_csv(const ComponentOrdering& ordering, const std::string& path) {
    std::ostringstream os;
    os << "component,decoded_variance,explained_fraction\n";
    char buf[96];
    for (std::size_t r = 0; r < ordering.order.size(); ++r) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", ordering.order[r],
                      ordering.decoded_variance[r], ordering.explained_fraction[r]);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "unexplained,,%.17g\n", ordering.unexplained_fraction);
    os << buf;
    write_file_atomic(path, os.str());
}

} // namespace diresa
