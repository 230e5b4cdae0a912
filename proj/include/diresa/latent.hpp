#pragma once

#include <span>
#include <string>
#include <vector>

#include "diresa/method.hpp"

namespace diresa {

/// Latent components ordered by the original-space variance each one carries.
struct ComponentOrdering {
    std::vector<std::size_t> order;          // latent indices, best first
    std::vector<double> decoded_variance;    // aligned with `order`
    std::vector<double> explained_fraction;  // aligned with `order`
    double unexplained_fraction = 0.0;
};

/// Encodes the split, then for each latent index pins every other component
/// to its split mean, decodes, and measures the decoded total variance
/// (summed over features). Components are ordered by that variance.
ComponentOrdering order_components(const DrMethod& method, const Matrix& split_data);

/// decode(latent means with component j at mean+std) minus decode(... at
/// mean-std). A zero-variance component yields the zero vector.
std::vector<double> decoded_component_delta(const DrMethod& method, const Matrix& split_data,
                                            std::size_t j);

/// Fractions of the split's data variance: per ordered component the decoded
/// share, plus the reconstruction residual share.
struct ExplainedVariance {
    std::vector<double> fractions; // aligned with ComponentOrdering::order
    double unexplained = 0.0;
};

ExplainedVariance explained_variance(const DrMethod& method, const Matrix& split_data);

/// Two-column CSV (original distance, latent distance) for external plotting.
void export_scatter(std::span<const double> d_orig, std::span<const double> d_lat,
                    const std::string& path);

/// Component report CSV: ordered component index, decoded variance, explained
/// fraction, with the unexplained fraction as a trailing row.
void write_component_csv(const ComponentOrdering& ordering, const std::string& path);

} // namespace diresa
