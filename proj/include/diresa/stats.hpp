#pragma once

#include <span>
#include <vector>

namespace diresa {

double mean_of(std::span<const double> values);
double population_variance(std::span<const double> values);
double sample_variance(std::span<const double> values); // (n-1) denominator

/// Pearson correlation; throws DegenerateError if either side has (near) zero
/// variance.
double pearson(std::span<const double> a, std::span<const double> b);

/// Median of a copy of the values (average of the two middles for even n).
double median_of(std::span<const double> values);

} // namespace diresa
