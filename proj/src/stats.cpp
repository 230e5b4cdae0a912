#include "diresa/stats.hpp"

#include <algorithm>
#include <cmath>

#include "diresa/errors.hpp"

namespace diresa {

double mean_of(std::span<const double> values) {
    if (values.empty()) throw DimensionError("mean of empty range");
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc / static_cast<double>(values.size());
}

double population_variance(std::span<const double> values) {
    const double mu = mean_of(values);
    double acc = 0.0;
    for (double v : values) acc += (v - mu) * (v - mu);
    return acc / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
    if (values.size() < 2) throw DimensionError("sample variance needs at least 2 values");
    const double mu = mean_of(values);
    double acc = 0.0;
    for (double v : values) acc += (v - mu) * (v - mu);
    return acc / static_cast<double>(values.size() - 1);
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("pearson requires equal lengths");
    if (a.size() < 2) throw DimensionError("pearson needs at least 2 values");
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) {
        throw DegenerateError("pearson on a zero-variance vector");
    }
    return sab / std::sqrt(saa * sbb);
}

double median_of(std::span<const double> values) {
    if (values.empty()) throw DimensionError("median of empty range");
    std::vector<double> copy(values.begin(), values.end());
    std::sort(copy.begin(), copy.end());
    const std::size_t n = copy.size();
    if (n % 2 == 1) return copy[n / 2];
    return 0.5 * (copy[n / 2 - 1] + copy[n / 2]);
}

} // namespace diresa
