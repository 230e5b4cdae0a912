#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "diresa/matrix.hpp"

namespace diresa {

/// Controls for the distance-ordering KPI suite.
struct KpiConfig {
    std::size_t location_param = 50;
    std::size_t sample_count = 0; // 0 = every row is an anchor
    std::uint64_t rng_seed = 0;   // anchor subsampling seed
    double log_offset = 1.0;
};

/// Per-anchor KPI values; a disengaged optional marks an undefined KPI
/// (zero variance or an all-ties rank window) that aggregation must skip.
struct SampleKpis {
    std::optional<double> corr;
    std::optional<double> logcorr;
    std::optional<double> can_l;
    std::optional<double> pear_l;
    std::optional<double> spear_l;
    std::optional<double> ken_l;
};

struct KpiStats {
    double mean = 0.0;
    double median = 0.0;
    double stderr_of_mean = 0.0;
    std::size_t valid = 0;
    std::size_t undefined = 0;
};

struct KpiReport {
    std::size_t location_param = 50;
    KpiStats corr, logcorr, can_l, pear_l, spear_l, ken_l;
    std::vector<SampleKpis> per_sample;        // in anchor order
    std::vector<std::size_t> anchors;          // row indices used
};

/// Euclidean distances from one anchor row to every other row (self excluded,
/// remaining rows in order) in original and latent space.
void anchor_distances(const Matrix& data, const Matrix& latent, std::size_t anchor,
                      std::vector<double>& d_orig, std::vector<double>& d_lat);

/// Pearson correlation of the raw and log-shifted distance vectors.
std::pair<std::optional<double>, std::optional<double>>
kpi_global(std::span<const double> d_orig, std::span<const double> d_lat, double log_offset);

struct LocationKpis {
    std::optional<double> can;
    std::optional<double> pear;
    std::optional<double> spear;
    std::optional<double> ken;
};

/// Rank KPIs over the l latent-nearest neighbors: Canberra rank-list distance
/// (original ranks capped at l+1, normalized by l), Pearson, Spearman
/// (average-rank ties) and Kendall tau-b on the restricted distance pairs.
LocationKpis kpi_location(std::span<const double> d_orig, std::span<const double> d_lat,
                          std::size_t l);

/// Mean / median / standard error of the valid entries per KPI.
KpiReport aggregate(std::vector<SampleKpis> per_sample, std::vector<std::size_t> anchors,
                    std::size_t location_param);

/// Distinct anchor rows, ascending: all of them when count is 0 or >= n,
/// otherwise a seeded draw without replacement.
std::vector<std::size_t> pick_anchors(std::size_t n, std::size_t count, std::uint64_t seed);

/// Full per-anchor KPI pass over an embedding (rows of `latent` aligned with
/// rows of `data`).
KpiReport evaluate_embedding(const Matrix& data, const Matrix& latent, const KpiConfig& config);

/// Two-sided Welch t-test p-value for a mean difference between two samples.
double welch_ttest(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta function I_x(a, b) (exposed for verification).
double incbeta_reg(double a, double b, double x);

/// Average ranks (1-based; ties share the mean of their positions).
std::vector<double> average_ranks(std::span<const double> values);

/// Kendall tau-b by merge-sort inversion counting with tie corrections.
/// Throws DegenerateError when a side is entirely tied.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

/// Monte Carlo mean of the Canberra indicator for independent random rank
/// lists (the random baseline the indicator is judged against).
struct CanberraBaseline {
    double mean = 0.0;
    double stderr_of_mean = 0.0;
    std::size_t trials = 0;
};

CanberraBaseline canberra_random_baseline(std::size_t l, std::size_t universe,
                                          std::size_t trials, std::uint64_t seed);

/// Tables 2-3 style CSV: one row per method, mean/median/stderr blocks.
void write_kpi_csv(const std::vector<std::pair<std::string, KpiReport>>& reports,
                   const std::string& path);

/// Pairwise Welch p-values on the per-anchor Corr samples.
void write_pvalues_csv(const std::vector<std::pair<std::string, KpiReport>>& reports,
                       const std::string& path);

} // namespace diresa
