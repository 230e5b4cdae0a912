#include "diresa/kpi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "diresa/binio.hpp"
#include "diresa/errors.hpp"
#include "diresa/rng.hpp"
#include "diresa/stats.hpp"

namespace diresa {

void anchor_distances(const Matrix& data, const Matrix& latent, std::size_t anchor,
                      std::vector<double>& d_orig, std::vector<double>& d_lat) {
    const std::size_t n = data.rows();
    if (latent.rows() != n) throw DimensionError("data and latent row counts differ");
    if (anchor >= n) throw DimensionError("anchor index out of range");
    d_orig.clear();
    d_lat.clear();
    d_orig.reserve(n - 1);
    d_lat.reserve(n - 1);
    const double* ax = data.row(anchor).data();
    const double* az = latent.row(anchor).data();
    const std::size_t dx = data.cols();
    const std::size_t dz = latent.cols();
    for (std::size_t i = 0; i < n; ++i) {
        if (i == anchor) continue;
        const double* x = data.row(i).data();
        double acc = 0.0;
        for (std::size_t k = 0; k < dx; ++k) {
            const double diff = x[k] - ax[k];
            acc += diff * diff;
        }
        d_orig.push_back(std::sqrt(acc));
        const double* z = latent.row(i).data();
        acc = 0.0;
        for (std::size_t k = 0; k < dz; ++k) {
            const double diff = z[k] - az[k];
            acc += diff * diff;
        }
        d_lat.push_back(std::sqrt(acc));
    }
}

namespace {

std::optional<double> safe_pearson(std::span<const double> a, std::span<const double> b) {
    try {
        return pearson(a, b);
    } catch (const DegenerateError&) {
        return std::nullopt;
    }
}

} // namespace

std::pair<std::optional<double>, std::optional<double>>
kpi_global(std::span<const double> d_orig, std::span<const double> d_lat, double log_offset) {
    if (d_orig.size() != d_lat.size()) throw DimensionError("distance vectors differ in length");
    if (d_orig.size() < 2) throw DimensionError("global KPI needs at least 2 distances");
    std::vector<double> lo(d_orig.size());
    std::vector<double> ll(d_lat.size());
    for (std::size_t i = 0; i < d_orig.size(); ++i) {
        lo[i] = std::log(d_orig[i] + log_offset);
        ll[i] = std::log(d_lat[i] + log_offset);
    }
    return {safe_pearson(d_orig, d_lat), safe_pearson(lo, ll)};
}

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (values[i] != values[j]) return values[i] < values[j];
        return i < j;
    });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double shared = 0.5 * static_cast<double>(i + j) + 1.0; // mean of positions+1
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

namespace {

/// Counts strict inversions of y (pairs i < j with y[i] > y[j]) by merge sort.
std::uint64_t count_inversions(std::vector<double>& y, std::vector<double>& scratch,
                               std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t count = count_inversions(y, scratch, lo, mid) +
                          count_inversions(y, scratch, mid, hi);
    std::size_t a = lo;
    std::size_t b = mid;
    std::size_t out = lo;
    while (a < mid && b < hi) {
        if (y[b] < y[a]) { // strict: equal values are not inversions
            count += mid - a;
            scratch[out++] = y[b++];
        } else {
            scratch[out++] = y[a++];
        }
    }
    while (a < mid) scratch[out++] = y[a++];
    while (b < hi) scratch[out++] = y[b++];
    for (std::size_t k = lo; k < hi; ++k) y[k] = scratch[k];
    return count;
}

std::uint64_t tie_pairs(std::span<const double> sorted_values) {
    std::uint64_t pairs = 0;
    std::size_t i = 0;
    while (i < sorted_values.size()) {
        std::size_t j = i;
        while (j + 1 < sorted_values.size() && sorted_values[j + 1] == sorted_values[i]) ++j;
        const std::uint64_t run = j - i + 1;
        pairs += run * (run - 1) / 2;
        i = j + 1;
    }
    return pairs;
}

} // namespace

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (y.size() != n) throw DimensionError("kendall requires equal lengths");
    if (n < 2) throw DegenerateError("kendall needs at least 2 pairs");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (x[i] != x[j]) return x[i] < x[j];
        if (y[i] != y[j]) return y[i] < y[j];
        return i < j;
    });

    const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    std::uint64_t n1 = 0; // pairs tied in x
    std::uint64_t n3 = 0; // pairs tied in both
    {
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
            const std::uint64_t run = j - i + 1;
            n1 += run * (run - 1) / 2;
            std::size_t a = i;
            while (a <= j) {
                std::size_t b = a;
                while (b + 1 <= j && y[order[b + 1]] == y[order[a]]) ++b;
                const std::uint64_t sub = b - a + 1;
                n3 += sub * (sub - 1) / 2;
                a = b + 1;
            }
            i = j + 1;
        }
    }

    std::vector<double> y_seq(n);
    for (std::size_t i = 0; i < n; ++i) y_seq[i] = y[order[i]];
    std::vector<double> scratch(n);
    const std::uint64_t swaps = count_inversions(y_seq, scratch, 0, n); // y_seq now sorted
    const std::uint64_t n2 = tie_pairs(y_seq);

    const double da = static_cast<double>(n0 - n1);
    const double db = static_cast<double>(n0 - n2);
    if (da <= 0.0 || db <= 0.0) {
        throw DegenerateError("kendall tau-b denominator is zero (all ties)");
    }
    const double numerator = static_cast<double>(n0) - static_cast<double>(n1) -
                             static_cast<double>(n2) + static_cast<double>(n3) -
                             2.0 * static_cast<double>(swaps);
    return numerator / std::sqrt(da * db);
}

LocationKpis kpi_location(std::span<const double> d_orig, std::span<const double> d_lat,
                          std::size_t l) {
    const std::size_t m = d_lat.size();
    if (d_orig.size() != m) throw DimensionError("distance vectors differ in length");
    if (l < 2) throw DimensionError("location parameter must be at least 2");
    if (m < l) throw DimensionError("fewer candidates than the location parameter");

    std::vector<std::size_t> lat_order(m);
    std::iota(lat_order.begin(), lat_order.end(), 0);
    std::sort(lat_order.begin(), lat_order.end(), [&](std::size_t i, std::size_t j) {
        if (d_lat[i] != d_lat[j]) return d_lat[i] < d_lat[j];
        return i < j;
    });

    // Ordinal original-space ranks (1-based, ties broken by index) capped at l+1.
    std::vector<std::size_t> orig_order(m);
    std::iota(orig_order.begin(), orig_order.end(), 0);
    std::sort(orig_order.begin(), orig_order.end(), [&](std::size_t i, std::size_t j) {
        if (d_orig[i] != d_orig[j]) return d_orig[i] < d_orig[j];
        return i < j;
    });
    std::vector<std::size_t> orig_rank(m);
    for (std::size_t pos = 0; pos < m; ++pos) {
        orig_rank[orig_order[pos]] = std::min(pos + 1, l + 1);
    }

    LocationKpis out;
    double can = 0.0;
    std::vector<double> dl(l);
    std::vector<double> dn(l);
    for (std::size_t t = 0; t < l; ++t) {
        const std::size_t item = lat_order[t];
        const double r_lat = static_cast<double>(t + 1); // <= l < l+1, no capping needed
        const double r_orig = static_cast<double>(orig_rank[item]);
        can += std::abs(r_lat - r_orig) / (r_lat + r_orig);
        dl[t] = d_lat[item];
        dn[t] = d_orig[item];
    }
    out.can = can / static_cast<double>(l);
    out.pear = safe_pearson(dl, dn);
    const std::vector<double> rl = average_ranks(dl);
    const std::vector<double> rn = average_ranks(dn);
    out.spear = safe_pearson(rl, rn);
    try {
        out.ken = kendall_tau_b(dl, dn);
    } catch (const DegenerateError&) {
        out.ken = std::nullopt;
    }
    return out;
}

namespace {

KpiStats stats_over(const std::vector<SampleKpis>& samples,
                    std::optional<double> SampleKpis::*field, const char* name) {
    std::vector<double> values;
    values.reserve(samples.size());
    std::size_t undefined = 0;
    for (const SampleKpis& s : samples) {
        const auto& v = s.*field;
        if (v) {
            values.push_back(*v);
        } else {
            ++undefined;
        }
    }
    if (values.size() < 2) {
        throw DegenerateError(std::string("KPI ") + name + " has fewer than 2 valid samples");
    }
    KpiStats stats;
    stats.valid = values.size();
    stats.undefined = undefined;
    stats.mean = mean_of(values);
    stats.median = median_of(values);
    stats.stderr_of_mean =
        std::sqrt(sample_variance(values) / static_cast<double>(values.size()));
    return stats;
}

} // namespace

KpiReport aggregate(std::vector<SampleKpis> per_sample, std::vector<std::size_t> anchors,
                    std::size_t location_param) {
    KpiReport report;
    report.location_param = location_param;
    report.corr = stats_over(per_sample, &SampleKpis::corr, "Corr");
    report.logcorr = stats_over(per_sample, &SampleKpis::logcorr, "LogCorr");
    report.can_l = stats_over(per_sample, &SampleKpis::can_l, "Can");
    report.pear_l = stats_over(per_sample, &SampleKpis::pear_l, "Pear");
    report.spear_l = stats_over(per_sample, &SampleKpis::spear_l, "Spear");
    report.ken_l = stats_over(per_sample, &SampleKpis::ken_l, "Ken");
    report.per_sample = std::move(per_sample);
    report.anchors = std::move(anchors);
    return report;
}

std::vector<std::size_t> pick_anchors(std::size_t n, std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> anchors;
    if (count == 0 || count >= n) {
        anchors.resize(n);
        std::iota(anchors.begin(), anchors.end(), 0);
        return anchors;
    }
    // Seeded partial Fisher-Yates draw of distinct anchor rows.
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.uniform_index(n - i);
        std::swap(pool[i], pool[j]);
    }
    anchors.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(anchors.begin(), anchors.end());
    return anchors;
}

KpiReport evaluate_embedding(const Matrix& data, const Matrix& latent, const KpiConfig& config) {
    const std::size_t n = data.rows();
    if (latent.rows() != n) throw DimensionError("data and latent row counts differ");
    if (n < config.location_param + 1) {
        throw DimensionError("dataset smaller than the location parameter window");
    }

    std::vector<std::size_t> anchors = pick_anchors(n, config.sample_count, config.rng_seed);

    std::vector<SampleKpis> per_sample;
    per_sample.reserve(anchors.size());
    std::vector<double> d_orig;
    std::vector<double> d_lat;
    for (std::size_t anchor : anchors) {
        anchor_distances(data, latent, anchor, d_orig, d_lat);
        SampleKpis s;
        const auto [corr, logcorr] = kpi_global(d_orig, d_lat, config.log_offset);
        s.corr = corr;
        s.logcorr = logcorr;
        const LocationKpis loc = kpi_location(d_orig, d_lat, config.location_param);
        s.can_l = loc.can;
        s.pear_l = loc.pear;
        s.spear_l = loc.spear;
        s.ken_l = loc.ken;
        per_sample.push_back(s);
    }
    return aggregate(std::move(per_sample), std::move(anchors), config.location_param);
}

namespace {

/// Continued fraction for the regularized incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 400;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

} // namespace

double incbeta_reg(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw DimensionError("incomplete beta needs positive a, b");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double welch_ttest(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) {
        throw DimensionError("welch t-test needs at least 2 values per sample");
    }
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = sample_variance(a);
    const double vb = sample_variance(b);
    if (va <= 0.0 && vb <= 0.0) {
        throw DegenerateError("welch t-test with zero variance in both samples");
    }
    const double sa = va / na;
    const double sb = vb / nb;
    const double t = (mean_of(a) - mean_of(b)) / std::sqrt(sa + sb);
    const double df = (sa + sb) * (sa + sb) /
                      (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    // Two-sided p-value of the t distribution via the incomplete beta.
    return incbeta_reg(0.5 * df, 0.5, df / (df + t * t));
}

CanberraBaseline canberra_random_baseline(std::size_t l, std::size_t universe,
                                          std::size_t trials, std::uint64_t seed) {
    if (l < 1 || universe < l) throw DimensionError("canberra baseline needs universe >= l");
    if (trials < 2) throw DimensionError("canberra baseline needs at least 2 trials");
    Rng rng(seed);
    std::vector<double> per_trial(trials, 0.0);
    std::vector<std::size_t> drawn;
    drawn.reserve(l);
    for (std::size_t t = 0; t < trials; ++t) {
        // l distinct original-space ranks drawn uniformly from 1..universe.
        drawn.clear();
        while (drawn.size() < l) {
            const std::size_t r = static_cast<std::size_t>(rng.uniform_index(universe)) + 1;
            bool seen = false;
            for (std::size_t v : drawn) {
                if (v == r) {
                    seen = true;
                    break;
                }
            }
            if (!seen) drawn.push_back(r);
        }
        double can = 0.0;
        for (std::size_t i = 0; i < l; ++i) {
            const double r_lat = static_cast<double>(i + 1);
            const double r_orig = static_cast<double>(std::min(drawn[i], l + 1));
            can += std::abs(r_lat - r_orig) / (r_lat + r_orig);
        }
        per_trial[t] = can / static_cast<double>(l);
    }
    CanberraBaseline base;
    base.trials = trials;
    base.mean = mean_of(per_trial);
    base.stderr_of_mean =
        std::sqrt(sample_variance(per_trial) / static_cast<double>(trials));
    return base;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
}

} // namespace

void write_kpi_csv(const std::vector<std::pair<std::string, KpiReport>>& reports,
                   const std::string& path) {
    if (reports.empty()) throw DimensionError("no KPI reports to write");
    const std::size_t l = reports.front().second.location_param;
    const std::string ls = std::to_string(l);
    std::ostringstream os;
    os << "method";
    for (const char* block : {"mean", "median", "stderr"}) {
        os << ',' << block << "_Corr," << block << "_LogCorr," << block << "_Can" << ls << ','
           << block << "_Pear" << ls << ',' << block << "_Spear" << ls << ',' << block << "_Ken"
           << ls;
    }
    os << '\n';
    for (const auto& [name, report] : reports) {
        os << name;
        const KpiStats* all[] = {&report.corr,   &report.logcorr, &report.can_l,
                                 &report.pear_l, &report.spear_l, &report.ken_l};
        for (const KpiStats* s : all) os << ',' << fmt(s->mean);
        for (const KpiStats* s : all) os << ',' << fmt(s->median);
        for (const KpiStats* s : all) os << ',' << fmt(s->stderr_of_mean);
        os << '\n';
    }
    write_file_atomic(path, os.str());
}

void write_pvalues_csv(const std::vector<std::pair<std::string, KpiReport>>& reports,
                       const std::string& path) {
    std::ostringstream os;
    os << "method";
    for (const auto& [name, _] : reports) os << ',' << name;
    os << '\n';
    auto corr_samples = [](const KpiReport& r) {
        std::vector<double> values;
        values.reserve(r.per_sample.size());
        for (const SampleKpis& s : r.per_sample) {
            if (s.corr) values.push_back(*s.corr);
        }
        return values;
    };
    for (std::size_t i = 0; i < reports.size(); ++i) {
        os << reports[i].first;
        const std::vector<double> a = corr_samples(reports[i].second);
        for (std::size_t j = 0; j < reports.size(); ++j) {
            if (i == j) {
                os << ",1";
                continue;
            }
            const std::vector<double> b = corr_samples(reports[j].second);
            try {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.9g", welch_ttest(a, b));
                os << ',' << buf;
            } catch (const DegenerateError&) {
                os << ",nan";
            }
        }
        os << '\n';
    }
    write_file_atomic(path, os.str());
}

} // namespace diresa
