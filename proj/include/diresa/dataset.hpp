#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diresa/lorenz.hpp"
#include "diresa/matrix.hpp"

namespace diresa {

enum class Split { train, validation, test };

const char* split_name(Split s);

/// Half-open row range [begin, end).
struct SplitRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
};

/// A feature matrix with optional [0,1] scaling metadata and temporal splits.
struct Dataset {
    Matrix data;
    std::vector<double> feature_min; // empty when the data was never scaled
    std::vector<double> feature_max;
    SplitRange train;
    SplitRange validation;
    SplitRange test;
    std::string provenance;

    bool has_scaling() const { return !feature_min.empty(); }
    const SplitRange& split(Split which) const;
    Matrix split_rows(Split which) const;
};

struct ScaleResult {
    Matrix scaled;
    std::vector<double> feature_min;
    std::vector<double> feature_max;
};

/// Per-feature affine map onto [0,1]. Throws DegenerateError naming the first
/// constant column.
ScaleResult scale_01(const Matrix& data);

/// Inverse of scale_01 given the recorded bounds.
Matrix unscale_01(const Matrix& scaled, const std::vector<double>& feature_min,
                  const std::vector<double>& feature_max);

/// Integrates the Lorenz system, scales the retained trajectory to [0,1], and
/// assigns train/validation/test splits in temporal order (8:1:1).
Dataset generate_dataset(const LorenzParams& params);

/// One split paired with a fixed seeded permutation of itself, used as the
/// twin-encoder input stream.
struct PairedDataset {
    Matrix primary;
    Matrix shuffled;
    std::vector<std::size_t> permutation; // shuffled row i = primary row permutation[i]
    std::uint64_t permutation_seed = 0;
};

PairedDataset make_shuffled_pairs(const Dataset& dataset, Split split, std::uint64_t seed);

/// Binary dataset container with a JSON trailer; lossless round trip.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Numeric CSV ingestion (optional header row); no scaling metadata, splits
/// assigned 8:1:1 in row order.
Dataset load_csv(const std::string& path);

} // namespace diresa
