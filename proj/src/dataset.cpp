#include "diresa/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "diresa/binio.hpp"
#include "diresa/errors.hpp"
#include "diresa/rng.hpp"

namespace diresa {

namespace {

constexpr char kMagic[4] = {'D', 'R', 'S', 'A'};
constexpr std::uint32_t kFormatVersion = 1;

/// Temporal 8:1:1 split; validation and test each get floor(n/10), the train
/// split takes the remainder (so the benchmark 100000 becomes 80000/10000/10000).
void assign_splits(Dataset& ds) {
    const std::size_t n = ds.data.rows();
    const std::size_t tail = n / 10;
    ds.train = {0, n - 2 * tail};
    ds.validation = {n - 2 * tail, n - tail};
    ds.test = {n - tail, n};
}

} // namespace

const char* split_name(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    default: return "test";
    }
}

const SplitRange& Dataset::split(Split which) const {
    switch (which) {
    case Split::train: return train;
    case Split::validation: return validation;
    default: return test;
    }
}

Matrix Dataset::split_rows(Split which) const {
    const SplitRange& range = split(which);
    if (range.end > data.rows() || range.begin > range.end) {
        throw DimensionError("split range out of bounds");
    }
    Matrix out(range.size(), data.cols());
    for (std::size_t i = 0; i < range.size(); ++i) {
        const auto src = data.row(range.begin + i);
        auto dst = out.row(i);
        for (std::size_t j = 0; j < data.cols(); ++j) dst[j] = src[j];
    }
    return out;
}

ScaleResult scale_01(const Matrix& data) {
    if (data.empty()) throw DimensionError("scale_01 on empty matrix");
    const std::size_t n = data.rows();
    const std::size_t d = data.cols();
    ScaleResult result;
    result.feature_min.assign(d, 0.0);
    result.feature_max.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double lo = data(0, j);
        double hi = data(0, j);
        for (std::size_t i = 1; i < n; ++i) {
            lo = std::min(lo, data(i, j));
            hi = std::max(hi, data(i, j));
        }
        if (!(hi > lo)) {
            throw DegenerateError("constant feature column " + std::to_string(j) +
                                  " cannot be scaled to [0,1]");
        }
        result.feature_min[j] = lo;
        result.feature_max[j] = hi;
    }
    result.scaled = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            result.scaled(i, j) =
                (data(i, j) - result.feature_min[j]) / (result.feature_max[j] - result.feature_min[j]);
        }
    }
    return result;
}

Matrix unscale_01(const Matrix& scaled, const std::vector<double>& feature_min,
                  const std::vector<double>& feature_max) {
    if (feature_min.size() != scaled.cols() || feature_max.size() != scaled.cols()) {
        throw DimensionError("scaling metadata width does not match matrix");
    }
    Matrix out(scaled.rows(), scaled.cols());
    for (std::size_t i = 0; i < scaled.rows(); ++i) {
        for (std::size_t j = 0; j < scaled.cols(); ++j) {
            out(i, j) = scaled(i, j) * (feature_max[j] - feature_min[j]) + feature_min[j];
        }
    }
    return out;
}

Dataset generate_dataset(const LorenzParams& params) {
    const Matrix raw = integrate_lorenz(params);
    ScaleResult scaled = scale_01(raw);
    Dataset ds;
    ds.data = std::move(scaled.scaled);
    ds.feature_min = std::move(scaled.feature_min);
    ds.feature_max = std::move(scaled.feature_max);
    assign_splits(ds);
    std::ostringstream prov;
    prov << "lorenz63 sigma=" << params.sigma << " r=" << params.r << " b=" << params.b
         << " dt=" << params.dt << " initial=(" << params.initial[0] << "," << params.initial[1]
         << "," << params.initial[2] << ") transient=" << params.transient_steps
         << " steps=" << params.total_steps;
    ds.provenance = prov.str();
    return ds;
}

PairedDataset make_shuffled_pairs(const Dataset& dataset, Split split, std::uint64_t seed) {
    const SplitRange& range = dataset.split(split);
    const std::size_t n = range.size();
    if (n == 0) throw DimensionError(std::string("empty split ") + split_name(split));

    PairedDataset pairs;
    pairs.permutation_seed = seed;
    pairs.permutation.resize(n);
    for (std::size_t i = 0; i < n; ++i) pairs.permutation[i] = i;
    Rng rng(seed);
    fisher_yates(pairs.permutation, rng);
    pairs.primary = dataset.split_rows(split);
    pairs.shuffled = gather_rows(pairs.primary, pairs.permutation);
    return pairs;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    nlohmann::json trailer;
    if (dataset.has_scaling()) {
        trailer["feature_min"] = dataset.feature_min;
        trailer["feature_max"] = dataset.feature_max;
    }
    trailer["splits"] = {
        {"train", {dataset.train.begin, dataset.train.end}},
        {"validation", {dataset.validation.begin, dataset.validation.end}},
        {"test", {dataset.test.begin, dataset.test.end}},
    };
    trailer["provenance"] = dataset.provenance;
    const std::string trailer_text = trailer.dump();

    ByteWriter w;
    w.put_raw(kMagic, sizeof(kMagic));
    w.put_u32(kFormatVersion);
    w.put_u64(dataset.data.rows());
    w.put_u64(dataset.data.cols());
    for (double v : dataset.data.storage()) w.put_f64(v);
    w.put_u64(trailer_text.size());
    w.put_str(trailer_text);
    write_file_atomic(path, w.bytes);
}

Dataset load_dataset(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    ByteReader r(bytes);
    r.expect_magic(kMagic, sizeof(kMagic));
    const std::uint32_t version = r.get_u32();
    if (version != kFormatVersion) {
        throw FormatError("unsupported dataset format version " + std::to_string(version), 4);
    }
    const std::uint64_t rows = r.get_u64();
    const std::uint64_t cols = r.get_u64();
    if (cols == 0 || rows == 0) throw FormatError("empty dataset", 8);
    if (rows > (1ull << 32) || cols > (1ull << 20)) {
        throw FormatError("implausible dataset shape", 8);
    }

    Dataset ds;
    ds.data = Matrix(rows, cols);
    for (double& v : ds.data.storage()) v = r.get_f64();

    const std::size_t trailer_at = r.offset;
    const std::uint64_t trailer_len = r.get_u64();
    const std::string trailer_text = r.get_str(trailer_len);
    if (!r.exhausted()) throw FormatError("trailing bytes after dataset trailer", r.offset);

    nlohmann::json trailer;
    try {
        trailer = nlohmann::json::parse(trailer_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad dataset trailer JSON: ") + e.what(), trailer_at);
    }
    auto read_range = [&](const char* name) -> SplitRange {
        const auto& entry = trailer.at("splits").at(name);
        SplitRange range{entry.at(0).get<std::size_t>(), entry.at(1).get<std::size_t>()};
        if (range.begin > range.end || range.end > rows) {
            throw FormatError(std::string("split ") + name + " out of bounds", trailer_at);
        }
        return range;
    };
    try {
        ds.train = read_range("train");
        ds.validation = read_range("validation");
        ds.test = read_range("test");
        ds.provenance = trailer.at("provenance").get<std::string>();
        if (trailer.contains("feature_min")) {
            ds.feature_min = trailer.at("feature_min").get<std::vector<double>>();
            ds.feature_max = trailer.at("feature_max").get<std::vector<double>>();
            if (ds.feature_min.size() != cols || ds.feature_max.size() != cols) {
                throw FormatError("scaling metadata width mismatch", trailer_at);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad dataset trailer fields: ") + e.what(), trailer_at);
    }
    return ds;
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");

    auto parse_cells = [](const std::string& line, std::vector<double>& out) -> bool {
        out.clear();
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            std::size_t lo = pos;
            std::size_t hi = comma;
            while (lo < hi && (line[lo] == ' ' || line[lo] == '\t')) ++lo;
            while (hi > lo && (line[hi - 1] == ' ' || line[hi - 1] == '\t' || line[hi - 1] == '\r'))
                --hi;
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(line.data() + lo, line.data() + hi, value);
            if (ec != std::errc() || ptr != line.data() + hi) return false;
            out.push_back(value);
            pos = comma + 1;
        }
        return true;
    };

    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    bool first_content_line = true;
    std::vector<double> cells;
    while (std::getline(in, line)) {
        ++line_no;
        bool blank = true;
        for (char c : line) {
            if (c != ' ' && c != '\t' && c != '\r') {
                blank = false;
                break;
            }
        }
        if (blank) continue;
        if (!parse_cells(line, cells)) {
            if (first_content_line) { // non-numeric first line is a header
                first_content_line = false;
                continue;
            }
            throw FormatError("non-numeric CSV cell at line " + std::to_string(line_no), 0);
        }
        first_content_line = false;
        if (!rows.empty() && cells.size() != rows.front().size()) {
            throw FormatError("ragged CSV row at line " + std::to_string(line_no), 0);
        }
        rows.push_back(cells);
    }
    if (rows.empty()) throw FormatError("CSV file has no data rows", 0);

    Dataset ds;
    ds.data = Matrix(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows.front().size(); ++j) ds.data(i, j) = rows[i][j];
    }
    assign_splits(ds);
    ds.provenance = "csv:" + path;
    return ds;
}

} // namespace diresa
