#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <vector>

#include "diresa/binio.hpp"
#include "diresa/dataset.hpp"
#include "diresa/errors.hpp"
#include "test_util.hpp"

using namespace diresa;
using namespace diresa::testing;

namespace {

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

Dataset sample_dataset() {
    Dataset ds = toy_dataset(50, 4, 99);
    ds.feature_min = {0.0, -1.0, 2.0, 3.0};
    ds.feature_max = {1.0, 1.0, 4.0, 9.0};
    ds.provenance = "unit-test sample";
    return ds;
}

} // namespace

TEST_SUITE("dataset") {

TEST_CASE("scale_01 maps every column onto [0,1] and inverts exactly") {
    Rng rng(31);
    Matrix raw(40, 3);
    for (double& v : raw.storage()) v = rng.uniform(-15.0, 27.0);
    const ScaleResult scaled = scale_01(raw);

    for (std::size_t j = 0; j < 3; ++j) {
        double lo = 1.0;
        double hi = 0.0;
        for (std::size_t i = 0; i < 40; ++i) {
            const double v = scaled.scaled(i, j);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo == 0.0); // the min and max are attained exactly
        CHECK(hi == 1.0);
    }

    const Matrix back = unscale_01(scaled.scaled, scaled.feature_min, scaled.feature_max);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        CHECK(back.storage()[i] == doctest::Approx(raw.storage()[i]).epsilon(1e-12));
    }
}

TEST_CASE("a constant column cannot be scaled") {
    Matrix raw = Matrix::from_rows({{1.0, 5.0}, {2.0, 5.0}, {3.0, 5.0}});
    CHECK_THROWS_AS(scale_01(raw), DegenerateError);
    CHECK_THROWS_WITH_AS(scale_01(raw), doctest::Contains("column 1"), DegenerateError);
}

TEST_CASE("split_rows extracts the expected row ranges") {
    const Dataset ds = toy_dataset(100, 2, 5);
    CHECK(ds.train.size() == 80);
    CHECK(ds.validation.size() == 10);
    CHECK(ds.test.size() == 10);
    const Matrix val = ds.split_rows(Split::validation);
    REQUIRE(val.rows() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(val(i, 0) == ds.data(80 + i, 0));
        CHECK(val(i, 1) == ds.data(80 + i, 1));
    }
}

TEST_CASE("shuffled pairs permute the split rows deterministically") {
    const Dataset ds = toy_dataset(60, 3, 12);
    const PairedDataset pairs = make_shuffled_pairs(ds, Split::train, 777);
    REQUIRE(pairs.primary.rows() == 48);
    REQUIRE(pairs.shuffled.rows() == 48);
    CHECK(pairs.permutation_seed == 777);

    std::vector<std::size_t> sorted = pairs.permutation;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);

    for (std::size_t i = 0; i < pairs.permutation.size(); ++i) {
        const std::size_t src = pairs.permutation[i];
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(pairs.shuffled(i, j) == pairs.primary(src, j));
        }
    }

    const PairedDataset again = make_shuffled_pairs(ds, Split::train, 777);
    CHECK(again.permutation == pairs.permutation);
    const PairedDataset other = make_shuffled_pairs(ds, Split::train, 778);
    CHECK(other.permutation != pairs.permutation);
}

TEST_CASE("binary container round trips losslessly") {
    TempDir dir;
    const Dataset ds = sample_dataset();
    const std::string path = dir.file("sample.drsa");
    save_dataset(ds, path);
    const Dataset back = load_dataset(path);

    CHECK(back.data == ds.data); // bitwise equality
    CHECK(back.feature_min == ds.feature_min);
    CHECK(back.feature_max == ds.feature_max);
    CHECK(back.train.begin == ds.train.begin);
    CHECK(back.train.end == ds.train.end);
    CHECK(back.validation.begin == ds.validation.begin);
    CHECK(back.validation.end == ds.validation.end);
    CHECK(back.test.begin == ds.test.begin);
    CHECK(back.test.end == ds.test.end);
    CHECK(back.provenance == ds.provenance);
}

TEST_CASE("a dataset without scaling metadata stays unscaled on reload") {
    TempDir dir;
    Dataset ds = toy_dataset(30, 2, 8);
    const std::string path = dir.file("plain.drsa");
    save_dataset(ds, path);
    const Dataset back = load_dataset(path);
    CHECK_FALSE(back.has_scaling());
    CHECK(back.data == ds.data);
}

TEST_CASE("a corrupted magic tag is rejected with its offset") {
    TempDir dir;
    const std::string path = dir.file("bad.drsa");
    save_dataset(sample_dataset(), path);
    auto bytes = read_file_bytes(path);
    bytes[0] = 'X';
    write_bytes(path, bytes);
    try {
        load_dataset(path);
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        CHECK(e.offset == 0);
    }
}

TEST_CASE("truncated files are rejected") {
    TempDir dir;
    const std::string path = dir.file("short.drsa");
    save_dataset(sample_dataset(), path);
    auto bytes = read_file_bytes(path);
    bytes.resize(bytes.size() / 2);
    write_bytes(path, bytes);
    CHECK_THROWS_AS(load_dataset(path), FormatError);

    // Cutting inside the header is also caught.
    bytes.resize(6);
    write_bytes(path, bytes);
    CHECK_THROWS_AS(load_dataset(path), FormatError);
}

TEST_CASE("trailing bytes after the trailer are rejected") {
    TempDir dir;
    const std::string path = dir.file("extra.drsa");
    save_dataset(sample_dataset(), path);
    auto bytes = read_file_bytes(path);
    bytes.push_back(0);
    write_bytes(path, bytes);
    CHECK_THROWS_AS(load_dataset(path), FormatError);
}

TEST_CASE("an unsupported version number is rejected") {
    TempDir dir;
    const std::string path = dir.file("vers.drsa");
    save_dataset(sample_dataset(), path);
    auto bytes = read_file_bytes(path);
    bytes[4] = 9; // little-endian version field follows the 4-byte magic
    write_bytes(path, bytes);
    CHECK_THROWS_AS(load_dataset(path), FormatError);
}

TEST_CASE("missing files surface as io errors") {
    CHECK_THROWS_AS(load_dataset("/nonexistent/nowhere.drsa"), IoError);
    CHECK_THROWS_AS(load_csv("/nonexistent/nowhere.csv"), IoError);
}

TEST_CASE("csv ingestion accepts an optional header") {
    TempDir dir;
    const std::string with_header = dir.file("a.csv");
    {
        std::ofstream out(with_header);
        out << "x,y,z\n";
        for (int i = 0; i < 20; ++i) {
            out << i << "," << 2 * i << "," << 3 * i + 1 << "\n";
        }
    }
    const Dataset a = load_csv(with_header);
    REQUIRE(a.data.rows() == 20);
    REQUIRE(a.data.cols() == 3);
    CHECK(a.data(3, 1) == doctest::Approx(6.0));
    CHECK_FALSE(a.has_scaling());
    CHECK(a.train.size() == 16);
    CHECK(a.validation.size() == 2);
    CHECK(a.test.size() == 2);

    const std::string headerless = dir.file("b.csv");
    {
        std::ofstream out(headerless);
        out << "1.5, 2.5\n-3.0,4.0\n5,6\n0,0\n7,8\n9,10\n11,12\n13,14\n15,16\n17,18\n";
    }
    const Dataset b = load_csv(headerless);
    REQUIRE(b.data.rows() == 10);
    REQUIRE(b.data.cols() == 2);
    CHECK(b.data(0, 0) == doctest::Approx(1.5));
    CHECK(b.data(1, 0) == doctest::Approx(-3.0));
}

TEST_CASE("ragged and non-numeric csv rows are format errors") {
    TempDir dir;
    const std::string ragged = dir.file("ragged.csv");
    {
        std::ofstream out(ragged);
        out << "1,2\n3,4,5\n";
    }
    CHECK_THROWS_AS(load_csv(ragged), FormatError);

    const std::string text_cell = dir.file("text.csv");
    {
        std::ofstream out(text_cell);
        out << "1,2\n3,banana\n";
    }
    CHECK_THROWS_AS(load_csv(text_cell), FormatError);

    const std::string empty = dir.file("empty.csv");
    { std::ofstream out(empty); }
    CHECK_THROWS_AS(load_csv(empty), FormatError);
}

} // TEST_SUITE
