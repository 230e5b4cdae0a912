#include "doctest.h"

#include <vector>

#include "diresa/errors.hpp"
#include "diresa/matrix.hpp"
#include "diresa/stats.hpp"

using namespace diresa;

TEST_SUITE("matrix") {

TEST_CASE("from_rows lays out values row-major") {
    const Matrix m = Matrix::from_rows({{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}});
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m(0, 0) == 1.0);
    CHECK(m(0, 2) == 3.0);
    CHECK(m(1, 0) == 4.0);
    CHECK(m(1, 2) == 6.0);
    CHECK(m.storage() == std::vector<double>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("ragged literals are rejected") {
    CHECK_THROWS_AS(Matrix::from_rows({{1.0, 2.0}, {3.0}}), DimensionError);
}

TEST_CASE("identity has ones on the diagonal") {
    const Matrix eye = Matrix::identity(3);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(eye(i, j) == (i == j ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("row spans view and mutate storage") {
    Matrix m(2, 2, 0.0);
    m.row(1)[0] = 7.0;
    CHECK(m(1, 0) == 7.0);
    const Matrix& cm = m;
    CHECK(cm.row(1)[0] == 7.0);
}

TEST_CASE("gather_rows picks rows in index order") {
    const Matrix m = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}});
    const std::vector<std::size_t> idx{2, 0, 2};
    const Matrix g = gather_rows(m, idx);
    CHECK(g.rows() == 3);
    CHECK(g(0, 0) == 5.0);
    CHECK(g(1, 0) == 1.0);
    CHECK(g(2, 1) == 6.0);
}

TEST_CASE("column means and population variances match hand values") {
    const Matrix m = Matrix::from_rows({{1.0, 10.0}, {3.0, 10.0}, {5.0, 10.0}});
    const auto means = column_means(m);
    CHECK(means[0] == doctest::Approx(3.0));
    CHECK(means[1] == doctest::Approx(10.0));
    const auto vars = column_variances(m);
    // Population variance of {1,3,5} is ((2^2)+(0)+(2^2))/3 = 8/3.
    CHECK(vars[0] == doctest::Approx(8.0 / 3.0));
    CHECK(vars[1] == doctest::Approx(0.0));
}

TEST_CASE("equality compares shape and contents") {
    const Matrix a = Matrix::from_rows({{1.0, 2.0}});
    const Matrix b = Matrix::from_rows({{1.0, 2.0}});
    const Matrix c = Matrix::from_rows({{1.0}, {2.0}});
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(a.same_shape(b));
    CHECK_FALSE(a.same_shape(c));
}

} // TEST_SUITE

TEST_SUITE("stats") {

TEST_CASE("mean, variances and median match hand values") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    CHECK(mean_of(v) == doctest::Approx(2.5));
    CHECK(population_variance(v) == doctest::Approx(1.25));
    CHECK(sample_variance(v) == doctest::Approx(5.0 / 3.0));
    CHECK(median_of(v) == doctest::Approx(2.5));
    const std::vector<double> odd{5.0, 1.0, 3.0};
    CHECK(median_of(odd) == doctest::Approx(3.0));
}

TEST_CASE("pearson recovers exact linear relations") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> up{3.0, 5.0, 7.0, 9.0};
    const std::vector<double> down{9.0, 7.0, 5.0, 3.0};
    CHECK(pearson(x, up) == doctest::Approx(1.0));
    CHECK(pearson(x, down) == doctest::Approx(-1.0));
    // Hand value: x vs its square over {1..4}.
    const std::vector<double> sq{1.0, 4.0, 9.0, 16.0};
    CHECK(pearson(x, sq) == doctest::Approx(0.9843740386976972).epsilon(1e-12));
}

TEST_CASE("degenerate inputs are rejected") {
    const std::vector<double> x{1.0, 2.0, 3.0};
    const std::vector<double> flat{5.0, 5.0, 5.0};
    CHECK_THROWS_AS(pearson(x, flat), DegenerateError);
    CHECK_THROWS_AS(mean_of(std::vector<double>{}), DimensionError);
    CHECK_THROWS_AS(sample_variance(std::vector<double>{1.0}), DimensionError);
    CHECK_THROWS_AS(pearson(x, std::vector<double>{1.0, 2.0}), DimensionError);
}

} // TEST_SUITE
