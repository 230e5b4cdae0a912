#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "diresa/rng.hpp"

using namespace diresa;

TEST_SUITE("rng") {

TEST_CASE("identical seeds reproduce the full stream") {
    Rng a(12345);
    Rng b(12345);
    for (int i = 0; i < 200; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    Rng c(12345);
    Rng d(12345);
    for (int i = 0; i < 200; ++i) {
        CHECK(c.uniform() == d.uniform());
        CHECK(c.normal() == d.normal());
    }
}

TEST_CASE("different seeds give different streams") {
    Rng a(1);
    Rng b(2);
    bool any_diff = false;
    for (int i = 0; i < 16; ++i) any_diff |= (a.next_u64() != b.next_u64());
    CHECK(any_diff);
}

TEST_CASE("uniform stays in [0,1) with the right moments") {
    Rng rng(99);
    const int n = 200000;
    double sum = 0.0;
    double sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        sumsq += u * u;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("bounded uniform covers its interval") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(-3.0, 5.0);
        CHECK(u >= -3.0);
        CHECK(u < 5.0);
    }
}

TEST_CASE("normal has standard moments") {
    Rng rng(2024);
    const int n = 200000;
    double sum = 0.0;
    double sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sumsq += z * z;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("uniform_index is in range and roughly uniform") {
    Rng rng(5);
    std::vector<int> counts(10, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const std::uint64_t k = rng.uniform_index(10);
        REQUIRE(k < 10);
        ++counts[k];
    }
    for (int c : counts) {
        CHECK(c > n / 10 * 0.9);
        CHECK(c < n / 10 * 1.1);
    }
}

TEST_CASE("fisher_yates produces a permutation, deterministically per seed") {
    std::vector<std::size_t> order(100);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(17);
    fisher_yates(order, rng);

    std::vector<std::size_t> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);

    std::vector<std::size_t> again(100);
    std::iota(again.begin(), again.end(), 0);
    Rng rng2(17);
    fisher_yates(again, rng2);
    CHECK(again == order);

    std::vector<std::size_t> other(100);
    std::iota(other.begin(), other.end(), 0);
    Rng rng3(18);
    fisher_yates(other, rng3);
    CHECK(other != order);
}

TEST_CASE("fnv1a64 matches independently computed reference values") {
    // Reference values computed with a separate implementation of the
    // standard 64-bit FNV-1a parameters.
    CHECK(fnv1a64("") == 14695981039346656037ULL);
    CHECK(fnv1a64("a") == 12638187200555641996ULL);
    CHECK(fnv1a64("diresa") == 2245572478077041795ULL);
    const char bytes[] = {'a'};
    CHECK(fnv1a64(bytes, 1) == fnv1a64("a"));
}

TEST_CASE("splitmix64 matches the published finalizer sequence") {
    // splitmix64 seeded at 1234567 emits this as its first output.
    CHECK(splitmix64(1234567) == 6457827717110365317ULL);
    CHECK(splitmix64(0) == 16294208416658607535ULL);
    CHECK(splitmix64(42) == 13679457532755275413ULL);
}

TEST_CASE("derive_seed separates labels and indices") {
    CHECK(derive_seed(7, "init") == 17888320340696374894ULL);
    CHECK(derive_seed(7, std::uint64_t{0}) == 8581286081765471666ULL);

    CHECK(derive_seed(1, "init") != derive_seed(1, "pairs-train"));
    CHECK(derive_seed(1, "init") != derive_seed(2, "init"));
    CHECK(derive_seed(1, std::uint64_t{0}) != derive_seed(1, std::uint64_t{1}));
    // Stable: the same arguments always give the same stream seed.
    CHECK(derive_seed(123, "shuffle") == derive_seed(123, "shuffle"));
}

} // TEST_SUITE
