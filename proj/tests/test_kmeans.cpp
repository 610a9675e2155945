#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <doctest.h>

#include "odsd/error.hpp"
#include "odsd/kmeans.hpp"
#include "odsd/rng.hpp"
#include "support.hpp"

using namespace odsd;

TEST_SUITE("kmeans") {

TEST_CASE("two well separated pairs") {
    Matrix pts(4, 2, {0.0, 0.0, 0.0, 1.0, 10.0, 10.0, 10.0, 11.0});
    auto res = kmeans(pts, 2, 7);
    REQUIRE(res.centers.rows() == 2);
    // match centers to the expected pair regardless of order
    const bool first_low = res.centers(0, 0) < 5.0;
    const std::size_t low = first_low ? 0 : 1;
    const std::size_t high = 1 - low;
    CHECK(res.centers(low, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(res.centers(low, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(res.centers(high, 0) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(res.centers(high, 1) == doctest::Approx(10.5).epsilon(1e-12));
    CHECK(res.assignment[0] == res.assignment[1]);
    CHECK(res.assignment[2] == res.assignment[3]);
    CHECK(res.assignment[0] != res.assignment[2]);
    CHECK(res.objective == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("k equals one and k equals n") {
    Rng rng(31);
    Matrix pts = test::random_matrix(6, 3, rng, 4.0);
    auto one = kmeans(pts, 1, 3);
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 6; ++i) mean += pts(i, j);
        mean /= 6.0;
        CHECK(one.centers(0, j) == doctest::Approx(mean).epsilon(1e-12));
    }

    auto full = kmeans(pts, 6, 3);
    CHECK(full.objective == doctest::Approx(0.0).epsilon(1e-12));
    std::set<std::size_t> used(full.assignment.begin(), full.assignment.end());
    CHECK(used.size() == 6);
}

TEST_CASE("degenerate requests") {
    Matrix pts(2, 2, {0.0, 0.0, 1.0, 1.0});
    CHECK_THROWS_AS(kmeans(pts, 3, 1), ReduceKSignal);
    CHECK_THROWS_AS(kmeans(Matrix(), 1, 1), ContractViolation);
    try {
        kmeans(pts, 5, 1);
    } catch (const ReduceKSignal& sig) {
        CHECK(sig.points == 2);
        CHECK(sig.k == 5);
    }
}

TEST_CASE("objective trace never increases") {
    Rng rng(32);
    KMeansOptions opts;
    opts.track_objective = true;
    for (int trial = 0; trial < 10; ++trial) {
        Matrix pts = test::random_matrix(20, 2, rng, 3.0);
        auto res = kmeans(pts, 3, 100 + static_cast<std::uint64_t>(trial), opts);
        for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
            CHECK(res.objective_trace[i] <= res.objective_trace[i - 1] + 1e-12);
    }
}

TEST_CASE("matches the exhaustive partition optimum") {
    Rng rng(33);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.below(7));
        const std::size_t k = 1 + static_cast<std::size_t>(rng.below(std::min<std::uint64_t>(3, n)));
        const std::size_t d = 1 + static_cast<std::size_t>(rng.below(3));
        const double scale = trial % 3 == 0 ? 0.3 : 5.0;
        Matrix pts = test::random_matrix(n, d, rng, scale);
        auto res = kmeans(pts, k, 50 + static_cast<std::uint64_t>(trial));
        const double best = test::exhaustive_kmeans_objective(pts, k);
        CHECK(res.objective <= best + 1e-9);
        CHECK(res.objective >= best - 1e-9);
    }
}

TEST_CASE("deterministic per seed") {
    Rng rng(34);
    Matrix pts = test::random_matrix(15, 3, rng, 2.0);
    auto a = kmeans(pts, 3, 77);
    auto b = kmeans(pts, 3, 77);
    CHECK(a.centers.data() == b.centers.data());
    CHECK(a.assignment == b.assignment);
    CHECK(a.objective == b.objective);
}

}  // TEST_SUITE
