#include "d2oc/error.hpp"
#include "d2oc/transport.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace d2oc;
using namespace testing;

namespace {

Matrix points(std::initializer_list<std::initializer_list<double>> rows) { return Matrix(rows); }

// Weighted mean computed straight from the definition.
Vector weighted_mean(const ReferenceMap& map, const std::vector<int>& idx, const std::vector<double>& pi) {
    Vector acc = Vector::Zero(map.dim());
    double total = 0.0;
    for (std::size_t s = 0; s < idx.size(); ++s) {
        acc += pi[s] * map.point(idx[s]);
        total += pi[s];
    }
    return acc / total;
}

// Exact 1D W2^2 for equal-size uniform sets: sort both and pair in order.
double sorted_assignment(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

// Exhaustive assignment over all permutations; the optimal plan between equal-size uniform
// measures is a permutation.
double brute_force_assignment(const std::vector<double>& a, std::vector<double> b) {
    std::sort(b.begin(), b.end());
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        best = std::min(best, s / static_cast<double>(a.size()));
    } while (std::next_permutation(b.begin(), b.end()));
    return best;
}

std::vector<double> column(const Matrix& M) { return std::vector<double>(M.data(), M.data() + M.rows()); }

}  // namespace

TEST_CASE("reference map validation") {
    const ReferenceMap uniform(points({{0, 0}, {1, 1}}));
    CHECK(uniform.weights()(0) == 0.5);
    const ReferenceMap weighted(points({{0}, {1}, {2}}), Vector{{1.0, 1.0, 2.0}});
    CHECK(weighted.weights()(2) == doctest::Approx(0.5));
    CHECK(weighted.weights().sum() == doctest::Approx(1.0));
    CHECK_THROWS_AS(ReferenceMap(Matrix(0, 2)), Error);
    CHECK_THROWS_AS(ReferenceMap(points({{0}, {1}}), Vector{{1.0}}), Error);
    CHECK_THROWS_AS(ReferenceMap(points({{0}, {1}}), Vector{{1.0, -1.0}}), Error);
    CHECK_THROWS_AS(ReferenceMap(points({{0}, {1}}), Vector{{0.0, 0.0}}), Error);
}

TEST_CASE("selection of a single sample") {
    const ReferenceMap map(points({{4, -2}}));
    const LocalSelection s = select_local_samples(Vector{{10.0, 3.0}}, AgentWeightLedger::from_map(map), map,
                                                  {1, 1e-4, 7.5});
    REQUIRE(s.horizon() == 1);
    CHECK(s.indices[0] == std::vector<int>{0});
    CHECK(s.pi[0] == std::vector<double>{1.0});
}

TEST_CASE("residual dominates the score at equal distance") {
    const ReferenceMap map(points({{1, 0}, {-1, 0}}));
    AgentWeightLedger ledger{Vector{{0.4, 0.1}}};
    const LocalSelection s = select_local_samples(Vector::Zero(2), ledger, map, {1, 1e-4, 7.5});
    CHECK(s.indices[0] == std::vector<int>{0});
}

TEST_CASE("selection equals brute-force top-K of the score") {
    std::mt19937_64 rng(77);
    for (int t = 0; t < 50; ++t) {
        const int N = 10, K = 3;
        const ReferenceMap map(random_matrix(rng, N, 2, 5.0));
        AgentWeightLedger ledger{Vector(N)};
        for (int j = 0; j < N; ++j) ledger.residual(j) = uniform(rng, 0.0, 0.2);
        ledger.residual(uniform_int(rng, 0, N - 1)) = 0.0;  // one covered sample
        const Vector pos = random_vector(rng, 2, 5.0);
        const SelectionParams params{K, 1e-4, 4.0};

        std::vector<std::pair<double, int>> scored;
        for (int j = 0; j < N; ++j)
            if (ledger.residual(j) > params.weight_floor)
                scored.push_back({-ledger.residual(j) * std::exp(-(map.point(j) - pos).norm() / 4.0), j});
        std::sort(scored.begin(), scored.end());
        std::vector<int> expected;
        for (int k = 0; k < K; ++k) expected.push_back(scored[k].second);

        const LocalSelection s = select_local_samples(pos, ledger, map, params, 3);
        REQUIRE(s.horizon() == 3);
        for (int h = 0; h < 3; ++h) {
            CHECK(s.indices[h] == expected);
            CHECK(s.pi[h] == s.pi[0]);
        }
        const double total = std::accumulate(s.pi[0].begin(), s.pi[0].end(), 0.0);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
        for (std::size_t k = 0; k < expected.size(); ++k)
            CHECK(s.pi[0][k] ==
                  doctest::Approx(ledger.residual(expected[k]) /
                                  (ledger.residual(expected[0]) + ledger.residual(expected[1]) +
                                   ledger.residual(expected[2]))));
    }
}

TEST_CASE("selection falls back to nearest samples once everything is covered") {
    const ReferenceMap map(points({{0}, {5}, {1}, {9}}));
    AgentWeightLedger ledger{Vector::Constant(4, 1e-6)};
    const LocalSelection s = select_local_samples(Vector{{0.2}}, ledger, map, {2, 1e-4, 7.5});
    CHECK(s.indices[0] == std::vector<int>{0, 2});
    CHECK(s.pi[0] == std::vector<double>{0.5, 0.5});
}

TEST_CASE("selection argument checks") {
    const ReferenceMap map(points({{0, 0}}));
    const auto ledger = AgentWeightLedger::from_map(map);
    CHECK_THROWS_AS(select_local_samples(Vector::Zero(3), ledger, map, {}), Error);
    CHECK_THROWS_AS(select_local_samples(Vector::Zero(2), AgentWeightLedger{Vector::Ones(2)}, map, {}), Error);
    CHECK_THROWS_AS(select_local_samples(Vector::Zero(2), ledger, map, {0, 1e-4, 1.0}), Error);
}

TEST_CASE("barycenter examples") {
    const ReferenceMap one(points({{2, 3}}));
    const BarycenterTrack a = barycenter(LocalSelection{{{0}}, {{1.0}}}, one);
    CHECK(a.qbar[0] == Vector{{2.0, 3.0}});
    CHECK(a.omega(0) == 1.0);

    const ReferenceMap two(points({{0, 0}, {2, 0}}));
    const BarycenterTrack b = barycenter(LocalSelection{{{0, 1}}, {{0.5, 0.5}}}, two);
    CHECK(b.qbar[0] == Vector{{1.0, 0.0}});
    CHECK(b.omega(0) == 1.0);

    CHECK_THROWS_AS(barycenter(LocalSelection{{{0, 1}}, {{0.0, 0.0}}}, two), Error);
}

TEST_CASE("barycenter matches the weighted mean and stays in the bounding box") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 100; ++t) {
        const ReferenceMap map(random_matrix(rng, 3, 3, 4.0));
        std::vector<double> pi{uniform(rng, 0.01, 1), uniform(rng, 0.01, 1), uniform(rng, 0.01, 1)};
        const std::vector<int> idx{0, 1, 2};
        const BarycenterTrack track = barycenter(LocalSelection{{idx, idx}, {pi, pi}}, map);
        const Vector expected = weighted_mean(map, idx, pi);
        for (int h = 0; h < 2; ++h) {
            CHECK((track.qbar[h] - expected).norm() < 1e-12);
            CHECK(track.omega(h) == doctest::Approx(std::sqrt(pi[0] + pi[1] + pi[2])));
            CHECK((track.qbar[h].array() >= map.samples().colwise().minCoeff().transpose().array() - 1e-12).all());
            CHECK((track.qbar[h].array() <= map.samples().colwise().maxCoeff().transpose().array() + 1e-12).all());
        }
        CHECK(track.stacked().size() == 6);
        CHECK(track.omega_diagonal().size() == 6);
    }
}

TEST_CASE("direct local cost") {
    const ReferenceMap map(points({{0}, {2}}));
    const LocalSelection both{{{0, 1}}, {{1.0, 1.0}}};
    CHECK(local_cost_direct(Vector{{1.0}}, both, map) == 2.0);
    CHECK(local_cost_direct(Vector{{2.0}}, LocalSelection{{{1}}, {{1.0}}}, map) == 0.0);
}

TEST_CASE("local cost splits into barycenter tracking plus spread") {
    std::mt19937_64 rng(99);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const int d = uniform_int(rng, 1, 3), H = uniform_int(rng, 1, 4), N = uniform_int(rng, 1, 12);
        const ReferenceMap map(random_matrix(rng, N, d, 10.0));
        LocalSelection sel;
        for (int h = 0; h < H; ++h) {
            std::vector<int> idx;
            std::vector<double> pi;
            for (int j = 0; j < N; ++j)
                if (uniform(rng, 0, 1) < 0.6 || idx.empty()) {
                    idx.push_back(j);
                    pi.push_back(uniform(rng, 0.01, 1.0));
                }
            sel.indices.push_back(idx);
            sel.pi.push_back(pi);
        }
        const BarycenterTrack track = barycenter(sel, map);
        const Vector Y = random_vector(rng, d * H, 10.0);
        const double direct = local_cost_direct(Y, sel, map);
        const Vector w = track.omega_diagonal();
        const double split = (w.asDiagonal() * (Y - track.stacked())).squaredNorm() + barycenter_spread(sel, map, track);
        worst = std::max(worst, std::abs(direct - split));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("one-dimensional W2") {
    CHECK(wasserstein2_squared_1d({1, 5, 3}, {3, 1, 5}) < 1e-24);
    CHECK(std::sqrt(wasserstein2_squared_1d({0}, {-4.5})) == doctest::Approx(4.5).epsilon(1e-15));
    // Unequal sizes: {0, 1} against {2} moves each half unit of mass by 2 and 1.
    CHECK(wasserstein2_squared_1d({0, 1}, {2}) == doctest::Approx(2.5));

    std::mt19937_64 rng(8);
    for (int t = 0; t < 200; ++t) {
        const int n = uniform_int(rng, 1, 5);
        const std::vector<double> a = column(random_matrix(rng, n, 1, 3.0));
        const std::vector<double> b = column(random_matrix(rng, n, 1, 3.0));
        const double fast = wasserstein2_squared_1d(a, b);
        CHECK(fast == doctest::Approx(brute_force_assignment(a, b)).epsilon(1e-12));
        CHECK(fast == doctest::Approx(sorted_assignment(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("sliced Wasserstein basics") {
    std::mt19937_64 rng(21);
    const Matrix P = random_matrix(rng, 12, 3);
    Matrix shuffled = P.colwise().reverse();
    CHECK(sliced_wasserstein(P, shuffled, 50, 4) < 1e-12);
    CHECK(sliced_wasserstein(Matrix::Zero(1, 1), Matrix::Constant(1, 1, -3.0), Matrix::Ones(1, 1)) ==
          doctest::Approx(3.0));
    // A translation by t moves every projection by <t, theta>; the sliced value is below |t|.
    const Vector t = Vector{{3.0, 0.0, 4.0}};
    const Matrix shifted = P.rowwise() + t.transpose();
    const double sw = sliced_wasserstein(P, shifted, 200, 9);
    CHECK(sw > 0.0);
    CHECK(sw <= 5.0 + 1e-12);
    const Matrix dirs = random_directions(3, 200, 9);
    CHECK(sw == doctest::Approx(std::sqrt((dirs.transpose() * t).squaredNorm() / 200.0)).epsilon(1e-12));
    CHECK((dirs.colwise().norm().array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK(sliced_wasserstein(P, shifted, 200, 9) == sw);
    CHECK_THROWS_AS(sliced_wasserstein(Matrix(0, 3), P, 10, 1), Error);
}

TEST_CASE("exact transport LP") {
    std::mt19937_64 rng(14);
    const Matrix P = random_matrix(rng, 4, 2);
    const Vector a = Vector::Constant(4, 0.25);
    CHECK(exact_wasserstein2_small(P, a, P, a) < 1e-12);
    CHECK(exact_wasserstein2_small(points({{0}, {1}}), Vector{{0.5, 0.5}}, points({{0}, {1}}),
                                   Vector{{0.5, 0.5}}) < 1e-12);
    CHECK(exact_wasserstein2_small(points({{0}, {1}}), Vector{{0.5, 0.5}}, points({{2}}), Vector{{1.0}}) ==
          doctest::Approx(std::sqrt(2.5)).epsilon(1e-12));
    CHECK_THROWS_AS(exact_wasserstein2_small(P, Vector::Constant(4, 0.3), P, a), Error);
}

TEST_CASE("sliced W2 along one axis equals the transport LP") {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 50; ++t) {
        const int M = uniform_int(rng, 1, 8), N = uniform_int(rng, 1, 8);
        const Matrix P = random_matrix(rng, M, 1, 2.0), Q = random_matrix(rng, N, 1, 2.0);
        const double lp = exact_wasserstein2_small(P, Vector::Constant(M, 1.0 / M), Q, Vector::Constant(N, 1.0 / N));
        CHECK(std::abs(sliced_wasserstein(P, Q, Matrix::Ones(1, 1)) - lp) < 1e-8);
    }
}
