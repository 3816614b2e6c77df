#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "coarsebox/expander.hpp"
#include "coarsebox/group.hpp"
#include "coarsebox/metric.hpp"

using namespace coarsebox;

namespace {

/// Independent order formula for SL2 over a prime field.
std::int64_t sl2_order(std::int64_t p) { return p * (p * p - 1); }

MetricSpace petersen() {
    return MetricSpace::from_edges(10, {{0, 1},
                                        {1, 2},
                                        {2, 3},
                                        {3, 4},
                                        {4, 0},
                                        {0, 5},
                                        {1, 6},
                                        {2, 7},
                                        {3, 8},
                                        {4, 9},
                                        {5, 7},
                                        {7, 9},
                                        {9, 6},
                                        {6, 8},
                                        {8, 5}});
}

}  // namespace

TEST_CASE("degenerate or oversized moduli are rejected") {
    CHECK_THROWS_AS(margulis_group(2), Error);
    CHECK_THROWS_AS(margulis_group(9), Error);
    CHECK_THROWS_AS(margulis_group(1), Error);
    CHECK_THROWS_AS(margulis_group(37), Error);
}

TEST_CASE("the family graphs are 4-regular with the full special linear order") {
    for (std::int64_t p : {3, 5, 7}) {
        auto graph = margulis_graph(p);
        CHECK(graph.size() == sl2_order(p));
        CHECK(graph.connected());
        for (const auto& nb : graph.graph()->adj) CHECK(nb.size() == 4);
    }
}

TEST_CASE("girth agrees with hand values on small graphs") {
    CHECK(girth(MetricSpace::cycle_graph(10)) == 10);
    CHECK(girth(MetricSpace::complete_graph(4)) == 3);
    CHECK_FALSE(girth(MetricSpace::path_graph(5)).has_value());
    // Hexagon with one long chord: the chord splits off a 4-cycle.
    auto chorded = MetricSpace::from_edges(
        6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}, {0, 3}});
    CHECK(girth(chorded) == 4);
    CHECK(girth(petersen()) == 5);
}

TEST_CASE("graph girth matches the relator word search") {
    for (std::int64_t p : {3, 5, 7}) {
        auto bfs = girth(margulis_graph(p));
        auto oracle = margulis_girth_oracle(p);
        REQUIRE(bfs.has_value());
        REQUIRE(oracle.has_value());
        CHECK(*bfs == *oracle);
    }
    CHECK(girth(margulis_graph(3)) == 3);
    // The upper-triangular generator has order 5 mod 5, capping the girth.
    CHECK(*girth(margulis_graph(5)) <= 5);
}

TEST_CASE("girth never decreases along the computed prime range") {
    std::int64_t prev = 0;
    for (std::int64_t p : {3, 5, 7, 11, 13}) {
        auto g = girth(margulis_graph(p));
        REQUIRE(g.has_value());
        CHECK(*g >= prev);
        CHECK(*g >= 3);
        prev = *g;
    }
}

TEST_CASE("complete-graph second eigenvalue is exactly minus one") {
    auto eig = second_adjacency_eigenvalue(MetricSpace::complete_graph(4), 1e-10);
    CHECK(eig.converged);
    CHECK(eig.residual <= 1e-10);
    CHECK(std::abs(eig.value - (-1.0)) <= 1e-8);
}

TEST_CASE("cycle second eigenvalues match the circulant spectrum") {
    for (int n : {6, 10}) {
        auto eig = second_adjacency_eigenvalue(MetricSpace::cycle_graph(n), 1e-10);
        const double expected = 2.0 * std::cos(2.0 * std::numbers::pi / n);
        CHECK(eig.converged);
        CHECK(std::abs(eig.value - expected) <= 1e-8);
    }
}

TEST_CASE("a single edge has second eigenvalue minus one") {
    auto eig = second_adjacency_eigenvalue(MetricSpace::path_graph(2), 1e-10);
    CHECK(eig.converged);
    CHECK(std::abs(eig.value - (-1.0)) <= 1e-8);
}

TEST_CASE("an irregular star resolves its zero middle eigenvalue") {
    auto star = MetricSpace::from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
    auto eig = second_adjacency_eigenvalue(star, 1e-10);
    CHECK(eig.converged);
    CHECK(std::abs(eig.value) <= 1e-8);
}

TEST_CASE("the spectral estimate is deterministic") {
    auto graph = margulis_graph(3);
    auto a = second_adjacency_eigenvalue(graph);
    auto b = second_adjacency_eigenvalue(graph);
    CHECK(a.value == b.value);
    CHECK(a.residual == b.residual);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("the smallest family member reports all diagnostics") {
    auto rep = spectral_report(margulis_graph(3));
    CHECK(rep.order == 24);
    CHECK(rep.degree == 4);
    CHECK(rep.regular);
    CHECK(rep.connected);
    REQUIRE(rep.girth.has_value());
    CHECK(*rep.girth == 3);
    CHECK(rep.diameter >= 3);
    REQUIRE(rep.diameter_over_girth.has_value());
    CHECK(*rep.diameter_over_girth == Rat(rep.diameter, 3));
    CHECK(rep.eigen_converged);
    CHECK(rep.second_eigenvalue < 4.0);
    CHECK(rep.second_eigenvalue > -4.0);
}

TEST_CASE("prime listing covers the default range") {
    CHECK(primes_up_to(13) == std::vector<std::int64_t>{3, 5, 7, 11, 13});
    CHECK(primes_up_to(2).empty());
}

TEST_CASE("the family sweep cross-checks girth and aggregates the ratio") {
    auto fam = margulis_family_report({3, 5, 7});
    REQUIRE(fam.entries.size() == 3);
    CHECK(fam.girth_nondecreasing);
    CHECK(fam.reference_slope == kGirthSlopeReference);
    Rat seen_max{0};
    for (const auto& e : fam.entries) {
        REQUIRE(e.oracle_girth.has_value());
        REQUIRE(e.report.girth.has_value());
        CHECK(*e.oracle_girth == *e.report.girth);
        seen_max = std::max(seen_max, *e.report.diameter_over_girth);
    }
    CHECK(fam.max_ratio == seen_max);
    CHECK(fam.girth_log_slope > 0.0);
}
