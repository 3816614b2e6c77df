#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <memory>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "coarsebox/controlled.hpp"
#include "coarsebox/cover.hpp"
#include "coarsebox/functors.hpp"
#include "coarsebox/group.hpp"
#include "coarsebox/metric.hpp"
#include "generators.hpp"

using namespace coarsebox;
using coarsebox_tests::pick;
using coarsebox_tests::random_free_module;
using coarsebox_tests::random_mat;
using coarsebox_tests::random_morphism;

namespace {

std::shared_ptr<const MetricSpace> shared(MetricSpace m) {
    return std::make_shared<const MetricSpace>(std::move(m));
}

/// Cayley graph of a finite group together with its translation action.
struct ActedSpace {
    MetricSpacePtr space;
    std::shared_ptr<const SpaceAction> action;
};

ActedSpace acted_cayley(const Group& g) {
    auto space = shared(cayley_graph(g, true));
    return {space, space->shared_action()};
}

/// Trivial-group module over explicit points/levels, all fibers equal.
ModulePtr plain_module(std::shared_ptr<const MetricSpace> space,
                       std::vector<std::int32_t> points,
                       std::vector<std::int32_t> levels, std::int32_t rank,
                       std::int64_t modulus = 0) {
    GeometricModule m;
    m.space = std::move(space);
    m.carrier = std::move(points);
    m.level = std::move(levels);
    m.fiber.assign(m.carrier.size(), {modulus, rank});
    return make_geometric_module(std::move(m));
}

GroupRingMorphism random_ring_morphism(std::mt19937_64& rng, const Group& g,
                                       CoefficientObject source, CoefficientObject target,
                                       int max_terms) {
    std::map<std::int32_t, Mat> terms;
    const int k = static_cast<int>(pick(rng, 0, max_terms));
    for (int i = 0; i < k; ++i)
        terms[static_cast<std::int32_t>(pick(rng, 0, g.order() - 1))] =
            random_mat(rng, target.rank, source.rank, source.modulus);
    return make_group_ring_morphism(g, source, target, std::move(terms));
}

}  // namespace

// ---------------------------------------------------------------------------
// Group-ring dictionary
// ---------------------------------------------------------------------------

TEST_CASE("identity term translates to the identity morphism on the orbit") {
    auto [space, action] = acted_cayley(cyclic_group(2));
    auto m = make_group_ring_morphism(action->group, {0, 1}, {0, 1},
                                      {{0, Mat::ident(1)}});
    auto phi = group_ring_to_T(m, space, action, 0);
    CHECK(phi == identity_morphism(orbit_module(space, action, 0, {0, 1})));
}

TEST_CASE("a two-term sum yields two entries per orbit row") {
    auto [space, action] = acted_cayley(cyclic_group(2));
    auto m = make_group_ring_morphism(action->group, {0, 1}, {0, 1},
                                      {{0, Mat::scalar(1)}, {1, Mat::scalar(1)}});
    auto phi = group_ring_to_T(m, space, action, 0);
    REQUIRE(phi.entries.size() == 4);
    for (std::int32_t s = 0; s < 2; ++s)
        for (std::int32_t t = 0; t < 2; ++t) CHECK(phi.entries.count({s, t}) == 1);
    CHECK(phi.spatial_propagation == Rat(1));
}

TEST_CASE("the dictionary round-trips terms over several groups and rings") {
    std::mt19937_64 rng(2101);
    for (const auto& g : {cyclic_group(2), cyclic_group(3), cyclic_group(4),
                          symmetric_group(3)}) {
        auto [space, action] = acted_cayley(g);
        for (std::int64_t modulus : {std::int64_t{0}, std::int64_t{5}})
            for (int round = 0; round < 10; ++round) {
                CoefficientObject src{modulus, static_cast<std::int32_t>(pick(rng, 1, 3))};
                CoefficientObject tgt{modulus, static_cast<std::int32_t>(pick(rng, 1, 3))};
                auto m = random_ring_morphism(rng, action->group, src, tgt, 4);
                auto bp = static_cast<std::int32_t>(pick(rng, 0, space->size() - 1));
                auto back = T_to_group_ring(group_ring_to_T(m, space, action, bp));
                CHECK(back.terms == m.terms);
                CHECK(back.source == m.source);
                CHECK(back.target == m.target);
            }
    }
}

TEST_CASE("the zero morphism reads back as an empty term map") {
    auto [space, action] = acted_cayley(cyclic_group(3));
    auto a = orbit_module(space, action, 0, {5, 2});
    auto b = orbit_module(space, action, 0, {5, 1});
    CHECK(T_to_group_ring(zero_morphism(a, b)).terms.empty());
}

TEST_CASE("the dictionary preserves addition") {
    std::mt19937_64 rng(2102);
    auto [space, action] = acted_cayley(symmetric_group(3));
    CoefficientObject obj{5, 2};
    for (int round = 0; round < 20; ++round) {
        auto f = random_ring_morphism(rng, action->group, obj, obj, 3);
        auto g = random_ring_morphism(rng, action->group, obj, obj, 3);
        auto lhs = group_ring_to_T(add(f, g), space, action, 1);
        auto rhs = add(group_ring_to_T(f, space, action, 1),
                       group_ring_to_T(g, space, action, 1));
        CHECK(lhs == rhs);
    }
}

TEST_CASE("the dictionary turns composition into convolution") {
    std::mt19937_64 rng(2103);
    for (const auto& g : {cyclic_group(4), symmetric_group(3)}) {
        auto [space, action] = acted_cayley(g);
        for (std::int64_t modulus : {std::int64_t{0}, std::int64_t{5}})
            for (int round = 0; round < 10; ++round) {
                CoefficientObject a{modulus, 2}, b{modulus, 2}, c{modulus, 2};
                auto f = random_ring_morphism(rng, action->group, b, c, 3);
                auto h = random_ring_morphism(rng, action->group, a, b, 3);
                auto composite = compose(group_ring_to_T(f, space, action, 0),
                                         group_ring_to_T(h, space, action, 0));
                CHECK(T_to_group_ring(composite).terms == convolve(f, h).terms);
            }
    }
}

TEST_CASE("rank-one equivariant morphisms mod five are exactly the 25 term pairs") {
    auto [space, action] = acted_cayley(cyclic_group(2));
    auto src = orbit_module(space, action, 0, {5, 1});
    auto tgt = orbit_module(space, action, 0, {5, 1});

    // Brute force: an entry map on 2x2 index pairs is equivariant exactly
    // when the antidiagonal copies the diagonal.
    std::set<std::vector<std::int64_t>> brute;
    for (std::int64_t e00 = 0; e00 < 5; ++e00)
        for (std::int64_t e01 = 0; e01 < 5; ++e01)
            for (std::int64_t e10 = 0; e10 < 5; ++e10)
                for (std::int64_t e11 = 0; e11 < 5; ++e11)
                    if (e11 == e00 && e10 == e01) brute.insert({e00, e01, e10, e11});
    REQUIRE(brute.size() == 25);

    std::set<std::vector<std::int64_t>> image;
    for (std::int64_t a = 0; a < 5; ++a)
        for (std::int64_t b = 0; b < 5; ++b) {
            std::map<std::int32_t, Mat> terms;
            if (a != 0) terms[0] = Mat::scalar(a, 5);
            if (b != 0) terms[1] = Mat::scalar(b, 5);
            auto phi = group_ring_to_T(
                make_group_ring_morphism(action->group, {5, 1}, {5, 1}, terms), space,
                action, 0);
            auto at = [&](std::int32_t s, std::int32_t t) {
                auto it = phi.entries.find({s, t});
                return it == phi.entries.end() ? std::int64_t{0} : it->second.at(0, 0);
            };
            image.insert({at(0, 0), at(0, 1), at(1, 0), at(1, 1)});
            CHECK(same_module(phi.source, src));
            CHECK(same_module(phi.target, tgt));
        }
    CHECK(image == brute);
}

// ---------------------------------------------------------------------------
// Orbit decomposition
// ---------------------------------------------------------------------------

TEST_CASE("an orbit module is its own orbit form") {
    auto [space, action] = acted_cayley(cyclic_group(4));
    auto m = orbit_module(space, action, 2, {0, 2});
    auto dec = orbit_decompose(m);
    REQUIRE(dec.representatives == std::vector<std::int32_t>{0});
    CHECK(same_module(dec.orbit_form, m));
    CHECK(dec.to_orbit_form == identity_morphism(m));
}

TEST_CASE("two orbits over distinct basepoints split into two blocks") {
    auto [space, action] = acted_cayley(cyclic_group(4));
    GeometricModule raw;
    raw.space = space;
    raw.action = action;
    // Interleave two orbits: even indices over basepoint 0, odd over 2.
    raw.carrier = {0, 2, 1, 3, 2, 0, 3, 1};
    raw.level.assign(8, 1);
    raw.fiber.assign(8, {0, 1});
    raw.translate.assign(4, std::vector<std::int32_t>(8));
    for (std::int32_t g = 0; g < 4; ++g)
        for (std::int32_t o = 0; o < 2; ++o)
            for (std::int32_t h = 0; h < 4; ++h)
                raw.translate[g][2 * h + o] = 2 * ((g + h) % 4) + o;
    auto m = make_geometric_module(std::move(raw));

    auto dec = orbit_decompose(m);
    REQUIRE(dec.representatives == std::vector<std::int32_t>{0, 1});
    REQUIRE(dec.orbit_form->size() == 8);
    // Block one sits over basepoint 0's orbit, block two over basepoint 2's.
    for (std::int32_t g = 0; g < 4; ++g) {
        CHECK(dec.orbit_form->carrier[g] == action->table[g][0]);
        CHECK(dec.orbit_form->carrier[4 + g] == action->table[g][2]);
    }
    CHECK(compose(dec.from_orbit_form, dec.to_orbit_form) == identity_morphism(m));
    CHECK(compose(dec.to_orbit_form, dec.from_orbit_form) ==
          identity_morphism(dec.orbit_form));
    CHECK(propagation(dec.to_orbit_form) == std::make_pair(Rat(0), 0));
}

TEST_CASE("four indices under an order-two action give two orbit summands") {
    auto [space, action] = acted_cayley(cyclic_group(2));
    std::mt19937_64 rng(2104);
    auto m = random_free_module(rng, space, action, 2, 3, 5, 2);
    REQUIRE(m->size() == 4);
    auto dec = orbit_decompose(m);
    CHECK(dec.representatives.size() == 2);
    CHECK(compose(dec.from_orbit_form, dec.to_orbit_form) == identity_morphism(m));
    CHECK(compose(dec.to_orbit_form, dec.from_orbit_form) ==
          identity_morphism(dec.orbit_form));
}

TEST_CASE("orbit decomposition is a displacement-zero isomorphism on samples") {
    std::mt19937_64 rng(2105);
    for (const auto& g : {cyclic_group(3), symmetric_group(3)}) {
        auto [space, action] = acted_cayley(g);
        for (int round = 0; round < 10; ++round) {
            auto m = random_free_module(rng, space, action, 3, 2, 0, 3);
            auto dec = orbit_decompose(m);
            CHECK(compose(dec.from_orbit_form, dec.to_orbit_form) ==
                  identity_morphism(m));
            CHECK(compose(dec.to_orbit_form, dec.from_orbit_form) ==
                  identity_morphism(dec.orbit_form));
            CHECK(propagation(dec.to_orbit_form) == std::make_pair(Rat(0), 0));
            CHECK(propagation(dec.from_orbit_form) == std::make_pair(Rat(0), 0));
        }
    }
}

// ---------------------------------------------------------------------------
// Descent along covers
// ---------------------------------------------------------------------------

namespace {

struct DoubleCover {
    MetricCoverMap cover;
    std::shared_ptr<const SpaceAction> deck;
};

DoubleCover certified_cyclic_cover(int total, int base) {
    DoubleCover out{cyclic_cover(total, base), nullptr};
    certify_max_radius(out.cover);
    out.deck = deck_action(out.cover);
    return out;
}

}  // namespace

TEST_CASE("the identity descends to the identity") {
    auto [cover, deck] = certified_cyclic_cover(8, 4);
    auto m = orbit_module(cover.total, deck, 0, {0, 2});
    CHECK(descend(identity_morphism(m), cover) ==
          identity_morphism(descend_module(m, cover)));
}

TEST_CASE("unit-displacement entries stay unit-displacement downstairs") {
    auto [cover, deck] = certified_cyclic_cover(8, 4);
    CHECK(cover.certified_radius == Rat(1));
    auto src = orbit_module(cover.total, deck, 0, {0, 1});
    auto tgt = orbit_module(cover.total, deck, 1, {0, 1});
    auto phi = make_morphism(src, tgt,
                             {{{0, 0}, Mat::scalar(1)}, {{1, 1}, Mat::scalar(1)}});
    REQUIRE(phi.spatial_propagation == Rat(1));
    auto down = descend(phi, cover);
    REQUIRE(down.entries.size() == 1);
    CHECK(down.entries.count({0, 0}) == 1);
    CHECK(down.entries.at({0, 0}) == Mat::scalar(1));
    CHECK(down.spatial_propagation == Rat(1));
    CHECK(down.source->carrier == std::vector<std::int32_t>{0});
    CHECK(down.target->carrier == std::vector<std::int32_t>{1});
}

TEST_CASE("entries meeting both points of a fiber gather into one sum") {
    auto [cover, deck] = certified_cyclic_cover(8, 4);
    auto src = orbit_module(cover.total, deck, 0, {0, 1});
    auto tgt = orbit_module(cover.total, deck, 1, {0, 1});
    // Index h of src sits over vertex 4h; of tgt over 4h+1.  Reach both
    // preimages of base vertex 1 from source vertex 0.
    auto phi = make_morphism(src, tgt,
                             {{{0, 0}, Mat::scalar(2)},
                              {{1, 1}, Mat::scalar(2)},
                              {{0, 1}, Mat::scalar(3)},
                              {{1, 0}, Mat::scalar(3)}});
    auto down = descend(phi, cover);
    REQUIRE(down.entries.size() == 1);
    CHECK(down.entries.at({0, 0}) == Mat::scalar(5));
}

TEST_CASE("descent respects composition on random equivariant pairs") {
    std::mt19937_64 rng(2106);
    for (int total : {8, 12, 16, 20, 24}) {
        auto [cover, deck] = certified_cyclic_cover(total, 4);
        for (int round = 0; round < 10; ++round) {
            auto a = random_free_module(rng, cover.total, deck, 2, 2, 5, 2);
            auto b = random_free_module(rng, cover.total, deck, 2, 2, 5, 2);
            auto c = random_free_module(rng, cover.total, deck, 2, 2, 5, 2);
            auto psi = random_morphism(rng, a, b, 4);
            auto phi = random_morphism(rng, b, c, 4);
            CHECK(descend(compose(phi, psi), cover) ==
                  compose(descend(phi, cover), descend(psi, cover)));
        }
    }
}

TEST_CASE("the zero morphism is trivially consistent with faithfulness") {
    auto [cover, deck] = certified_cyclic_cover(12, 4);
    auto m = orbit_module(cover.total, deck, 0, {0, 1});
    auto rep = descent_faithfulness_check(zero_morphism(m, m), cover);
    CHECK(rep.verdict == FaithfulnessVerdict::Pass);
    CHECK(rep.morphism_zero);
    CHECK(rep.descended_zero);
}

TEST_CASE("fiber-preserving morphisms descend faithfully on cyclic covers") {
    std::mt19937_64 rng(2107);
    for (int k = 2; k <= 6; ++k) {
        auto [cover, deck] = certified_cyclic_cover(4 * k, 4);
        // Two orbits over the same vertex admit displacement-zero morphisms.
        auto base = plain_module(cover.base, {2, 2}, {0, 0}, 1, 5);
        auto up = lift_module(base, cover, deck);
        for (int round = 0; round < 20; ++round) {
            EntryMap entries;
            auto value = Mat::scalar(pick(rng, 1, 4), 5);
            for (std::int32_t g = 0; g < k; ++g)
                entries[{up->translate[g][0], up->translate[g][1]}] = value;
            auto phi = make_morphism(up, up, std::move(entries));
            REQUIRE(phi.spatial_propagation == Rat(0));
            auto rep = descent_faithfulness_check(phi, cover);
            CHECK(rep.verdict == FaithfulnessVerdict::Pass);
            CHECK_FALSE(rep.descended_zero);
        }
    }
}

TEST_CASE("wide entries cancel below the radius threshold") {
    auto [cover, deck] = certified_cyclic_cover(8, 4);
    auto src = lift_module(plain_module(cover.base, {0}, {0}, 1, 0), cover, deck);
    auto tgt = lift_module(plain_module(cover.base, {1}, {0}, 1, 0), cover, deck);
    // Source indices sit over vertices {0, 4}; target over {1, 5}.  Opposite
    // signs on the two target fiber points cancel in the gathered sum.
    auto phi = make_morphism(src, tgt,
                             {{{0, 0}, Mat::scalar(1)},
                              {{1, 1}, Mat::scalar(1)},
                              {{0, 1}, Mat::scalar(-1)},
                              {{1, 0}, Mat::scalar(-1)}});
    REQUIRE(phi.spatial_propagation == Rat(3));
    REQUIRE_FALSE(phi.is_zero());
    CHECK(descend(phi, cover).is_zero());

    auto rep = descent_faithfulness_check(phi, cover);
    CHECK(rep.verdict == FaithfulnessVerdict::Skip);
    CHECK(rep.required_radius == Rat(6));
    CHECK(rep.certified_radius == Rat(1));
}

TEST_CASE("a certificate of twice the displacement forces faithful descent") {
    std::mt19937_64 rng(2108);
    auto [cover, deck] = certified_cyclic_cover(16, 8);
    REQUIRE(cover.certified_radius == Rat(2));
    auto src = orbit_module(cover.total, deck, 0, {5, 1});
    auto tgt = orbit_module(cover.total, deck, 1, {5, 1});
    for (int round = 0; round < 20; ++round) {
        auto phi = random_morphism(rng, src, tgt, 2);
        if (phi.spatial_propagation > Rat(1)) continue;
        auto rep = descent_faithfulness_check(phi, cover);
        CHECK(rep.verdict == FaithfulnessVerdict::Pass);
        CHECK(rep.descended_zero == phi.is_zero());
    }
}

TEST_CASE("lifting a module inverts descent on objects") {
    std::mt19937_64 rng(2109);
    auto [cover, deck] = certified_cyclic_cover(20, 4);
    for (int round = 0; round < 10; ++round) {
        std::vector<std::int32_t> points, levels;
        const int n = static_cast<int>(pick(rng, 1, 5));
        for (int i = 0; i < n; ++i) {
            points.push_back(static_cast<std::int32_t>(pick(rng, 0, 3)));
            levels.push_back(static_cast<std::int32_t>(pick(rng, 0, 3)));
        }
        auto base = plain_module(cover.base, points, levels,
                                 static_cast<std::int32_t>(pick(rng, 0, 3)), 5);
        auto up = lift_module(base, cover, deck);
        CHECK(up->size() == 5 * base->size());
        CHECK(same_module(descend_module(up, cover), base));
    }
}

TEST_CASE("tower certificates locate the faithful suffix") {
    std::vector<MetricCoverMap> tower;
    for (int base : {4, 8, 16}) {
        tower.push_back(cyclic_cover(32, base));
        certify_max_radius(tower.back());
    }
    // Certificates grow as 1, 2, 4.
    CHECK(faithfulness_threshold_stage(tower, Rat(1, 2)).stage == std::size_t{0});
    CHECK(faithfulness_threshold_stage(tower, Rat(1)).stage == std::size_t{1});
    CHECK(faithfulness_threshold_stage(tower, Rat(2)).stage == std::size_t{2});
    CHECK_FALSE(faithfulness_threshold_stage(tower, Rat(3)).stage.has_value());
}

// ---------------------------------------------------------------------------
// Induction between equivariant flavors
// ---------------------------------------------------------------------------

TEST_CASE("induce and restrict round-trip a single-orbit module") {
    auto [space, g_action] = acted_cayley(cyclic_group(4));
    std::vector<std::int32_t> h{0, 2};
    auto h_action = restricted_action(g_action, h);
    auto m = orbit_module(space, h_action, 0, {5, 2});

    auto rt = induction_round_trip(m, g_action, h);
    REQUIRE(rt.induced->size() == 2 * m->size());
    REQUIRE(rt.induced->coset_count() == 2);
    CHECK(compose(rt.from_restricted, rt.to_restricted) == identity_morphism(m));
    CHECK(compose(rt.to_restricted, rt.from_restricted) ==
          identity_morphism(rt.restricted));
    CHECK(propagation(rt.to_restricted) == std::make_pair(Rat(0), 0));
}

TEST_CASE("induced fibers sit on their coset labels") {
    auto [space, g_action] = acted_cayley(cyclic_group(4));
    std::vector<std::int32_t> h{0, 2};
    auto m = orbit_module(space, restricted_action(g_action, h), 1, {0, 3});
    auto up = induce_module(m, g_action, h);
    const std::int32_t n = m->size();
    for (std::int32_t c = 0; c < up->coset_count(); ++c)
        for (std::int32_t s = 0; s < n; ++s) {
            const std::int32_t j = c * n + s;
            for (std::int32_t c2 = 0; c2 < up->coset_count(); ++c2)
                CHECK(up->fiber[j][c2].rank == (c2 == c ? 3 : 0));
            CHECK(up->carrier[j] ==
                  g_action->table[up->cosets.rep[c]][m->carrier[s]]);
            CHECK(up->level[j] == m->level[s]);
        }
}

TEST_CASE("taking the whole group as subgroup round-trips without spreading") {
    auto [space, g_action] = acted_cayley(symmetric_group(3));
    std::vector<std::int32_t> all(6);
    for (std::int32_t i = 0; i < 6; ++i) all[i] = i;
    auto m = orbit_module(space, restricted_action(g_action, all), 0, {0, 1});
    auto rt = induction_round_trip(m, g_action, all);
    CHECK(rt.induced->coset_count() == 1);
    CHECK(rt.induced->size() == m->size());
    CHECK(compose(rt.from_restricted, rt.to_restricted) == identity_morphism(m));
}

TEST_CASE("morphism layers restrict and extend inversely") {
    std::mt19937_64 rng(2110);
    auto [space, g_action] = acted_cayley(cyclic_group(4));
    std::vector<std::int32_t> h{0, 2};
    auto h_action = restricted_action(g_action, h);
    for (int round = 0; round < 15; ++round) {
        auto a = random_free_module(rng, space, h_action, 2, 2, 5, 2);
        auto b = random_free_module(rng, space, h_action, 2, 2, 5, 2);
        auto ia = induce_module(a, g_action, h);
        auto ib = induce_module(b, g_action, h);
        auto ra = restrict_functor(ia, a->action);
        auto rb = restrict_functor(ib, b->action);

        auto f = random_morphism(rng, a, b, 4);
        // The restricted endpoints carry the original indices first; reuse
        // the same entries there.
        auto layer = make_morphism(ra, rb, f.entries);
        auto big = extend_functor(layer, ia, ib);
        CHECK(restrict_functor(big, ra, rb) == layer);
        CHECK(extend_functor(restrict_functor(big, ra, rb), ia, ib) == big);
    }
}

TEST_CASE("restriction preserves both displacement components exactly") {
    std::mt19937_64 rng(2111);
    for (const auto& g : {cyclic_group(4), symmetric_group(3)}) {
        auto [space, g_action] = acted_cayley(g);
        for (const auto& h : all_subgroups(g_action->group)) {
            auto h_action = restricted_action(g_action, h);
            for (int round = 0; round < 5; ++round) {
                auto a = random_free_module(rng, space, h_action, 2, 2, 0, 3);
                auto b = random_free_module(rng, space, h_action, 2, 2, 0, 3);
                auto ia = induce_module(a, g_action, h);
                auto ib = induce_module(b, g_action, h);
                auto ra = restrict_functor(ia, a->action);
                auto rb = restrict_functor(ib, b->action);
                auto layer = make_morphism(ra, rb, random_morphism(rng, a, b, 4).entries);
                auto big = extend_functor(layer, ia, ib);
                CHECK(big.spatial_propagation == layer.spatial_propagation);
                CHECK(big.level_propagation == layer.level_propagation);
                auto back = restrict_functor(big, ra, rb);
                CHECK(back.spatial_propagation == big.spatial_propagation);
                CHECK(back.level_propagation == big.level_propagation);
            }
        }
    }
}

TEST_CASE("round trips hold for every subgroup of small groups") {
    std::mt19937_64 rng(2112);
    for (const auto& g : {cyclic_group(4), symmetric_group(3)}) {
        auto [space, g_action] = acted_cayley(g);
        for (const auto& h : all_subgroups(g_action->group)) {
            auto h_action = restricted_action(g_action, h);
            for (int round = 0; round < 3; ++round) {
                auto m = random_free_module(rng, space, h_action, 2, 2, 5, 2);
                auto rt = induction_round_trip(m, g_action, h);
                CHECK(compose(rt.from_restricted, rt.to_restricted) ==
                      identity_morphism(m));
                CHECK(compose(rt.to_restricted, rt.from_restricted) ==
                      identity_morphism(rt.restricted));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Double-coset shuffle
// ---------------------------------------------------------------------------

TEST_CASE("trivial V gives a single part matching the cosets directly") {
    auto g = cyclic_group(6);
    auto bij = vset_bijection(g, {0, 3}, {0});
    CHECK(bij.vh_mod_h.size() == 1);
    CHECK(bij.mod_vh.count == bij.mod_h.count);
    for (std::int32_t j = 0; j < bij.mod_vh.count; ++j)
        CHECK(bij.backward[bij.forward[0][j]] == std::make_pair(0, j));
}

TEST_CASE("a transposition against the normal core covers both cosets") {
    auto g = symmetric_group(3);
    // Even permutations form the only order-3 subgroup.
    std::vector<std::int32_t> a3;
    for (const auto& h : all_subgroups(g))
        if (h.size() == 3) a3 = h;
    REQUIRE(a3.size() == 3);
    std::vector<std::int32_t> v;
    for (std::int32_t x = 0; x < 6; ++x)
        if (g.mul_idx(x, x) == 0 && x != 0) {
            v = subgroup_closure(g, {x});
            break;
        }
    auto bij = vset_bijection(g, a3, v);
    CHECK(bij.vh.size() == 6);        // VH is the whole group
    CHECK(bij.vh_mod_h.size() == 2);  // both cosets of the core lie inside VH
    CHECK(bij.mod_vh.count == 1);
    std::set<std::int32_t> hit;
    for (std::int32_t i = 0; i < 2; ++i) hit.insert(bij.forward[i][0]);
    CHECK(hit.size() == 2);
}

TEST_CASE("a transposition against the trivial subgroup tiles the group") {
    auto g = symmetric_group(3);
    std::vector<std::int32_t> v;
    for (std::int32_t x = 1; x < 6; ++x)
        if (g.mul_idx(x, x) == 0) {
            v = subgroup_closure(g, {x});
            break;
        }
    auto bij = vset_bijection(g, {0}, v);
    CHECK(bij.vh_mod_h.size() == 2);
    CHECK(bij.mod_vh.count == 3);
    CHECK(bij.mod_h.count == 6);
    std::set<std::int32_t> hit;
    for (std::int32_t i = 0; i < 2; ++i)
        for (std::int32_t j = 0; j < 3; ++j) hit.insert(bij.forward[i][j]);
    CHECK(hit.size() == 6);
}

TEST_CASE("the shuffle verifies across all normal-times-subgroup triples") {
    for (const auto& g : {cyclic_group(4), cyclic_group(6), symmetric_group(3),
                          symmetric_group(4)}) {
        auto subs = all_subgroups(g);
        for (const auto& h : subs) {
            if (!is_normal_subgroup(g, h)) continue;
            for (const auto& v : subs) {
                auto bij = vset_bijection(g, h, v);
                CHECK(bij.vh_mod_h.size() * bij.mod_vh.count ==
                      static_cast<std::size_t>(bij.mod_h.count));
            }
        }
    }
}

TEST_CASE("any valid section gives a bijection") {
    std::mt19937_64 rng(2113);
    auto g = symmetric_group(4);
    std::vector<std::int32_t> v4;
    for (const auto& h : all_subgroups(g))
        if (h.size() == 4 && is_normal_subgroup(g, h)) v4 = h;
    REQUIRE(v4.size() == 4);
    std::vector<std::int32_t> v;
    for (std::int32_t x = 1; x < g.order(); ++x)
        if (g.mul_idx(x, x) == 0) {
            v = subgroup_closure(g, {x});
            break;
        }

    auto reference = vset_bijection(g, v4, v);
    for (int round = 0; round < 5; ++round) {
        std::vector<std::vector<std::int32_t>> candidates(reference.mod_vh.count);
        for (std::int32_t a = 0; a < g.order(); ++a)
            candidates[reference.mod_vh.coset_of[g.inv_idx(a)]].push_back(a);
        std::vector<std::int32_t> section;
        for (auto& c : candidates)
            section.push_back(c[static_cast<std::size_t>(pick(rng, 0, c.size() - 1))]);
        // The builder re-verifies invertibility and equivariance internally.
        auto bij = vset_bijection(g, v4, v, &section);
        CHECK(bij.section == section);
    }
}

TEST_CASE("a non-normal subgroup is rejected") {
    auto g = symmetric_group(3);
    std::vector<std::int32_t> v;
    for (std::int32_t x = 1; x < 6; ++x)
        if (g.mul_idx(x, x) == 0) {
            v = subgroup_closure(g, {x});
            break;
        }
    CHECK_THROWS_AS(vset_bijection(g, v, {0}), Error);
}

// ---------------------------------------------------------------------------
// Net rearrangement
// ---------------------------------------------------------------------------

TEST_CASE("one coarse net gathers everything at a single point") {
    auto space = shared(MetricSpace::path_graph(6));
    auto m = plain_module(space, {0, 2, 5}, {0, 0, 0}, 2, 0);
    auto net = max_separated_net(*space, Rat(10));
    REQUIRE(net.points.size() == 1);
    auto out = net_rearrange({m}, {0}, {net});
    REQUIRE(out.rearranged->size() == 1);
    CHECK(out.rearranged->fiber[0].rank == 6);
    CHECK(out.level_propagation[0] == Rat(5));
    CHECK(compose(out.projections[0], out.inclusions[0]) == identity_morphism(m));
    CHECK(compose(out.inclusions[0], out.projections[0]) ==
          identity_morphism(out.rearranged));
}

TEST_CASE("two levels bound displacement level by level") {
    auto space = shared(MetricSpace::path_graph(7));
    auto m = plain_module(space, {1, 3, 6, 2, 5}, {0, 0, 0, 1, 1}, 1, 0);
    auto coarse = max_separated_net(*space, Rat(2));
    auto fine = max_separated_net(*space, Rat(1));
    REQUIRE(fine.points.size() == 7);
    auto out = net_rearrange({m}, {0, 1}, {coarse, fine});
    CHECK(out.level_propagation[0] <= Rat(2));
    CHECK(out.level_propagation[1] == Rat(0));
    CHECK(compose(out.projections[0], out.inclusions[0]) == identity_morphism(m));
    // Level-one indices land exactly on their own carrier points.
    for (const auto& [key, mat] : out.inclusions[0].entries)
        if (m->level[key.first] == 1)
            CHECK(out.rearranged->carrier[key.second] == m->carrier[key.first]);
}

TEST_CASE("several modules gather with joint witnesses") {
    auto space = shared(MetricSpace::cycle_graph(10));
    auto a = plain_module(space, {0, 3, 7}, {0, 0, 0}, 1, 7);
    auto b = plain_module(space, {1, 5}, {0, 0}, 2, 7);
    auto net = max_separated_net(*space, Rat(3));
    auto out = net_rearrange({a, b}, {0}, {net});
    CHECK(compose(out.projections[0], out.inclusions[0]) == identity_morphism(a));
    CHECK(compose(out.projections[1], out.inclusions[1]) == identity_morphism(b));
    CHECK(compose(out.projections[1], out.inclusions[0]).is_zero());
    CHECK(compose(out.projections[0], out.inclusions[1]).is_zero());
    auto joint = add(compose(out.inclusions[0], out.projections[0]),
                     compose(out.inclusions[1], out.projections[1]));
    CHECK(joint == identity_morphism(out.rearranged));
    for (auto d : out.level_propagation) CHECK(d <= Rat(3));
}

TEST_CASE("an empty module gathers to an all-zero module") {
    auto space = shared(MetricSpace::path_graph(4));
    auto m = plain_module(space, {}, {}, 1, 0);
    auto net = max_separated_net(*space, Rat(2));
    auto out = net_rearrange({m}, {0}, {net});
    for (const auto& f : out.rearranged->fiber) CHECK(f.rank == 0);
    CHECK(out.inclusions[0].is_zero());
    CHECK(out.projections[0].is_zero());
}

TEST_CASE("a non-maximal net is rejected") {
    auto space = shared(MetricSpace::path_graph(6));
    auto m = plain_module(space, {0}, {0}, 1, 0);
    Net bad;
    bad.delta = Rat(2);
    bad.points = {0};
    bad.projection.assign(6, 0);
    CHECK_THROWS_AS(net_rearrange({m}, {0}, {bad}), Error);
}

TEST_CASE("separation parameters must decrease along levels") {
    auto space = shared(MetricSpace::path_graph(6));
    auto m = plain_module(space, {0, 1}, {0, 1}, 1, 0);
    auto n1 = max_separated_net(*space, Rat(1));
    auto n2 = max_separated_net(*space, Rat(2));
    CHECK_THROWS_AS(net_rearrange({m}, {0, 1}, {n1, n2}), Error);
    CHECK_THROWS_AS(net_rearrange({m}, {0, 1}, {n1, n1}), Error);
    CHECK_NOTHROW(net_rearrange({m}, {0, 1}, {n2, n1}));
}

TEST_CASE("net invariants hold on paths and cycles at several scales") {
    for (int delta = 1; delta <= 3; ++delta) {
        for (auto space : {MetricSpace::path_graph(9), MetricSpace::cycle_graph(12)}) {
            auto net = max_separated_net(space, Rat(delta));
            auto check = verify_net(space, net);
            CHECK(check.ok());
        }
    }
}
