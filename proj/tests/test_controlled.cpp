#include <catch2/catch_amalgamated.hpp>

#include <memory>
#include <random>
#include <vector>

#include "coarsebox/controlled.hpp"
#include "coarsebox/group.hpp"
#include "coarsebox/metric.hpp"
#include "generators.hpp"

using namespace coarsebox;
using coarsebox_tests::random_composable_pair;
using coarsebox_tests::random_module;
using coarsebox_tests::random_morphism;

namespace {

std::shared_ptr<const MetricSpace> shared(MetricSpace m) {
    return std::make_shared<const MetricSpace>(std::move(m));
}

/// Trivial-group module over explicit points/levels, all fibers equal.
ModulePtr plain_module(std::shared_ptr<const MetricSpace> space,
                       std::vector<std::int32_t> points,
                       std::vector<std::int32_t> levels, std::int32_t rank,
                       std::int64_t modulus = 0, ModuleFlags flags = {}) {
    GeometricModule m;
    m.space = std::move(space);
    m.carrier = std::move(points);
    m.level = std::move(levels);
    m.fiber.assign(m.carrier.size(), {modulus, rank});
    m.flags = flags;
    return make_geometric_module(std::move(m));
}

}  // namespace

TEST_CASE("matrix arithmetic reduces modulo the coefficient ring") {
    auto a = Mat::zero(2, 2, 5);
    a.at(0, 0) = 3;
    a.at(1, 1) = 4;
    auto b = Mat::ident(2, 5);
    auto s = add(a, b);
    REQUIRE(s.at(0, 0) == 4);
    REQUIRE(s.at(1, 1) == 0);  // 4 + 1 mod 5
    auto p = mul(a, a);
    REQUIRE(p.at(0, 0) == 4);  // 9 mod 5
    REQUIRE(p.at(1, 1) == 1);  // 16 mod 5
    REQUIRE(negate(b).at(0, 0) == 4);
    REQUIRE(add(b, negate(b)).is_zero());
}

TEST_CASE("module validation rejects malformed data") {
    auto path = shared(MetricSpace::path_graph(4));
    REQUIRE_THROWS_AS(plain_module(path, {0, 9}, {0, 0}, 1), Error);  // bad point
    REQUIRE_THROWS_AS(plain_module(path, {0, 1}, {0, 99}, 1), Error);  // bad level
    ModuleFlags zero_levels;
    zero_levels.level_support = LevelSupport::Zero;
    REQUIRE_THROWS_AS(plain_module(path, {0, 1}, {0, 2}, 1, 0, zero_levels), Error);
    REQUIRE_NOTHROW(plain_module(path, {0, 1}, {0, 0}, 1, 0, zero_levels));
    // mixed coefficient rings
    GeometricModule mixed;
    mixed.space = path;
    mixed.carrier = {0, 1};
    mixed.level = {0, 0};
    mixed.fiber = {{0, 1}, {5, 1}};
    REQUIRE_THROWS_AS(make_geometric_module(std::move(mixed)), Error);
}

TEST_CASE("module validation enforces freeness and equivariance of the index action") {
    auto cayley = shared(cayley_graph(cyclic_group(4)));
    auto act = cayley->shared_action();
    REQUIRE(act != nullptr);

    auto orbit = orbit_module(cayley, act, 0, {0, 1});
    REQUIRE(orbit->size() == 4);
    for (int h = 0; h < 4; ++h) REQUIRE(orbit->carrier[h] == h);

    // non-free: every group element acts as the identity permutation
    GeometricModule fixed;
    fixed.space = cayley;
    fixed.action = act;
    fixed.carrier = {0, 1, 2, 3};
    fixed.level = {0, 0, 0, 0};
    fixed.fiber.assign(4, {0, 1});
    fixed.translate.assign(4, {0, 1, 2, 3});
    REQUIRE_THROWS_AS(make_geometric_module(std::move(fixed)), Error);

    // equivariance breaks when the carrier ignores the action
    GeometricModule skew;
    skew.space = cayley;
    skew.action = act;
    skew.carrier = {0, 0, 0, 0};
    skew.level = {0, 0, 0, 0};
    skew.fiber.assign(4, {0, 1});
    skew.translate.resize(4);
    for (int g = 0; g < 4; ++g)
        for (int h = 0; h < 4; ++h)
            skew.translate[g].push_back(act->group.mul_idx(g, h));
    REQUIRE_THROWS_AS(make_geometric_module(std::move(skew)), Error);
}

TEST_CASE("identity composes neutrally and has zero propagation") {
    auto path = shared(MetricSpace::path_graph(5));
    auto m = plain_module(path, {0, 2, 4}, {0, 1, 2}, 2);
    auto id = identity_morphism(m);
    REQUIRE(propagation(id) == std::make_pair(Rat(0), 0));

    std::mt19937_64 rng(7);
    auto other = random_module(rng, path, 4, 2, 0, 3);
    auto f = random_morphism(rng, m, other, 5);
    REQUIRE(compose(f, id) == f);
    REQUIRE(compose(identity_morphism(other), f) == f);
}

TEST_CASE("two unit shifts along a path compose to spatial propagation two") {
    auto path = shared(MetricSpace::path_graph(3));
    auto m = plain_module(path, {0, 1, 2}, {0, 0, 0}, 1);
    EntryMap step;  // index i -> i+1, matching carrier points
    step[{0, 1}] = Mat::scalar(1);
    step[{1, 2}] = Mat::scalar(1);
    auto f = make_morphism(m, m, step);
    REQUIRE(propagation(f) == std::make_pair(Rat(1), 0));
    auto ff = compose(f, f);
    REQUIRE(propagation(ff) == std::make_pair(Rat(2), 0));
    REQUIRE(ff.entries.size() == 1);
    REQUIRE(ff.entries.count({0, 2}) == 1);
}

TEST_CASE("cancelling entries compose to the zero morphism with zero propagation") {
    auto pt = shared(MetricSpace::single_point());
    auto a = plain_module(pt, {0}, {0}, 1);
    auto b = plain_module(pt, {0, 0}, {0, 3}, 1);
    EntryMap up;  // one source feeding both middle indices with opposite signs
    up[{0, 0}] = Mat::scalar(1);
    up[{0, 1}] = Mat::scalar(-1);
    auto psi = make_morphism(a, b, up);
    EntryMap down;
    down[{0, 0}] = Mat::scalar(1);
    down[{1, 0}] = Mat::scalar(1);
    auto phi = make_morphism(b, a, down);
    REQUIRE_FALSE(phi.is_zero());
    REQUIRE_FALSE(psi.is_zero());
    auto z = compose(phi, psi);
    REQUIRE(z.is_zero());
    REQUIRE(propagation(z) == std::make_pair(Rat(0), 0));
}

TEST_CASE("propagation reads off the largest displacement") {
    auto path = shared(MetricSpace::path_graph(6));
    auto m = plain_module(path, {0, 3}, {2, 5}, 1);
    auto diag = identity_morphism(m);
    REQUIRE(propagation(diag) == std::make_pair(Rat(0), 0));

    EntryMap one;
    one[{0, 1}] = Mat::scalar(2);
    auto f = make_morphism(m, m, one);
    REQUIRE(propagation(f) == std::make_pair(Rat(3), 3));
}

TEST_CASE("orbit-equivariant morphism on a cycle has propagation one") {
    auto cayley = shared(cayley_graph(cyclic_group(5)));
    auto act = cayley->shared_action();
    auto m = orbit_module(cayley, act, 0, {0, 1});
    EntryMap entries;  // h -> h+1 for every h, all with the same matrix
    for (std::int32_t h = 0; h < 5; ++h)
        entries[{h, act->group.mul_idx(1, h)}] = Mat::scalar(1);
    auto f = make_morphism(m, m, entries);
    REQUIRE(propagation(f) == std::make_pair(Rat(1), 0));

    // dropping one orbit member breaks equivariance
    entries.erase({4, 0});
    REQUIRE_THROWS_AS(make_morphism(m, m, entries), Error);
}

TEST_CASE("morphism sums stay equivariant with componentwise-max propagation") {
    auto cayley = shared(cayley_graph(cyclic_group(6)));
    auto act = cayley->shared_action();
    auto m = orbit_module(cayley, act, 0, {0, 2});
    std::mt19937_64 rng(11);
    for (int i = 0; i < 30; ++i) {
        auto f = random_morphism(rng, m, m, 3);
        auto g = random_morphism(rng, m, m, 3);
        auto s = add(f, g);
        REQUIRE(s.spatial_propagation <=
                std::max(f.spatial_propagation, g.spatial_propagation));
        REQUIRE(s.level_propagation <=
                std::max(f.level_propagation, g.level_propagation));
        REQUIRE(add(s, negate(g)) == f);
    }
    auto f = random_morphism(rng, m, m, 4);
    REQUIRE(subtract(f, f).is_zero());
}

TEST_CASE("composition propagation is subadditive on random pairs") {
    std::mt19937_64 rng(2026);
    auto space = shared(MetricSpace::cycle_graph(9));
    for (int i = 0; i < 200; ++i) {
        auto [phi, psi] = random_composable_pair(rng, space, i % 2 ? 5 : 0, 6);
        auto comp = compose(phi, psi);
        REQUIRE(comp.spatial_propagation <=
                phi.spatial_propagation + psi.spatial_propagation);
        REQUIRE(comp.level_propagation <=
                phi.level_propagation + psi.level_propagation);
    }
}

TEST_CASE("control bound checks are monotone in the bound") {
    std::mt19937_64 rng(5);
    auto space = shared(MetricSpace::cycle_graph(9));
    for (int i = 0; i < 50; ++i) {
        auto m1 = random_module(rng, space, 5, 2, 0, 6);
        auto m2 = random_module(rng, space, 5, 2, 0, 6);
        auto f = random_morphism(rng, m1, m2, 5);
        Rat tight = std::max(f.spatial_propagation, Rat(f.level_propagation)) + Rat(1);
        REQUIRE(is_controlled(f, tight));
        REQUIRE(is_controlled(f, tight + Rat(3)));
        if (!f.is_zero()) REQUIRE_FALSE(is_controlled(f, Rat(0)));
    }
}

TEST_CASE("zero-level endpoints flag level-moving morphisms with a witness") {
    auto path = shared(MetricSpace::path_graph(3));
    ModuleFlags zero_flags;
    zero_flags.level_support = LevelSupport::Zero;
    auto c_side = plain_module(path, {0, 1}, {0, 0}, 1, 0, zero_flags);
    auto o_side = plain_module(path, {0, 1}, {3, 0}, 1);
    EntryMap up;
    up[{0, 0}] = Mat::scalar(1);
    auto f = make_morphism(c_side, o_side, up);
    REQUIRE(f.level_propagation == 3);
    auto rep = check_decorations(f);
    REQUIRE_FALSE(rep.zero_level_ok);
    REQUIRE_FALSE(rep.ok());
    REQUIRE(rep.witness.has_value());
    REQUIRE(rep.witness->s == 0);
    REQUIRE(rep.witness->t == 0);
}

TEST_CASE("concentrated morphisms pass and carrier-moving claims are rejected") {
    auto path = shared(MetricSpace::path_graph(3));
    auto m = plain_module(path, {0, 1}, {0, 1}, 1);
    EntryMap diag;
    diag[{0, 0}] = Mat::scalar(2);
    diag[{1, 1}] = Mat::scalar(3);
    auto f = make_morphism(m, m, diag, true);
    auto rep = check_decorations(f);
    REQUIRE(rep.concentrated_entries);
    REQUIRE(rep.ok());

    EntryMap off;
    off[{0, 1}] = Mat::scalar(1);
    REQUIRE_THROWS_AS(make_morphism(m, m, off, true), Error);
    REQUIRE_NOTHROW(make_morphism(m, m, off, false));
}

TEST_CASE("control profile tracks the level needed for each tolerance") {
    // four points with exponentially shrinking gaps: 0, 2, 3, 7/2
    std::vector<Rat> d{Rat(0), Rat(2),    Rat(3),    Rat(7, 2),  //
                       Rat(2), Rat(0),    Rat(1),    Rat(3, 2),  //
                       Rat(3), Rat(1),    Rat(0),    Rat(1, 2),  //
                       Rat(7, 2), Rat(3, 2), Rat(1, 2), Rat(0)};
    auto space = shared(MetricSpace::from_matrix(4, d));
    auto src = plain_module(space, {0, 1, 2}, {2, 4, 8}, 1);
    auto tgt = plain_module(space, {1, 2, 3}, {2, 4, 8}, 1);
    EntryMap entries;  // distances 2, 1, 1/2 at levels 2, 4, 8
    entries[{0, 0}] = Mat::scalar(1);
    entries[{1, 1}] = Mat::scalar(1);
    entries[{2, 2}] = Mat::scalar(1);
    auto f = make_morphism(src, tgt, entries);
    auto rep = check_decorations(f, 4);
    std::vector<std::pair<Rat, std::int32_t>> expect{
        {Rat(1), 4}, {Rat(1, 2), 8}, {Rat(1, 4), 8}, {Rat(1, 8), 8}};
    REQUIRE(rep.control_profile == expect);
}

TEST_CASE("level factorization cuts at the source window plus the reach") {
    auto pt = shared(MetricSpace::single_point());
    ModuleFlags finite_levels;
    finite_levels.level_support = LevelSupport::Finite;
    auto small = plain_module(pt, {0, 0}, {0, 1}, 1, 0, finite_levels);
    auto big = plain_module(pt, std::vector<std::int32_t>(7, 0), {0, 1, 2, 3, 4, 5, 6}, 1);

    EntryMap up;  // level 1 -> level 3: reach 2
    up[{1, 3}] = Mat::scalar(1);
    up[{0, 1}] = Mat::scalar(2);
    auto phi = make_morphism(small, big, up);
    REQUIRE(phi.level_propagation == 2);

    auto fac = karoubi_factorize(phi, FactorMode::ByLevel);
    REQUIRE(fac.members == std::vector<std::int32_t>{0, 1, 2, 3});
    REQUIRE(fac.through->size() == 4);
    REQUIRE(fac.through->flags.level_support == LevelSupport::Finite);
    REQUIRE(fac.triangles_commute);
    REQUIRE(compose(fac.inclusion, fac.narrowed) == phi);

    // paired factorization shares one summand for both directions
    EntryMap down;
    down[{2, 0}] = Mat::scalar(1);
    down[{3, 1}] = Mat::scalar(-1);
    auto psi = make_morphism(big, small, down);
    auto both = karoubi_factorize(phi, &psi, FactorMode::ByLevel);
    REQUIRE(both.members == std::vector<std::int32_t>{0, 1, 2, 3});
    REQUIRE(both.triangles_commute);
    REQUIRE(compose(both.widened, both.projection) == psi);
}

TEST_CASE("spatial factorization cuts a neighborhood of the bounded image") {
    auto path = shared(MetricSpace::path_graph(9));
    ModuleFlags bounded;
    bounded.spatially_bounded = true;
    auto small = plain_module(path, {4}, {0}, 1, 0, bounded);
    auto big = plain_module(path, {0, 1, 2, 3, 4, 5, 6, 7, 8},
                            std::vector<std::int32_t>(9, 0), 1);
    EntryMap out;
    out[{0, 6}] = Mat::scalar(1);  // distance 2 from the image point 4
    auto phi = make_morphism(small, big, out);
    auto fac = karoubi_factorize(phi, FactorMode::BySpace);
    REQUIRE(fac.members == std::vector<std::int32_t>{2, 3, 4, 5, 6});
    REQUIRE(fac.through->flags.spatially_bounded);
    REQUIRE(fac.triangles_commute);
}

TEST_CASE("zero morphism factorization may cut an empty summand") {
    auto pt = shared(MetricSpace::single_point());
    ModuleFlags finite_levels;
    finite_levels.level_support = LevelSupport::Finite;
    auto small = plain_module(pt, {0}, {0}, 1, 0, finite_levels);
    auto big = plain_module(pt, {0, 0}, {2, 3}, 1);
    auto fac = karoubi_factorize(zero_morphism(small, big), FactorMode::ByLevel);
    REQUIRE(fac.through->size() == 0);
    REQUIRE(fac.members.empty());
    REQUIRE(fac.triangles_commute);
}

TEST_CASE("factorization preconditions require the declared flags") {
    auto pt = shared(MetricSpace::single_point());
    auto small = plain_module(pt, {0}, {0}, 1);  // no declared flags
    auto big = plain_module(pt, {0}, {1}, 1);
    EntryMap e;
    e[{0, 0}] = Mat::scalar(1);
    auto phi = make_morphism(small, big, e);
    REQUIRE_THROWS_AS(karoubi_factorize(phi, FactorMode::ByLevel), Error);
    REQUIRE_THROWS_AS(karoubi_factorize(phi, FactorMode::BySpace), Error);
}

TEST_CASE("level shifts move levels, keep entries, and respect the window") {
    auto pt = shared(MetricSpace::single_point());
    auto m = plain_module(pt, {0, 0}, {3, 3}, 1);
    auto shifted = shift_functor(1, m);
    REQUIRE(shifted->level == std::vector<std::int32_t>{4, 4});
    REQUIRE(same_module(shift_functor(0, m), m));
    REQUIRE_THROWS_AS(shift_functor(62, m), Error);

    ModuleFlags zero_flags;
    zero_flags.level_support = LevelSupport::Zero;
    auto c_side = plain_module(pt, {0}, {0}, 1, 0, zero_flags);
    REQUIRE(shift_functor(2, c_side)->flags.level_support == LevelSupport::Finite);
}

TEST_CASE("level shift is functorial on random composable pairs") {
    std::mt19937_64 rng(17);
    auto space = shared(MetricSpace::cycle_graph(7));
    for (int i = 0; i < 40; ++i) {
        auto [phi, psi] = random_composable_pair(rng, space, 0, 5);
        auto n = static_cast<std::int32_t>(coarsebox_tests::pick(rng, 0, 5));
        auto lhs = shift_functor(n, compose(phi, psi));
        auto rhs = compose(shift_functor(n, phi), shift_functor(n, psi));
        REQUIRE(lhs == rhs);
        REQUIRE(propagation(shift_functor(n, phi)) == propagation(phi));
    }
}

TEST_CASE("equal morphisms are quotient-equal via the zero object") {
    auto pt = shared(MetricSpace::single_point());
    auto m = plain_module(pt, {0}, {0}, 1);
    auto id = identity_morphism(m);
    FactorPredicate pred;
    pred.kind = FactorPredicate::Kind::LevelWindow;
    pred.max_level = 0;
    auto dec = quotient_equal(id, id, pred);
    REQUIRE(dec.verdict == QuotientVerdict::Equal);
    REQUIRE(dec.factoring_object->size() == 0);
}

TEST_CASE("a difference inside one box component factors through that component") {
    auto box = shared(MetricSpace::box_space({MetricSpace::cycle_graph(4),
                                              MetricSpace::cycle_graph(4)}));
    auto m = plain_module(box, {0, 1, 4, 5}, {0, 0, 0, 0}, 1);
    auto f = identity_morphism(m);
    EntryMap extra;  // difference supported on indices 0,1 (first component)
    extra[{0, 1}] = Mat::scalar(1);
    extra[{1, 0}] = Mat::scalar(-1);
    auto g = add(f, make_morphism(m, m, extra));

    FactorPredicate compactish;
    compactish.kind = FactorPredicate::Kind::SpatialWindow;
    compactish.max_diameter = Rat(2);  // one component's diameter
    auto dec = quotient_equal(f, g, compactish);
    REQUIRE(dec.verdict == QuotientVerdict::Equal);
    REQUIRE(dec.factoring_object->size() == 2);
    for (auto p : dec.factoring_object->carrier) REQUIRE(p <= 3);

    // with a cross-component difference the support spans more than the
    // window plus budgets, so the comparison is refuted
    EntryMap across;
    across[{0, 2}] = Mat::scalar(1);
    across[{2, 0}] = Mat::scalar(-1);
    auto h = add(f, make_morphism(m, m, across));
    auto refuted = quotient_equal(f, h, compactish);
    REQUIRE(refuted.verdict == QuotientVerdict::NotEqual);
    REQUIRE(refuted.obstruction.has_value());
}

TEST_CASE("deep-level differences are refuted and borderline ones stay undecided") {
    auto pt = shared(MetricSpace::single_point());
    auto m = plain_module(pt, {0, 0, 0}, {0, 3, 6}, 1);
    auto f = identity_morphism(m);
    EntryMap deep;
    deep[{2, 2}] = Mat::scalar(1);
    auto g = add(f, make_morphism(m, m, deep));

    FactorPredicate pred;
    pred.kind = FactorPredicate::Kind::LevelWindow;
    pred.max_level = 2;
    pred.level_budget = 1;
    auto dec = quotient_equal(f, g, pred);
    REQUIRE(dec.verdict == QuotientVerdict::NotEqual);
    REQUIRE(dec.obstruction.has_value());
    REQUIRE(dec.obstruction->s == 2);

    EntryMap borderline;
    borderline[{1, 1}] = Mat::scalar(1);
    auto h = add(f, make_morphism(m, m, borderline));
    auto open = quotient_equal(f, h, pred);
    REQUIRE(open.verdict == QuotientVerdict::Undecided);
}
