// Deterministic random instance generation for the property-check suites:
// modules, free modules under a group action, matrices, morphisms, and
// composable pairs.  Everything is driven by a caller-supplied mt19937_64,
// so a fixed seed reproduces the exact same instances byte for byte.
#ifndef COARSEBOX_SAMPLING_HPP
#define COARSEBOX_SAMPLING_HPP

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "coarsebox/controlled.hpp"
#include "coarsebox/metric.hpp"

namespace coarsebox {

inline std::int64_t sample_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

/// Random module over the given space with the trivial group, bounded index
/// count, rank, and level.
inline ModulePtr random_module(std::mt19937_64& rng, MetricSpacePtr space,
                               int max_points, int max_rank,
                               std::int64_t modulus, int max_level,
                               ModuleFlags flags = {}) {
    GeometricModule m;
    m.space = std::move(space);
    m.flags = flags;
    int n = static_cast<int>(sample_int(rng, 1, max_points));
    for (int i = 0; i < n; ++i) {
        m.carrier.push_back(static_cast<std::int32_t>(sample_int(rng, 0, m.space->size() - 1)));
        m.level.push_back(static_cast<std::int32_t>(sample_int(rng, 0, max_level)));
        m.fiber.push_back({modulus, static_cast<std::int32_t>(sample_int(rng, 0, max_rank))});
    }
    return make_geometric_module(std::move(m));
}

/// Random free module under the given space action: a direct sum of orbit
/// blocks, each over a random basepoint with a random uniform rank and level.
inline ModulePtr random_free_module(std::mt19937_64& rng, MetricSpacePtr space,
                                    std::shared_ptr<const SpaceAction> action,
                                    int max_orbits, int max_rank,
                                    std::int64_t modulus, int max_level) {
    const auto order = static_cast<std::int32_t>(action->group.order());
    const int orbits = static_cast<int>(sample_int(rng, 1, max_orbits));
    GeometricModule m;
    m.space = std::move(space);
    m.action = std::move(action);
    m.carrier.resize(static_cast<std::size_t>(orbits) * order);
    m.level.resize(m.carrier.size());
    m.fiber.resize(m.carrier.size());
    m.translate.assign(order, std::vector<std::int32_t>(m.carrier.size()));
    for (int o = 0; o < orbits; ++o) {
        const auto base = static_cast<std::int32_t>(sample_int(rng, 0, m.space->size() - 1));
        const auto rank = static_cast<std::int32_t>(sample_int(rng, 0, max_rank));
        const auto level = static_cast<std::int32_t>(sample_int(rng, 0, max_level));
        for (std::int32_t g = 0; g < order; ++g) {
            const std::int32_t j = o * order + g;
            m.carrier[j] = m.action->table[g][base];
            m.level[j] = level;
            m.fiber[j] = {modulus, rank};
            for (std::int32_t h = 0; h < order; ++h)
                m.translate[h][j] = o * order + m.action->group.mul_idx(h, g);
        }
    }
    return make_geometric_module(std::move(m));
}

inline Mat random_mat(std::mt19937_64& rng, std::int32_t rows, std::int32_t cols,
                      std::int64_t modulus) {
    auto m = Mat::zero(rows, cols, modulus);
    for (auto& v : m.a)
        v = modulus == 0 ? sample_int(rng, -3, 3) : sample_int(rng, 0, modulus - 1);
    m.reduce();
    return m;
}

/// Random morphism with roughly `entry_count` sampled entries.  When the
/// modules carry a group action, whole orbits of entries are filled with the
/// same matrix so the result is equivariant by construction.
inline ControlledMorphism random_morphism(std::mt19937_64& rng, const ModulePtr& src,
                                          const ModulePtr& tgt, int entry_count) {
    EntryMap entries;
    if (src->size() > 0 && tgt->size() > 0)
        for (int i = 0; i < entry_count; ++i) {
            auto s = static_cast<std::int32_t>(sample_int(rng, 0, src->size() - 1));
            auto t = static_cast<std::int32_t>(sample_int(rng, 0, tgt->size() - 1));
            auto m = random_mat(rng, tgt->fiber[t].rank, src->fiber[s].rank,
                                src->coefficient_modulus());
            for (std::int32_t g = 0; g < src->group_order(); ++g)
                entries[{src->apply(g, s), tgt->apply(g, t)}] = m;
        }
    return make_morphism(src, tgt, std::move(entries));
}

/// A composable random pair psi: A -> B, phi: B -> C over one space.
struct ComposablePair {
    ControlledMorphism phi, psi;
};

inline ComposablePair random_composable_pair(std::mt19937_64& rng,
                                             const MetricSpacePtr& space,
                                             std::int64_t modulus, int max_level) {
    auto a = random_module(rng, space, 5, 3, modulus, max_level);
    auto b = random_module(rng, space, 5, 3, modulus, max_level);
    auto c = random_module(rng, space, 5, 3, modulus, max_level);
    return {random_morphism(rng, b, c, 6), random_morphism(rng, a, b, 6)};
}

}  // namespace coarsebox

#endif
