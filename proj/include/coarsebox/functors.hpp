#ifndef COARSEBOX_FUNCTORS_HPP
#define COARSEBOX_FUNCTORS_HPP

// Structure-transporting constructions between module categories:
//   * the group-ring dictionary between equivariant single-orbit modules and
//     finitely supported group-ring matrices, with convolution;
//   * orbit decomposition of a free equivariant module;
//   * descent along a metric cover (deck-orbit quotient), its faithfulness
//     threshold, and the lift that inverts it;
//   * restriction/induction between a coset-graded equivariant module and a
//     subgroup-equivariant plain module, preserving displacement exactly;
//   * the double-coset shuffle identifying VH/H x G/VH with G/H;
//   * gathering a family of modules onto per-level separated nets.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coarsebox/common.hpp"
#include "coarsebox/controlled.hpp"
#include "coarsebox/cover.hpp"
#include "coarsebox/group.hpp"
#include "coarsebox/metric.hpp"

namespace coarsebox {

// ---------------------------------------------------------------------------
// Group-ring morphisms: finitely supported formal sums sum_g phi_g * g with
// phi_g a matrix source -> target.  The dictionary with equivariant
// morphisms on single-orbit modules fixes entry (g, identity) = phi_g, and
// equivariance then forces entry (s, t) = terms[t^-1 * s].
// ---------------------------------------------------------------------------
struct GroupRingMorphism {
    Group group;
    CoefficientObject source, target;
    std::map<std::int32_t, Mat> terms;  // element index -> matrix

    bool is_zero() const { return terms.empty(); }
};

inline GroupRingMorphism make_group_ring_morphism(Group group, CoefficientObject source,
                                                  CoefficientObject target,
                                                  std::map<std::int32_t, Mat> terms) {
    require(group.is_finite(), "group-ring morphism needs an enumerated finite group");
    require(source.modulus == target.modulus, "group-ring endpoints must share one ring");
    for (auto it = terms.begin(); it != terms.end();) {
        if (it->second.is_zero())
            it = terms.erase(it);
        else
            ++it;
    }
    for (const auto& [g, m] : terms) {
        require(g >= 0 && g < group.order(), "group-ring term index out of range");
        require(m.rows == target.rank && m.cols == source.rank,
                "group-ring term shape does not match the endpoints");
        require(m.modulus == source.modulus, "group-ring term ring mismatch");
    }
    return GroupRingMorphism{std::move(group), source, target, std::move(terms)};
}

inline bool same_ring_group(const Group& a, const Group& b) {
    return a.order() == b.order() && a.name() == b.name();
}

inline GroupRingMorphism add(const GroupRingMorphism& f, const GroupRingMorphism& g) {
    require(same_ring_group(f.group, g.group), "group-ring sum needs one group");
    require(f.source == g.source && f.target == g.target,
            "group-ring sum needs equal endpoints");
    std::map<std::int32_t, Mat> terms = f.terms;
    for (const auto& [k, m] : g.terms) {
        auto it = terms.find(k);
        if (it == terms.end())
            terms[k] = m;
        else
            it->second = add(it->second, m);
    }
    return make_group_ring_morphism(f.group, f.source, f.target, std::move(terms));
}

/// Formal product (f*g)_k = sum over a*b = k of f_a * g_b; matches
/// compose(F, G) = F after G through the orbit dictionary.
inline GroupRingMorphism convolve(const GroupRingMorphism& f, const GroupRingMorphism& g) {
    require(same_ring_group(f.group, g.group), "convolution needs one group");
    require(f.source == g.target, "convolution chain mismatch");
    std::map<std::int32_t, Mat> terms;
    for (const auto& [a, fm] : f.terms)
        for (const auto& [b, gm] : g.terms) {
            auto k = f.group.mul_idx(a, b);
            Mat prod = mul(fm, gm);
            if (prod.is_zero()) continue;
            auto it = terms.find(k);
            if (it == terms.end())
                terms[k] = std::move(prod);
            else
                it->second = add(it->second, prod);
        }
    return make_group_ring_morphism(f.group, g.source, f.target, std::move(terms));
}

/// True when m is exactly the single-orbit shape over the given basepoint:
/// index g sits over g.basepoint, translation is left multiplication, and
/// fibers and levels are uniform.
inline bool is_orbit_form(const GeometricModule& m, std::int32_t basepoint) {
    if (!m.action) return false;
    const auto order = static_cast<std::int32_t>(m.action->group.order());
    if (m.size() != order) return false;
    for (std::int32_t h = 0; h < order; ++h) {
        if (m.carrier[h] != m.action->table[h][basepoint]) return false;
        if (m.level[h] != m.level[0] || !(m.fiber[h] == m.fiber[0])) return false;
        for (std::int32_t g = 0; g < order; ++g)
            if (m.translate[g][h] != m.action->group.mul_idx(g, h)) return false;
    }
    return true;
}

inline ControlledMorphism group_ring_to_T(const GroupRingMorphism& m,
                                          const MetricSpacePtr& space,
                                          const std::shared_ptr<const SpaceAction>& action,
                                          std::int32_t basepoint, std::int32_t level = 0) {
    require(action != nullptr, "orbit modules need a group action");
    require(same_ring_group(m.group, action->group),
            "group-ring group does not match the space action");
    auto src = orbit_module(space, action, basepoint, m.source, level);
    auto tgt = orbit_module(space, action, basepoint, m.target, level);
    EntryMap entries;
    const auto order = static_cast<std::int32_t>(action->group.order());
    for (const auto& [g, mat] : m.terms)
        for (std::int32_t t = 0; t < order; ++t)
            entries[{action->group.mul_idx(t, g), t}] = mat;
    return make_morphism(std::move(src), std::move(tgt), std::move(entries));
}

/// Inverse dictionary: reads the terms off the entries into the identity
/// index.  Requires both endpoints in single-orbit shape over one basepoint.
inline GroupRingMorphism T_to_group_ring(const ControlledMorphism& phi) {
    require(phi.source->action != nullptr, "orbit dictionary needs a group action");
    const std::int32_t basepoint = phi.source->carrier.empty() ? -1 : phi.source->carrier[0];
    require(basepoint >= 0 && is_orbit_form(*phi.source, basepoint) &&
                is_orbit_form(*phi.target, basepoint),
            "orbit dictionary input is not in single-orbit shape over one basepoint");
    std::map<std::int32_t, Mat> terms;
    for (const auto& [key, mat] : phi.entries)
        if (key.second == 0) terms[key.first] = mat;
    return make_group_ring_morphism(phi.source->action->group, phi.source->fiber[0],
                                    phi.target->fiber[0], std::move(terms));
}

// ---------------------------------------------------------------------------
// Orbit decomposition: a free equivariant module is isomorphic, by a
// displacement-zero permutation, to a direct sum of single-orbit blocks,
// one per orbit representative (minimal index), block-internal order by
// group element.
// ---------------------------------------------------------------------------
struct OrbitDecomposition {
    std::vector<std::int32_t> representatives;  // minimal original index per orbit
    ModulePtr orbit_form;
    ControlledMorphism to_orbit_form;    // original -> orbit_form
    ControlledMorphism from_orbit_form;  // orbit_form -> original
};

namespace detail {

/// Minimal-index orbit representatives of a free index action, ascending.
inline std::vector<std::int32_t> orbit_representatives(const GeometricModule& m) {
    std::vector<char> seen(m.size(), 0);
    std::vector<std::int32_t> reps;
    for (std::int32_t s = 0; s < m.size(); ++s) {
        if (seen[s]) continue;
        reps.push_back(s);
        for (std::int32_t g = 0; g < m.group_order(); ++g) seen[m.apply(g, s)] = 1;
    }
    return reps;
}

}  // namespace detail

inline OrbitDecomposition orbit_decompose(const ModulePtr& m) {
    require(m != nullptr && m->action != nullptr, "orbit decomposition needs a group action");
    const auto order = static_cast<std::int32_t>(m->group_order());
    OrbitDecomposition out;
    out.representatives = detail::orbit_representatives(*m);
    const auto orbits = static_cast<std::int32_t>(out.representatives.size());

    GeometricModule of;
    of.space = m->space;
    of.action = m->action;
    of.flags = m->flags;
    of.label = m->label.empty() ? "orbit form" : m->label + " (orbit form)";
    of.carrier.resize(static_cast<std::size_t>(orbits) * order);
    of.level.resize(of.carrier.size());
    of.fiber.resize(of.carrier.size());
    of.translate.assign(order, std::vector<std::int32_t>(of.carrier.size()));
    for (std::int32_t o = 0; o < orbits; ++o) {
        const std::int32_t rep = out.representatives[o];
        for (std::int32_t g = 0; g < order; ++g) {
            const std::int32_t j = o * order + g;
            of.carrier[j] = m->action->table[g][m->carrier[rep]];
            of.level[j] = m->level[rep];
            of.fiber[j] = m->fiber[rep];
            for (std::int32_t h = 0; h < order; ++h)
                of.translate[h][j] = o * order + m->action->group.mul_idx(h, g);
        }
    }
    out.orbit_form = make_geometric_module(std::move(of));

    EntryMap fwd, bwd;
    for (std::int32_t o = 0; o < orbits; ++o)
        for (std::int32_t g = 0; g < order; ++g) {
            const std::int32_t orig = m->apply(g, out.representatives[o]);
            const std::int32_t j = o * order + g;
            Mat id = Mat::ident(m->fiber[orig].rank, m->coefficient_modulus());
            if (id.is_zero()) continue;
            fwd[{orig, j}] = id;
            bwd[{j, orig}] = id;
        }
    out.to_orbit_form = make_morphism(m, out.orbit_form, std::move(fwd), true);
    out.from_orbit_form = make_morphism(out.orbit_form, m, std::move(bwd), true);
    return out;
}

// ---------------------------------------------------------------------------
// Descent along a metric cover.  A deck-equivariant module upstairs drops to
// one index per deck orbit downstairs; a deck-equivariant morphism drops by
// summing each entry over the deck translates of the target representative.
// ---------------------------------------------------------------------------
inline std::shared_ptr<const SpaceAction> deck_action(const MetricCoverMap& cover) {
    require(cover.deck.has_value(), "cover carries no deck action");
    return std::make_shared<const SpaceAction>(*cover.deck);
}

namespace detail {

inline void require_deck_module(const GeometricModule& m, const MetricCoverMap& cover) {
    require(cover.deck.has_value(), "descent needs a cover with a deck action");
    require(m.space == cover.total, "module does not live over the cover's total space");
    require(m.action != nullptr && m.action->table == cover.deck->table &&
                m.action->group.order() == cover.deck->group.order(),
            "module action does not match the cover's deck action");
}

}  // namespace detail

inline ModulePtr descend_module(const ModulePtr& m, const MetricCoverMap& cover) {
    require(m != nullptr, "descent needs a module");
    detail::require_deck_module(*m, cover);
    const auto reps = detail::orbit_representatives(*m);
    GeometricModule down;
    down.space = cover.base;
    down.carrier.reserve(reps.size());
    for (auto rep : reps) {
        // Independence of the representative: the projection collapses each
        // deck orbit of carrier points to a single base point.
        for (std::int32_t g = 0; g < m->group_order(); ++g)
            require(cover.p[m->carrier[m->apply(g, rep)]] == cover.p[m->carrier[rep]],
                    "carrier orbit does not project to a single base point");
        down.carrier.push_back(cover.p[m->carrier[rep]]);
        down.level.push_back(m->level[rep]);
        down.fiber.push_back(m->fiber[rep]);
    }
    down.flags = m->flags;
    down.flags.spatially_bounded = true;
    down.label = m->label.empty() ? "descended" : m->label + " / deck";
    return make_geometric_module(std::move(down));
}

inline ControlledMorphism descend(const ControlledMorphism& phi, const MetricCoverMap& cover) {
    detail::require_deck_module(*phi.source, cover);
    detail::require_deck_module(*phi.target, cover);
    auto src = descend_module(phi.source, cover);
    auto tgt = descend_module(phi.target, cover);
    const auto src_reps = detail::orbit_representatives(*phi.source);
    const auto tgt_reps = detail::orbit_representatives(*phi.target);
    const auto order = static_cast<std::int32_t>(phi.source->group_order());

    auto orbit_sum = [&](std::int32_t s, std::int32_t t) {
        Mat acc = Mat::zero(phi.target->fiber[t].rank, phi.source->fiber[s].rank,
                            phi.source->coefficient_modulus());
        for (std::int32_t h = 0; h < order; ++h) {
            auto it = phi.entries.find({s, phi.target->apply(h, t)});
            if (it != phi.entries.end()) acc = add(acc, it->second);
        }
        return acc;
    };

    EntryMap down;
    for (std::size_t i = 0; i < src_reps.size(); ++i)
        for (std::size_t j = 0; j < tgt_reps.size(); ++j) {
            Mat sum = orbit_sum(src_reps[i], tgt_reps[j]);
            // Independence of representatives: every choice of source and
            // target representative yields the same gathered matrix.
            for (std::int32_t g = 0; g < order; ++g) {
                require(orbit_sum(phi.source->apply(g, src_reps[i]), tgt_reps[j]) == sum,
                        "descended entry depends on the source representative");
                require(orbit_sum(src_reps[i], phi.target->apply(g, tgt_reps[j])) == sum,
                        "descended entry depends on the target representative");
            }
            if (!sum.is_zero())
                down[{static_cast<std::int32_t>(i), static_cast<std::int32_t>(j)}] =
                    std::move(sum);
        }
    return make_morphism(std::move(src), std::move(tgt), std::move(down), phi.concentrated);
}

/// Inverts descent on objects: spreads each downstairs index into a free deck
/// orbit through a chosen preimage of its carrier point (minimal index).
/// Index layout: deck element major, so block g holds copy g of every index.
inline ModulePtr lift_module(const ModulePtr& base_module, const MetricCoverMap& cover,
                             const std::shared_ptr<const SpaceAction>& deck) {
    require(base_module != nullptr, "lift needs a module");
    require(base_module->space == cover.base, "module does not live over the cover's base");
    require(base_module->action == nullptr, "lift input must carry no group action");
    require(deck != nullptr && cover.deck.has_value() && deck->table == cover.deck->table,
            "lift needs the cover's deck action");
    const auto order = static_cast<std::int32_t>(deck->group.order());
    const std::int32_t n = base_module->size();

    std::vector<std::int32_t> chosen(n, -1);
    for (std::int32_t s = 0; s < n; ++s) {
        for (std::int32_t x = 0; x < cover.total->size(); ++x)
            if (cover.p[x] == base_module->carrier[s]) {
                chosen[s] = x;
                break;
            }
        require(chosen[s] >= 0, "carrier point has no preimage in the cover");
    }

    GeometricModule up;
    up.space = cover.total;
    up.action = deck;
    up.flags = base_module->flags;
    up.label = base_module->label.empty() ? "lifted" : base_module->label + " lifted";
    up.carrier.resize(static_cast<std::size_t>(order) * n);
    up.level.resize(up.carrier.size());
    up.fiber.resize(up.carrier.size());
    up.translate.assign(order, std::vector<std::int32_t>(up.carrier.size()));
    for (std::int32_t g = 0; g < order; ++g)
        for (std::int32_t s = 0; s < n; ++s) {
            const std::int32_t j = g * n + s;
            up.carrier[j] = deck->table[g][chosen[s]];
            up.level[j] = base_module->level[s];
            up.fiber[j] = base_module->fiber[s];
            for (std::int32_t h = 0; h < order; ++h)
                up.translate[h][j] = deck->group.mul_idx(h, g) * n + s;
        }
    return make_geometric_module(std::move(up));
}

// ---------------------------------------------------------------------------
// Faithfulness of descent.  When the certified cover radius is at least
// twice the morphism's displacement, distinct deck translates of an entry's
// target stay too far apart to collide, so the gathered sums cannot cancel
// and descent kills no nonzero morphism.  Below that threshold the check is
// skipped: cancellation is genuinely possible there.
// ---------------------------------------------------------------------------
enum class FaithfulnessVerdict { Pass, Skip, Fail };

struct FaithfulnessReport {
    FaithfulnessVerdict verdict = FaithfulnessVerdict::Skip;
    Rat propagation{0};      // spatial displacement of the input
    Rat required_radius{0};  // twice the displacement
    Rat certified_radius{0};
    bool morphism_zero = false;
    bool descended_zero = false;
};

inline FaithfulnessReport descent_faithfulness_check(const ControlledMorphism& phi,
                                                     const MetricCoverMap& cover) {
    FaithfulnessReport rep;
    rep.propagation = phi.spatial_propagation;
    rep.required_radius = rep.propagation * Rat(2);
    rep.certified_radius = cover.certified_radius;
    rep.morphism_zero = phi.is_zero();
    if (cover.certified_radius < rep.required_radius) {
        rep.verdict = FaithfulnessVerdict::Skip;
        return rep;
    }
    rep.descended_zero = descend(phi, cover).is_zero();
    rep.verdict = (rep.descended_zero && !rep.morphism_zero) ? FaithfulnessVerdict::Fail
                                                             : FaithfulnessVerdict::Pass;
    return rep;
}

/// First stage of a cover tower from which every later certificate supports
/// faithful descent for morphisms of the given displacement bound.
struct ThresholdReport {
    Rat displacement_bound{0};
    std::optional<std::size_t> stage;  // empty when no suffix qualifies
    std::vector<Rat> certified;        // per-stage certificates, for reporting
};

inline ThresholdReport faithfulness_threshold_stage(const std::vector<MetricCoverMap>& tower,
                                                    const Rat& displacement_bound) {
    ThresholdReport rep;
    rep.displacement_bound = displacement_bound;
    rep.certified.reserve(tower.size());
    for (const auto& c : tower) rep.certified.push_back(c.certified_radius);
    const Rat need = displacement_bound * Rat(2);
    for (std::size_t i = tower.size(); i-- > 0;) {
        if (rep.certified[i] < need) break;
        rep.stage = i;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Coset-graded modules.  Fibers are tuples of coefficient objects graded by
// the left cosets G/H; the group moves indices, carrier points, and coset
// labels coherently.  Morphism entries are per-coset blocks (no entry ever
// crosses coset labels).
// ---------------------------------------------------------------------------
struct CosetGradedModule {
    MetricSpacePtr space;
    std::shared_ptr<const SpaceAction> action;      // the full group G on the space
    std::vector<std::int32_t> subgroup;             // H as sorted element indices of G
    CosetSpace cosets;                              // left cosets G/H; id 0 = H itself
    std::vector<std::int32_t> carrier, level;
    std::vector<std::vector<CoefficientObject>> fiber;  // index -> per-coset object
    std::vector<std::vector<std::int32_t>> translate;   // g -> permutation of indices
    std::string label;

    std::int32_t size() const { return static_cast<std::int32_t>(carrier.size()); }
    std::int32_t group_order() const { return static_cast<std::int32_t>(translate.size()); }
    std::int32_t coset_count() const { return cosets.count; }
    /// Left action of g on coset ids.
    std::int32_t move_coset(std::int32_t g, std::int32_t c) const {
        return cosets.coset_of[action->group.mul_idx(g, cosets.rep[c])];
    }
    std::int64_t coefficient_modulus() const {
        return (fiber.empty() || fiber.front().empty()) ? 0 : fiber.front().front().modulus;
    }
};

using CosetGradedPtr = std::shared_ptr<const CosetGradedModule>;

inline CosetGradedPtr make_coset_graded_module(CosetGradedModule m) {
    require(m.space != nullptr && m.action != nullptr,
            "coset-graded module needs a space with a group action");
    const auto& grp = m.action->group;
    require(!m.subgroup.empty() && m.subgroup.front() == 0 &&
                subgroup_closure(grp, m.subgroup) == m.subgroup,
            "subgroup must be the sorted index set of a subgroup");
    m.cosets = left_cosets(grp, m.subgroup);
    const std::int32_t n = m.size();
    const auto order = static_cast<std::int32_t>(grp.order());
    require(static_cast<std::int32_t>(m.level.size()) == n &&
                static_cast<std::int32_t>(m.fiber.size()) == n &&
                static_cast<std::int32_t>(m.translate.size()) == order,
            "coset-graded module field sizes disagree");
    const std::int64_t modulus = m.coefficient_modulus();
    for (std::int32_t s = 0; s < n; ++s) {
        require(m.carrier[s] >= 0 && m.carrier[s] < m.space->size(),
                "carrier point out of range");
        require(m.level[s] >= 0 && m.level[s] <= limits::kLevelWindow,
                "level outside the window");
        require(static_cast<std::int32_t>(m.fiber[s].size()) == m.cosets.count,
                "fiber tuple must list every coset");
        for (const auto& f : m.fiber[s]) {
            require(f.rank >= 0, "fiber rank must be nonnegative");
            require(f.modulus == modulus, "fibers must share one coefficient ring");
        }
    }
    std::vector<char> hit(n);
    for (std::int32_t g = 0; g < order; ++g) {
        const auto& row = m.translate[g];
        require(static_cast<std::int32_t>(row.size()) == n, "index action row size mismatch");
        std::fill(hit.begin(), hit.end(), 0);
        for (auto v : row) {
            require(v >= 0 && v < n && !hit[v], "index action row is not a permutation");
            hit[v] = 1;
        }
        bool fixes_something = false;
        for (std::int32_t s = 0; s < n; ++s) {
            if (g == 0) require(row[s] == s, "identity must fix every index");
            if (row[s] == s) fixes_something = true;
            require(m.carrier[row[s]] == m.action->table[g][m.carrier[s]],
                    "carrier map is not equivariant");
            require(m.level[row[s]] == m.level[s], "levels must be action-invariant");
            for (std::int32_t c = 0; c < m.cosets.count; ++c)
                require(m.fiber[row[s]][m.move_coset(g, c)] == m.fiber[s][c],
                        "fiber tuples must move with the coset labels");
        }
        require(g == 0 || n == 0 || !fixes_something, "index action must be free");
        for (std::int32_t h = 0; h < order; ++h) {
            auto gh = grp.mul_idx(g, h);
            for (std::int32_t s = 0; s < n; ++s)
                require(m.translate[g][m.translate[h][s]] == m.translate[gh][s],
                        "index action is not associative");
        }
    }
    return std::make_shared<const CosetGradedModule>(std::move(m));
}

inline bool same_coset_graded(const CosetGradedModule& a, const CosetGradedModule& b) {
    return a.space == b.space && a.action == b.action && a.subgroup == b.subgroup &&
           a.carrier == b.carrier && a.level == b.level && a.fiber == b.fiber &&
           a.translate == b.translate;
}

struct CosetGradedMorphism {
    CosetGradedPtr source, target;
    // (source index, target index) -> coset id -> block matrix.
    std::map<std::pair<std::int32_t, std::int32_t>, std::map<std::int32_t, Mat>> entries;
    Rat spatial_propagation{0};
    std::int32_t level_propagation = 0;

    bool is_zero() const { return entries.empty(); }
    friend bool operator==(const CosetGradedMorphism& a, const CosetGradedMorphism& b) {
        return same_coset_graded(*a.source, *b.source) &&
               same_coset_graded(*a.target, *b.target) && a.entries == b.entries;
    }
};

inline CosetGradedMorphism make_coset_graded_morphism(
    CosetGradedPtr source, CosetGradedPtr target,
    std::map<std::pair<std::int32_t, std::int32_t>, std::map<std::int32_t, Mat>> entries) {
    require(source != nullptr && target != nullptr, "morphism needs endpoints");
    require(source->space == target->space && source->action == target->action &&
                source->subgroup == target->subgroup,
            "morphism endpoints must share space, action, and subgroup");
    for (auto it = entries.begin(); it != entries.end();) {
        for (auto jt = it->second.begin(); jt != it->second.end();)
            jt = jt->second.is_zero() ? it->second.erase(jt) : std::next(jt);
        it = it->second.empty() ? entries.erase(it) : std::next(it);
    }
    CosetGradedMorphism f;
    detail::RowCache rows(*source->space);
    for (const auto& [key, blocks] : entries) {
        auto [s, t] = key;
        require(s >= 0 && s < source->size() && t >= 0 && t < target->size(),
                "entry index out of range");
        for (const auto& [c, m] : blocks) {
            require(c >= 0 && c < source->coset_count(), "entry coset out of range");
            require(m.rows == target->fiber[t][c].rank && m.cols == source->fiber[s][c].rank,
                    "entry shape does not match the fiber ranks");
            require(m.modulus == source->coefficient_modulus(),
                    "entry ring does not match the module ring");
        }
        f.spatial_propagation = std::max(
            f.spatial_propagation, rows.dist(source->carrier[s], target->carrier[t]));
        f.level_propagation =
            std::max(f.level_propagation, std::abs(source->level[s] - target->level[t]));
    }
    for (const auto& [key, blocks] : entries) {
        auto [s, t] = key;
        for (std::int32_t g = 1; g < source->group_order(); ++g) {
            auto it = entries.find({source->translate[g][s], target->translate[g][t]});
            require(it != entries.end(), "entries are not equivariant");
            for (const auto& [c, m] : blocks) {
                auto jt = it->second.find(source->move_coset(g, c));
                require(jt != it->second.end() && jt->second == m,
                        "entries are not equivariant across coset labels");
            }
            require(it->second.size() == blocks.size(), "entries are not equivariant");
        }
    }
    f.source = std::move(source);
    f.target = std::move(target);
    f.entries = std::move(entries);
    return f;
}

/// The subgroup rows of a full-group space action, as a standalone action.
inline std::shared_ptr<const SpaceAction> restricted_action(
    const std::shared_ptr<const SpaceAction>& g_action,
    const std::vector<std::int32_t>& h_members) {
    require(g_action != nullptr, "restriction needs a group action");
    SpaceAction act;
    act.group = subgroup_group(g_action->group, h_members);
    act.table.reserve(h_members.size());
    for (auto m : h_members) act.table.push_back(g_action->table[m]);
    return std::make_shared<const SpaceAction>(std::move(act));
}

namespace detail {

inline bool action_matches_restriction(const std::shared_ptr<const SpaceAction>& h_action,
                                       const SpaceAction& g_action,
                                       const std::vector<std::int32_t>& h_members) {
    if (!h_action ||
        h_action->group.order() != static_cast<std::int64_t>(h_members.size()))
        return false;
    for (std::size_t i = 0; i < h_members.size(); ++i)
        if (h_action->table[i] != g_action.table[h_members[i]]) return false;
    return true;
}

}  // namespace detail

/// Keeps the identity-coset layer: same indices, subgroup translates only,
/// and the fiber graded over the trivial coset.  Carrier points and levels
/// are untouched, so displacement data survives exactly.
inline ModulePtr restrict_functor(const CosetGradedPtr& m,
                                  std::shared_ptr<const SpaceAction> h_action = nullptr) {
    require(m != nullptr, "restriction needs a module");
    if (h_action)
        require(detail::action_matches_restriction(h_action, *m->action, m->subgroup),
                "provided action is not the subgroup restriction");
    else
        h_action = restricted_action(m->action, m->subgroup);
    GeometricModule out;
    out.space = m->space;
    out.action = std::move(h_action);
    out.carrier = m->carrier;
    out.level = m->level;
    out.fiber.reserve(m->size());
    for (const auto& tuple : m->fiber) out.fiber.push_back(tuple[0]);
    out.translate.reserve(m->subgroup.size());
    for (auto h : m->subgroup) out.translate.push_back(m->translate[h]);
    out.label = m->label.empty() ? "identity-coset layer" : m->label + " @ trivial coset";
    return make_geometric_module(std::move(out));
}

inline ControlledMorphism restrict_functor(const CosetGradedMorphism& f,
                                           const ModulePtr& restricted_source,
                                           const ModulePtr& restricted_target) {
    require(same_module(restricted_source, restrict_functor(f.source, restricted_source->action)),
            "restricted source does not match the morphism's source");
    require(same_module(restricted_target, restrict_functor(f.target, restricted_target->action)),
            "restricted target does not match the morphism's target");
    EntryMap entries;
    for (const auto& [key, blocks] : f.entries) {
        auto it = blocks.find(0);
        if (it != blocks.end()) entries[key] = it->second;
    }
    return make_morphism(restricted_source, restricted_target, std::move(entries));
}

/// Rebuilds the full graded morphism from its identity-coset layer: the
/// block over coset c at (s, t) is the layer entry at the rep(c)-shifted
/// pair.  Inverse to restrict_functor on morphisms.
inline CosetGradedMorphism extend_functor(const ControlledMorphism& f,
                                          const CosetGradedPtr& source,
                                          const CosetGradedPtr& target) {
    require(same_module(f.source, restrict_functor(source, f.source->action)),
            "layer source does not match the graded source");
    require(same_module(f.target, restrict_functor(target, f.target->action)),
            "layer target does not match the graded target");
    std::map<std::pair<std::int32_t, std::int32_t>, std::map<std::int32_t, Mat>> entries;
    for (std::int32_t c = 0; c < source->coset_count(); ++c) {
        const std::int32_t rep = source->cosets.rep[c];
        for (const auto& [key, mat] : f.entries) {
            // A layer entry at (a, b) spreads to coset c at (rep(c).a, rep(c).b).
            const std::int32_t s = source->translate[rep][key.first];
            const std::int32_t t = target->translate[rep][key.second];
            entries[{s, t}][c] = mat;
        }
    }
    return make_coset_graded_morphism(source, target, std::move(entries));
}

/// Spreads a subgroup-equivariant module across all cosets: one index per
/// (coset, original index), carrier moved by the coset representative, fiber
/// concentrated on the matching coset label.
inline CosetGradedPtr induce_module(const ModulePtr& m,
                                    const std::shared_ptr<const SpaceAction>& g_action,
                                    const std::vector<std::int32_t>& h_members) {
    require(m != nullptr && g_action != nullptr, "induction needs a module and an action");
    require(m->space != nullptr, "induction needs a carrier space");
    require(detail::action_matches_restriction(m->action, *g_action, h_members),
            "module action is not the subgroup restriction of the given action");
    const auto& grp = g_action->group;
    CosetGradedModule up;
    up.space = m->space;
    up.action = g_action;
    up.subgroup = h_members;
    up.cosets = left_cosets(grp, h_members);
    const std::int32_t n = m->size();
    const std::int32_t k = up.cosets.count;
    const auto order = static_cast<std::int32_t>(grp.order());
    const std::int64_t modulus = m->coefficient_modulus();

    // Position of a group element inside the sorted subgroup listing.
    auto h_position = [&](std::int32_t g) {
        auto it = std::lower_bound(h_members.begin(), h_members.end(), g);
        require(it != h_members.end() && *it == g, "element fell outside the subgroup");
        return static_cast<std::int32_t>(it - h_members.begin());
    };

    up.carrier.resize(static_cast<std::size_t>(k) * n);
    up.level.resize(up.carrier.size());
    up.fiber.assign(up.carrier.size(),
                    std::vector<CoefficientObject>(k, CoefficientObject{modulus, 0}));
    for (std::int32_t c = 0; c < k; ++c) {
        const std::int32_t rep = up.cosets.rep[c];
        for (std::int32_t s = 0; s < n; ++s) {
            const std::int32_t j = c * n + s;
            up.carrier[j] = g_action->table[rep][m->carrier[s]];
            up.level[j] = m->level[s];
            up.fiber[j][c] = m->fiber[s];
        }
    }
    up.translate.assign(order, std::vector<std::int32_t>(up.carrier.size()));
    for (std::int32_t g = 0; g < order; ++g)
        for (std::int32_t c = 0; c < k; ++c) {
            const std::int32_t c2 = up.cosets.coset_of[grp.mul_idx(g, up.cosets.rep[c])];
            // g . rep(c) = rep(c2) . h  with h in the subgroup.
            const std::int32_t h = grp.mul_idx(grp.inv_idx(up.cosets.rep[c2]),
                                               grp.mul_idx(g, up.cosets.rep[c]));
            const std::int32_t hpos = h_position(h);
            for (std::int32_t s = 0; s < n; ++s)
                up.translate[g][c * n + s] = c2 * n + m->apply(hpos, s);
        }
    up.label = m->label.empty() ? "induced" : m->label + " induced";
    return make_coset_graded_module(std::move(up));
}

// ---------------------------------------------------------------------------
// Round trip: inducing and then restricting reproduces the original module
// up to a displacement-zero isomorphism (original indices sit in the
// identity-coset block; all other blocks carry rank zero).
// ---------------------------------------------------------------------------
struct InductionRoundTrip {
    CosetGradedPtr induced;
    ModulePtr restricted;
    ControlledMorphism to_restricted;    // original -> restricted
    ControlledMorphism from_restricted;  // restricted -> original
};

inline InductionRoundTrip induction_round_trip(const ModulePtr& m,
                                               const std::shared_ptr<const SpaceAction>& g_action,
                                               const std::vector<std::int32_t>& h_members) {
    InductionRoundTrip out;
    out.induced = induce_module(m, g_action, h_members);
    out.restricted = restrict_functor(out.induced, m->action);
    const std::int32_t n = m->size();
    EntryMap fwd, bwd;
    for (std::int32_t s = 0; s < n; ++s) {
        // Identity coset has id 0 and representative 1, so its block of the
        // induced index set is the first one and keeps the original order.
        Mat id = Mat::ident(m->fiber[s].rank, m->coefficient_modulus());
        if (id.is_zero()) continue;
        fwd[{s, s}] = id;
        bwd[{s, s}] = id;
    }
    out.to_restricted = make_morphism(m, out.restricted, std::move(fwd), true);
    out.from_restricted = make_morphism(out.restricted, m, std::move(bwd), true);
    return out;
}

// ---------------------------------------------------------------------------
// Double-coset shuffle: for H normal in G and any V <= G, the product of a
// VH/H coset and a G/VH coset lands in G/H via a chosen section, giving a
// V-equivariant bijection VH/H x G/VH <-> G/H (V acts trivially on G/VH).
// ---------------------------------------------------------------------------
struct VSetBijection {
    std::vector<std::int32_t> vh;        // the product subgroup VH, sorted
    CosetSpace mod_h, mod_vh;            // G/H and G/VH
    std::vector<std::int32_t> vh_mod_h;  // ids (within G/H) of the cosets inside VH
    std::vector<std::int32_t> section;   // per G/VH coset: element a with a^-1.VH = coset
    // forward[i][j]: G/H coset of (vh_mod_h[i], G/VH coset j).
    std::vector<std::vector<std::int32_t>> forward;
    // backward[c]: the (i, j) pair sent to G/H coset c.
    std::vector<std::pair<std::int32_t, std::int32_t>> backward;
};

inline VSetBijection vset_bijection(const Group& g, const std::vector<std::int32_t>& h,
                                    const std::vector<std::int32_t>& v,
                                    const std::vector<std::int32_t>* custom_section = nullptr) {
    require(g.is_finite(), "double-coset shuffle needs an enumerated finite group");
    require(is_normal_subgroup(g, h), "first subgroup must be normal");
    VSetBijection out;
    out.vh = product_set(g, v, h);
    out.mod_h = left_cosets(g, h);
    out.mod_vh = left_cosets(g, out.vh);

    for (auto x : out.vh) {
        auto c = out.mod_h.coset_of[x];
        if (!std::binary_search(out.vh_mod_h.begin(), out.vh_mod_h.end(), c)) {
            out.vh_mod_h.insert(
                std::upper_bound(out.vh_mod_h.begin(), out.vh_mod_h.end(), c), c);
        }
    }

    out.section.assign(out.mod_vh.count, -1);
    if (custom_section) {
        require(static_cast<std::int32_t>(custom_section->size()) == out.mod_vh.count,
                "section must choose one element per coset");
        out.section = *custom_section;
    } else {
        for (std::int32_t a = 0; a < g.order(); ++a) {
            auto j = out.mod_vh.coset_of[g.inv_idx(a)];
            if (out.section[j] == -1) out.section[j] = a;
        }
    }
    for (std::int32_t j = 0; j < out.mod_vh.count; ++j) {
        require(out.section[j] >= 0 && out.section[j] < g.order(),
                "section element out of range");
        require(out.mod_vh.coset_of[g.inv_idx(out.section[j])] == j,
                "section element does not invert onto its coset");
    }

    const auto parts = static_cast<std::int32_t>(out.vh_mod_h.size());
    out.forward.assign(parts, std::vector<std::int32_t>(out.mod_vh.count, -1));
    out.backward.assign(out.mod_h.count, {-1, -1});
    for (std::int32_t i = 0; i < parts; ++i) {
        const std::int32_t w = out.mod_h.rep[out.vh_mod_h[i]];
        for (std::int32_t j = 0; j < out.mod_vh.count; ++j)
            out.forward[i][j] = out.mod_h.coset_of[g.mul_idx(w, out.section[j])];
    }
    for (std::int32_t c = 0; c < out.mod_h.count; ++c) {
        const std::int32_t a = out.mod_h.rep[c];
        const std::int32_t j = out.mod_vh.coset_of[g.inv_idx(a)];
        const std::int32_t first =
            out.mod_h.coset_of[g.mul_idx(a, g.inv_idx(out.section[j]))];
        auto it = std::lower_bound(out.vh_mod_h.begin(), out.vh_mod_h.end(), first);
        require(it != out.vh_mod_h.end() && *it == first,
                "inverse image fell outside the VH part");
        out.backward[c] = {static_cast<std::int32_t>(it - out.vh_mod_h.begin()), j};
    }

    // Mutually inverse on every coset and pair.
    for (std::int32_t c = 0; c < out.mod_h.count; ++c) {
        auto [i, j] = out.backward[c];
        require(out.forward[i][j] == c, "shuffle is not a right inverse");
    }
    for (std::int32_t i = 0; i < parts; ++i)
        for (std::int32_t j = 0; j < out.mod_vh.count; ++j)
            require(out.backward[out.forward[i][j]] == std::make_pair(i, j),
                    "shuffle is not a left inverse");

    // V-equivariance: left multiplication by u permutes the VH part and the
    // image cosets coherently, with the G/VH coordinate untouched.
    for (auto u : v) {
        for (std::int32_t i = 0; i < parts; ++i) {
            const std::int32_t moved =
                out.mod_h.coset_of[g.mul_idx(u, out.mod_h.rep[out.vh_mod_h[i]])];
            auto it = std::lower_bound(out.vh_mod_h.begin(), out.vh_mod_h.end(), moved);
            require(it != out.vh_mod_h.end() && *it == moved,
                    "V does not preserve the VH part");
            const auto ui = static_cast<std::int32_t>(it - out.vh_mod_h.begin());
            for (std::int32_t j = 0; j < out.mod_vh.count; ++j)
                require(out.forward[ui][j] ==
                            out.mod_h.coset_of[g.mul_idx(u, out.mod_h.rep[out.forward[i][j]])],
                        "shuffle is not V-equivariant");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Net rearrangement.  A family of modules over one space, each level of the
// window carrying a maximal separated net, is gathered into a single module
// indexed by net points: the fiber at (level k, net point x) is the direct
// sum of all family fibers at level k whose carrier projects to x.  The
// per-family inclusion/projection witnesses move every index by at most the
// net's separation parameter and never change levels.
// ---------------------------------------------------------------------------
struct NetRearrangement {
    std::vector<Net> nets;                      // one per level, as supplied
    std::vector<std::int32_t> net_levels;       // the level each net serves
    ModulePtr rearranged;
    std::vector<ControlledMorphism> inclusions;   // family member -> rearranged
    std::vector<ControlledMorphism> projections;  // rearranged -> family member
    std::vector<Rat> level_propagation;  // per net: max displacement among witnesses
};

inline NetRearrangement net_rearrange(const std::vector<ModulePtr>& family,
                                      const std::vector<std::int32_t>& net_levels,
                                      const std::vector<Net>& nets) {
    require(net_levels.size() == nets.size(), "each net needs a level");
    require(!nets.empty(), "need at least one net level");
    for (std::size_t k = 0; k + 1 < nets.size(); ++k) {
        require(net_levels[k] < net_levels[k + 1], "net levels must be ascending");
        require(nets[k].delta > nets[k + 1].delta,
                "separation parameters must decrease along levels");
    }

    MetricSpacePtr space;
    std::int64_t modulus = 0;
    bool modulus_seen = false;
    for (const auto& m : family) {
        require(m != nullptr, "family member missing");
        require(m->action == nullptr, "net rearrangement expects trivially acted modules");
        if (!space) space = m->space;
        require(m->space == space, "family members must share one space");
        if (m->size() > 0 && !modulus_seen) {
            modulus = m->coefficient_modulus();
            modulus_seen = true;
        }
        if (m->size() > 0)
            require(m->coefficient_modulus() == modulus,
                    "family members must share one coefficient ring");
    }
    require(space != nullptr, "need at least one module to fix the space");

    std::map<std::int32_t, std::size_t> level_slot;
    for (std::size_t k = 0; k < nets.size(); ++k) {
        require(net_levels[k] >= 0 && net_levels[k] <= limits::kLevelWindow,
                "net level outside the window");
        auto check = verify_net(*space, nets[k]);
        require(check.separated, "net is not separated at its own parameter");
        require(check.maximal, "net is not maximal: some point is too far from it");
        require(check.projection_close && check.fixes_net_points,
                "net projection is inconsistent");
        level_slot[net_levels[k]] = k;
    }

    // Index layout: nets in order, net points in supplied order.
    std::vector<std::int32_t> offset(nets.size() + 1, 0);
    for (std::size_t k = 0; k < nets.size(); ++k)
        offset[k + 1] = offset[k] + static_cast<std::int32_t>(nets[k].points.size());

    // Gather: per rearranged index, the (family, index) pairs in order.
    std::vector<std::vector<std::pair<std::size_t, std::int32_t>>> gathered(offset.back());
    for (std::size_t f = 0; f < family.size(); ++f) {
        const auto& m = *family[f];
        for (std::int32_t s = 0; s < m.size(); ++s) {
            auto slot = level_slot.find(m.level[s]);
            require(slot != level_slot.end(), "module level has no net");
            const auto k = slot->second;
            const std::int32_t p = nets[k].projection[m.carrier[s]];
            const auto pos = std::find(nets[k].points.begin(), nets[k].points.end(), p);
            require(pos != nets[k].points.end(), "net projection misses the net");
            const std::int32_t j =
                offset[k] + static_cast<std::int32_t>(pos - nets[k].points.begin());
            gathered[j].push_back({f, s});
        }
    }

    GeometricModule big;
    big.space = space;
    big.carrier.resize(gathered.size());
    big.level.resize(gathered.size());
    big.fiber.resize(gathered.size());
    for (std::size_t k = 0; k < nets.size(); ++k)
        for (std::size_t i = 0; i < nets[k].points.size(); ++i) {
            const std::size_t j = offset[k] + i;
            big.carrier[j] = nets[k].points[i];
            big.level[j] = net_levels[k];
            std::int32_t rank = 0;
            for (auto [f, s] : gathered[j]) rank += family[f]->fiber[s].rank;
            big.fiber[j] = CoefficientObject{modulus, rank};
        }
    big.flags.level_support = LevelSupport::Finite;
    big.flags.spatially_bounded = true;
    big.label = "net-gathered family";

    NetRearrangement out;
    out.nets = nets;
    out.net_levels = net_levels;
    out.rearranged = make_geometric_module(std::move(big));
    out.level_propagation.assign(nets.size(), Rat(0));

    detail::RowCache rows(*space);
    for (std::size_t f = 0; f < family.size(); ++f) {
        EntryMap incl, proj;
        for (std::int32_t j = 0; j < out.rearranged->size(); ++j) {
            std::int32_t off = 0;
            for (auto [f2, s] : gathered[j]) {
                const std::int32_t r = family[f2]->fiber[s].rank;
                if (f2 == f && r > 0) {
                    const std::int32_t total = out.rearranged->fiber[j].rank;
                    Mat in = Mat::zero(total, r, modulus);
                    Mat pr = Mat::zero(r, total, modulus);
                    for (std::int32_t i = 0; i < r; ++i) {
                        in.at(off + i, i) = 1;
                        pr.at(i, off + i) = 1;
                    }
                    incl[{s, j}] = std::move(in);
                    proj[{j, s}] = std::move(pr);
                    const auto k = level_slot.at(family[f]->level[s]);
                    const Rat d = rows.dist(family[f]->carrier[s], out.rearranged->carrier[j]);
                    require(d <= nets[k].delta,
                            "witness displacement exceeds the net parameter");
                    out.level_propagation[k] = std::max(out.level_propagation[k], d);
                }
                off += r;
            }
        }
        out.inclusions.push_back(make_morphism(family[f], out.rearranged, std::move(incl)));
        out.projections.push_back(make_morphism(out.rearranged, family[f], std::move(proj)));
    }
    return out;
}

}  // namespace coarsebox

#endif
