#ifndef COARSEBOX_CONTROLLED_HPP
#define COARSEBOX_CONTROLLED_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coarsebox/common.hpp"
#include "coarsebox/metric.hpp"
#include "coarsebox/rational.hpp"

namespace coarsebox {

// ---------------------------------------------------------------------------
// Coefficients: finitely generated free modules over Z (modulus 0) or Z/m.
// Morphisms between them are dense integer matrices, normalized mod m.
// ---------------------------------------------------------------------------
struct CoefficientObject {
    std::int64_t modulus = 0;  // 0 = integers, m >= 2 = integers mod m
    std::int32_t rank = 0;

    friend bool operator==(const CoefficientObject& a, const CoefficientObject& b) {
        return a.modulus == b.modulus && a.rank == b.rank;
    }
    friend bool operator!=(const CoefficientObject& a, const CoefficientObject& b) {
        return !(a == b);
    }
};

struct Mat {
    std::int32_t rows = 0, cols = 0;
    std::int64_t modulus = 0;
    std::vector<std::int64_t> a;  // row-major

    static Mat zero(std::int32_t r, std::int32_t c, std::int64_t m = 0) {
        Mat out;
        out.rows = r;
        out.cols = c;
        out.modulus = m;
        out.a.assign(static_cast<std::size_t>(r) * c, 0);
        return out;
    }
    static Mat ident(std::int32_t n, std::int64_t m = 0) {
        Mat out = zero(n, n, m);
        for (std::int32_t i = 0; i < n; ++i) out.at(i, i) = m == 1 ? 0 : 1;
        return out;
    }
    static Mat scalar(std::int64_t v, std::int64_t m = 0) {
        Mat out = zero(1, 1, m);
        out.at(0, 0) = v;
        out.reduce();
        return out;
    }

    std::int64_t& at(std::int32_t r, std::int32_t c) {
        return a[static_cast<std::size_t>(r) * cols + c];
    }
    std::int64_t at(std::int32_t r, std::int32_t c) const {
        return a[static_cast<std::size_t>(r) * cols + c];
    }
    void reduce() {
        if (modulus == 0) return;
        for (auto& v : a) {
            v %= modulus;
            if (v < 0) v += modulus;
        }
    }
    bool is_zero() const {
        for (auto v : a)
            if (v != 0) return false;
        return true;
    }
    friend bool operator==(const Mat& x, const Mat& y) {
        return x.rows == y.rows && x.cols == y.cols && x.modulus == y.modulus &&
               x.a == y.a;
    }
    friend bool operator!=(const Mat& x, const Mat& y) { return !(x == y); }
};

inline Mat add(const Mat& x, const Mat& y) {
    require(x.rows == y.rows && x.cols == y.cols && x.modulus == y.modulus,
            "matrix sum shape mismatch");
    Mat out = x;
    for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] += y.a[i];
    out.reduce();
    return out;
}

inline Mat negate(const Mat& x) {
    Mat out = x;
    for (auto& v : out.a) v = -v;
    out.reduce();
    return out;
}

inline Mat mul(const Mat& x, const Mat& y) {
    require(x.cols == y.rows && x.modulus == y.modulus,
            "matrix product shape mismatch");
    Mat out = Mat::zero(x.rows, y.cols, x.modulus);
    for (std::int32_t i = 0; i < x.rows; ++i)
        for (std::int32_t k = 0; k < x.cols; ++k) {
            std::int64_t v = x.at(i, k);
            if (v == 0) continue;
            for (std::int32_t j = 0; j < y.cols; ++j) out.at(i, j) += v * y.at(k, j);
        }
    out.reduce();
    return out;
}

// ---------------------------------------------------------------------------
// Geometric modules: a finite index set S carrying a free action of a finite
// group, a point and a filtration level per index, and a free-module fiber.
// The carrier map is equivariant; levels and fibers are action-invariant.
// ---------------------------------------------------------------------------
enum class LevelSupport { Unbounded, Finite, Zero };

struct ModuleFlags {
    bool spatially_bounded = false;             // carrier image declared bounded
    LevelSupport level_support = LevelSupport::Unbounded;
    bool concentrated = false;                  // endomorphisms expected on-point
};

struct GeometricModule {
    MetricSpacePtr space;
    std::shared_ptr<const SpaceAction> action;         // null = trivial group
    std::vector<std::int32_t> carrier;                 // index -> point of space
    std::vector<std::int32_t> level;                   // index -> [0, window]
    std::vector<CoefficientObject> fiber;
    std::vector<std::vector<std::int32_t>> translate;  // g -> permutation of S
    ModuleFlags flags;
    std::string label;

    std::int32_t size() const { return static_cast<std::int32_t>(carrier.size()); }
    std::int32_t group_order() const {
        return action ? static_cast<std::int32_t>(translate.size()) : 1;
    }
    std::int32_t apply(std::int32_t g, std::int32_t s) const {
        return action ? translate[g][s] : s;
    }
    std::int64_t coefficient_modulus() const {
        return fiber.empty() ? 0 : fiber.front().modulus;
    }
    std::int32_t max_level() const {
        std::int32_t m = 0;
        for (auto l : level) m = std::max(m, l);
        return m;
    }
};

using ModulePtr = std::shared_ptr<const GeometricModule>;

inline ModulePtr make_geometric_module(GeometricModule m) {
    require(m.space != nullptr, "module needs a carrier space");
    const std::int32_t n = m.size();
    require(static_cast<std::int32_t>(m.level.size()) == n &&
                static_cast<std::int32_t>(m.fiber.size()) == n,
            "module field sizes disagree");
    for (auto x : m.carrier)
        require(x >= 0 && x < m.space->size(), "carrier point out of range");
    for (auto l : m.level)
        require(l >= 0 && l <= limits::kLevelWindow, "level outside the window");
    for (const auto& f : m.fiber) {
        require(f.rank >= 0, "fiber rank must be nonnegative");
        require(f.modulus == 0 || f.modulus >= 2, "coefficient modulus must be 0 or >= 2");
        require(f.modulus == m.fiber.front().modulus, "fibers must share one coefficient ring");
    }
    if (m.flags.level_support == LevelSupport::Zero)
        for (auto l : m.level) require(l == 0, "zero-level module has a positive level");

    if (m.action) {
        const auto& act = *m.action;
        const std::int64_t order = act.group.order();
        require(static_cast<std::int64_t>(act.table.size()) == order &&
                    static_cast<std::int64_t>(m.translate.size()) == order,
                "action tables need one row per group element");
        std::vector<char> hit(n);
        for (std::int64_t g = 0; g < order; ++g) {
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
                require(m.carrier[row[s]] == act.table[g][m.carrier[s]],
                        "carrier map is not equivariant");
                require(m.level[row[s]] == m.level[s], "levels must be action-invariant");
                require(m.fiber[row[s]] == m.fiber[s], "fibers must be action-invariant");
            }
            require(g == 0 || n == 0 || !fixes_something, "index action must be free");
        }
        for (std::int64_t g = 0; g < order; ++g)
            for (std::int64_t h = 0; h < order; ++h) {
                auto gh = act.group.mul_idx(static_cast<std::int32_t>(g),
                                            static_cast<std::int32_t>(h));
                for (std::int32_t s = 0; s < n; ++s)
                    require(m.translate[g][m.translate[h][s]] == m.translate[gh][s],
                            "index action is not associative");
            }
    } else {
        require(m.translate.empty(), "index action table without a group action");
    }
    return std::make_shared<const GeometricModule>(std::move(m));
}

/// Structural equality of the data that matters for composing morphisms.
inline bool same_module(const GeometricModule& a, const GeometricModule& b) {
    return a.space == b.space && a.action == b.action && a.carrier == b.carrier &&
           a.level == b.level && a.fiber == b.fiber && a.translate == b.translate;
}
inline bool same_module(const ModulePtr& a, const ModulePtr& b) {
    return a == b || (a && b && same_module(*a, *b));
}

/// One free orbit over a basepoint: indices are the group elements, index h
/// sits over the point h·basepoint, every fiber is the given object.
inline ModulePtr orbit_module(MetricSpacePtr space,
                              std::shared_ptr<const SpaceAction> action,
                              std::int32_t basepoint, CoefficientObject fiber,
                              std::int32_t level = 0,
                              LevelSupport level_support = LevelSupport::Finite) {
    require(action != nullptr, "orbit module needs a group action");
    const auto order = static_cast<std::int32_t>(action->group.order());
    GeometricModule m;
    m.space = std::move(space);
    m.action = std::move(action);
    m.carrier.resize(order);
    m.level.assign(order, level);
    m.fiber.assign(order, fiber);
    m.translate.assign(order, std::vector<std::int32_t>(order));
    for (std::int32_t h = 0; h < order; ++h) {
        m.carrier[h] = m.action->table[h][basepoint];
        for (std::int32_t g = 0; g < order; ++g)
            m.translate[g][h] = m.action->group.mul_idx(g, h);
    }
    m.flags.level_support = level_support;
    m.flags.spatially_bounded = true;
    return make_geometric_module(std::move(m));
}

/// Restriction to a subset of indices (must be action-invariant), reindexed
/// in ascending order of the original indices.
inline ModulePtr restrict_module(const ModulePtr& m,
                                 std::vector<std::int32_t> members,
                                 std::optional<ModuleFlags> flags = std::nullopt) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    std::vector<std::int32_t> pos(m->size(), -1);
    for (std::size_t i = 0; i < members.size(); ++i) {
        require(members[i] >= 0 && members[i] < m->size(), "restriction index out of range");
        pos[members[i]] = static_cast<std::int32_t>(i);
    }
    GeometricModule out;
    out.space = m->space;
    out.action = m->action;
    out.flags = flags.value_or(m->flags);
    out.label = m->label;
    for (auto s : members) {
        out.carrier.push_back(m->carrier[s]);
        out.level.push_back(m->level[s]);
        out.fiber.push_back(m->fiber[s]);
    }
    if (m->action) {
        out.translate.assign(m->translate.size(), {});
        for (std::size_t g = 0; g < m->translate.size(); ++g)
            for (auto s : members) {
                auto image = pos[m->translate[g][s]];
                require(image >= 0, "restriction subset is not action-invariant");
                out.translate[g].push_back(image);
            }
    }
    return make_geometric_module(std::move(out));
}

// ---------------------------------------------------------------------------
// Morphisms: sparse matrices indexed by (source index, target index), with
// cached spatial and level propagation (the largest displacement over the
// nonzero entries).  Entries are equivariant under the shared group action.
// ---------------------------------------------------------------------------
using EntryMap = std::map<std::pair<std::int32_t, std::int32_t>, Mat>;

struct ControlledMorphism {
    ModulePtr source, target;
    EntryMap entries;
    Rat spatial_propagation{0};
    std::int32_t level_propagation = 0;
    bool concentrated = false;

    bool is_zero() const { return entries.empty(); }
    friend bool operator==(const ControlledMorphism& a, const ControlledMorphism& b) {
        return same_module(a.source, b.source) && same_module(a.target, b.target) &&
               a.entries == b.entries;
    }
    friend bool operator!=(const ControlledMorphism& a, const ControlledMorphism& b) {
        return !(a == b);
    }
};

namespace detail {

/// Lazily cached distance rows of a space, keyed by source point.
class RowCache {
  public:
    explicit RowCache(const MetricSpace& space) : space_(space) {}
    const Rat& dist(std::int32_t a, std::int32_t b) {
        auto it = rows_.find(a);
        if (it == rows_.end()) it = rows_.emplace(a, space_.dist_row(a)).first;
        return it->second[b];
    }

  private:
    const MetricSpace& space_;
    std::map<std::int32_t, std::vector<Rat>> rows_;
};

}  // namespace detail

inline ControlledMorphism make_morphism(ModulePtr source, ModulePtr target,
                                        EntryMap entries, bool concentrated = false) {
    require(source != nullptr && target != nullptr, "morphism needs endpoints");
    require(source->space == target->space, "morphism endpoints live over different spaces");
    require(source->action == target->action, "morphism endpoints carry different actions");
    for (auto it = entries.begin(); it != entries.end();) {
        if (it->second.is_zero())
            it = entries.erase(it);
        else
            ++it;
    }
    ControlledMorphism f;
    f.concentrated = concentrated;
    detail::RowCache rows(*source->space);
    for (const auto& [key, m] : entries) {
        auto [s, t] = key;
        require(s >= 0 && s < source->size() && t >= 0 && t < target->size(),
                "entry index out of range");
        require(m.rows == target->fiber[t].rank && m.cols == source->fiber[s].rank,
                "entry shape does not match the fiber ranks");
        require(m.modulus == source->coefficient_modulus() &&
                    m.modulus == target->coefficient_modulus(),
                "entry ring does not match the module ring");
        f.spatial_propagation = std::max(
            f.spatial_propagation, rows.dist(source->carrier[s], target->carrier[t]));
        f.level_propagation = std::max(
            f.level_propagation, std::abs(source->level[s] - target->level[t]));
        if (concentrated)
            require(source->carrier[s] == target->carrier[t],
                    "concentrated morphism moves a carrier point");
    }
    if (source->action)
        for (const auto& [key, m] : entries) {
            auto [s, t] = key;
            for (std::int32_t g = 1; g < source->group_order(); ++g) {
                auto it = entries.find({source->translate[g][s], target->translate[g][t]});
                require(it != entries.end() && it->second == m,
                        "entries are not equivariant");
            }
        }
    f.source = std::move(source);
    f.target = std::move(target);
    f.entries = std::move(entries);
    return f;
}

inline ControlledMorphism zero_morphism(ModulePtr source, ModulePtr target) {
    return make_morphism(std::move(source), std::move(target), {});
}

inline ControlledMorphism identity_morphism(ModulePtr m) {
    EntryMap entries;
    for (std::int32_t s = 0; s < m->size(); ++s)
        entries[{s, s}] = Mat::ident(m->fiber[s].rank, m->coefficient_modulus());
    return make_morphism(m, m, std::move(entries), true);
}

inline ControlledMorphism add(const ControlledMorphism& f, const ControlledMorphism& g) {
    require(same_module(f.source, g.source) && same_module(f.target, g.target),
            "morphism sum needs equal endpoints");
    EntryMap entries = f.entries;
    for (const auto& [key, m] : g.entries) {
        auto it = entries.find(key);
        if (it == entries.end())
            entries[key] = m;
        else
            it->second = add(it->second, m);
    }
    return make_morphism(f.source, f.target, std::move(entries));
}

inline ControlledMorphism negate(const ControlledMorphism& f) {
    EntryMap entries;
    for (const auto& [key, m] : f.entries) entries[key] = negate(m);
    return make_morphism(f.source, f.target, std::move(entries));
}

inline ControlledMorphism subtract(const ControlledMorphism& f,
                                   const ControlledMorphism& g) {
    return add(f, negate(g));
}

/// Composite f after g, by block matrix multiplication.
inline ControlledMorphism compose(const ControlledMorphism& f,
                                  const ControlledMorphism& g) {
    require(same_module(f.source, g.target), "composition chain mismatch");
    std::vector<std::vector<std::pair<std::int32_t, const Mat*>>> by_middle(
        g.target->size());
    for (const auto& [key, m] : g.entries) by_middle[key.second].push_back({key.first, &m});
    EntryMap entries;
    for (const auto& [key, fm] : f.entries) {
        auto [mid, t] = key;
        for (const auto& [s, gm] : by_middle[mid]) {
            Mat prod = mul(fm, *gm);
            if (prod.is_zero()) continue;
            auto it = entries.find({s, t});
            if (it == entries.end())
                entries[{s, t}] = std::move(prod);
            else
                it->second = add(it->second, prod);
        }
    }
    return make_morphism(g.source, f.target, std::move(entries));
}

inline std::pair<Rat, std::int32_t> propagation(const ControlledMorphism& f) {
    return {f.spatial_propagation, f.level_propagation};
}

/// Both displacements strictly below the given bound on every nonzero entry.
inline bool is_controlled(const ControlledMorphism& f, const Rat& bound) {
    return f.is_zero() ||
           (f.spatial_propagation < bound && Rat(f.level_propagation) < bound);
}

// ---------------------------------------------------------------------------
// Level shift: adds n to every level, keeping entries untouched.
// ---------------------------------------------------------------------------
inline ModulePtr shift_functor(std::int32_t n, const ModulePtr& m) {
    require(n >= 0, "level shift must be nonnegative");
    require(m->max_level() + n <= limits::kLevelWindow, "level shift leaves the window");
    GeometricModule out = *m;
    for (auto& l : out.level) l += n;
    if (n > 0 && out.flags.level_support == LevelSupport::Zero)
        out.flags.level_support = LevelSupport::Finite;
    return make_geometric_module(std::move(out));
}

inline ControlledMorphism shift_functor(std::int32_t n, const ControlledMorphism& f) {
    return make_morphism(shift_functor(n, f.source), shift_functor(n, f.target),
                         f.entries, f.concentrated);
}

// ---------------------------------------------------------------------------
// Decoration checks.  Level-zero endpoints must not be moved along the level
// axis; concentrated morphisms must fix carrier points; the control profile
// reports, per tolerance, the smallest level threshold above which all
// entries move points by strictly less than the tolerance.
// ---------------------------------------------------------------------------
struct DecorationWitnessPair {
    std::int32_t s = -1, t = -1;
};

struct DecorationReport {
    bool zero_level_ok = true;
    bool concentrated_entries = true;   // measured Property: all entries on-point
    bool claims_respected = true;       // declared flags consistent with entries
    bool finite_rows_and_columns = true;  // automatic on finite index sets
    bool cofinite_preimages = true;       // automatic on finite index sets
    std::vector<std::pair<Rat, std::int32_t>> control_profile;  // tolerance -> threshold
    std::optional<DecorationWitnessPair> witness;

    bool ok() const { return zero_level_ok && claims_respected; }
};

inline DecorationReport check_decorations(const ControlledMorphism& f,
                                          int grid_size = 8) {
    DecorationReport rep;
    detail::RowCache rows(*f.source->space);
    const bool zero_source = f.source->flags.level_support == LevelSupport::Zero;
    const bool zero_target = f.target->flags.level_support == LevelSupport::Zero;
    std::vector<std::pair<std::int32_t, Rat>> moved;  // (source level, distance)
    for (const auto& [key, m] : f.entries) {
        (void)m;
        auto [s, t] = key;
        if ((zero_source || zero_target) &&
            (f.source->level[s] != 0 || f.target->level[t] != 0)) {
            rep.zero_level_ok = false;
            if (!rep.witness) rep.witness = DecorationWitnessPair{s, t};
        }
        Rat d = rows.dist(f.source->carrier[s], f.target->carrier[t]);
        if (d != Rat(0)) {
            rep.concentrated_entries = false;
            if (f.concentrated && !rep.witness) rep.witness = DecorationWitnessPair{s, t};
        }
        moved.push_back({f.source->level[s], d});
    }
    if (f.concentrated && !rep.concentrated_entries) rep.claims_respected = false;
    Rat tolerance(1);
    for (int i = 0; i < grid_size; ++i) {
        std::int32_t threshold = 0;
        for (const auto& [lvl, d] : moved)
            if (d >= tolerance) threshold = std::max(threshold, lvl);
        rep.control_profile.push_back({tolerance, threshold});
        tolerance = tolerance / Rat(2);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Constructive factorization: given f: A -> X (and optionally g: X -> A),
// cut a direct summand X' of X large enough that f lands inside X' and g
// only sees X', so f = incl ∘ narrowed and g = widened ∘ proj exactly.
// ByLevel cuts by filtration level (A must have declared finite levels);
// BySpace cuts by an enlarged neighborhood of A's spatial image (A must be
// declared spatially bounded).
// ---------------------------------------------------------------------------
enum class FactorMode { ByLevel, BySpace };

struct KaroubiFactorization {
    ModulePtr through;
    std::vector<std::int32_t> members;  // indices of X kept in the summand
    ControlledMorphism inclusion;       // through -> X
    ControlledMorphism projection;      // X -> through
    ControlledMorphism narrowed;        // A -> through
    ControlledMorphism widened;         // through -> A (zero when g is absent)
    bool triangles_commute = false;
};

inline ControlledMorphism inclusion_morphism(const ModulePtr& sub, const ModulePtr& host,
                                             const std::vector<std::int32_t>& members) {
    EntryMap entries;
    for (std::size_t i = 0; i < members.size(); ++i)
        entries[{static_cast<std::int32_t>(i), members[i]}] =
            Mat::ident(sub->fiber[i].rank, sub->coefficient_modulus());
    return make_morphism(sub, host, std::move(entries));
}

inline ControlledMorphism projection_morphism(const ModulePtr& host, const ModulePtr& sub,
                                              const std::vector<std::int32_t>& members) {
    EntryMap entries;
    for (std::size_t i = 0; i < members.size(); ++i)
        entries[{members[i], static_cast<std::int32_t>(i)}] =
            Mat::ident(sub->fiber[i].rank, sub->coefficient_modulus());
    return make_morphism(host, sub, std::move(entries));
}

inline KaroubiFactorization karoubi_factorize(const ControlledMorphism& into_big,
                                              const ControlledMorphism* from_big,
                                              FactorMode mode) {
    const ModulePtr& small = into_big.source;
    const ModulePtr& big = into_big.target;
    if (from_big) {
        require(same_module(from_big->source, big) && same_module(from_big->target, small),
                "paired factorization needs opposite morphisms between the same objects");
    }

    std::vector<std::int32_t> members;
    if (mode == FactorMode::ByLevel) {
        require(small->flags.level_support != LevelSupport::Unbounded,
                "level factorization needs declared finite levels on the small side");
        std::int32_t reach = into_big.level_propagation;
        if (from_big) reach = std::max(reach, from_big->level_propagation);
        const std::int32_t cut = small->max_level() + reach;
        for (std::int32_t s = 0; s < big->size(); ++s)
            if (big->level[s] <= cut) members.push_back(s);
    } else {
        require(small->flags.spatially_bounded,
                "spatial factorization needs a declared bounded carrier image");
        Rat reach = into_big.spatial_propagation;
        if (from_big) reach = std::max(reach, from_big->spatial_propagation);
        std::vector<std::vector<Rat>> core_rows;
        std::vector<char> is_core(big->space->size(), 0);
        for (auto x : small->carrier)
            if (!is_core[x]) {
                is_core[x] = 1;
                core_rows.push_back(big->space->dist_row(x));
            }
        for (std::int32_t s = 0; s < big->size(); ++s)
            for (const auto& row : core_rows)
                if (row[big->carrier[s]] <= reach) {
                    members.push_back(s);
                    break;
                }
    }

    KaroubiFactorization out;
    ModuleFlags cut_flags = big->flags;
    if (mode == FactorMode::ByLevel && cut_flags.level_support == LevelSupport::Unbounded)
        cut_flags.level_support = LevelSupport::Finite;
    if (mode == FactorMode::BySpace) cut_flags.spatially_bounded = true;
    out.through = restrict_module(big, members, cut_flags);
    out.members = members;
    std::vector<std::int32_t> pos(big->size(), -1);
    for (std::size_t i = 0; i < members.size(); ++i)
        pos[members[i]] = static_cast<std::int32_t>(i);

    out.inclusion = inclusion_morphism(out.through, big, members);
    out.projection = projection_morphism(big, out.through, members);

    EntryMap narrowed;
    for (const auto& [key, m] : into_big.entries) {
        require(pos[key.second] >= 0, "factorization summand misses an entry target");
        narrowed[{key.first, pos[key.second]}] = m;
    }
    out.narrowed = make_morphism(small, out.through, std::move(narrowed));
    if (from_big) {
        EntryMap widened;
        for (const auto& [key, m] : from_big->entries) {
            require(pos[key.first] >= 0, "factorization summand misses an entry source");
            widened[{pos[key.first], key.second}] = m;
        }
        out.widened = make_morphism(out.through, small, std::move(widened));
    } else {
        out.widened = zero_morphism(out.through, small);
    }

    out.triangles_commute = compose(out.inclusion, out.narrowed) == into_big &&
                            (!from_big || compose(out.widened, out.projection) == *from_big);
    return out;
}

inline KaroubiFactorization karoubi_factorize(const ControlledMorphism& into_big,
                                              FactorMode mode) {
    return karoubi_factorize(into_big, nullptr, mode);
}

// ---------------------------------------------------------------------------
// Quotient-category equality: f and g agree in the quotient by the admissible
// subobjects when f - g factors through one.  The sufficient branch factors
// the difference through the restriction of an endpoint to its support; the
// refuting branch finds an entry that no admissible object could bridge
// within the declared propagation budget.  Anything else stays undecided.
// ---------------------------------------------------------------------------
enum class QuotientVerdict { Equal, NotEqual, Undecided };

struct FactorPredicate {
    enum class Kind { LevelWindow, SpatialWindow };
    Kind kind = Kind::LevelWindow;
    std::int32_t max_level = 0;   // admissible: every level <= max_level
    Rat max_diameter{0};          // admissible: carrier image diameter <= max_diameter
    std::int32_t level_budget = 0;  // allowed level propagation of the factor arrows
    Rat spatial_budget{0};          // allowed spatial propagation of the factor arrows

    bool admits(const GeometricModule& m) const {
        if (kind == Kind::LevelWindow) {
            for (auto l : m.level)
                if (l > max_level) return false;
            return true;
        }
        detail::RowCache rows(*m.space);
        for (auto a : m.carrier)
            for (auto b : m.carrier)
                if (rows.dist(a, b) > max_diameter) return false;
        return true;
    }
};

struct QuotientDecision {
    QuotientVerdict verdict = QuotientVerdict::Undecided;
    ModulePtr factoring_object;                         // set on Equal
    std::optional<DecorationWitnessPair> obstruction;   // set on NotEqual
};

inline QuotientDecision quotient_equal(const ControlledMorphism& f,
                                       const ControlledMorphism& g,
                                       const FactorPredicate& pred) {
    require(same_module(f.source, g.source) && same_module(f.target, g.target),
            "quotient comparison needs parallel morphisms");
    QuotientDecision out;
    ControlledMorphism diff = subtract(f, g);
    if (diff.is_zero()) {
        out.verdict = QuotientVerdict::Equal;
        out.factoring_object = restrict_module(f.source, {});
        return out;
    }

    std::vector<std::int32_t> src_support, tgt_support;
    for (const auto& [key, m] : diff.entries) {
        (void)m;
        src_support.push_back(key.first);
        tgt_support.push_back(key.second);
    }
    for (auto* side : {&src_support, &tgt_support}) {
        std::sort(side->begin(), side->end());
        side->erase(std::unique(side->begin(), side->end()), side->end());
    }
    auto src_restriction = restrict_module(diff.source, src_support);
    if (pred.admits(*src_restriction)) {
        out.verdict = QuotientVerdict::Equal;
        out.factoring_object = src_restriction;
        return out;
    }
    auto tgt_restriction = restrict_module(diff.target, tgt_support);
    if (pred.admits(*tgt_restriction)) {
        out.verdict = QuotientVerdict::Equal;
        out.factoring_object = tgt_restriction;
        return out;
    }

    if (pred.kind == FactorPredicate::Kind::LevelWindow) {
        const std::int32_t cut = pred.max_level + pred.level_budget;
        for (const auto& [key, m] : diff.entries) {
            (void)m;
            if (diff.source->level[key.first] > cut ||
                diff.target->level[key.second] > cut) {
                out.verdict = QuotientVerdict::NotEqual;
                out.obstruction = DecorationWitnessPair{key.first, key.second};
                return out;
            }
        }
    } else {
        // any factoring object keeps all support carriers within its diameter
        // plus one budget hop on each side
        detail::RowCache rows(*diff.source->space);
        const Rat cut = pred.max_diameter + pred.spatial_budget + pred.spatial_budget;
        std::vector<std::int32_t> support_points;
        for (auto s : src_support) support_points.push_back(diff.source->carrier[s]);
        for (auto t : tgt_support) support_points.push_back(diff.target->carrier[t]);
        for (std::size_t i = 0; i < support_points.size(); ++i)
            for (std::size_t j = i + 1; j < support_points.size(); ++j)
                if (rows.dist(support_points[i], support_points[j]) > cut) {
                    out.verdict = QuotientVerdict::NotEqual;
                    out.obstruction = DecorationWitnessPair{
                        support_points[i], support_points[j]};
                    return out;
                }
    }
    return out;  // undecided
}

}  // namespace coarsebox

#endif
