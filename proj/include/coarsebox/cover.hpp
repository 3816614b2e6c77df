#ifndef COARSEBOX_COVER_HPP
#define COARSEBOX_COVER_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coarsebox/common.hpp"
#include "coarsebox/group.hpp"
#include "coarsebox/metric.hpp"
#include "coarsebox/rational.hpp"

namespace coarsebox {

/// Marks points of an untruncated total space: every radius is admissible.
constexpr std::int32_t kUnboundedRadius = std::numeric_limits<std::int32_t>::max() / 4;

// ---------------------------------------------------------------------------
// A surjective map p: total -> base together with the bookkeeping needed to
// verify that p restricts to a bijective isometry on closed R-balls.
// Infinite totals are represented by a truncated ball; safe_radius[x] bounds
// the radii for which the ball around x lies inside the truncation, so the
// verifier only quantifies over admissible centers.
// ---------------------------------------------------------------------------
struct MetricCoverMap {
    MetricSpacePtr total;
    MetricSpacePtr base;
    std::vector<std::int32_t> p;            // total point -> base point
    std::vector<std::int32_t> safe_radius;  // per-point admissible radius
    std::optional<SpaceAction> deck;        // fiber-preserving isometries of total
    Rat certified_radius{0};
    std::optional<std::int64_t> kernel_girth;  // shortest nontrivial fiber word, if known
    bool degenerate = false;
    std::string label;
};

struct CoverWitness {
    std::string kind;  // injectivity | distance | missing-target | no-admissible-center
    std::int32_t center = -1;
    std::int32_t u = -1, v = -1;     // colliding or distance-distorting pair
    std::int32_t missing_base = -1;  // base point absent from the image
    Rat total_distance{0}, base_distance{0};
};

struct CoverCheck {
    bool ok = true;
    std::optional<CoverWitness> witness;
    std::int64_t centers_checked = 0;
};

namespace detail {

inline bool permutation_preserves_metric(const MetricSpace& X,
                                         const std::vector<std::int32_t>& row) {
    int n = X.size();
    require(n <= 2048, "isometry validation table too large");
    std::vector<std::vector<Rat>> rows(n);
    for (int i = 0; i < n; ++i) rows[i] = X.dist_row(i);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (rows[a][b] != rows[row[a]][row[b]]) return false;
    return true;
}

}  // namespace detail

/// Validates the structural invariants and returns the cover unchanged.
inline MetricCoverMap make_cover_map(MetricCoverMap c) {
    require(c.total && c.base, "cover needs total and base spaces");
    int nt = c.total->size(), nb = c.base->size();
    require(static_cast<int>(c.p.size()) == nt, "cover map must list every total point");
    require(static_cast<int>(c.safe_radius.size()) == nt, "safe radii must list every point");
    std::vector<char> hit(nb, 0);
    for (auto y : c.p) {
        require(y >= 0 && y < nb, "cover map image out of range");
        hit[y] = 1;
    }
    require(std::all_of(hit.begin(), hit.end(), [](char h) { return h != 0; }),
            "cover map must be surjective");
    for (auto s : c.safe_radius) require(s >= 0, "safe radii must be nonnegative");
    if (c.deck) {
        const auto& d = *c.deck;
        require(d.group.is_finite(), "deck group must be enumerated");
        require(static_cast<std::int64_t>(d.table.size()) == d.group.order(),
                "deck table needs one row per element");
        for (const auto& row : d.table) {
            require(static_cast<int>(row.size()) == nt, "deck row size mismatch");
            std::vector<char> seen(nt, 0);
            for (auto v : row) {
                require(v >= 0 && v < nt && !seen[v], "deck row is not a permutation");
                seen[v] = 1;
            }
            for (int x = 0; x < nt; ++x)
                require(c.p[row[x]] == c.p[x], "deck transformations must preserve fibers");
            require(detail::permutation_preserves_metric(*c.total, row),
                    "deck transformations must be isometries");
        }
        for (int x = 0; x < nt; ++x)
            require(d.table[0][x] == x, "deck identity row must fix points");
    }
    return c;
}

// ---------------------------------------------------------------------------
// Ball-isometry verification.
// ---------------------------------------------------------------------------

/// Checks that p restricts to a bijective isometry B_R(x) -> B_R(p(x)) for
/// every admissible center x.  Returns a witness on failure.  Centers are
/// scanned in index order, so origin-first layouts fail fast.
inline CoverCheck verify_cover_radius(const MetricCoverMap& c, const Rat& R) {
    require(R >= Rat(0), "cover radius must be nonnegative");
    int nt = c.total->size(), nb = c.base->size();
    {
        std::vector<char> hit(nb, 0);
        for (auto y : c.p) {
            require(y >= 0 && y < nb, "cover map image out of range");
            hit[y] = 1;
        }
        require(std::all_of(hit.begin(), hit.end(), [](char h) { return h != 0; }),
                "cover map must be surjective");
    }

    CoverCheck res;
    auto fail = [&](CoverWitness w) {
        res.ok = false;
        res.witness = std::move(w);
        return res;
    };

    const bool total_tree = c.total->tree() != nullptr;
    const bool int_path = c.total->is_graph_metric() && c.base->graph() != nullptr &&
                          R.den() == 1 && nb <= 8192 && (total_tree || nt <= 4096);

    if (int_path) {
        const int Ri = static_cast<int>(R.num());
        std::vector<std::vector<std::int32_t>> brow(nb);
        std::vector<std::int32_t> bsize(nb, 0);
        for (int y = 0; y < nb; ++y) {
            brow[y] = c.base->bfs_distances(y);
            for (auto d : brow[y]) {
                require(d >= 0, "cover base must be connected");
                if (d <= Ri) ++bsize[y];
            }
        }
        std::vector<std::vector<std::int32_t>> trow;
        if (!total_tree) {
            trow.resize(nt);
            for (int x = 0; x < nt; ++x) trow[x] = c.total->bfs_distances(x);
        }
        auto tdist = [&](std::int32_t a, std::int32_t b) {
            return total_tree ? c.total->int_dist(a, b) : trow[a][b];
        };
        std::vector<std::int32_t> mark(nb, -1), owner(nb, -1);
        for (int x = 0; x < nt; ++x) {
            if (c.safe_radius[x] < Ri) continue;
            ++res.centers_checked;
            auto ball = c.total->bfs_bounded(x, Ri);
            const int y = c.p[x];
            for (auto [u, du] : ball) {
                (void)du;
                const int img = c.p[u];
                if (mark[img] == x)
                    return fail({"injectivity", x, owner[img], u, -1, Rat(tdist(owner[img], u)),
                                 Rat(0)});
                mark[img] = x;
                owner[img] = u;
            }
            for (size_t i = 0; i < ball.size(); ++i)
                for (size_t j = i + 1; j < ball.size(); ++j) {
                    const auto u = ball[i].first, v = ball[j].first;
                    const auto dt = tdist(u, v);
                    const auto db = brow[c.p[u]][c.p[v]];
                    if (dt != db)
                        return fail({"distance", x, u, v, -1, Rat(dt), Rat(db)});
                }
            if (static_cast<std::int32_t>(ball.size()) != bsize[y]) {
                for (int z = 0; z < nb; ++z)
                    if (brow[y][z] <= Ri && mark[z] != x)
                        return fail({"missing-target", x, -1, -1, z, Rat(0), Rat(0)});
            }
        }
    } else {
        std::vector<std::vector<Rat>> brow(nb);
        for (int y = 0; y < nb; ++y) brow[y] = c.base->dist_row(y);
        for (int x = 0; x < nt; ++x) {
            if (Rat(c.safe_radius[x]) < R) continue;
            ++res.centers_checked;
            auto xrow = c.total->dist_row(x);
            std::vector<std::int32_t> ball;
            for (int u = 0; u < nt; ++u)
                if (xrow[u] <= R) ball.push_back(u);
            std::vector<std::vector<Rat>> trow(ball.size());
            for (size_t i = 0; i < ball.size(); ++i) trow[i] = c.total->dist_row(ball[i]);
            std::vector<std::int32_t> seen_owner(nb, -1);
            for (auto u : ball) {
                if (seen_owner[c.p[u]] >= 0)
                    return fail({"injectivity", x, seen_owner[c.p[u]], u, -1,
                                 xrow[u], Rat(0)});
                seen_owner[c.p[u]] = u;
            }
            for (size_t i = 0; i < ball.size(); ++i)
                for (size_t j = i + 1; j < ball.size(); ++j) {
                    const auto u = ball[i], v = ball[j];
                    if (trow[i][v] != brow[c.p[u]][c.p[v]])
                        return fail({"distance", x, u, v, -1, trow[i][v], brow[c.p[u]][c.p[v]]});
                }
            const int y = c.p[x];
            for (int z = 0; z < nb; ++z)
                if (brow[y][z] <= R && seen_owner[z] < 0)
                    return fail({"missing-target", x, -1, -1, z, Rat(0), Rat(0)});
        }
    }

    if (res.centers_checked == 0)
        return fail({"no-admissible-center", -1, -1, -1, -1, Rat(0), Rat(0)});
    return res;
}

/// Largest realized base distance R for which the ball-isometry check passes,
/// searched downward (the check is monotone in R); 0 when only the trivial
/// radius works.  Candidates never exceed the admissible truncation margin,
/// and a known shortest fiber word w prunes radii with 2R >= |w|, where two
/// half-words collide inside one ball.
inline Rat max_cover_radius(const MetricCoverMap& c) {
    auto candidates = c.base->realized_distances();
    std::int32_t max_safe = *std::max_element(c.safe_radius.begin(), c.safe_radius.end());
    std::optional<Rat> cap;
    if (c.kernel_girth) cap = Rat((*c.kernel_girth - 1) / 2);
    for (auto it = candidates.rbegin(); it != candidates.rend(); ++it) {
        if (*it > Rat(max_safe)) continue;
        if (cap && *it > *cap) continue;
        if (*it == Rat(0)) break;
        if (verify_cover_radius(c, *it).ok) return *it;
    }
    return Rat(0);
}

/// Recomputes the maximal radius and stores it as the certificate.
inline Rat certify_max_radius(MetricCoverMap& c) {
    Rat r = max_cover_radius(c);
    c.certified_radius = r;
    return r;
}

// ---------------------------------------------------------------------------
// Deck translativity: every nontrivial deck transformation moves every point
// at least R.
// ---------------------------------------------------------------------------

struct TranslativeCheck {
    bool ok = true;
    std::int32_t g = -1, x = -1;
    Rat moved{0};
};

inline TranslativeCheck check_translative(const MetricSpace& total, const SpaceAction& deck,
                                          const Rat& R) {
    TranslativeCheck res;
    for (int x = 0; x < total.size(); ++x) {
        auto row = total.dist_row(x);
        for (size_t g = 1; g < deck.table.size(); ++g)
            if (row[deck.table[g][x]] < R)
                return {false, static_cast<std::int32_t>(g), x, row[deck.table[g][x]]};
    }
    return res;
}

inline TranslativeCheck check_translative(const MetricCoverMap& c, const Rat& R) {
    if (!c.deck) return {};  // trivial deck: vacuously translative
    return check_translative(*c.total, *c.deck, R);
}

// ---------------------------------------------------------------------------
// Builders.
// ---------------------------------------------------------------------------

inline MetricCoverMap identity_cover(MetricSpace X, std::string label = "identity") {
    require(X.connected(), "identity cover needs a connected space");
    auto ptr = std::make_shared<const MetricSpace>(std::move(X));
    MetricCoverMap c;
    c.total = ptr;
    c.base = ptr;
    c.p.resize(ptr->size());
    for (int i = 0; i < ptr->size(); ++i) c.p[i] = i;
    c.safe_radius.assign(ptr->size(), kUnboundedRadius);
    c.label = std::move(label);
    return make_cover_map(std::move(c));
}

/// Cycle-to-cycle reduction C_total -> C_base with the rotation deck group.
inline MetricCoverMap cyclic_cover(int total_n, int base_n) {
    require(total_n >= 3 && base_n >= 3, "cycles need at least 3 points");
    require(total_n % base_n == 0, "total cycle length must be a multiple of the base");
    const int k = total_n / base_n;
    MetricCoverMap c;
    c.total = std::make_shared<const MetricSpace>(cayley_graph(cyclic_group(total_n), false));
    c.base = std::make_shared<const MetricSpace>(cayley_graph(cyclic_group(base_n), false));
    c.p.resize(total_n);
    for (int x = 0; x < total_n; ++x) c.p[x] = x % base_n;
    c.safe_radius.assign(total_n, kUnboundedRadius);
    if (k >= 2) {
        SpaceAction deck;
        deck.group = cyclic_group(k);
        deck.table.resize(k, std::vector<std::int32_t>(total_n));
        for (int j = 0; j < k; ++j)
            for (int x = 0; x < total_n; ++x) deck.table[j][x] = (x + j * base_n) % total_n;
        c.deck = std::move(deck);
        c.kernel_girth = base_n;  // shortest nontrivial fiber translation
    }
    c.label = "C" + std::to_string(total_n) + "->C" + std::to_string(base_n);
    return make_cover_map(std::move(c));
}

/// Reduction of the integer line (truncated to [-T, T]) onto the n-cycle.
/// T < 0 picks a margin wide enough for every admissible radius.
inline MetricCoverMap truncated_line_cover(std::int64_t n, int T = -1) {
    require(n >= 3, "line reduction needs modulus >= 3");
    const int diam = static_cast<int>(n / 2);
    if (T < 0) T = 2 * static_cast<int>((n - 1) / 2) + diam + 1;
    require(2 * static_cast<std::int64_t>(T) + 1 >= n, "truncation too small to surject");
    auto Z = lattice_group(1);
    auto ball = group_ball(Z, T);
    MetricCoverMap c;
    c.total = std::make_shared<const MetricSpace>(std::move(ball.space));
    c.base = std::make_shared<const MetricSpace>(cayley_graph(cyclic_group(n), false));
    const int nt = c.total->size();
    c.p.resize(nt);
    c.p[0] = 0;
    for (int i = 1; i < nt; ++i) {
        const auto& step = std::get<LatticeElt>(Z.symmetric_generators()[ball.letter[i]]);
        c.p[i] = static_cast<std::int32_t>(
            ((c.p[ball.parent[i]] + step.v[0]) % n + n) % n);
    }
    c.safe_radius.resize(nt);
    for (int i = 0; i < nt; ++i) c.safe_radius[i] = T - ball.depth[i];
    c.kernel_girth = n;
    c.label = "Z->Z/" + std::to_string(n) + "[T=" + std::to_string(T) + "]";
    return make_cover_map(std::move(c));
}

// ---------------------------------------------------------------------------
// Quotient-tower covers.
// ---------------------------------------------------------------------------

namespace detail {

/// Quotient indices of the images of the base's symmetric generators.
inline std::vector<std::int32_t> stage_letter_images(const QuotientTower& tw, int stage,
                                                     const Group& Q) {
    const auto& syms = tw.base().symmetric_generators();
    std::vector<std::int32_t> out;
    out.reserve(syms.size());
    for (const auto& s : syms) out.push_back(Q.index_of(tw.map_to_stage(s, stage)));
    return out;
}

}  // namespace detail

/// Length of the shortest nonempty reduced word in the base letters whose
/// image is the identity.  Valid when the letters generate the base freely
/// (free words, the integer line, and the standard integer-matrix pair), so
/// a reduced word never collapses in the base itself.
inline std::optional<std::int64_t> shortest_fiber_word(const Group& base, const Group& Q,
                                                       const std::vector<std::int32_t>& letters,
                                                       int cap,
                                                       std::int64_t frontier_budget = 30'000'000) {
    auto kind = base.kind();
    require(kind == GroupKind::FreeWord || kind == GroupKind::Lattice ||
                kind == GroupKind::IntMatrix,
            "fiber-word search needs freely generating letters");
    const int ngens = static_cast<int>(base.generators().size());
    require(static_cast<int>(base.symmetric_generators().size()) == 2 * ngens,
            "fiber-word search needs involution-free generators");
    require(static_cast<int>(letters.size()) == 2 * ngens, "one image per letter required");
    std::vector<std::vector<std::int32_t>> rightmul(letters.size());
    for (size_t l = 0; l < letters.size(); ++l) {
        rightmul[l].resize(Q.order());
        for (std::int32_t x = 0; x < Q.order(); ++x) rightmul[l][x] = Q.mul_idx(x, letters[l]);
    }
    auto inv = [&](std::int8_t l) {
        return static_cast<std::int8_t>(l < ngens ? l + ngens : l - ngens);
    };
    std::vector<std::pair<std::int32_t, std::int8_t>> frontier;  // (image index, last letter)
    for (std::int8_t l = 0; l < static_cast<std::int8_t>(letters.size()); ++l) {
        std::int32_t q = rightmul[l][0];
        if (q == 0) return 1;
        frontier.push_back({q, l});
    }
    for (int depth = 2; depth <= cap; ++depth) {
        std::vector<std::pair<std::int32_t, std::int8_t>> next;
        next.reserve(frontier.size() * (letters.size() - 1));
        for (auto [q, last] : frontier)
            for (std::int8_t l = 0; l < static_cast<std::int8_t>(letters.size()); ++l) {
                if (l == inv(last)) continue;
                std::int32_t nq = rightmul[l][q];
                if (nq == 0) return depth;
                next.push_back({nq, l});
            }
        require(static_cast<std::int64_t>(next.size()) <= frontier_budget,
                "fiber-word frontier exceeds budget");
        frontier = std::move(next);
    }
    return std::nullopt;
}

/// One stage of a quotient tower as a truncated cover.  The truncation margin
/// supports verification at `support_radius`: geodesics of the integer line
/// can detour across the segment, so it gets the wide margin 2R + diam + 1;
/// free-letter bases have unique geodesics inside the ball, so radius + diam
/// + 1 suffices and keeps the node count tractable.
inline MetricCoverMap tower_stage_cover(const QuotientTower& tw, int stage, int support_radius,
                                        std::int64_t budget = limits::kBallNodeBudget,
                                        std::optional<std::int64_t> fiber_girth = std::nullopt) {
    auto Q = tw.enumerate_quotient(stage);
    MetricSpace base = cayley_graph(Q, false);
    const int diam = static_cast<int>(base.diameter().num());
    const bool line = tw.base().kind() == GroupKind::Lattice;
    const int T = line ? 2 * support_radius + diam + 1 : diam + support_radius + 1;
    auto ball = group_ball(tw.base(), T, budget);
    auto letters = detail::stage_letter_images(tw, stage, Q);
    std::vector<std::vector<std::int32_t>> rightmul(letters.size());
    for (size_t l = 0; l < letters.size(); ++l) {
        rightmul[l].resize(Q.order());
        for (std::int32_t x = 0; x < Q.order(); ++x) rightmul[l][x] = Q.mul_idx(x, letters[l]);
    }
    MetricCoverMap c;
    const int nt = ball.space.size();
    c.p.resize(nt);
    c.p[0] = 0;
    for (int i = 1; i < nt; ++i) c.p[i] = rightmul[ball.letter[i]][c.p[ball.parent[i]]];
    c.safe_radius.resize(nt);
    for (int i = 0; i < nt; ++i) c.safe_radius[i] = T - ball.depth[i];
    c.total = std::make_shared<const MetricSpace>(std::move(ball.space));
    c.base = std::make_shared<const MetricSpace>(std::move(base));
    c.kernel_girth = fiber_girth;
    c.degenerate = tw.stage_degenerate(stage) || Q.order() == 1;
    c.label = tw.stage(stage).label;
    return make_cover_map(std::move(c));
}

// ---------------------------------------------------------------------------
// Faithfulness profiles.
// ---------------------------------------------------------------------------

struct ProfileEntry {
    std::string label;
    std::int64_t base_order = 0;
    Rat max_radius{0};
    std::optional<std::int64_t> kernel_girth;
    std::optional<std::int64_t> kernel_bound;  // largest R with 2R < shortest fiber word
    bool degenerate = false;
};

struct ProfileReport {
    std::vector<ProfileEntry> entries;
    int tail_start = 0;           // earliest index from which radii never decrease
    bool nondecreasing_tail = false;  // tail starts at index 0 or 1

    std::vector<Rat> radii() const {
        std::vector<Rat> out;
        for (const auto& e : entries) out.push_back(e.max_radius);
        return out;
    }
};

namespace detail {

inline void finish_profile(ProfileReport& rep) {
    int n = static_cast<int>(rep.entries.size());
    int tail = n;
    for (int i = n - 1; i >= 1; --i) {
        if (rep.entries[i - 1].max_radius <= rep.entries[i].max_radius)
            tail = i - 1;
        else
            break;
    }
    if (n <= 1) tail = 0;
    rep.tail_start = std::min(tail, n == 0 ? 0 : n - 1);
    rep.nondecreasing_tail = rep.tail_start <= 1;
}

}  // namespace detail

/// Maximal radius per cover, with fiber-word diagnostics where known.
inline ProfileReport asymptotic_faithfulness_profile(const std::vector<MetricCoverMap>& seq) {
    ProfileReport rep;
    for (const auto& c : seq) {
        ProfileEntry e;
        e.label = c.label;
        e.base_order = c.base->size();
        e.max_radius = max_cover_radius(c);
        e.kernel_girth = c.kernel_girth;
        if (c.kernel_girth) e.kernel_bound = (*c.kernel_girth - 1) / 2;
        e.degenerate = c.degenerate;
        rep.entries.push_back(std::move(e));
    }
    detail::finish_profile(rep);
    return rep;
}

/// Per-stage profile of a quotient tower.  Truncations adapt to the candidate
/// radius: candidates grow from 1 until the ball-isometry check fails, which
/// the downward-monotone verifier justifies, and never exceed the fiber-word
/// bound, past which two half-words collide inside a single ball.
inline ProfileReport tower_faithfulness_profile(const QuotientTower& tw,
                                                std::int64_t budget = limits::kBallNodeBudget) {
    ProfileReport rep;
    for (int s = 0; s < tw.stage_count(); ++s) {
        auto Q = tw.enumerate_quotient(s);
        ProfileEntry e;
        e.label = tw.stage(s).label;
        e.base_order = Q.order();
        e.degenerate = tw.stage_degenerate(s) || Q.order() == 1;
        Rat radius(0);
        if (Q.order() > 1) {
            MetricSpace base = cayley_graph(Q, false);
            const int diam = static_cast<int>(base.diameter().num());
            auto letters = detail::stage_letter_images(tw, s, Q);
            auto girth = shortest_fiber_word(tw.base(), Q, letters, 2 * diam + 2);
            require(girth.has_value(), "no fiber word within twice the diameter");
            e.kernel_girth = *girth;
            e.kernel_bound = (*girth - 1) / 2;
            const int top = static_cast<int>(std::min<std::int64_t>(*e.kernel_bound, diam));
            for (int r = 1; r <= top; ++r) {
                auto cover = tower_stage_cover(tw, s, r, budget, e.kernel_girth);
                if (!verify_cover_radius(cover, Rat(r)).ok) break;
                radius = Rat(r);
            }
        } else {
            e.kernel_girth = 1;
            e.kernel_bound = 0;
        }
        e.max_radius = radius;
        rep.entries.push_back(std::move(e));
    }
    detail::finish_profile(rep);
    return rep;
}

}  // namespace coarsebox

#endif
