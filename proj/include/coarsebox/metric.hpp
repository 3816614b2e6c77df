#ifndef COARSEBOX_METRIC_HPP
#define COARSEBOX_METRIC_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "coarsebox/common.hpp"
#include "coarsebox/group.hpp"
#include "coarsebox/rational.hpp"

namespace coarsebox {

class MetricSpace;

/// Isometric action of a finite group: table[g][x] is the image of point x
/// under the g-th group element.  Row 0 (identity) is the identity map.
struct SpaceAction {
    Group group;
    std::vector<std::vector<std::int32_t>> table;
};

// ---------------------------------------------------------------------------
// Finite metric space.  Four storage forms:
//   Graph - implicit BFS metric on an undirected simple graph;
//   Dense - explicit rational distance matrix;
//   Box   - disjoint union with index-weighted cross distances;
//   Tree  - truncated ball of a free group (words packed into 64 bits,
//           O(1) exact distances), used for large truncated totals.
// ---------------------------------------------------------------------------
class MetricSpace {
  public:
    struct GraphRep {
        std::vector<std::vector<std::int32_t>> adj;
    };
    struct DenseRep {
        int n = 0;
        std::vector<Rat> d;  // row-major n x n
    };
    struct BoxRep {
        std::vector<MetricSpace> comps;
        std::vector<std::int32_t> offset;   // component -> first global index
        std::vector<std::int32_t> comp_of;  // global index -> component
        std::vector<Rat> diam;              // component diameters
    };
    struct TreeRep {
        int rank = 0;    // free rank (>= 2)
        int radius = 0;  // truncation radius
        std::vector<std::uint64_t> packed;
        std::vector<std::int32_t> parent;       // -1 at the origin
        std::vector<std::int8_t> letter;        // symmetric-generator index, -1 at origin
        std::vector<std::int32_t> depth;
        std::vector<std::int32_t> child_begin;  // children are BFS-contiguous
        std::vector<std::int32_t> child_end;
    };

    MetricSpace() = default;

    // -- constructors -------------------------------------------------------

    static MetricSpace from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
        require(n >= 1, "space needs at least one point");
        GraphRep g;
        g.adj.resize(n);
        std::set<std::pair<int, int>> seen;
        for (auto [u, v] : edges) {
            require(u >= 0 && u < n && v >= 0 && v < n, "edge endpoint out of range");
            require(u != v, "self-loops are not allowed");
            auto key = std::minmax(u, v);
            if (!seen.insert({key.first, key.second}).second) continue;
            g.adj[u].push_back(v);
            g.adj[v].push_back(u);
        }
        for (auto& nb : g.adj) std::sort(nb.begin(), nb.end());
        MetricSpace s;
        s.rep_ = std::move(g);
        return s;
    }

    static MetricSpace from_matrix(int n, std::vector<Rat> d,
                                   int exhaustive = limits::kExhaustiveMetricThreshold) {
        require(n >= 1 && static_cast<int>(d.size()) == n * n, "bad distance matrix shape");
        for (int i = 0; i < n; ++i) {
            require(d[i * n + i] == Rat(0), "nonzero diagonal in distance matrix");
            for (int j = 0; j < n; ++j) {
                require(d[i * n + j] == d[j * n + i], "asymmetric distance matrix");
                require(d[i * n + j] >= Rat(0), "negative distance");
                require(i == j || d[i * n + j] > Rat(0), "zero distance between distinct points");
            }
        }
        MetricSpace s;
        s.rep_ = DenseRep{n, std::move(d)};
        auto bad = s.triangle_violation(exhaustive);
        require(!bad.has_value(), "triangle inequality violated");
        return s;
    }

    static MetricSpace single_point() { return from_edges(1, {}); }

    static MetricSpace path_graph(int n) {
        std::vector<std::pair<int, int>> e;
        for (int i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
        return from_edges(n, e);
    }

    static MetricSpace cycle_graph(int n) {
        require(n >= 3, "cycle needs at least 3 points");
        std::vector<std::pair<int, int>> e;
        for (int i = 0; i < n; ++i) e.push_back({i, (i + 1) % n});
        return from_edges(n, e);
    }

    static MetricSpace complete_graph(int n) {
        std::vector<std::pair<int, int>> e;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) e.push_back({i, j});
        return from_edges(n, e);
    }

    // -- basic queries -------------------------------------------------------

    int size() const {
        if (auto* g = std::get_if<GraphRep>(&rep_)) return static_cast<int>(g->adj.size());
        if (auto* d = std::get_if<DenseRep>(&rep_)) return d->n;
        if (auto* b = std::get_if<BoxRep>(&rep_)) return static_cast<int>(b->comp_of.size());
        return static_cast<int>(std::get<TreeRep>(rep_).packed.size());
    }

    bool is_graph_metric() const {
        return std::holds_alternative<GraphRep>(rep_) || std::holds_alternative<TreeRep>(rep_);
    }
    const GraphRep* graph() const { return std::get_if<GraphRep>(&rep_); }
    const TreeRep* tree() const { return std::get_if<TreeRep>(&rep_); }
    const BoxRep* box() const { return std::get_if<BoxRep>(&rep_); }
    const DenseRep* dense() const { return std::get_if<DenseRep>(&rep_); }

    /// Exact distance.  Throws on unreachable pairs of a disconnected graph.
    Rat dist(int a, int b) const {
        if (auto* t = std::get_if<TreeRep>(&rep_)) return Rat(tree_dist(*t, a, b));
        if (auto* d = std::get_if<DenseRep>(&rep_)) return d->d[static_cast<size_t>(a) * d->n + b];
        if (auto* b2 = std::get_if<BoxRep>(&rep_)) {
            int ca = b2->comp_of[a], cb = b2->comp_of[b];
            if (ca == cb) return b2->comps[ca].dist(a - b2->offset[ca], b - b2->offset[ca]);
            return b2->diam[ca] + b2->diam[cb] + Rat(ca) + Rat(cb) + Rat(1);
        }
        int v = int_dist(a, b);
        require(v >= 0, "distance between disconnected points");
        return Rat(v);
    }

    /// Integer distance for graph/tree metrics; -1 when unreachable.
    std::int32_t int_dist(int a, int b) const {
        if (auto* t = std::get_if<TreeRep>(&rep_)) return tree_dist(*t, a, b);
        const auto* g = std::get_if<GraphRep>(&rep_);
        require(g != nullptr, "int_dist needs a graph or tree metric");
        if (a == b) return 0;
        auto row = bfs_distances(a);
        return row[b];
    }

    /// Full BFS row from src (graph metrics); -1 marks unreachable points.
    std::vector<std::int32_t> bfs_distances(int src) const {
        if (auto* t = std::get_if<TreeRep>(&rep_)) {
            std::vector<std::int32_t> row(size());
            for (int i = 0; i < size(); ++i) row[i] = tree_dist(*t, src, i);
            return row;
        }
        const auto* g = std::get_if<GraphRep>(&rep_);
        require(g != nullptr, "bfs_distances needs a graph or tree metric");
        std::vector<std::int32_t> dist(g->adj.size(), -1);
        std::queue<std::int32_t> q;
        dist[src] = 0;
        q.push(src);
        while (!q.empty()) {
            auto u = q.front();
            q.pop();
            for (auto v : g->adj[u])
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    q.push(v);
                }
        }
        return dist;
    }

    /// Visit every point at distance <= cap from src; returns (point, dist)
    /// in BFS order.  Works for graph and tree representations.
    std::vector<std::pair<std::int32_t, std::int32_t>> bfs_bounded(int src, int cap) const {
        std::vector<std::pair<std::int32_t, std::int32_t>> out;
        if (cap < 0) return out;
        out.push_back({src, 0});
        if (auto* t = std::get_if<TreeRep>(&rep_)) {
            // trees never revisit: track only the vertex we arrived from
            std::vector<std::pair<std::int32_t, std::int32_t>> frontier{{src, -1}};
            for (int d = 0; d < cap && !frontier.empty(); ++d) {
                std::vector<std::pair<std::int32_t, std::int32_t>> next;
                for (auto [u, from] : frontier) {
                    auto visit = [&](std::int32_t v) {
                        if (v == from) return;
                        next.push_back({v, u});
                        out.push_back({v, d + 1});
                    };
                    if (t->parent[u] >= 0) visit(t->parent[u]);
                    for (std::int32_t c = t->child_begin[u]; c < t->child_end[u]; ++c) visit(c);
                }
                frontier = std::move(next);
            }
            return out;
        }
        const auto* g = std::get_if<GraphRep>(&rep_);
        require(g != nullptr, "bfs_bounded needs a graph or tree metric");
        std::set<std::int32_t> seen{src};  // adjacency graphs here stay small
        std::vector<std::int32_t> frontier{src};
        for (int d = 0; d < cap && !frontier.empty(); ++d) {
            std::vector<std::int32_t> next;
            for (auto u : frontier)
                for (auto v : g->adj[u])
                    if (seen.insert(v).second) {
                        next.push_back(v);
                        out.push_back({v, d + 1});
                    }
            frontier = std::move(next);
        }
        return out;
    }

    /// Distances from one point to every point, computed with the cheapest
    /// method the representation offers.
    std::vector<Rat> dist_row(int src) const {
        std::vector<Rat> row;
        row.reserve(size());
        if (auto* t = std::get_if<TreeRep>(&rep_)) {
            for (int i = 0; i < size(); ++i) row.push_back(Rat(tree_dist(*t, src, i)));
            return row;
        }
        if (std::holds_alternative<GraphRep>(rep_)) {
            for (auto v : bfs_distances(src)) {
                require(v >= 0, "dist_row on disconnected graph");
                row.push_back(Rat(v));
            }
            return row;
        }
        if (auto* d = std::get_if<DenseRep>(&rep_)) {
            for (int i = 0; i < d->n; ++i) row.push_back(d->d[static_cast<size_t>(src) * d->n + i]);
            return row;
        }
        const auto& b = std::get<BoxRep>(rep_);
        int cs = b.comp_of[src];
        auto local = b.comps[cs].dist_row(src - b.offset[cs]);
        for (int i = 0; i < size(); ++i) {
            int ci = b.comp_of[i];
            if (ci == cs)
                row.push_back(local[i - b.offset[cs]]);
            else
                row.push_back(b.diam[cs] + b.diam[ci] + Rat(cs) + Rat(ci) + Rat(1));
        }
        return row;
    }

    /// Closed ball: every point at distance <= radius from the center.
    std::vector<std::int32_t> ball(int center, const Rat& radius) const {
        std::vector<std::int32_t> out;
        if (radius < Rat(0)) return out;
        if (is_graph_metric()) {
            for (auto [p, d] : bfs_bounded(center, static_cast<int>(radius.floor()))) {
                (void)d;
                out.push_back(p);
            }
            std::sort(out.begin(), out.end());
            return out;
        }
        auto row = dist_row(center);
        for (int i = 0; i < size(); ++i)
            if (row[i] <= radius) out.push_back(i);
        return out;
    }

    bool connected() const {
        if (std::holds_alternative<TreeRep>(rep_) || std::holds_alternative<DenseRep>(rep_))
            return true;
        if (auto* b = std::get_if<BoxRep>(&rep_)) return b->comps.size() <= 1;
        auto row = bfs_distances(0);
        return std::none_of(row.begin(), row.end(), [](std::int32_t v) { return v < 0; });
    }

    Rat diameter() const {
        if (auto* t = std::get_if<TreeRep>(&rep_)) return Rat(2 * t->radius);
        if (auto* d = std::get_if<DenseRep>(&rep_)) {
            Rat m(0);
            for (const auto& v : d->d) m = std::max(m, v);
            return m;
        }
        if (auto* b = std::get_if<BoxRep>(&rep_)) {
            Rat m(0);
            for (const auto& v : b->diam) m = std::max(m, v);
            int k = static_cast<int>(b->comps.size());
            for (int i = 0; i < k; ++i)
                for (int j = i + 1; j < k; ++j)
                    m = std::max(m, b->diam[i] + b->diam[j] + Rat(i + j + 1));
            return m;
        }
        require(connected(), "diameter of a disconnected space");
        std::int32_t m = 0;
        for (int v = 0; v < size(); ++v) {
            auto row = bfs_distances(v);
            m = std::max(m, *std::max_element(row.begin(), row.end()));
        }
        return Rat(m);
    }

    /// Distinct realized distances, ascending.  Guarded by size.
    std::vector<Rat> realized_distances() const {
        if (auto* t = std::get_if<TreeRep>(&rep_)) {
            std::vector<Rat> out;
            for (int v = 0; v <= 2 * t->radius; ++v) out.push_back(Rat(v));
            return out;
        }
        std::set<std::pair<std::int64_t, std::int64_t>> seen;
        std::vector<Rat> out;
        auto add = [&](const Rat& r) {
            if (seen.insert({r.num(), r.den()}).second) out.push_back(r);
        };
        if (auto* g = std::get_if<GraphRep>(&rep_)) {
            require(g->adj.size() <= 20000, "realized_distances: graph too large");
            for (int v = 0; v < size(); ++v)
                for (auto dv : bfs_distances(v)) {
                    require(dv >= 0, "realized_distances on disconnected graph");
                    add(Rat(dv));
                }
        } else {
            for (int a = 0; a < size(); ++a)
                for (int b = 0; b < size(); ++b) add(dist(a, b));
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    // -- box spaces ----------------------------------------------------------

    /// Disjoint union with cross-component distance
    ///   diam(X_m) + diam(X_n) + m + n + 1,
    /// which dominates both diameters and grows with the indices.
    static MetricSpace box_space(std::vector<MetricSpace> comps) {
        require(!comps.empty(), "box space needs at least one component");
        BoxRep b;
        for (auto& c : comps) {
            require(c.connected(), "box components must be connected");
            b.diam.push_back(c.diameter());
        }
        std::int32_t off = 0;
        for (size_t i = 0; i < comps.size(); ++i) {
            b.offset.push_back(off);
            for (int j = 0; j < comps[i].size(); ++j) b.comp_of.push_back(static_cast<int>(i));
            off += comps[i].size();
        }
        b.comps = std::move(comps);
        MetricSpace s;
        s.rep_ = std::move(b);
        return s;
    }

    int component_count() const {
        if (auto* b = std::get_if<BoxRep>(&rep_)) return static_cast<int>(b->comps.size());
        return 1;
    }
    int component_of(int x) const {
        if (auto* b = std::get_if<BoxRep>(&rep_)) return b->comp_of[x];
        return 0;
    }
    std::pair<int, int> component_range(int c) const {
        if (auto* b = std::get_if<BoxRep>(&rep_))
            return {b->offset[c], b->offset[c] + b->comps[c].size()};
        return {0, size()};
    }

    // -- group balls ---------------------------------------------------------

    /// Truncated ball B_T(1) of a free group of rank >= 2: an explicit tree
    /// with words packed two bits per letter (exact O(1) distances).
    static MetricSpace free_ball(int rank, int radius,
                                 std::int64_t budget = limits::kBallNodeBudget) {
        require(rank >= 2, "free_ball needs rank >= 2 (rank 1 is a path)");
        require(2 * rank <= 4, "free_ball packs letters into 2 bits (rank <= 2)");
        require(radius >= 0 && radius <= 31, "free_ball radius must fit packed words");
        TreeRep t;
        t.rank = rank;
        t.radius = radius;
        auto add = [&](std::uint64_t w, std::int32_t par, std::int8_t let, std::int32_t dep) {
            t.packed.push_back(w);
            t.parent.push_back(par);
            t.letter.push_back(let);
            t.depth.push_back(dep);
            t.child_begin.push_back(0);
            t.child_end.push_back(0);
            return static_cast<std::int32_t>(t.packed.size() - 1);
        };
        add(0, -1, -1, 0);
        int nletters = 2 * rank;
        for (std::int32_t u = 0; u < static_cast<std::int32_t>(t.packed.size()); ++u) {
            if (t.depth[u] >= radius) break;  // BFS order: once past, all past
            t.child_begin[u] = static_cast<std::int32_t>(t.packed.size());
            for (std::int8_t l = 0; l < nletters; ++l) {
                if (t.letter[u] >= 0 && l == inverse_letter(t.letter[u], rank)) continue;
                require(static_cast<std::int64_t>(t.packed.size()) < budget,
                        "free ball exceeds node budget");
                std::uint64_t w =
                    t.packed[u] | (static_cast<std::uint64_t>(l) << (2 * t.depth[u]));
                add(w, u, l, t.depth[u] + 1);
            }
            t.child_end[u] = static_cast<std::int32_t>(t.packed.size());
        }
        MetricSpace s;
        s.rep_ = std::move(t);
        return s;
    }

    static std::int8_t inverse_letter(std::int8_t l, int rank) {
        return static_cast<std::int8_t>(l < rank ? l + rank : l - rank);
    }

    // -- actions -------------------------------------------------------------

    /// Attach an isometric action; every row must preserve the metric.
    void attach_action(SpaceAction a) {
        require(a.group.is_finite(), "actions come from enumerated finite groups");
        require(static_cast<std::int64_t>(a.table.size()) == a.group.order(),
                "action table needs one row per group element");
        int n = size();
        for (const auto& row : a.table) {
            require(static_cast<int>(row.size()) == n, "action row size mismatch");
            std::vector<bool> hit(n, false);
            for (auto v : row) {
                require(v >= 0 && v < n && !hit[v], "action row is not a permutation");
                hit[v] = true;
            }
        }
        for (int x = 0; x < n; ++x) require(a.table[0][x] == x, "identity row must fix points");
        for (const auto& row : a.table) require(row_is_isometry(row), "action is not isometric");
        action_ = std::make_shared<SpaceAction>(std::move(a));
    }

    const SpaceAction* action() const { return action_ ? action_.get() : nullptr; }
    std::shared_ptr<const SpaceAction> shared_action() const { return action_; }

    // -- validation ----------------------------------------------------------

    /// First triangle-inequality violation, if any.  Exhaustive up to the
    /// threshold, deterministic strided sample above it.
    std::optional<std::array<int, 3>> triangle_violation(
        int exhaustive = limits::kExhaustiveMetricThreshold) const {
        int n = size();
        int stride = n <= exhaustive ? 1 : std::max(1, n / exhaustive);
        std::vector<int> pts;
        for (int i = 0; i < n; i += stride) pts.push_back(i);
        std::vector<std::vector<Rat>> rows(pts.size());
        for (size_t i = 0; i < pts.size(); ++i) rows[i] = dist_row(pts[i]);
        for (size_t a = 0; a < pts.size(); ++a)
            for (size_t b = 0; b < pts.size(); ++b)
                for (size_t c = 0; c < pts.size(); ++c)
                    if (rows[a][pts[c]] > rows[a][pts[b]] + rows[b][pts[c]])
                        return std::optional<std::array<int, 3>>({pts[a], pts[b], pts[c]});
        return std::nullopt;
    }

  private:
    static std::int32_t tree_dist(const TreeRep& t, int a, int b) {
        if (a == b) return 0;
        std::int32_t da = t.depth[a], db = t.depth[b];
        std::uint64_t x = t.packed[a] ^ t.packed[b];
        std::int32_t cp = x == 0 ? std::min(da, db)
                                 : std::min({static_cast<std::int32_t>(std::countr_zero(x) / 2),
                                             da, db});
        return da + db - 2 * cp;
    }

    bool row_is_isometry(const std::vector<std::int32_t>& row) const {
        if (auto* g = std::get_if<GraphRep>(&rep_)) {
            // graph automorphism == adjacency-preserving permutation
            for (int u = 0; u < size(); ++u) {
                std::vector<std::int32_t> mapped;
                mapped.reserve(g->adj[u].size());
                for (auto v : g->adj[u]) mapped.push_back(row[v]);
                std::sort(mapped.begin(), mapped.end());
                if (mapped != g->adj[row[u]]) return false;
            }
            return true;
        }
        for (int a = 0; a < size(); ++a)
            for (int b = a + 1; b < size(); ++b)
                if (dist(a, b) != dist(row[a], row[b])) return false;
        return true;
    }

    std::variant<GraphRep, DenseRep, BoxRep, TreeRep> rep_;
    std::shared_ptr<const SpaceAction> action_;
};

using MetricSpacePtr = std::shared_ptr<const MetricSpace>;

// ---------------------------------------------------------------------------
// Cayley graphs and truncated group balls.
// ---------------------------------------------------------------------------

/// Cayley graph on an enumerated finite group: x ~ x*s for each symmetric
/// generator.  Identity generators contribute nothing (degenerate quotients
/// yield edgeless graphs).  Optionally carries the left-translation action.
inline MetricSpace cayley_graph(const Group& g, bool with_action = true) {
    require(g.is_finite(), "cayley_graph needs an enumerated finite group");
    int n = static_cast<int>(g.order());
    std::vector<std::pair<int, int>> edges;
    for (std::int32_t x = 0; x < n; ++x)
        for (const auto& s : g.symmetric_generators()) {
            if (ge_is_identity(s)) continue;
            edges.push_back({x, g.index_of(ge_mul(g.element(x), s))});
        }
    MetricSpace space = MetricSpace::from_edges(n, edges);
    if (with_action) space.attach_action(SpaceAction{g, g.left_translation_table()});
    return space;
}

/// Truncated ball B_T(1) of a (possibly infinite) group in its word metric,
/// with the BFS bookkeeping needed to map vertices through quotient maps.
struct GroupBall {
    MetricSpace space;
    std::vector<std::int32_t> parent;  // -1 at origin
    std::vector<std::int8_t> letter;   // symmetric-generator index, -1 at origin
    std::vector<std::int32_t> depth;
    int radius = 0;
};

inline GroupBall group_ball(const Group& g, int radius,
                            std::int64_t budget = limits::kBallNodeBudget) {
    GroupBall out;
    out.radius = radius;
    if (g.kind() == GroupKind::FreeWord && g.generators().size() >= 2) {
        out.space = MetricSpace::free_ball(static_cast<int>(g.generators().size()), radius, budget);
        const auto* t = out.space.tree();
        out.parent = t->parent;
        out.letter = t->letter;
        out.depth = t->depth;
        return out;
    }
    // generic hashed BFS over group elements
    std::vector<GroupElement> elems{g.identity()};
    std::unordered_map<std::string, std::int32_t> seen{{ge_key(g.identity()), 0}};
    out.parent = {-1};
    out.letter = {-1};
    out.depth = {0};
    std::vector<std::pair<int, int>> edges;
    const auto& gens = g.symmetric_generators();
    bool pure_tree = true;  // no edge besides discovery and parent backtracking
    for (std::int32_t u = 0; u < static_cast<std::int32_t>(elems.size()); ++u) {
        bool expand = out.depth[u] < radius;  // boundary nodes still report edges
        for (size_t l = 0; l < gens.size(); ++l) {
            GroupElement next = ge_mul(elems[u], gens[l]);
            auto key = ge_key(next);
            auto it = seen.find(key);
            if (it != seen.end()) {
                if (it->second != u) {
                    if (it->second != out.parent[u]) pure_tree = false;
                    edges.push_back({u, it->second});
                }
                continue;
            }
            if (!expand) continue;
            require(static_cast<std::int64_t>(elems.size()) < budget,
                    "group ball exceeds node budget");
            std::int32_t idx = static_cast<std::int32_t>(elems.size());
            seen.emplace(std::move(key), idx);
            elems.push_back(std::move(next));
            out.parent.push_back(u);
            out.letter.push_back(static_cast<std::int8_t>(l));
            out.depth.push_back(out.depth[u] + 1);
            edges.push_back({u, idx});
        }
    }
    // A relation-free ball is the rank-2 free tree; store it packed so distance
    // queries use ancestor words instead of per-pair searches.  The swap is
    // gated on the rebuilt arrays matching the enumeration exactly.
    if (pure_tree && gens.size() == 4 && radius <= 31) {
        MetricSpace cand = MetricSpace::free_ball(2, radius, budget);
        const auto* t = cand.tree();
        if (t->parent == out.parent && t->letter == out.letter && t->depth == out.depth) {
            out.space = std::move(cand);
            return out;
        }
    }
    out.space = MetricSpace::from_edges(static_cast<int>(elems.size()), edges);
    return out;
}

// ---------------------------------------------------------------------------
// Separated nets.
// ---------------------------------------------------------------------------

struct Net {
    Rat delta;
    std::vector<std::int32_t> points;      // net points in insertion order
    std::vector<std::int32_t> projection;  // host point -> chosen net point
};

/// Greedy maximal delta-separated net in a fixed point order (ascending by
/// default).  The projection sends every point to the first selected net
/// point strictly within delta (net points map to themselves).
///
/// With `equivariant` set, selection runs over whole orbits of the attached
/// action; if the result fails maximality the request is infeasible.
inline Net max_separated_net(const MetricSpace& X, const Rat& delta,
                             std::vector<std::int32_t> order = {}, bool equivariant = false) {
    require(delta > Rat(0), "net separation must be positive");
    int n = X.size();
    if (order.empty()) {
        order.resize(n);
        for (int i = 0; i < n; ++i) order[i] = i;
    }
    require(static_cast<int>(order.size()) == n, "net order must list every point");

    Net net;
    net.delta = delta;
    std::vector<std::vector<Rat>> net_rows;  // distances from each net point
    auto row_of = [&](std::int32_t p) { return X.dist_row(p); };
    auto min_dist_to_net = [&](std::int32_t x) {
        std::optional<Rat> m;
        for (const auto& row : net_rows)
            if (!m || row[x] < *m) m = row[x];
        return m;
    };
    auto add_point = [&](std::int32_t p) {
        net.points.push_back(p);
        net_rows.push_back(row_of(p));
    };

    if (!equivariant) {
        for (auto x : order) {
            auto m = min_dist_to_net(x);
            if (!m || *m >= delta) add_point(x);
        }
    } else {
        const SpaceAction* act = X.action();
        require(act != nullptr, "equivariant net needs an attached action");
        std::vector<std::int32_t> orbit_of(n, -1);
        std::vector<std::vector<std::int32_t>> orbits;
        for (auto x : order) {
            if (orbit_of[x] != -1) continue;
            std::set<std::int32_t> orb;
            for (const auto& row : act->table) orb.insert(row[x]);
            std::int32_t id = static_cast<std::int32_t>(orbits.size());
            for (auto y : orb) orbit_of[y] = id;
            orbits.push_back({orb.begin(), orb.end()});
        }
        for (const auto& orb : orbits) {
            bool ok = true;
            for (size_t i = 0; i < orb.size() && ok; ++i) {
                auto m = min_dist_to_net(orb[i]);
                if (m && *m < delta) ok = false;
                for (size_t j = i + 1; j < orb.size() && ok; ++j)
                    if (X.dist(orb[i], orb[j]) < delta) ok = false;
            }
            if (ok)
                for (auto x : orb) add_point(x);
        }
    }

    net.projection.assign(n, -1);
    for (int x = 0; x < n; ++x)
        for (size_t k = 0; k < net.points.size(); ++k)
            if (net_rows[k][x] < delta) {
                net.projection[x] = net.points[k];
                break;
            }
    for (int x = 0; x < n; ++x)
        require(net.projection[x] >= 0,
                equivariant ? "equivariant net infeasible: maximality fails"
                            : "net projection incomplete");
    return net;
}

/// Net invariants: separation, maximality, projection displacement <= delta,
/// and (for net points) projection fixes the point.
struct NetCheck {
    bool separated = true;
    bool maximal = true;
    bool projection_close = true;
    bool fixes_net_points = true;
    bool ok() const { return separated && maximal && projection_close && fixes_net_points; }
};

inline NetCheck verify_net(const MetricSpace& X, const Net& net) {
    NetCheck c;
    std::vector<std::vector<Rat>> rows;
    std::unordered_map<std::int32_t, size_t> row_of;
    for (auto p : net.points) {
        row_of[p] = rows.size();
        rows.push_back(X.dist_row(p));
    }
    for (size_t i = 0; i < net.points.size(); ++i)
        for (size_t j = i + 1; j < net.points.size(); ++j)
            if (rows[i][net.points[j]] < net.delta) c.separated = false;
    for (int x = 0; x < X.size(); ++x) {
        bool covered = false;
        for (const auto& row : rows)
            if (row[x] < net.delta) covered = true;
        if (!covered) c.maximal = false;
        auto it = row_of.find(net.projection[x]);
        if (it == row_of.end() || rows[it->second][x] > net.delta) c.projection_close = false;
    }
    for (auto p : net.points)
        if (net.projection[p] != p) c.fixes_net_points = false;
    return c;
}

// ---------------------------------------------------------------------------
// Girth (exact): per-vertex BFS with parent-edge exclusion and early cutoff.
// ---------------------------------------------------------------------------

inline std::optional<std::int64_t> girth(const MetricSpace& X) {
    const auto* g = X.graph();
    require(g != nullptr, "girth needs an adjacency-list graph");
    int n = X.size();
    std::int64_t best = -1;
    std::vector<std::int32_t> dist(n), parent(n);
    for (int root = 0; root < n; ++root) {
        std::fill(dist.begin(), dist.end(), -1);
        std::fill(parent.begin(), parent.end(), -1);
        std::queue<std::int32_t> q;
        dist[root] = 0;
        q.push(root);
        while (!q.empty()) {
            auto u = q.front();
            q.pop();
            if (best > 0 && 2 * dist[u] >= best) break;
            for (auto v : g->adj[u]) {
                if (v == parent[u]) continue;
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    parent[v] = u;
                    q.push(v);
                } else {
                    std::int64_t cyc = dist[u] + dist[v] + 1;
                    if (best < 0 || cyc < best) best = cyc;
                }
            }
        }
    }
    if (best < 0) return std::nullopt;
    return best;
}

}  // namespace coarsebox

#endif
