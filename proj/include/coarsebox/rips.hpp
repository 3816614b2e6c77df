#ifndef COARSEBOX_RIPS_HPP
#define COARSEBOX_RIPS_HPP

#include <algorithm>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "coarsebox/common.hpp"
#include "coarsebox/cover.hpp"
#include "coarsebox/metric.hpp"
#include "coarsebox/rational.hpp"

namespace coarsebox {

// ---------------------------------------------------------------------------
// Rips complex at scale d: a finite subset is a simplex iff its diameter is
// at most d.  Stored by dimension as lexicographically sorted vertex lists,
// capped in dimension and total count.  The 1-skeleton carries the unit
// shortest-path metric.
// ---------------------------------------------------------------------------
struct RipsComplex {
    MetricSpacePtr host;
    Rat scale{0};
    int dimension_cap = limits::kRipsDimensionCap;
    std::vector<std::vector<std::vector<std::int32_t>>> simplices;  // [dim][i]
    MetricSpace skeleton;

    std::int64_t count(int dim) const {
        if (dim < 0 || dim >= static_cast<int>(simplices.size())) return 0;
        return static_cast<std::int64_t>(simplices[dim].size());
    }

    bool has_simplex(const std::vector<std::int32_t>& sorted_vertices) const {
        int dim = static_cast<int>(sorted_vertices.size()) - 1;
        if (dim < 0 || dim >= static_cast<int>(simplices.size())) return false;
        const auto& level = simplices[dim];
        auto it = std::lower_bound(level.begin(), level.end(), sorted_vertices);
        return it != level.end() && *it == sorted_vertices;
    }
};

inline RipsComplex build_rips(MetricSpacePtr host, const Rat& scale,
                              int dimension_cap = limits::kRipsDimensionCap,
                              std::int64_t simplex_budget = limits::kSimplexCap) {
    require(host != nullptr, "rips complex needs a host space");
    require(dimension_cap >= 1, "dimension cap must allow at least edges");
    require(scale >= Rat(0), "scale must be nonnegative");
    const int n = host->size();
    RipsComplex K;
    K.host = host;
    K.scale = scale;
    K.dimension_cap = dimension_cap;
    K.simplices.resize(dimension_cap + 1);

    std::int64_t total = 0;
    auto push = [&](int dim, std::vector<std::int32_t> s) {
        require(++total <= simplex_budget, "simplex budget exceeded");
        K.simplices[dim].push_back(std::move(s));
    };
    for (int v = 0; v < n; ++v) push(0, {v});

    // adjacency at scale d
    std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u) {
        auto row = host->dist_row(u);
        for (int v = u + 1; v < n; ++v)
            if (row[v] <= scale) {
                adj[u][v] = adj[v][u] = 1;
                edges.push_back({u, v});
                push(1, {u, v});
            }
    }
    K.skeleton = MetricSpace::from_edges(n, edges);

    // clique growth: extend each simplex by a larger vertex adjacent to all
    for (int dim = 2; dim <= dimension_cap; ++dim) {
        for (const auto& s : K.simplices[dim - 1]) {
            for (int v = s.back() + 1; v < n; ++v) {
                bool ok = true;
                for (auto u : s)
                    if (!adj[u][v]) {
                        ok = false;
                        break;
                    }
                if (ok) {
                    auto bigger = s;
                    bigger.push_back(v);
                    push(dim, std::move(bigger));
                }
            }
        }
        if (K.simplices[dim].empty()) break;
    }
    return K;
}

// ---------------------------------------------------------------------------
// Cover transfer to skeletons: a certified ball-isometry cover at radius
// R >= 3d induces a cover of the scale-d skeletons with predicted radius
// floor(R/d) - 1.  Every base simplex must lift through a ball isometry.
// ---------------------------------------------------------------------------
struct RipsCoverResult {
    RipsComplex total_complex;
    RipsComplex base_complex;
    MetricCoverMap skeleton_cover;
    Rat predicted_radius{0};
    bool lifts_ok = true;
    std::vector<std::int32_t> unliftable_simplex;  // first failure, if any
    CoverCheck radius_check;
};

inline RipsCoverResult induced_cover_on_skeleton(
    const MetricCoverMap& c, const Rat& scale,
    int dimension_cap = limits::kRipsDimensionCap,
    std::int64_t simplex_budget = limits::kSimplexCap) {
    require(scale >= Rat(1), "skeleton transfer needs scale >= 1");
    require(c.certified_radius >= Rat(3) * scale,
            "skeleton transfer needs a certificate at radius >= 3 * scale");
    require(c.total->is_graph_metric() && c.base->graph() != nullptr,
            "skeleton transfer is restricted to graph metrics");

    RipsCoverResult out;
    out.total_complex = build_rips(c.total, scale, dimension_cap, simplex_budget);
    out.base_complex = build_rips(c.base, scale, dimension_cap, simplex_budget);
    out.predicted_radius = Rat((c.certified_radius / scale).floor() - 1);

    // Simplex-wise lifting: pull each base simplex back through the ball
    // isometry at an admissible fiber point of its first vertex.
    const int nt = c.total->size();
    const int d_int = static_cast<int>(scale.floor());
    std::vector<std::vector<std::int32_t>> fiber(c.base->size());
    for (int x = 0; x < nt; ++x) fiber[c.p[x]].push_back(x);
    for (int dim = 1; dim <= dimension_cap && out.lifts_ok; ++dim) {
        for (const auto& s : out.base_complex.simplices[dim]) {
            std::int32_t x = -1;
            for (auto cand : fiber[s.front()])
                if (Rat(c.safe_radius[cand]) >= scale) {
                    x = cand;
                    break;
                }
            if (x < 0) {
                out.lifts_ok = false;
                out.unliftable_simplex = s;
                break;
            }
            std::vector<std::int32_t> lift;
            auto ball = c.total->bfs_bounded(x, d_int);
            for (auto z : s) {
                std::int32_t found = -1;
                for (auto [u, du] : ball) {
                    (void)du;
                    if (c.p[u] == z) {
                        found = u;
                        break;
                    }
                }
                if (found < 0) break;
                lift.push_back(found);
            }
            std::sort(lift.begin(), lift.end());
            if (static_cast<int>(lift.size()) != dim + 1 ||
                !out.total_complex.has_simplex(lift)) {
                out.lifts_ok = false;
                out.unliftable_simplex = s;
                break;
            }
        }
    }

    // Skeleton-level cover: same vertex map; a point is admissible for
    // skeleton radius r when its host ball of radius r*scale is inside the
    // truncation (host truncations here are balls in lines or trees, whose
    // geodesics stay inside, so truncated skeleton distances are exact).
    MetricCoverMap sk;
    sk.total = std::make_shared<const MetricSpace>(out.total_complex.skeleton);
    sk.base = std::make_shared<const MetricSpace>(out.base_complex.skeleton);
    sk.p = c.p;
    sk.safe_radius.resize(nt);
    for (int x = 0; x < nt; ++x)
        sk.safe_radius[x] =
            c.safe_radius[x] >= kUnboundedRadius
                ? kUnboundedRadius
                : static_cast<std::int32_t>((Rat(c.safe_radius[x]) / scale).floor());
    sk.label = c.label + " skeleton@" + scale.str();
    out.skeleton_cover = make_cover_map(std::move(sk));

    out.radius_check = verify_cover_radius(out.skeleton_cover, out.predicted_radius);
    if (out.radius_check.ok) out.skeleton_cover.certified_radius = out.predicted_radius;
    return out;
}

}  // namespace coarsebox

#endif
