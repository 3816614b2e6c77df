// Test-only brute-force oracles, kept deliberately naive and separate from
// the library algorithms they cross-check.
#ifndef COARSEBOX_TESTS_ORACLES_HPP
#define COARSEBOX_TESTS_ORACLES_HPP

#include <set>
#include <vector>

#include "coarsebox/cover.hpp"

namespace coarsebox_tests {

/// Exhaustive ball-isometry check: full distance tables, set comparisons,
/// no early-out tricks.
inline bool oracle_cover_ok(const coarsebox::MetricCoverMap& c, int R) {
    const int nt = c.total->size(), nb = c.base->size();
    coarsebox::require(nt <= 3000, "oracle limited to small covers");
    std::vector<std::vector<std::int32_t>> tr(nt), br(nb);
    for (int i = 0; i < nt; ++i) tr[i] = c.total->bfs_distances(i);
    for (int i = 0; i < nb; ++i) br[i] = c.base->bfs_distances(i);

    bool any_center = false;
    for (int x = 0; x < nt; ++x) {
        if (c.safe_radius[x] < R) continue;
        any_center = true;
        std::vector<int> ball;
        for (int u = 0; u < nt; ++u)
            if (tr[x][u] <= R) ball.push_back(u);
        std::set<int> images;
        for (int u : ball)
            if (!images.insert(c.p[u]).second) return false;  // collision
        std::set<int> target;
        for (int z = 0; z < nb; ++z)
            if (br[c.p[x]][z] <= R) target.insert(z);
        if (images != target) return false;  // not onto the base ball
        for (size_t i = 0; i < ball.size(); ++i)
            for (size_t j = i + 1; j < ball.size(); ++j)
                if (tr[ball[i]][ball[j]] != br[c.p[ball[i]]][c.p[ball[j]]]) return false;
    }
    return any_center;
}

/// Largest integer radius (down from the base diameter) the oracle accepts.
inline int oracle_max_radius(const coarsebox::MetricCoverMap& c) {
    int max_safe = 0;
    for (auto s : c.safe_radius) max_safe = std::max(max_safe, static_cast<int>(s));
    const int diam = static_cast<int>(c.base->diameter().floor());
    for (int r = std::min(max_safe, diam); r >= 1; --r)
        if (oracle_cover_ok(c, r)) return r;
    return 0;
}

}  // namespace coarsebox_tests

#endif
