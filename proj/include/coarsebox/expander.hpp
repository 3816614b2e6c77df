#ifndef COARSEBOX_EXPANDER_HPP
#define COARSEBOX_EXPANDER_HPP

// Expander diagnostics for the Margulis family: Cayley graphs of SL2 over a
// prime field on the two standard triangular generators.  Exact girth (BFS
// with parent-edge exclusion, cross-checked by a relator word search),
// exact diameter, the diameter-by-girth ratio, and a residual-certified
// second adjacency eigenvalue from deflated power iteration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coarsebox/common.hpp"
#include "coarsebox/cover.hpp"
#include "coarsebox/group.hpp"
#include "coarsebox/metric.hpp"

namespace coarsebox {

/// Asymptotic lower-estimate slope for girth against log(order) in the
/// family below.  Reported next to the fitted slope, never asserted.
inline constexpr double kGirthSlopeReference = 0.756;

namespace detail {

inline bool is_prime(std::int64_t p) {
    if (p < 2) return false;
    for (std::int64_t d = 2; d * d <= p; ++d)
        if (p % d == 0) return false;
    return true;
}

}  // namespace detail

/// SL2 over the field with p elements, generated by the two triangular
/// matrices with off-diagonal entry 2.  Odd primes only: at p = 2 both
/// generators collapse (2 = 0), and composite moduli leave the prime field.
inline Group margulis_group(std::int64_t p) {
    require(p != 2, "even characteristic degenerates the generators");
    require(detail::is_prime(p), "modulus must be prime");
    require(p <= limits::kExpanderPrimeCap, "prime exceeds the order cap");
    auto g = sl2_mod_group(p);
    require(g.symmetric_generators().size() == 4,
            "expected four distinct symmetrized generators");
    return g;
}

/// Cayley graph of margulis_group(p) on the symmetrized generating set.
/// 4-regular and connected for every admissible p.
inline MetricSpace margulis_graph(std::int64_t p) {
    return cayley_graph(margulis_group(p), false);
}

/// Independent girth oracle for the Cayley graphs above: breadth-first
/// enumeration of reduced words in the free pair of integer matrices until
/// one maps to the identity mod p.  In a Cayley graph on involution-free
/// generators, closed non-backtracking walks at the identity are exactly the
/// reduced identity words, and the shortest such walk is a shortest cycle.
inline std::optional<std::int64_t> margulis_girth_oracle(std::int64_t p, int cap = 14) {
    auto base = sl2z_group();
    auto Q = margulis_group(p);
    std::vector<std::int32_t> letters;
    for (const auto& s : base.symmetric_generators())
        letters.push_back(Q.index_of(reduce_mod(s, p)));
    return shortest_fiber_word(base, Q, letters, cap);
}

// ---------------------------------------------------------------------------
// Spectral estimates.  Power iteration on the adjacency operator shifted by
// the maximal degree (making it positive semidefinite), deflated against the
// top eigenvector; the residual |Av - lambda v| of a unit vector certifies
// that some adjacency eigenvalue lies within that distance of the estimate.
// ---------------------------------------------------------------------------
struct EigenEstimate {
    double value = 0;
    double residual = 0;  // certified distance from value to the spectrum
    bool converged = false;
    std::int64_t iterations = 0;
};

namespace detail {

inline void adjacency_apply(const MetricSpace::GraphRep& g, const std::vector<double>& v,
                            std::vector<double>& out) {
    for (std::size_t u = 0; u < g.adj.size(); ++u) {
        double acc = 0;
        for (auto w : g.adj[u]) acc += v[w];
        out[u] = acc;
    }
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

/// Deterministic full-spread start vector (no RNG: fixed phases).
inline std::vector<double> seed_vector(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::sin(0.7 * static_cast<double>(i) + 0.3);
    return v;
}

/// Power iteration for the largest adjacency eigenvalue on the orthogonal
/// complement of `deflate` (pass an empty vector for the unrestricted top).
inline EigenEstimate power_iterate(const MetricSpace::GraphRep& g,
                                   const std::vector<double>& deflate, double shift,
                                   double tol, std::int64_t max_iters) {
    const std::size_t n = g.adj.size();
    std::vector<double> v = seed_vector(n), av(n);
    EigenEstimate est;
    for (std::int64_t iter = 0; iter <= max_iters; ++iter) {
        if (!deflate.empty()) {
            const double c = dot(v, deflate);
            for (std::size_t i = 0; i < n; ++i) v[i] -= c * deflate[i];
        }
        double nv = norm(v);
        if (nv == 0) {  // landed exactly on the deflated line: restart shifted
            v = seed_vector(n);
            for (std::size_t i = 0; i < n; ++i) v[i] += static_cast<double>(i % 7);
            continue;
        }
        for (auto& x : v) x /= nv;
        adjacency_apply(g, v, av);
        est.value = dot(v, av);
        double res2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = av[i] - est.value * v[i];
            res2 += r * r;
        }
        est.residual = std::sqrt(res2);
        est.iterations = iter;
        if (est.residual <= tol) {
            est.converged = true;
            return est;
        }
        for (std::size_t i = 0; i < n; ++i) v[i] = av[i] + shift * v[i];
    }
    return est;
}

}  // namespace detail

/// Second-largest adjacency eigenvalue of a connected graph.  The top
/// eigenvector is the exact uniform vector for regular graphs and is itself
/// power-iterated otherwise; the returned estimate carries the certified
/// residual bound and a convergence flag.
inline EigenEstimate second_adjacency_eigenvalue(const MetricSpace& X, double tol = 1e-8,
                                                 std::int64_t max_iters = 200'000) {
    const auto* g = X.graph();
    require(g != nullptr, "spectral estimate needs a graph metric");
    require(X.connected(), "spectral estimate needs a connected graph");
    const std::size_t n = g->adj.size();
    require(n >= 2, "second eigenvalue needs at least two vertices");

    std::size_t dmax = 0, dmin = n;
    for (const auto& nb : g->adj) {
        dmax = std::max(dmax, nb.size());
        dmin = std::min(dmin, nb.size());
    }
    const double shift = static_cast<double>(dmax);

    std::vector<double> top(n);
    if (dmin == dmax) {
        const double u = 1.0 / std::sqrt(static_cast<double>(n));
        std::fill(top.begin(), top.end(), u);
    } else {
        // Perron vector of an irregular connected graph, by the same iteration.
        auto perron = detail::power_iterate(*g, {}, shift, tol, max_iters);
        require(perron.converged, "top eigenvector iteration did not converge");
        // Recompute the vector: rerun to the same iterate count, keeping v.
        std::vector<double> v = detail::seed_vector(n), av(n);
        for (std::int64_t iter = 0; iter <= perron.iterations; ++iter) {
            double nv = detail::norm(v);
            for (auto& x : v) x /= nv;
            if (iter == perron.iterations) break;
            detail::adjacency_apply(*g, v, av);
            for (std::size_t i = 0; i < n; ++i) v[i] = av[i] + shift * v[i];
        }
        top = std::move(v);
    }
    return detail::power_iterate(*g, top, shift, tol, max_iters);
}

// ---------------------------------------------------------------------------
// Full per-graph report.
// ---------------------------------------------------------------------------
struct GraphReport {
    std::int64_t order = 0;
    std::int64_t degree = 0;  // maximal degree; every degree when regular
    bool regular = false;
    bool connected = false;
    std::optional<std::int64_t> girth;  // empty: no cycle
    std::int64_t diameter = 0;
    std::optional<Rat> diameter_over_girth;
    double second_eigenvalue = 0;
    double eigen_residual = 0;
    bool eigen_converged = false;
    std::int64_t eigen_iterations = 0;
};

inline GraphReport spectral_report(const MetricSpace& X, double tol = 1e-8,
                                   std::int64_t max_iters = 200'000) {
    const auto* g = X.graph();
    require(g != nullptr, "spectral report needs a graph metric");
    require(X.connected(), "spectral report needs a connected graph");
    GraphReport rep;
    rep.order = static_cast<std::int64_t>(g->adj.size());
    rep.connected = true;
    std::size_t dmax = 0, dmin = rep.order > 0 ? g->adj.front().size() : 0;
    for (const auto& nb : g->adj) {
        dmax = std::max(dmax, nb.size());
        dmin = std::min(dmin, nb.size());
    }
    rep.degree = static_cast<std::int64_t>(dmax);
    rep.regular = dmin == dmax;
    rep.girth = girth(X);
    rep.diameter = X.diameter().num();  // graph metrics have integer diameter
    if (rep.girth)
        rep.diameter_over_girth = Rat(rep.diameter, *rep.girth);
    auto eig = second_adjacency_eigenvalue(X, tol, max_iters);
    rep.second_eigenvalue = eig.value;
    rep.eigen_residual = eig.residual;
    rep.eigen_converged = eig.converged;
    rep.eigen_iterations = eig.iterations;
    return rep;
}

// ---------------------------------------------------------------------------
// Family sweep with the girth-versus-log(order) least-squares fit.
// ---------------------------------------------------------------------------
struct FamilyEntry {
    std::int64_t p = 0;
    GraphReport report;
    std::optional<std::int64_t> oracle_girth;  // relator search, when requested
};

struct FamilyReport {
    std::vector<FamilyEntry> entries;
    double girth_log_slope = 0;      // least-squares girth ~ slope*log(order) + intercept
    double girth_log_intercept = 0;
    double reference_slope = kGirthSlopeReference;
    Rat max_ratio{0};                // largest diameter-by-girth ratio seen
    bool girth_nondecreasing = true;
};

inline std::vector<std::int64_t> primes_up_to(std::int64_t pmax) {
    std::vector<std::int64_t> ps;
    for (std::int64_t p = 3; p <= pmax; ++p)
        if (detail::is_prime(p)) ps.push_back(p);
    return ps;
}

inline FamilyReport margulis_family_report(const std::vector<std::int64_t>& primes,
                                           std::int64_t oracle_pmax = 7,
                                           double tol = 1e-8,
                                           std::int64_t max_iters = 200'000) {
    FamilyReport out;
    std::vector<std::pair<double, double>> fit_points;  // (log order, girth)
    std::optional<std::int64_t> prev_girth;
    for (auto p : primes) {
        FamilyEntry e;
        e.p = p;
        auto graph = margulis_graph(p);
        e.report = spectral_report(graph, tol, max_iters);
        if (p <= oracle_pmax) e.oracle_girth = margulis_girth_oracle(p);
        require(e.report.girth.has_value(), "family graph has no cycle");
        if (prev_girth && *e.report.girth < *prev_girth) out.girth_nondecreasing = false;
        prev_girth = e.report.girth;
        if (e.report.diameter_over_girth)
            out.max_ratio = std::max(out.max_ratio, *e.report.diameter_over_girth);
        fit_points.push_back({std::log(static_cast<double>(e.report.order)),
                              static_cast<double>(*e.report.girth)});
        out.entries.push_back(std::move(e));
    }
    if (fit_points.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const auto m = static_cast<double>(fit_points.size());
        for (auto [x, y] : fit_points) {
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double denom = m * sxx - sx * sx;
        if (denom != 0) {
            out.girth_log_slope = (m * sxy - sx * sy) / denom;
            out.girth_log_intercept = (sy - out.girth_log_slope * sx) / m;
        }
    }
    return out;
}

}  // namespace coarsebox

#endif
