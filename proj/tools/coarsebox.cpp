// coarsebox: reproducible verification reports for coarse-geometry structures.
//
// Subcommands run property suites over the library's modules and emit JSON
// (and CSV) reports.  Exit code contract: 0 when every verification passes,
// 2 when at least one verification fails, 1 on configuration errors
// (unknown subcommand, malformed flags, caps exceeded).  Reports are written
// atomically and are byte-identical across runs with the same configuration
// and seed.
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "coarsebox/controlled.hpp"
#include "coarsebox/cover.hpp"
#include "coarsebox/expander.hpp"
#include "coarsebox/functors.hpp"
#include "coarsebox/group.hpp"
#include "coarsebox/io.hpp"
#include "coarsebox/metric.hpp"
#include "coarsebox/rips.hpp"
#include "coarsebox/sampling.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace coarsebox;

/// Configuration problems detected after flag parsing (bad group names,
/// caps exceeded, infeasible stage lists).  Mapped to exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr std::int64_t kDefaultOrderCap = 250'000;

// ---------------------------------------------------------------------------
// Verification bookkeeping.
// ---------------------------------------------------------------------------

struct Verdicts {
    json list = json::array();
    bool all_pass = true;

    void add(const std::string& name, const std::string& verifies, bool pass,
             json details = json::object()) {
        json v;
        v["name"] = name;
        v["verifies"] = verifies;
        v["pass"] = pass;
        if (!details.empty()) v["details"] = std::move(details);
        list.push_back(std::move(v));
        all_pass = all_pass && pass;
    }
};

struct RunOutcome {
    std::string stem;  // report file name without extension
    json report;
    bool pass = true;
};

RunOutcome assemble(const std::string& command, const std::string& stem, json config,
                    json results, Verdicts v) {
    RunOutcome out;
    out.stem = stem;
    out.report["tool"] = "coarsebox";
    out.report["command"] = command;
    out.report["config"] = std::move(config);
    out.report["results"] = std::move(results);
    out.report["verifications"] = std::move(v.list);
    out.report["all_pass"] = v.all_pass;
    out.pass = v.all_pass;
    return out;
}

void write_and_print(const RunOutcome& out, const std::filesystem::path& outdir) {
    io::atomic_write_file(outdir / (out.stem + ".json"), out.report.dump(2) + "\n");
    for (const auto& v : out.report["verifications"])
        std::printf("[%s] %s/%s\n", v["pass"].get<bool>() ? "PASS" : "FAIL",
                    out.stem.c_str(), v["name"].get<std::string>().c_str());
}

json rat_str(const Rat& r) { return r.str(); }

// ---------------------------------------------------------------------------
// Shared construction helpers.
// ---------------------------------------------------------------------------

MetricSpacePtr shared_space(MetricSpace x) {
    return std::make_shared<const MetricSpace>(std::move(x));
}

struct ActedSpace {
    MetricSpacePtr space;
    std::shared_ptr<const SpaceAction> action;
};

ActedSpace acted_cayley(const Group& g) {
    auto space = shared_space(cayley_graph(g, true));
    return {space, space->shared_action()};
}

/// Module over explicit points/levels with the trivial group.
ModulePtr plain_module(MetricSpacePtr space, std::vector<std::int32_t> points,
                       std::vector<std::int32_t> levels, std::int32_t rank,
                       std::int64_t modulus = 0, ModuleFlags flags = {}) {
    GeometricModule m;
    m.space = std::move(space);
    m.carrier = std::move(points);
    m.level = std::move(levels);
    m.fiber.assign(m.carrier.size(), CoefficientObject{modulus, rank});
    m.flags = flags;
    return make_geometric_module(std::move(m));
}

Group parse_group(const std::string& name) {
    if (name.rfind("Z/", 0) == 0) {
        std::int64_t n = 0;
        try {
            std::size_t used = 0;
            n = std::stoll(name.substr(2), &used);
            if (used != name.size() - 2) n = 0;
        } catch (const std::exception&) {
            n = 0;
        }
        if (n < 1) throw ConfigError("invalid cyclic order in group name: " + name);
        return cyclic_group(n);
    }
    if (name == "S3") return symmetric_group(3);
    if (name == "S4") return symmetric_group(4);
    if (name == "A4") return alternating_group_4();
    if (name == "D4") return dihedral_square();
    throw ConfigError("unknown group name: " + name + " (use Z/n, S3, S4, A4, or D4)");
}

GroupRingMorphism random_ring_morphism(std::mt19937_64& rng, const Group& g,
                                       const CoefficientObject& src,
                                       const CoefficientObject& tgt, int max_terms) {
    std::map<std::int32_t, Mat> terms;
    const auto count = sample_int(rng, 0, max_terms);
    for (std::int64_t i = 0; i < count; ++i)
        terms[static_cast<std::int32_t>(sample_int(rng, 0, g.order() - 1))] =
            random_mat(rng, tgt.rank, src.rank, src.modulus);
    return make_group_ring_morphism(g, src, tgt, std::move(terms));
}

std::pair<MetricCoverMap, std::shared_ptr<const SpaceAction>> certified_cyclic_cover(
    int total, int base) {
    auto cover = cyclic_cover(total, base);
    certify_max_radius(cover);
    return {cover, deck_action(cover)};
}

// ---------------------------------------------------------------------------
// covers: faithfulness profile of a quotient tower.
// ---------------------------------------------------------------------------

RunOutcome covers_outcome(const std::string& kind, const std::vector<std::int64_t>& stages,
                          std::int64_t order_cap, std::int64_t ball_budget,
                          const std::string& stem) {
    if (stages.empty()) throw ConfigError("covers needs a non-empty --stages list");
    QuotientTower tw = [&] {
        if (kind == "Z") {
            for (auto m : stages)
                if (m < 1) throw ConfigError("line tower stages must be positive moduli");
            return integer_line_tower(stages);
        }
        if (kind == "SL2") {
            for (auto m : stages)
                if (m < 2) throw ConfigError("matrix tower stages must be moduli >= 2");
            return sl2_matrix_tower(stages);
        }
        throw ConfigError("unknown tower group: " + kind + " (use Z or SL2)");
    }();
    for (int s = 0; s < tw.stage_count(); ++s) {
        try {
            tw.enumerate_quotient(s, order_cap);
        } catch (const Error&) {
            throw ConfigError("stage " + tw.stage(s).label + " exceeds the order cap " +
                              std::to_string(order_cap));
        }
    }

    auto rep = tower_faithfulness_profile(tw, ball_budget);

    json entries = json::array();
    for (const auto& e : rep.entries) {
        json j;
        j["stage"] = e.label;
        j["quotient_order"] = e.base_order;
        j["verified_radius"] = rat_str(e.max_radius);
        j["kernel_girth"] = e.kernel_girth ? json(*e.kernel_girth) : json(nullptr);
        j["kernel_bound"] = e.kernel_bound ? json(*e.kernel_bound) : json(nullptr);
        j["degenerate"] = e.degenerate;
        entries.push_back(std::move(j));
    }
    json results;
    results["entries"] = std::move(entries);
    results["tail_start"] = rep.tail_start;

    Verdicts v;
    bool bound_dominates = true;
    for (const auto& e : rep.entries)
        if (e.kernel_bound && e.max_radius > Rat(*e.kernel_bound)) bound_dominates = false;
    v.add("radius-within-kernel-bound",
          "the verified ball-isometry radius never exceeds the bound from the shortest "
          "kernel word",
          bound_dominates);

    v.add("radii-nondecreasing-tail",
          "verified radii are nondecreasing beyond the first stage", rep.nondecreasing_tail,
          {{"tail_start", rep.tail_start}});

    bool bounds_nondecreasing = true;
    for (std::size_t i = 1; i < rep.entries.size(); ++i) {
        auto a = rep.entries[i - 1].kernel_bound, b = rep.entries[i].kernel_bound;
        if (a && b && *a > *b) bounds_nondecreasing = false;
    }
    v.add("kernel-bounds-nondecreasing",
          "the kernel-girth faithfulness bound is nondecreasing along the tower",
          bounds_nondecreasing);

    if (rep.entries.size() >= 2) {
        const auto& first = rep.entries.front();
        const auto& last = rep.entries.back();
        v.add("radius-grows-first-to-last",
              "the last stage verifies a strictly larger radius than the first",
              last.max_radius > first.max_radius,
              {{"first", rat_str(first.max_radius)}, {"last", rat_str(last.max_radius)}});
    }

    json config;
    config["group"] = kind;
    config["stages"] = stages;
    config["order_cap"] = order_cap;
    return assemble("covers", stem, std::move(config), std::move(results), std::move(v));
}

// ---------------------------------------------------------------------------
// rips: cover-radius transfer to scale-d skeletons.
// ---------------------------------------------------------------------------

RunOutcome rips_outcome(const std::vector<std::int64_t>& stages,
                        const std::vector<std::int64_t>& scales,
                        const std::filesystem::path* matrix_csv,
                        const std::filesystem::path* simplices_csv) {
    if (stages.empty() || scales.empty())
        throw ConfigError("rips needs non-empty --stages and --scales lists");
    for (auto n : stages)
        if (n < 3 || n > 200) throw ConfigError("rips stages must be moduli in [3, 200]");
    for (auto d : scales)
        if (d < 1) throw ConfigError("skeleton scales must be >= 1");

    Verdicts v;
    json pairs = json::array();
    const MetricSpace* last_skeleton = nullptr;
    std::vector<RipsCoverResult> kept;  // keep results alive for the CSV export
    for (auto n : stages) {
        auto cover = truncated_line_cover(n);
        certify_max_radius(cover);
        for (auto d : scales) {
            json p;
            p["modulus"] = n;
            p["scale"] = d;
            p["certified_radius"] = rat_str(cover.certified_radius);
            if (cover.certified_radius < Rat(3 * d)) {
                p["skipped"] = "certificate below three times the scale";
                pairs.push_back(std::move(p));
                continue;
            }
            auto res = induced_cover_on_skeleton(cover, Rat(d));
            p["predicted_radius"] = rat_str(res.predicted_radius);
            p["total_simplices"] = {res.total_complex.count(0), res.total_complex.count(1),
                                    res.total_complex.count(2), res.total_complex.count(3)};
            p["base_simplices"] = {res.base_complex.count(0), res.base_complex.count(1),
                                   res.base_complex.count(2), res.base_complex.count(3)};
            p["lifts_ok"] = res.lifts_ok;
            p["radius_ok"] = res.radius_check.ok;
            v.add("skeleton-cover-n" + std::to_string(n) + "-scale" + std::to_string(d),
                  "a certified cover transfers to the scale-" + std::to_string(d) +
                      " skeleton at the predicted radius",
                  res.lifts_ok && res.radius_check.ok,
                  {{"predicted_radius", rat_str(res.predicted_radius)},
                   {"centers_checked", res.radius_check.centers_checked}});
            kept.push_back(std::move(res));
            last_skeleton = &kept.back().base_complex.skeleton;
            pairs.push_back(std::move(p));
        }
    }
    if (matrix_csv && last_skeleton)
        io::atomic_write_file(*matrix_csv, io::distance_matrix_csv(*last_skeleton));
    if (simplices_csv && !kept.empty())
        io::atomic_write_file(*simplices_csv, io::simplex_list_csv(kept.back().total_complex));

    json results;
    results["pairs"] = std::move(pairs);
    results["distance_matrix_written"] = matrix_csv != nullptr && last_skeleton != nullptr;

    json config;
    config["stages"] = stages;
    config["scales"] = scales;
    return assemble("rips", "rips", std::move(config), std::move(results), std::move(v));
}

// ---------------------------------------------------------------------------
// expanders: spectral/girth family report.
// ---------------------------------------------------------------------------

RunOutcome expanders_outcome(std::int64_t pmax, std::int64_t oracle_pmax, double tol,
                             std::int64_t order_cap,
                             const std::filesystem::path* edges_csv,
                             const std::filesystem::path& outdir, bool write_csv) {
    auto primes = primes_up_to(pmax);
    if (primes.empty())
        throw ConfigError("expanders needs --pmax >= 3 (no odd primes requested)");
    for (auto p : primes) {
        if (p > limits::kExpanderPrimeCap)
            throw ConfigError("prime " + std::to_string(p) + " exceeds the family cap " +
                              std::to_string(limits::kExpanderPrimeCap));
        const std::int64_t order = p * (p - 1) * (p + 1);
        if (order > order_cap)
            throw ConfigError("group order " + std::to_string(order) + " at p=" +
                              std::to_string(p) + " exceeds the order cap " +
                              std::to_string(order_cap));
    }

    auto family = margulis_family_report(primes, oracle_pmax, tol);

    json entries = json::array();
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : family.entries) {
        const auto& r = e.report;
        json j;
        j["p"] = e.p;
        j["order"] = r.order;
        j["degree"] = r.degree;
        j["girth"] = r.girth ? json(*r.girth) : json(nullptr);
        j["oracle_girth"] = e.oracle_girth ? json(*e.oracle_girth) : json(nullptr);
        j["diameter"] = r.diameter;
        j["diameter_over_girth"] =
            r.diameter_over_girth ? json(r.diameter_over_girth->str()) : json(nullptr);
        j["second_eigenvalue"] = r.second_eigenvalue;
        j["eigen_residual"] = r.eigen_residual;
        j["eigen_converged"] = r.eigen_converged;
        j["eigen_iterations"] = r.eigen_iterations;
        entries.push_back(std::move(j));
        rows.push_back({std::to_string(e.p), std::to_string(r.order),
                        std::to_string(r.degree),
                        r.girth ? std::to_string(*r.girth) : "",
                        std::to_string(r.diameter),
                        r.diameter_over_girth ? r.diameter_over_girth->str() : "",
                        io::render_double(r.second_eigenvalue),
                        io::render_double(r.eigen_residual),
                        r.eigen_converged ? "1" : "0",
                        std::to_string(r.eigen_iterations)});
    }
    if (write_csv)
        io::atomic_write_file(
            outdir / "expanders.csv",
            io::csv_document({"p", "order", "degree", "girth", "diameter",
                              "diameter_over_girth", "second_eigenvalue", "eigen_residual",
                              "eigen_converged", "eigen_iterations"},
                             rows));
    if (edges_csv) {
        auto last = margulis_graph(primes.back());
        io::atomic_write_file(*edges_csv, io::edge_list_csv(last));
    }

    json results;
    results["entries"] = std::move(entries);
    results["girth_log_slope"] = family.girth_log_slope;
    results["girth_log_intercept"] = family.girth_log_intercept;
    results["reference_slope"] = family.reference_slope;
    results["max_diameter_over_girth"] = family.max_ratio.str();

    Verdicts v;
    bool oracle_ok = true;
    std::int64_t oracle_checked = 0;
    for (const auto& e : family.entries)
        if (e.oracle_girth) {
            ++oracle_checked;
            if (!e.report.girth || *e.report.girth != *e.oracle_girth) oracle_ok = false;
        }
    v.add("girth-matches-relator-oracle",
          "breadth-first girth equals the shortest-kernel-word oracle", oracle_ok,
          {{"primes_checked", oracle_checked}});
    v.add("girth-nondecreasing-in-p", "girth does not decrease along the prime family",
          family.girth_nondecreasing);
    bool ratio_ok = true;
    for (const auto& e : family.entries)
        if (e.report.diameter_over_girth && *e.report.diameter_over_girth > family.max_ratio)
            ratio_ok = false;
    v.add("diameter-girth-ratio-bounded",
          "every diameter/girth ratio is within the reported maximum", ratio_ok,
          {{"max_ratio", family.max_ratio.str()}});

    {
        auto k4 = spectral_report(MetricSpace::complete_graph(4), 1e-10);
        auto c10 = spectral_report(MetricSpace::cycle_graph(10), 1e-10);
        const double want_c10 = 2.0 * std::cos(2.0 * 3.14159265358979323846 / 10.0);
        const bool k4_ok = std::abs(k4.second_eigenvalue - (-1.0)) <= 1e-8;
        const bool c10_ok = std::abs(c10.second_eigenvalue - want_c10) <= 1e-8;
        v.add("eigensolver-calibration",
              "the second-eigenvalue solver matches closed forms on a complete graph "
              "and a cycle",
              k4_ok && c10_ok,
              {{"complete_graph", k4.second_eigenvalue}, {"cycle", c10.second_eigenvalue}});
    }

    json config;
    config["pmax"] = pmax;
    config["oracle_pmax"] = oracle_pmax;
    config["tolerance"] = tol;
    return assemble("expanders", "expanders", std::move(config), std::move(results),
                    std::move(v));
}

// ---------------------------------------------------------------------------
// functors demos.
// ---------------------------------------------------------------------------

void demo_groupring(const Group& g, std::uint64_t seed, int trials, Verdicts& v,
                    json& results) {
    auto [space, action] = acted_cayley(g);
    std::mt19937_64 rng(seed);
    CoefficientObject a{5, 2}, b{5, 2}, c{5, 2};
    bool round_trip = true, convolution = true, additive = true;
    for (int t = 0; t < trials; ++t) {
        auto f = random_ring_morphism(rng, g, b, c, 3);
        auto h = random_ring_morphism(rng, g, a, b, 3);
        auto bp = static_cast<std::int32_t>(sample_int(rng, 0, space->size() - 1));
        auto phi = group_ring_to_T(f, space, action, bp);
        round_trip = round_trip && T_to_group_ring(phi).terms == f.terms;
        auto composite = compose(group_ring_to_T(f, space, action, 0),
                                 group_ring_to_T(h, space, action, 0));
        convolution = convolution && T_to_group_ring(composite).terms == convolve(f, h).terms;
        auto f2 = random_ring_morphism(rng, g, b, c, 3);
        additive = additive &&
                   group_ring_to_T(add(f, f2), space, action, bp) ==
                       add(group_ring_to_T(f, space, action, bp),
                           group_ring_to_T(f2, space, action, bp));
    }
    v.add("ring-dictionary-round-trip",
          "orbit morphisms read back as the group-ring elements that built them",
          round_trip, {{"group", g.name()}, {"trials", trials}});
    v.add("composition-is-convolution",
          "composing orbit morphisms matches convolving their ring elements", convolution);
    v.add("dictionary-additive", "the dictionary preserves addition", additive);
    results["groupring"] = {{"group", g.name()}, {"trials", trials}};
}

void demo_orbit(const Group& g, std::uint64_t seed, int trials, Verdicts& v, json& results) {
    auto [space, action] = acted_cayley(g);
    std::mt19937_64 rng(seed);
    bool identities = true, displacement_zero = true;
    for (int t = 0; t < trials; ++t) {
        auto m = random_free_module(rng, space, action, 3, 2, 5, 2);
        auto dec = orbit_decompose(m);
        identities = identities &&
                     compose(dec.to_orbit_form, dec.from_orbit_form) ==
                         identity_morphism(dec.orbit_form) &&
                     compose(dec.from_orbit_form, dec.to_orbit_form) == identity_morphism(m);
        displacement_zero = displacement_zero &&
                            propagation(dec.to_orbit_form) == std::make_pair(Rat(0), 0) &&
                            propagation(dec.from_orbit_form) == std::make_pair(Rat(0), 0);
    }
    v.add("orbit-decomposition-isomorphism",
          "every free module is isomorphic to its direct sum of orbit blocks", identities,
          {{"group", g.name()}, {"trials", trials}});
    v.add("orbit-decomposition-displacement-zero",
          "the decomposition isomorphisms move nothing spatially", displacement_zero);
    results["orbit"] = {{"group", g.name()}, {"trials", trials}};
}

void demo_descent(std::uint64_t seed, int trials, Verdicts& v, json& results) {
    std::mt19937_64 rng(seed);

    bool functorial = true;
    int pairs = 0;
    for (int total : {8, 12, 16, 20, 24}) {
        auto [cover, deck] = certified_cyclic_cover(total, 4);
        for (int t = 0; t < std::max(1, trials / 5); ++t) {
            auto a = random_free_module(rng, cover.total, deck, 2, 2, 5, 2);
            auto b = random_free_module(rng, cover.total, deck, 2, 2, 5, 2);
            auto c = random_free_module(rng, cover.total, deck, 2, 2, 5, 2);
            auto psi = random_morphism(rng, a, b, 4);
            auto phi = random_morphism(rng, b, c, 4);
            functorial = functorial && descend(compose(phi, psi), cover) ==
                                           compose(descend(phi, cover), descend(psi, cover));
            ++pairs;
        }
    }
    v.add("descent-functorial", "descending a composite equals composing the descents",
          functorial, {{"pairs", pairs}});

    bool faithful = true;
    int checked = 0;
    {
        auto [cover, deck] = certified_cyclic_cover(16, 8);
        auto src = orbit_module(cover.total, deck, 0, {5, 1});
        auto tgt = orbit_module(cover.total, deck, 1, {5, 1});
        for (int t = 0; t < 20 * trials && checked < trials; ++t) {
            auto phi = random_morphism(rng, src, tgt, 2);
            if (phi.spatial_propagation > Rat(1)) continue;
            auto rep = descent_faithfulness_check(phi, cover);
            faithful = faithful && rep.verdict == FaithfulnessVerdict::Pass &&
                       rep.descended_zero == phi.is_zero();
            ++checked;
        }
        faithful = faithful && checked == trials;
    }
    v.add("descent-faithful-under-certificate",
          "a certificate of twice the displacement makes descent injective on samples",
          faithful, {{"samples", checked}});

    {
        auto [cover, deck] = certified_cyclic_cover(8, 4);
        auto src = lift_module(plain_module(cover.base, {0}, {0}, 1, 0), cover, deck);
        auto tgt = lift_module(plain_module(cover.base, {1}, {0}, 1, 0), cover, deck);
        auto phi = make_morphism(src, tgt,
                                 {{{0, 0}, Mat::scalar(1)},
                                  {{1, 1}, Mat::scalar(1)},
                                  {{0, 1}, Mat::scalar(-1)},
                                  {{1, 0}, Mat::scalar(-1)}});
        auto rep = descent_faithfulness_check(phi, cover);
        const bool sharp = phi.spatial_propagation == Rat(3) && !phi.is_zero() &&
                           descend(phi, cover).is_zero() &&
                           rep.verdict == FaithfulnessVerdict::Skip;
        v.add("descent-sharpness-witness",
              "past the radius threshold a nonzero morphism can descend to zero", sharp,
              {{"displacement", rat_str(phi.spatial_propagation)},
               {"certified", rat_str(cover.certified_radius)}});
    }

    {
        std::vector<MetricCoverMap> tower;
        for (int base : {4, 8, 16}) {
            auto c = cyclic_cover(32, base);
            certify_max_radius(c);
            tower.push_back(std::move(c));
        }
        json stages = json::array();
        bool threshold_ok = true;
        for (int d = 1; d <= 3; ++d) {
            auto rep = faithfulness_threshold_stage(tower, Rat(d));
            std::optional<std::size_t> expect;
            for (std::size_t s = tower.size(); s-- > 0;) {
                if (tower[s].certified_radius >= Rat(2 * d))
                    expect = s;
                else
                    break;
            }
            threshold_ok = threshold_ok && rep.stage == expect;
            stages.push_back(rep.stage ? json(*rep.stage) : json(nullptr));
        }
        v.add("faithfulness-threshold-stage",
              "the first always-faithful stage matches the certificate scan", threshold_ok,
              {{"stages", stages}});
    }

    results["descent"] = {{"trials", trials}};
}

void demo_induction(const Group& g, std::uint64_t seed, int trials, Verdicts& v,
                    json& results) {
    auto [space, g_action] = acted_cayley(g);
    std::mt19937_64 rng(seed);
    bool round_trip = true, inverse = true, displacement = true;
    int subgroups = 0;
    for (const auto& h : all_subgroups(g_action->group)) {
        ++subgroups;
        auto h_action = restricted_action(g_action, h);
        for (int t = 0; t < std::max(1, trials / 5); ++t) {
            auto a = random_free_module(rng, space, h_action, 2, 2, 5, 2);
            auto b = random_free_module(rng, space, h_action, 2, 2, 5, 2);
            auto rt = induction_round_trip(a, g_action, h);
            round_trip = round_trip &&
                         compose(rt.from_restricted, rt.to_restricted) ==
                             identity_morphism(a) &&
                         compose(rt.to_restricted, rt.from_restricted) ==
                             identity_morphism(rt.restricted);
            auto ia = induce_module(a, g_action, h);
            auto ib = induce_module(b, g_action, h);
            auto ra = restrict_functor(ia, a->action);
            auto rb = restrict_functor(ib, b->action);
            auto layer = make_morphism(ra, rb, random_morphism(rng, a, b, 4).entries);
            auto big = extend_functor(layer, ia, ib);
            inverse = inverse && restrict_functor(big, ra, rb) == layer;
            displacement = displacement &&
                           big.spatial_propagation == layer.spatial_propagation &&
                           big.level_propagation == layer.level_propagation;
        }
    }
    v.add("induction-round-trip",
          "inducing then restricting returns the original module up to identity maps",
          round_trip, {{"group", g.name()}, {"subgroups", subgroups}});
    v.add("extend-restrict-inverse",
          "extending a morphism layer and restricting it back is the identity", inverse);
    v.add("induction-preserves-displacement",
          "induced morphisms keep both displacement components exactly", displacement);
    results["induction"] = {{"group", g.name()}, {"subgroups", subgroups}};
}

void demo_vset(const Group& g, std::uint64_t seed, int sections, Verdicts& v,
               json& results) {
    std::mt19937_64 rng(seed);
    bool built = true, custom = true;
    int triples = 0, section_runs = 0;
    auto subgroups = all_subgroups(g);
    for (const auto& h : subgroups) {
        if (!is_normal_subgroup(g, h)) continue;
        for (const auto& vv : subgroups) {
            VSetBijection bij;
            try {
                bij = vset_bijection(g, h, vv);
            } catch (const Error&) {
                built = false;
                continue;
            }
            ++triples;
            std::vector<std::vector<std::int32_t>> candidates(bij.mod_vh.count);
            for (std::int32_t x = 0; x < g.order(); ++x)
                candidates[bij.mod_vh.coset_of[g.inv_idx(x)]].push_back(x);
            for (int s = 0; s < sections; ++s) {
                std::vector<std::int32_t> section;
                for (auto& cand : candidates)
                    section.push_back(
                        cand[static_cast<std::size_t>(sample_int(rng, 0, cand.size() - 1))]);
                try {
                    auto b2 = vset_bijection(g, h, vv, &section);
                    custom = custom && b2.section == section;
                } catch (const Error&) {
                    custom = false;
                }
                ++section_runs;
            }
        }
    }
    v.add("coset-shuffle-bijection",
          "the double-coset product map is a verified two-sided bijection for every "
          "normal-subgroup triple",
          built && triples > 0, {{"group", g.name()}, {"triples", triples}});
    v.add("coset-shuffle-any-section",
          "every valid section choice yields the same verified bijection", custom,
          {{"section_runs", section_runs}});
    results["vset"] = {{"group", g.name()}, {"triples", triples}};
}

void demo_nets(Verdicts& v, json& results) {
    struct Case {
        std::string name;
        MetricSpace space;
    };
    std::vector<Case> cases;
    cases.push_back({"path9", MetricSpace::path_graph(9)});
    cases.push_back({"cycle12", MetricSpace::cycle_graph(12)});
    cases.push_back({"sl2mod3", cayley_graph(sl2_mod_group(3), false)});

    bool invariants = true, bounded = true;
    json spaces = json::array();
    for (auto& c : cases) {
        auto space = shared_space(std::move(c.space));
        json deltas = json::array();
        std::vector<Net> nets;
        for (int d = 3; d >= 1; --d) {
            auto net = max_separated_net(*space, Rat(d));
            auto chk = verify_net(*space, net);
            invariants = invariants && chk.ok();
            deltas.push_back({{"delta", d},
                              {"points", static_cast<std::int64_t>(net.points.size())},
                              {"ok", chk.ok()}});
            nets.push_back(std::move(net));
        }
        const int n = space->size();
        std::vector<std::int32_t> points, levels;
        for (int lv = 0; lv < 3; ++lv)
            for (int x = 0; x < n; ++x) {
                points.push_back(x);
                levels.push_back(lv);
            }
        auto family = plain_module(space, points, levels, 1);
        auto out = net_rearrange({family}, {0, 1, 2}, nets);
        for (std::size_t k = 0; k < nets.size(); ++k)
            bounded = bounded && out.level_propagation[k] <= nets[k].delta;
        spaces.push_back({{"space", c.name}, {"nets", deltas}});
    }
    v.add("net-invariants",
          "greedy nets are separated, maximal, and projection-consistent on paths, "
          "cycles, and the small matrix-group graph",
          invariants);
    v.add("net-level-displacement-bounded",
          "gathering onto level-k nets moves witnesses at most the level separation",
          bounded);
    results["nets"] = {{"spaces", spaces}};
}

RunOutcome functors_outcome(const std::string& demo, const std::string& group_name,
                            std::uint64_t seed, int trials) {
    static const std::vector<std::string> known{"groupring", "orbit", "descent",
                                                "induction", "vset", "nets"};
    std::vector<std::string> run;
    if (demo == "all") {
        run = known;
    } else if (std::find(known.begin(), known.end(), demo) != known.end()) {
        run = {demo};
    } else {
        throw ConfigError("unknown demo: " + demo +
                          " (use groupring, orbit, descent, induction, vset, nets, or all)");
    }
    if (trials < 1) throw ConfigError("--trials must be positive");

    Verdicts v;
    json results;
    for (const auto& name : run) {
        if (name == "groupring")
            demo_groupring(group_name.empty() ? cyclic_group(4) : parse_group(group_name),
                           seed, trials, v, results);
        else if (name == "orbit")
            demo_orbit(group_name.empty() ? cyclic_group(4) : parse_group(group_name), seed,
                       trials, v, results);
        else if (name == "descent")
            demo_descent(seed, trials, v, results);
        else if (name == "induction")
            demo_induction(group_name.empty() ? cyclic_group(4) : parse_group(group_name),
                           seed, trials, v, results);
        else if (name == "vset")
            demo_vset(group_name.empty() ? symmetric_group(3) : parse_group(group_name),
                      seed, 3, v, results);
        else if (name == "nets")
            demo_nets(v, results);
    }

    json config;
    config["demo"] = demo;
    config["group"] = group_name.empty() ? json(nullptr) : json(group_name);
    config["seed"] = seed;
    config["trials"] = trials;
    return assemble("functors", "functors", std::move(config), std::move(results),
                    std::move(v));
}

// ---------------------------------------------------------------------------
// modules: controlled-category property suite.
// ---------------------------------------------------------------------------

RunOutcome modules_outcome(std::uint64_t seed, int trials) {
    if (trials < 1) throw ConfigError("--trials must be positive");
    std::mt19937_64 rng(seed);
    auto path = shared_space(MetricSpace::path_graph(7));
    auto cycle = shared_space(MetricSpace::cycle_graph(7));

    bool subadditive = true;
    for (int t = 0; t < trials; ++t) {
        const std::int64_t modulus = t % 2 ? 5 : 0;
        auto [phi, psi] = random_composable_pair(rng, path, modulus, 4);
        auto whole = propagation(compose(phi, psi));
        auto pf = propagation(phi);
        auto pg = propagation(psi);
        subadditive = subadditive && whole.first <= pf.first + pg.first &&
                      whole.second <= pf.second + pg.second;
    }

    bool triangles = true;
    for (int t = 0; t < trials; ++t) {
        const auto mode = t % 2 ? FactorMode::BySpace : FactorMode::ByLevel;
        ModuleFlags flags;
        if (mode == FactorMode::ByLevel)
            flags.level_support = LevelSupport::Finite;
        else
            flags.spatially_bounded = true;
        const std::int64_t modulus = t % 4 < 2 ? 0 : 5;
        auto small = random_module(rng, path, 4, 2, modulus, 3, flags);
        auto big = random_module(rng, path, 6, 2, modulus, 3);
        auto into = random_morphism(rng, small, big, 5);
        auto from = random_morphism(rng, big, small, 5);
        auto fac = karoubi_factorize(into, &from, mode);
        triangles = triangles && fac.triangles_commute &&
                    compose(fac.inclusion, fac.narrowed) == into &&
                    compose(fac.widened, fac.projection) == from;
    }

    bool shift_ok = true;
    for (int t = 0; t < trials; ++t) {
        auto [phi, psi] = random_composable_pair(rng, cycle, t % 2 ? 5 : 0, 4);
        auto n = static_cast<std::int32_t>(sample_int(rng, 0, 5));
        shift_ok = shift_ok &&
                   shift_functor(n, compose(phi, psi)) ==
                       compose(shift_functor(n, phi), shift_functor(n, psi)) &&
                   propagation(shift_functor(n, phi)) == propagation(phi);
    }

    Verdicts v;
    v.add("composition-displacement-subadditive",
          "composite displacement is at most the sum of the parts, in both components",
          subadditive, {{"trials", trials}});
    v.add("splitting-triangles-commute",
          "cutting a morphism through a level or spatial summand reproduces it exactly",
          triangles, {{"trials", trials}});
    v.add("level-shift-functorial",
          "level shifts preserve composition and displacement", shift_ok,
          {{"trials", trials}});

    json results;
    results["trials"] = trials;
    json config;
    config["seed"] = seed;
    config["trials"] = trials;
    return assemble("modules", "modules", std::move(config), std::move(results),
                    std::move(v));
}

}  // namespace

// ---------------------------------------------------------------------------
// Entry point.
// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
    CLI::App app{"coarsebox: verification reports for coarse-geometry structures"};
    app.require_subcommand(1);

    std::string out_dir = "reports";
    std::uint64_t seed = 42;
    std::int64_t order_cap = kDefaultOrderCap;
    if (const char* env = std::getenv("COARSEBOX_MAX_ORDER")) {
        try {
            std::size_t used = 0;
            order_cap = std::stoll(env, &used);
            if (used != std::string(env).size() || order_cap < 1) {
                std::fprintf(stderr, "configuration error: COARSEBOX_MAX_ORDER must be a "
                                     "positive integer, got \"%s\"\n",
                             env);
                return 1;
            }
        } catch (const std::exception&) {
            std::fprintf(stderr, "configuration error: COARSEBOX_MAX_ORDER must be a "
                                 "positive integer, got \"%s\"\n",
                         env);
            return 1;
        }
    }
    app.add_option("--out", out_dir, "report output directory")->capture_default_str();
    app.add_option("--seed", seed, "random seed for sampled suites")
        ->capture_default_str();
    app.add_option("--max-order", order_cap,
                   "largest admissible group order (overrides COARSEBOX_MAX_ORDER)");

    auto* covers = app.add_subcommand("covers", "faithfulness profile of a quotient tower");
    std::string tower_group = "Z";
    std::vector<std::int64_t> stages;
    std::int64_t ball_budget = limits::kBallNodeBudget;
    covers->add_option("--group,--tower", tower_group, "tower base: Z or SL2")
        ->capture_default_str();
    covers->add_option("--stages", stages, "comma-separated stage moduli")
        ->delimiter(',')
        ->required();
    covers->add_option("--ball-budget", ball_budget, "node budget for truncated totals");

    auto* rips = app.add_subcommand("rips", "cover transfer to scale-d skeletons");
    std::vector<std::int64_t> rips_stages{12, 24};
    std::vector<std::int64_t> rips_scales{1, 2};
    std::string matrix_csv;
    rips->add_option("--stages", rips_stages, "cycle moduli for the base spaces")
        ->delimiter(',')
        ->capture_default_str();
    rips->add_option("--scales", rips_scales, "skeleton scales d")
        ->delimiter(',')
        ->capture_default_str();
    rips->add_option("--matrix-csv", matrix_csv,
                     "write the last base skeleton's distance matrix to this CSV file");
    std::string simplices_csv;
    rips->add_option("--simplices-csv", simplices_csv,
                     "write the last total complex's simplex list to this CSV file");

    auto* expanders = app.add_subcommand("expanders", "girth/spectral family report");
    std::int64_t pmax = 13, oracle_pmax = 7;
    double tol = 1e-8;
    std::string edges_csv;
    expanders->add_option("--pmax", pmax, "largest prime in the family")
        ->capture_default_str();
    expanders->add_option("--oracle-pmax", oracle_pmax,
                          "largest prime cross-checked against the relator oracle")
        ->capture_default_str();
    expanders->add_option("--tol", tol, "eigenvalue residual tolerance")
        ->capture_default_str();
    expanders->add_option("--edges-csv", edges_csv,
                          "write the largest graph's edge list to this CSV file");

    auto* functors = app.add_subcommand("functors", "functor lemma demos");
    std::string demo = "all";
    std::string group_name;
    int trials = 25;
    functors->add_option("--demo", demo,
                         "groupring, orbit, descent, induction, vset, nets, or all")
        ->capture_default_str();
    functors->add_option("--group", group_name, "group for group-parameterized demos");
    functors->add_option("--trials", trials, "sampling rounds per property")
        ->capture_default_str();

    auto* modules = app.add_subcommand("modules", "controlled-category property suite");
    int module_trials = 200;
    modules->add_option("--trials", module_trials, "sampling rounds per property")
        ->capture_default_str();

    auto* all = app.add_subcommand("all", "run every suite with default configurations");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    const std::filesystem::path outdir(out_dir);
    try {
        std::vector<RunOutcome> outcomes;
        if (*covers) {
            outcomes.push_back(
                covers_outcome(tower_group, stages, order_cap, ball_budget, "covers"));
        } else if (*rips) {
            std::filesystem::path mpath(matrix_csv);
            std::filesystem::path spath(simplices_csv);
            outcomes.push_back(rips_outcome(rips_stages, rips_scales,
                                            matrix_csv.empty() ? nullptr : &mpath,
                                            simplices_csv.empty() ? nullptr : &spath));
        } else if (*expanders) {
            std::filesystem::path epath(edges_csv);
            outcomes.push_back(expanders_outcome(pmax, oracle_pmax, tol, order_cap,
                                                 edges_csv.empty() ? nullptr : &epath,
                                                 outdir, true));
        } else if (*functors) {
            outcomes.push_back(functors_outcome(demo, group_name, seed, trials));
        } else if (*modules) {
            outcomes.push_back(modules_outcome(seed, module_trials));
        } else if (*all) {
            auto line = covers_outcome("Z", {4, 8, 12, 16}, order_cap,
                                       limits::kBallNodeBudget, "covers_line");
            auto matrix = covers_outcome("SL2", {3, 5, 7, 11}, order_cap,
                                         limits::kBallNodeBudget, "covers_matrix");
            auto rp = rips_outcome({12, 24}, {1, 2}, nullptr, nullptr);
            auto ex = expanders_outcome(13, 7, 1e-8, order_cap, nullptr, outdir, true);
            auto fn = functors_outcome("all", "", seed, 25);
            auto md = modules_outcome(seed, 200);
            outcomes.push_back(std::move(line));
            outcomes.push_back(std::move(matrix));
            outcomes.push_back(std::move(rp));
            outcomes.push_back(std::move(ex));
            outcomes.push_back(std::move(fn));
            outcomes.push_back(std::move(md));
        }

        bool pass = true;
        for (const auto& out : outcomes) {
            write_and_print(out, outdir);
            pass = pass && out.pass;
        }
        if (*all) {
            json summary;
            summary["tool"] = "coarsebox";
            summary["command"] = "all";
            summary["seed"] = seed;
            json parts = json::array();
            for (const auto& out : outcomes)
                parts.push_back({{"report", out.stem}, {"all_pass", out.pass}});
            summary["reports"] = std::move(parts);
            summary["all_pass"] = pass;
            io::atomic_write_file(outdir / "summary.json", summary.dump(2) + "\n");
        }
        if (pass) {
            std::printf("coarsebox: all verifications passed\n");
            return 0;
        }
        std::printf("coarsebox: verification failures detected\n");
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 1;
    }
}
