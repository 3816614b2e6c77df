// Deterministic random generators for modules and morphisms, shared by the
// property tests and the acceptance suite.  The implementations live in the
// library's sampling header so the command-line tool draws from the exact
// same distributions; this shim keeps the historical test-local names.
#ifndef COARSEBOX_TESTS_GENERATORS_HPP
#define COARSEBOX_TESTS_GENERATORS_HPP

#include "coarsebox/sampling.hpp"

namespace coarsebox_tests {

using coarsebox::ComposablePair;
using coarsebox::random_composable_pair;
using coarsebox::random_free_module;
using coarsebox::random_mat;
using coarsebox::random_module;
using coarsebox::random_morphism;

inline std::int64_t pick(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
    return coarsebox::sample_int(rng, lo, hi);
}

}  // namespace coarsebox_tests

#endif
