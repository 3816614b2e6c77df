#ifndef COARSEBOX_COMMON_HPP
#define COARSEBOX_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace coarsebox {

/// Thrown on contract violations: malformed inputs, exceeded caps,
/// operations on objects that do not support them.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

namespace limits {
/// Hard cap on quotient enumeration (overridable per call / via CLI).
inline constexpr std::int64_t kMaxQuotientOrder = 10'000'000;
/// Filtration levels live in [0, kLevelWindow].
inline constexpr std::int32_t kLevelWindow = 64;
/// Rips complexes refuse to enumerate past this many simplices.
inline constexpr std::int64_t kSimplexCap = 10'000'000;
/// Default top dimension for Rips complexes.
inline constexpr int kRipsDimensionCap = 3;
/// Exhaustive metric-axiom checks below this size, sampled above.
inline constexpr int kExhaustiveMetricThreshold = 200;
/// Prime cap for the expander family.
inline constexpr std::int64_t kExpanderPrimeCap = 31;
/// Node budget for truncated balls of infinite groups.
inline constexpr std::int64_t kBallNodeBudget = 12'000'000;
}  // namespace limits

}  // namespace coarsebox

#endif
