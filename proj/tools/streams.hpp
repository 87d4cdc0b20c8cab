#pragma once

#include <cstdint>

namespace bdex::cli {

// Stream ids derived from the config seed. Replica r of a particle run uses
// stream r; the offsets below keep the other consumers disjoint from it.
inline constexpr std::uint64_t kInitialStreamBase = std::uint64_t{1} << 40;   // random initial density
inline constexpr std::uint64_t kSamplingStreamBase = std::uint64_t{1} << 41;  // initial configurations
inline constexpr std::uint64_t kSweepStreamBase = std::uint64_t{1} << 42;     // boundedness sweep
inline constexpr std::uint64_t kTransientStreamBase = std::uint64_t{1} << 43; // transient replicas
inline constexpr std::uint64_t kSuiteStreamBase = std::uint64_t{1} << 44;     // lemma suite

}  // namespace bdex::cli
