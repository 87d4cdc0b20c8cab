#pragma once

#include <cstdint>
#include <random>

namespace bdex {

// A replica is identified by (seed, streamId); equal specs give equal streams.
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t streamId = 0;

  bool operator==(const RngSpec&) const = default;
};

std::uint64_t splitmix64(std::uint64_t x);

// Derives the engine seed for a stream. Documented so that external tools can
// reproduce a stream: splitmix64(seed ^ splitmix64(streamId + 0x9e3779b97f4a7c15)).
std::uint64_t derive_stream_seed(const RngSpec& spec);

// std::mt19937_64 engine with variate conversions done by hand, so that the
// produced doubles do not depend on the standard library's distribution code.
class Rng {
 public:
  explicit Rng(const RngSpec& spec) : engine_(derive_stream_seed(spec)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1].
  double uniform_open_left() { return 1.0 - uniform(); }

  double exponential(double rate);
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  bool hasSpare_ = false;
  double spare_ = 0.0;
};

}  // namespace bdex
