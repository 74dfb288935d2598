#pragma once

// Counter-based Philox4x32-10 generator. A draw is a pure function of
// (seed, stream, index, position), so results do not depend on scheduling.

#include <array>
#include <cstdint>

namespace cdr {

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

// Named substreams used across the library.
enum class Stream : std::uint64_t {
  kCovariates = 1,
  kLatent = 2,
  kBootstrap = 3,
  kBootstrapGroup0 = 4,
  kBootstrapGroup1 = 5,
};

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint32_t index);
  CounterRng(std::uint64_t seed, Stream stream, std::uint32_t index)
      : CounterRng(seed, static_cast<std::uint64_t>(stream), index) {}

  std::uint32_t next_u32();
  // Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  void refill();

  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cdr
