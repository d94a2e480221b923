#pragma once

#include <cstdint>
#include <random>

namespace bimc {

/// Portable random stream: mt19937_64 seeded through std::seed_seq, with
/// uniform and standard-normal variates generated by fixed algorithms so a
/// given seed produces the same sequence on every standard library.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  /// Independent stream for sub-task `index` of a run seeded with `seed`.
  static RandomStream substream(std::uint64_t seed, std::uint64_t index);

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();

  /// Standard normal via the Marsaglia polar method.
  double normal();

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// SplitMix64 finalizer; used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace bimc
