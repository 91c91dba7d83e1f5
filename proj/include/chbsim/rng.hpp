#pragma once

#include <cstdint>
#include <string_view>

namespace chbsim {

/// Counter-based generator: output i is splitmix64_mix(key + (i+1) * golden),
/// where key is derived from (seed, stream). Every draw is a pure function of
/// (seed, stream, counter), so any language can reproduce the byte stream.
///
/// Derived quantities use fixed formulas rather than <random> distributions,
/// whose algorithms are implementation-defined:
///   uniform()  = (next_u64() >> 11) * 2^-53                 in [0, 1)
///   normal()   = Box-Muller on two uniforms, cosine branch only
///   sign()     = +1 if the top bit of next_u64() is set, else -1
class SeededRng {
 public:
  static constexpr std::string_view kIdentity = "splitmix64-counter/1";

  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  double sign();
  /// Uniform integer in [0, n) by rejection; n > 0.
  std::uint64_t below(std::uint64_t n);

  /// Independent substream keyed by (seed, index); never shares draws with the parent.
  SeededRng substream(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace chbsim
