#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace fsbdp {

/// Seedable random stream owned by exactly one chain (or one generator).
///
/// Built on std::mt19937_64, whose output sequence is fixed by the C++
/// standard. All variate transforms in this library are written on top of
/// `next_u64()` rather than std::*_distribution, whose algorithms are
/// implementation-defined, so equal seeds give equal draws across
/// standard libraries.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  /// Number of 64-bit words consumed so far.
  std::uint64_t position() const noexcept { return position_; }

  std::uint64_t next_u64() {
    ++position_;
    return engine_();
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Rejection keeps it unbiased.
  std::size_t uniform_index(std::size_t n);

  /// Standard normal (Marsaglia polar method, no cached spare).
  double normal();

  /// Independent stream for component `k`, e.g. a chain or a data generator.
  RngStream substream(std::uint64_t k) const;

  friend bool operator==(const RngStream& a, const RngStream& b) {
    return a.seed_ == b.seed_ && a.position_ == b.position_ && a.engine_ == b.engine_;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t position_ = 0;
  std::mt19937_64 engine_;
};

/// SplitMix64 finaliser; used to derive well-separated seeds.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

}  // namespace fsbdp
