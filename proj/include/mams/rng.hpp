#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mams {

// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

// Derives an independent stream key from a seed and up to three counters
// (scenario index, replicate index, substream tag). Replicates, chains and
// generator substreams each get their own key so that results do not depend
// on execution order or worker count.
std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a,
                            std::uint64_t b = 0, std::uint64_t c = 0);

// Substream tags used when splitting a replicate key.
enum StreamTag : std::uint64_t {
  kStreamEnrollment = 1,
  kStreamTtp = 2,
  kStreamEvents = 3,
  kStreamSampler = 4,
  kStreamChainBase = 16,  // chain c uses kStreamChainBase + c
};

// A seeded random stream. All distribution transforms are implemented here
// so that a given key always yields the same sequence of variates.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : eng_(key) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on [0, 1).
  double uniform01() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]. Safe as an argument to log().
  double uniform_pos() { return ((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // Standard exponential, rate 1.
  double exponential();

  // Standard normal via the Marsaglia polar method (spare value cached).
  double normal();

  // Gamma(shape, 1), Marsaglia-Tsang squeeze method.
  double gamma(double shape);

  double chisq(double df) { return 2.0 * gamma(0.5 * df); }

  // Normal(mu, sigma) truncated to (lower, +inf). Naive rejection when the
  // standardized bound is low, Robert (1995) exponential rejection in the
  // tail. The returned value is strictly greater than `lower`.
  double truncated_normal_lower(double mu, double sigma, double lower);

  // Unbiased integer on [0, n).
  std::uint64_t bounded(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mams
