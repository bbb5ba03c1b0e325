#pragma once

#include <cstdint>
#include <random>

namespace rre {

/// Domain tags that keep streams for different purposes apart even when
/// they share a seed and a replicate index.
enum class StreamPurpose : std::uint32_t {
  kArrivals = 1,
  kNoise = 2,
};

/**
 * Independent random stream keyed by (seed, replicate index, purpose).
 * Values within a stream are consumed in time order, so the t-th draw of a
 * given key is fully determined by the key. Two keys never share a stream,
 * which lets replicates run on any thread in any order.
 */
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t replicate, StreamPurpose purpose);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal() { return normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace rre
