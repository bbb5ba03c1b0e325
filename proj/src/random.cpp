#include "rre/random.hpp"

namespace rre {

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t replicate,
                           StreamPurpose purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate),
                    static_cast<std::uint32_t>(replicate >> 32),
                    static_cast<std::uint32_t>(purpose)};
  engine_.seed(seq);
}

}  // namespace rre
