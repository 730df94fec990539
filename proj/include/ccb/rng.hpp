#pragma once

#include <cstdint>
#include <random>

namespace ccb {

// splitmix64, used to derive independent substream seeds from one master
// seed. Substreams are keyed by (purpose, index) so that adding a learner
// to a config does not perturb the draws of existing learners.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t {
  Environment = 1,  // per-learner context/label draws
  Shared = 2,       // correlated (shared) context/label draws
  Prediction = 3,   // per-learner synthetic/random-coin prediction noise
  Reveal = 4,       // per-learner label-reveal coin
  Delay = 5,        // per-learner feedback-delay draws
  Policy = 6,       // per-learner policy randomization (CoS-MC)
};

inline std::uint64_t stream_seed(std::uint64_t master, Stream purpose,
                                 std::uint64_t index = 0) {
  return splitmix64(master ^ splitmix64((static_cast<std::uint64_t>(purpose) << 32) + index));
}

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t master, Stream purpose, std::uint64_t index = 0) {
  return Rng(stream_seed(master, purpose, index));
}

}  // namespace ccb
