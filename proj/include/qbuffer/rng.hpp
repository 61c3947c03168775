#ifndef QBUFFER_RNG_HPP
#define QBUFFER_RNG_HPP

#include <cstdint>

namespace qbuffer {

// Counter-based generator (splitmix64). Each (seed, stream, counter) triple
// yields the same value no matter which worker evaluates it, so parallel
// construction is bit-identical to serial order.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct CounterRng {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::uint64_t bits(std::uint64_t counter) const {
    return splitmix64(splitmix64(seed ^ 0x6a09e667f3bcc909ULL) ^
                      splitmix64(stream * 0x9e3779b97f4a7c15ULL + counter));
  }

  // Uniform in [0, 1).
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }
};

}  // namespace qbuffer

#endif
