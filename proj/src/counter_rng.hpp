// cchsh - counter-based random streams
//
// Monte Carlo draws are keyed by (seed, sample index, substream) through a
// stateless mixing function, so sample k sees the same randomness no matter
// how samples are partitioned across threads. That is what makes the
// estimators bit-reproducible for any worker count.

#ifndef CCHSH_COUNTER_RNG_HPP_
#define CCHSH_COUNTER_RNG_HPP_

#include <cstdint>

namespace cchsh {

namespace detail {

// Finalizer from the splitmix64 generator; a well-tested 64-bit mixer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Uniform on [0, 1). Pure function of its arguments.
inline double counter_uniform(std::uint64_t seed, std::uint64_t counter, std::uint64_t stream) {
  std::uint64_t z = detail::mix64(seed ^ 0x6a09e667f3bcc909ULL);
  z = detail::mix64(z ^ counter);
  z = detail::mix64(z ^ (stream * 0x9e3779b97f4a7c15ULL + 0xbb67ae8584caa73bULL));
  // Take the top 53 bits for a full-precision double in [0, 1).
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

inline std::uint64_t counter_bits(std::uint64_t seed, std::uint64_t counter, std::uint64_t stream) {
  std::uint64_t z = detail::mix64(seed ^ 0x6a09e667f3bcc909ULL);
  z = detail::mix64(z ^ counter);
  return detail::mix64(z ^ (stream * 0x9e3779b97f4a7c15ULL + 0xbb67ae8584caa73bULL));
}

}  // namespace cchsh

#endif  // CCHSH_COUNTER_RNG_HPP_
