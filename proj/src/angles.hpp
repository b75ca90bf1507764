// cchsh - angle arithmetic helpers
//
// All stored angles live in [0, 2*pi). Holonomy deltas and other signed
// differences are reported in (-pi, pi]. Keep every wrap in this header so
// the conventions cannot drift between modules.

#ifndef CCHSH_ANGLES_HPP_
#define CCHSH_ANGLES_HPP_

#include <cmath>
#include <numbers>

namespace cchsh {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// The B-side apparatus measures the beam sent in the opposite spatial
// direction, which carries -v rather than +v; that flips the reference
// polarization angle by pi. Every consumer of the B-side measurement angle
// applies this one constant.
inline constexpr double kOppositeBeamOffset = std::numbers::pi;

// Wrap into [0, 2*pi).
inline double wrap_two_pi(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod can return exactly 2*pi after the correction when a is a tiny
  // negative number; normalize that case too.
  if (r >= kTwoPi) r -= kTwoPi;
  return r;
}

// Wrap into (-pi, pi].
inline double wrap_pi(double a) {
  double r = wrap_two_pi(a);
  if (r > kPi) r -= kTwoPi;
  return r;
}

// Distance between two angles on the circle, in [0, pi].
inline double circular_distance(double a, double b) {
  return std::abs(wrap_pi(a - b));
}

}  // namespace cchsh

#endif  // CCHSH_ANGLES_HPP_
