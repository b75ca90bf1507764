// cchsh - geodesics, parallel transport, and holonomy angles
//
// Integration policy: classical fixed-step RK4 throughout. Curves store
// samples at half the transport step, so transport RK4 stages read exact
// curve samples instead of interpolants and the whole pipeline keeps clean
// fourth-order convergence. Boundary-value problems are solved by shooting
// with a damped Newton iteration on the initial direction.

#ifndef CCHSH_GEOMETRY_HPP_
#define CCHSH_GEOMETRY_HPP_

#include <functional>
#include <span>
#include <vector>

#include "metric.hpp"

namespace cchsh {

struct TangentVector {
  Vec4 base{};
  Vec4 v{};
};

struct Frame {
  Vec4 base{};
  std::array<Vec4, 4> e{};  // e[0] timelike, e[1..3] spacelike, g-orthonormal
};

// Oriented spacelike 2-plane; e1, e2 must be g-orthonormal at base.
struct Plane {
  Vec4 base{};
  Vec4 e1{};
  Vec4 e2{};
};

enum class CurveKind { TimelikeGeodesic, NullGeodesic, General };

struct CurveSample {
  double param;
  Vec4 x;
  Vec4 u;  // dx/dparam
};

struct Curve {
  CurveKind kind = CurveKind::General;
  std::vector<CurveSample> samples;

  const CurveSample& front() const { return samples.front(); }
  const CurveSample& back() const { return samples.back(); }
  double length() const { return samples.back().param - samples.front().param; }

  Curve reversed() const;

  // Cubic Hermite interpolation between samples.
  Vec4 position_at(double param) const;
  Vec4 tangent_at(double param) const;
};

struct ConnectOptions {
  double step = 1e-3;       // target sample spacing in chart units
  double tol = 1e-10;       // endpoint miss to declare convergence
  double accept_tol = 1e-6; // worst acceptable miss before NoConvergence
  int max_iter = 60;
  double causal_tol = 1e-6; // relative |g(u,u)| threshold for the type check
};

// Integrate the geodesic equation from `start` with initial tangent `v0`
// for parameter length `length` (proper time when v0 is unit timelike).
Curve shoot_geodesic(const Spacetime& st, const Vec4& start, const TangentVector& v0,
                     double length, double step);

// Boundary-value geodesic between two events, found by shooting with a
// damped Newton iteration on the initial direction; the initial guess is the
// straight chart line. The converged geodesic's causal character must match
// `kind` (WrongCausalType otherwise). Timelike curves come back parameterized
// by proper time, spacelike by proper length, null by the affine parameter
// scaled to [0, 1].
Curve connect_geodesic(const Spacetime& st, const Vec4& from, const Vec4& to, CurveKind kind,
                       const ConnectOptions& opts = {});

TangentVector parallel_transport(const Spacetime& st, const TangentVector& v, const Curve& curve);

// Transport through a chain of curves; each curve must start where the
// previous one ends.
TangentVector transport_along(const Spacetime& st, const TangentVector& v,
                              std::span<const Curve> curves);

Frame transport_frame(const Spacetime& st, const Frame& frame, const Curve& curve);

// Oriented angle in [0, 2*pi) between plane.e1 and the projection of u onto
// the plane. OrthogonalProjection when the projection is shorter than 1e-9.
double plane_angle(const Spacetime& st, const Plane& plane, const TangentVector& u);

// Transports `probe` around the closed loop formed by `loop` (curves chained
// head to tail, ending back at the base), then reports
// plane_angle(transported) - plane_angle(probe) wrapped to (-pi, pi].
double loop_holonomy_angle(const Spacetime& st, std::span<const Curve> loop, const Plane& plane,
                           const TangentVector& probe);

// Rotation angle of the loop's transport map restricted to the plane:
// both basis vectors are carried around and the angle comes from the polar
// part of the projected 2x2 map. Unlike the single-probe angle this is
// independent of the basis choice inside the plane, which matters when the
// transported vectors tilt slightly out of it.
double loop_rotation_angle(const Spacetime& st, std::span<const Curve> loop, const Plane& plane);

// Gram-Schmidt frame from the coordinate basis at x (e0 from the x0 axis).
Frame orthonormal_frame_at(const Spacetime& st, const Vec4& x);

// Largest defect in g(e_i, e_j) against the orthonormal pattern, measured
// with the metric at the frame's base.
double frame_orthonormality_defect(const Spacetime& st, const Frame& frame);

// Sample an analytic curve (exact positions and tangents) for transport
// work; n must be even and >= 2.
Curve sampled_curve(const std::function<Vec4(double)>& x, const std::function<Vec4(double)>& u,
                    double t0, double t1, int n, CurveKind kind = CurveKind::General);

// Max finite-difference defect of the geodesic equation over interior
// samples; diagnostic for audits and tests.
double geodesic_residual(const Spacetime& st, const Curve& curve);

}  // namespace cchsh

#endif  // CCHSH_GEOMETRY_HPP_
