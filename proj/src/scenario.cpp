// cchsh - experiment construction

#include "scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "angles.hpp"

namespace cchsh {

namespace {

constexpr double kFrameTol = 1e-8;
constexpr double kSpeedTol = 1e-11;

void check_finite(double value, const char* field) {
  if (!std::isfinite(value))
    throw Error(ErrorCode::ConfigError, std::string(field) + " must be finite", field);
}

ConnectOptions connect_options(const ExperimentConfig& cfg) {
  ConnectOptions co;
  co.step = cfg.step;
  return co;
}

// -1 timelike, 0 within the null band, +1 spacelike, for the geodesic
// connector between two events. The squared proper length doubles as a
// smooth refinement functional but the sign alone is enough for bisection.
int causal_indicator(const Spacetime& st, const Vec4& from, const Vec4& to,
                     const ConnectOptions& co) {
  const Curve c = connect_geodesic(st, from, to, CurveKind::General, co);
  if (c.kind == CurveKind::TimelikeGeodesic) return -1;
  const Vec4& u0 = c.front().u;
  const double q = st.inner(from, u0, u0);
  if (std::abs(q) <= co.causal_tol * dot_euclid(u0, u0)) return 0;
  return q < 0.0 ? -1 : 1;
}

struct InterceptResult {
  Curve beam;       // null geodesic from E, ending at the measurement event
  Curve worldline;  // timelike geodesic from O to the same event
  double speed = 0.0;
};

// Coordinate speed of the connecting geodesic launch, measured in the frame
// at O. Monotone along the beam: points further out need a faster observer.
double launch_speed(const Spacetime& st, const Frame& frame, const Vec4& target,
                    const ConnectOptions& co) {
  const Curve wl = connect_geodesic(st, frame.base, target, CurveKind::TimelikeGeodesic, co);
  const Vec4& u0 = wl.front().u;
  const double c0 = -st.inner(frame.base, u0, frame.e[0]);
  if (c0 <= 0.0)
    throw Error(ErrorCode::NoInterception, "candidate worldline is not future-pointing");
  double s2 = 0.0;
  for (int i = 1; i < 4; ++i) {
    const double ci = st.inner(frame.base, u0, frame.e[static_cast<std::size_t>(i)]);
    s2 += ci * ci;
  }
  return std::sqrt(s2) / c0;
}

// Finds the point on the beam whose connecting geodesic from O has the
// requested launch speed. The beam parameter is expanded until the speed
// brackets the target, then bisected with secant refinement.
InterceptResult intercept_beam(const Spacetime& st, const Frame& frame, const Vec4& p_E,
                               const Vec4& k, double beta, const ExperimentConfig& cfg) {
  const ConnectOptions co = connect_options(cfg);
  const auto beam_to = [&](double lambda) {
    return shoot_geodesic(st, p_E, TangentVector{p_E, k}, lambda, cfg.step);
  };
  const auto speed_at = [&](double lambda, Curve& beam_out) {
    beam_out = beam_to(lambda);
    return launch_speed(st, frame, beam_out.back().x, co);
  };

  // Flat-space solution as the initial scale; in curved charts only the
  // order of magnitude matters.
  const double lambda0 = cfg.tau_E * beta / (1.0 - beta);
  double lo = 0.0;
  double f_lo = -beta;  // the beam starts at E, zero launch speed
  double hi = lambda0;
  double f_hi = 0.0;
  Curve beam;
  bool bracketed = false;
  for (int attempt = 0; attempt < 12; ++attempt) {
    try {
      f_hi = speed_at(hi, beam) - beta;
    } catch (const Error& e) {
      throw Error(ErrorCode::NoInterception,
                  std::string("observer cannot reach the beam: ") + e.what());
    }
    if (f_hi >= 0.0) {
      bracketed = true;
      break;
    }
    lo = hi;
    f_lo = f_hi;
    hi *= 2.0;
  }
  if (!bracketed)
    throw Error(ErrorCode::NoInterception,
                "launch speed stays below the configured value along the whole beam");

  double lambda = hi;
  double f_mid = f_hi;
  for (int it = 0; it < 200 && std::abs(f_mid) > kSpeedTol; ++it) {
    double cand = 0.5 * (lo + hi);
    if (f_hi != f_lo) {
      const double secant = hi - f_hi * (hi - lo) / (f_hi - f_lo);
      if (secant > lo + 1e-3 * (hi - lo) && secant < hi - 1e-3 * (hi - lo)) cand = secant;
    }
    lambda = cand;
    f_mid = speed_at(lambda, beam) - beta;
    if (f_mid < 0.0) {
      lo = lambda;
      f_lo = f_mid;
    } else {
      hi = lambda;
      f_hi = f_mid;
    }
    if (hi - lo < 1e-15 * (1.0 + hi)) break;
  }
  if (std::abs(f_mid) > 1e-6)
    throw Error(ErrorCode::NoInterception,
                "interception search stalled at speed mismatch " + std::to_string(f_mid));

  InterceptResult out;
  out.beam = beam_to(lambda);
  out.worldline =
      connect_geodesic(st, frame.base, out.beam.back().x, CurveKind::TimelikeGeodesic, co);
  out.speed = launch_speed(st, frame, out.beam.back().x, co);
  return out;
}

// Crossing of the past lightcone of p_E along the observer worldline: the
// connector is timelike near O and spacelike just before the measurement
// event, with exactly one sign change in between.
double lightcone_crossing(const Spacetime& st, const Curve& worldline, const Vec4& p_E,
                          const ConnectOptions& co) {
  const double s_end = worldline.back().param;
  double lo = 0.0;
  double hi = s_end * (1.0 - 1e-3);
  int cls_hi = causal_indicator(st, worldline.position_at(hi), p_E, co);
  for (int attempt = 0; attempt < 20 && cls_hi < 0; ++attempt) {
    hi = 0.5 * (hi + s_end);
    cls_hi = causal_indicator(st, worldline.position_at(hi), p_E, co);
  }
  if (cls_hi == 0) return hi;
  if (cls_hi < 0)
    throw Error(ErrorCode::NoInterception,
                "no lightcone crossing found along the observer worldline");

  for (int it = 0; it < 120; ++it) {
    const double mid = 0.5 * (lo + hi);
    const int cls = causal_indicator(st, worldline.position_at(mid), p_E, co);
    if (cls == 0) return mid;
    if (cls < 0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-14 * s_end) break;
  }
  return 0.5 * (lo + hi);
}

Plane transported_plane(const Spacetime& st, const Plane& from, std::span<const Curve> path) {
  Plane out;
  out.base = path.back().back().x;
  out.e1 = transport_along(st, TangentVector{from.base, from.e1}, path).v;
  out.e2 = transport_along(st, TangentVector{from.base, from.e2}, path).v;
  return out;
}

// Largest principal angle between two 2-planes at the same event, from the
// singular values of the mutual Gram matrix.
double plane_tilt(const Spacetime& st, const Plane& a, const Plane& b) {
  const Mat4 g = st.metric_at(a.base);
  const double m00 = bilinear(g, a.e1, b.e1);
  const double m01 = bilinear(g, a.e1, b.e2);
  const double m10 = bilinear(g, a.e2, b.e1);
  const double m11 = bilinear(g, a.e2, b.e2);
  const double t = m00 * m00 + m01 * m01 + m10 * m10 + m11 * m11;
  const double det = m00 * m11 - m01 * m10;
  const double disc = std::sqrt(std::max(t * t - 4.0 * det * det, 0.0));
  const double sigma_min = std::sqrt(std::max(0.5 * (t - disc), 0.0));
  return std::acos(std::clamp(sigma_min, 0.0, 1.0));
}

Vec4 in_plane(const Frame& frame, double angle) {
  return add(scale(frame.e[1], std::cos(angle)), scale(frame.e[2], std::sin(angle)));
}

double relative_null_residual(const Spacetime& st, const Curve& c) {
  const Vec4& u0 = c.front().u;
  return std::abs(st.inner(c.front().x, u0, u0)) / dot_euclid(u0, u0);
}

struct ArmBuild {
  Curve beam, worldline, head, tail, signal;
  double s_cross = 0.0;
  double speed = 0.0;
};

// One observer arm: interception, lightcone crossing, worldline split, and
// the null signal geodesic onto the past cone of E.
ArmBuild build_arm(const Spacetime& st, const Frame& frame, const Vec4& p_E, const Vec4& k,
                   const ExperimentConfig& cfg) {
  const ConnectOptions co = connect_options(cfg);
  ArmBuild arm;
  InterceptResult hit = intercept_beam(st, frame, p_E, k, cfg.observer_speed, cfg);
  arm.beam = std::move(hit.beam);
  arm.worldline = std::move(hit.worldline);
  arm.speed = hit.speed;
  arm.s_cross = lightcone_crossing(st, arm.worldline, p_E, co);

  const TangentVector launch{frame.base, arm.worldline.front().u};
  arm.head = shoot_geodesic(st, frame.base, launch, arm.s_cross, cfg.step);
  const CurveSample& join = arm.head.back();
  arm.tail = shoot_geodesic(st, join.x, TangentVector{join.x, join.u},
                            arm.worldline.back().param - arm.s_cross, cfg.step);
  arm.signal = connect_geodesic(st, join.x, p_E, CurveKind::NullGeodesic, co);
  return arm;
}

ExperimentConfig validated(const Spacetime& st, const ExperimentConfig& cfg) {
  st.require_in_chart(cfg.p_O);
  check_finite(cfg.tau_E, "scenario.tau_E");
  if (cfg.tau_E <= 0.0)
    throw Error(ErrorCode::ConfigError, "emission proper time must be positive",
                "scenario.tau_E");
  check_finite(cfg.observer_speed, "scenario.observer_speed");
  if (cfg.observer_speed <= 0.0 || cfg.observer_speed >= 1.0)
    throw Error(ErrorCode::ConfigError, "observer speed must lie strictly between 0 and 1",
                "scenario.observer_speed");
  check_finite(cfg.step, "scenario.step");
  if (cfg.step <= 0.0 || cfg.step > 0.1)
    throw Error(ErrorCode::ConfigError, "integrator step must lie in (0, 0.1]",
                "scenario.step");
  if (cfg.dirs_a.empty())
    throw Error(ErrorCode::ConfigError, "side A needs at least one measurement direction",
                "scenario.directions_a");
  if (cfg.dirs_b.empty())
    throw Error(ErrorCode::ConfigError, "side B needs at least one measurement direction",
                "scenario.directions_b");
  for (double d : cfg.dirs_a) check_finite(d, "scenario.directions_a");
  for (double d : cfg.dirs_b) check_finite(d, "scenario.directions_b");
  return cfg;
}

}  // namespace

ExperimentGeometry build_geometry(const Spacetime& st, const ExperimentConfig& config) {
  ExperimentGeometry geom;
  geom.config = validated(st, config);
  const ExperimentConfig& cfg = geom.config;

  if (cfg.frame_O) {
    if (norm_euclid(sub(cfg.frame_O->base, cfg.p_O)) > 1e-9)
      throw Error(ErrorCode::ConfigError, "frame is not based at the origin event",
                  "scenario.frame");
    if (frame_orthonormality_defect(st, *cfg.frame_O) > kFrameTol)
      throw Error(ErrorCode::ConfigError, "frame is not orthonormal at the origin event",
                  "scenario.frame");
    geom.frame_O = *cfg.frame_O;
  } else {
    geom.frame_O = orthonormal_frame_at(st, cfg.p_O);
  }
  const Frame& frame = geom.frame_O;

  Vec4 d = frame.e[3];
  if (cfg.d_O) {
    d = *cfg.d_O;
    if (std::abs(st.inner(cfg.p_O, d, d) - 1.0) > kFrameTol)
      throw Error(ErrorCode::ConfigError, "launch axis must be a unit spacelike vector",
                  "scenario.d_O");
    for (int i = 0; i < 3; ++i) {
      if (std::abs(st.inner(cfg.p_O, d, frame.e[static_cast<std::size_t>(i)])) > kFrameTol)
        throw Error(ErrorCode::ConfigError,
                    "launch axis must be orthogonal to the frame's e0, e1, e2",
                    "scenario.d_O");
    }
  }

  geom.p_O = cfg.p_O;
  geom.m_O = Plane{cfg.p_O, frame.e[1], frame.e[2]};

  geom.gamma_OE =
      shoot_geodesic(st, cfg.p_O, TangentVector{cfg.p_O, frame.e[0]}, cfg.tau_E, cfg.step);
  geom.p_E = geom.gamma_OE.back().x;

  const std::span<const Curve> oe(&geom.gamma_OE, 1);
  geom.u_E = transport_along(st, TangentVector{cfg.p_O, frame.e[0]}, oe);
  geom.d_E = transport_along(st, TangentVector{cfg.p_O, d}, oe);
  geom.m_E = transported_plane(st, geom.m_O, oe);
  geom.v_E = TangentVector{geom.p_E, geom.m_E.e1};

  const Vec4 k_A = add(geom.u_E.v, geom.d_E.v);
  const Vec4 k_B = sub(geom.u_E.v, geom.d_E.v);

  ArmBuild arm_a = build_arm(st, frame, geom.p_E, k_A, cfg);
  geom.gamma_EA = std::move(arm_a.beam);
  geom.gamma_OA = std::move(arm_a.worldline);
  geom.gamma_Oalpha = std::move(arm_a.head);
  geom.gamma_alphaA = std::move(arm_a.tail);
  geom.gamma_alphaE = std::move(arm_a.signal);
  geom.p_A = geom.gamma_EA.back().x;
  geom.p_alpha = geom.gamma_Oalpha.back().x;
  geom.s_alpha = arm_a.s_cross;
  geom.s_A = geom.gamma_OA.back().param;
  geom.speed_A = arm_a.speed;
  geom.null_residual_alpha = relative_null_residual(st, geom.gamma_alphaE);

  ArmBuild arm_b = build_arm(st, frame, geom.p_E, k_B, cfg);
  geom.gamma_EB = std::move(arm_b.beam);
  geom.gamma_OB = std::move(arm_b.worldline);
  geom.gamma_Obeta = std::move(arm_b.head);
  geom.gamma_betaB = std::move(arm_b.tail);
  geom.gamma_betaE = std::move(arm_b.signal);
  geom.p_B = geom.gamma_EB.back().x;
  geom.p_beta = geom.gamma_Obeta.back().x;
  geom.s_beta = arm_b.s_cross;
  geom.s_B = geom.gamma_OB.back().param;
  geom.speed_B = arm_b.speed;
  geom.null_residual_beta = relative_null_residual(st, geom.gamma_betaE);

  const std::span<const Curve> oa(&geom.gamma_OA, 1);
  const std::span<const Curve> ob(&geom.gamma_OB, 1);
  geom.m_A = transported_plane(st, geom.m_O, oa);
  geom.m_B = transported_plane(st, geom.m_O, ob);

  const std::array<Curve, 2> to_a{geom.gamma_OE, geom.gamma_EA};
  const std::array<Curve, 2> to_b{geom.gamma_OE, geom.gamma_EB};
  geom.mbar_A = transported_plane(st, geom.m_O, to_a);
  geom.mbar_B = transported_plane(st, geom.m_O, to_b);

  return geom;
}

HolonomySplit decompose_holonomy(const Spacetime& st, const ExperimentGeometry& geom) {
  HolonomySplit out;

  const auto arm = [&](const Curve& head, const Curve& tail, const Curve& signal,
                       const Curve& beam, const Curve& worldline, double& h1, double& h2,
                       double& full, double& defect) {
    const std::array<Curve, 3> first{head, signal, geom.gamma_OE.reversed()};
    h1 = loop_rotation_angle(st, first, geom.m_O);

    const std::span<const Curve> head_span(&head, 1);
    const Plane m_cross = transported_plane(st, geom.m_O, head_span);
    const std::array<Curve, 3> second{tail, beam.reversed(), signal.reversed()};
    h2 = loop_rotation_angle(st, second, m_cross);

    const std::array<Curve, 3> whole{worldline, beam.reversed(), geom.gamma_OE.reversed()};
    full = loop_rotation_angle(st, whole, geom.m_O);
    defect = std::abs(wrap_pi(full - h1 - h2));
  };

  arm(geom.gamma_Oalpha, geom.gamma_alphaA, geom.gamma_alphaE, geom.gamma_EA, geom.gamma_OA,
      out.theta_A1, out.theta_A2, out.loop_A, out.split_defect_A);
  arm(geom.gamma_Obeta, geom.gamma_betaB, geom.gamma_betaE, geom.gamma_EB, geom.gamma_OB,
      out.theta_B1, out.theta_B2, out.loop_B, out.split_defect_B);
  return out;
}

AngleSet extract_angles(const Spacetime& st, const ExperimentGeometry& geom, std::size_t choice_a,
                        std::size_t choice_b, double theta_v, const HolonomySplit* split) {
  const ExperimentConfig& cfg = geom.config;
  if (choice_a >= cfg.dirs_a.size())
    throw Error(ErrorCode::ConfigError, "side A direction index out of range",
                "scenario.directions_a");
  if (choice_b >= cfg.dirs_b.size())
    throw Error(ErrorCode::ConfigError, "side B direction index out of range",
                "scenario.directions_b");

  const HolonomySplit holo = split ? *split : decompose_holonomy(st, geom);

  AngleSet angles;
  angles.theta_a = wrap_two_pi(cfg.dirs_a[choice_a]);
  angles.theta_b = wrap_two_pi(cfg.dirs_b[choice_b]);
  angles.theta_v = wrap_two_pi(theta_v);
  angles.theta_ab = wrap_two_pi(angles.theta_a - angles.theta_b);
  angles.theta_av = wrap_two_pi(angles.theta_a - angles.theta_v);
  angles.theta_bv = wrap_two_pi(angles.theta_b - angles.theta_v);
  angles.theta_A1 = holo.theta_A1;
  angles.theta_A2 = holo.theta_A2;
  angles.theta_B1 = holo.theta_B1;
  angles.theta_B2 = holo.theta_B2;

  const Frame& frame = geom.frame_O;
  const Vec4 a_dir = in_plane(frame, angles.theta_a);
  const Vec4 b_dir = in_plane(frame, angles.theta_b);
  const Vec4 v_dir = in_plane(frame, angles.theta_v);

  const auto measured = [&](const Vec4& device_dir, const Curve& worldline, const Curve& beam,
                            const Plane& plane) {
    const std::span<const Curve> arm_span(&worldline, 1);
    TangentVector device = transport_along(st, TangentVector{geom.p_O, device_dir}, arm_span);
    device.base = plane.base;

    const std::array<Curve, 2> beam_path{geom.gamma_OE, beam};
    TangentVector pol = transport_along(st, TangentVector{geom.p_O, v_dir}, beam_path);
    pol.base = plane.base;

    return wrap_two_pi(plane_angle(st, plane, device) - plane_angle(st, plane, pol));
  };

  angles.theta_A = measured(a_dir, geom.gamma_OA, geom.gamma_EA, geom.m_A);
  angles.theta_B = measured(b_dir, geom.gamma_OB, geom.gamma_EB, geom.m_B);
  angles.phi_A = plane_tilt(st, geom.m_A, geom.mbar_A);
  angles.phi_B = plane_tilt(st, geom.m_B, geom.mbar_B);

  angles.psi_minus = wrap_two_pi(holo.theta_A1 - holo.theta_B1);
  angles.theta_minus = wrap_two_pi(angles.theta_A - angles.theta_B + kOppositeBeamOffset);
  angles.theta_plus = wrap_two_pi(angles.theta_A + angles.theta_B - kOppositeBeamOffset);
  angles.phi_plus = wrap_two_pi(angles.theta_a + angles.theta_b + holo.theta_A1 + holo.theta_B1 -
                                kOppositeBeamOffset);
  return angles;
}

}  // namespace cchsh
