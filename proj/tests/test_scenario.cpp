// Experiment construction tests. Flat spacetime gives closed forms for every
// event: with unit emission time and speed beta, the interception sits at
// t = 1/(1-beta) and the lightcone crossing at t = 1/(1+beta). Weak-field
// cases check the transport identities instead, since no closed form exists.

#include <doctest.h>

#include <array>
#include <cmath>

#include "angles.hpp"
#include "geometry.hpp"
#include "metric.hpp"
#include "scenario.hpp"

using namespace cchsh;

namespace {

template <typename Fn>
bool fails_with(ErrorCode want, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == want;
  } catch (...) {
    return false;
  }
  return false;
}

ExperimentConfig symmetric_config() {
  ExperimentConfig cfg;
  cfg.p_O = {0.0, 0.0, 0.0, 0.0};
  cfg.tau_E = 1.0;
  cfg.observer_speed = 0.5;
  cfg.dirs_a = {0.0, kPi / 3.0, kPi / 4.0};
  cfg.dirs_b = {0.0, kPi / 8.0};
  cfg.step = 2e-3;
  return cfg;
}

// Off-center mass so no symmetry plane contains the whole construction;
// otherwise the loop holonomies vanish by reflection.
Spacetime lumpy(double mass) {
  return Spacetime::weak_field(mass, 0.05, {0.25, 0.2, 0.35});
}

// Same lump, but rotating. The angular momentum scales with the mass, so the
// in-plane rotation picked up around a closed loop is first order in the mass
// and large enough to measure against tight tolerances.
Spacetime spinning(double mass) {
  return Spacetime::weak_field(mass, 0.05, {0.25, 0.2, 0.35}, {0.0, 0.0, 0.3});
}

double split_sum_defect(const AngleSet& a) {
  return std::abs(wrap_pi(a.theta_A - (a.theta_av + a.theta_A1 + a.theta_A2)));
}

double split_sum_defect_b(const AngleSet& a) {
  return std::abs(wrap_pi(a.theta_B - (a.theta_bv + a.theta_B1 + a.theta_B2)));
}

}  // namespace

TEST_CASE("config validation rejects out-of-range fields") {
  const Spacetime st = Spacetime::minkowski();

  auto bad = symmetric_config();
  bad.tau_E = 0.0;
  CHECK(fails_with(ErrorCode::ConfigError, [&] { build_geometry(st, bad); }));

  bad = symmetric_config();
  bad.observer_speed = 1.0;
  CHECK(fails_with(ErrorCode::ConfigError, [&] { build_geometry(st, bad); }));

  bad = symmetric_config();
  bad.observer_speed = -0.2;
  CHECK(fails_with(ErrorCode::ConfigError, [&] { build_geometry(st, bad); }));

  bad = symmetric_config();
  bad.dirs_a.clear();
  CHECK(fails_with(ErrorCode::ConfigError, [&] { build_geometry(st, bad); }));

  bad = symmetric_config();
  bad.dirs_b = {0.1, std::nan("")};
  CHECK(fails_with(ErrorCode::ConfigError, [&] { build_geometry(st, bad); }));

  bad = symmetric_config();
  bad.d_O = Vec4{0.0, 0.0, 0.0, 2.0};  // not unit
  CHECK(fails_with(ErrorCode::ConfigError, [&] { build_geometry(st, bad); }));

  bad = symmetric_config();
  bad.d_O = Vec4{0.0, 1.0, 0.0, 0.0};  // collides with the polarization plane
  CHECK(fails_with(ErrorCode::ConfigError, [&] { build_geometry(st, bad); }));

  bad = symmetric_config();
  Frame off = orthonormal_frame_at(st, {0.0, 1.0, 0.0, 0.0});
  bad.frame_O = off;
  CHECK(fails_with(ErrorCode::ConfigError, [&] { build_geometry(st, bad); }));

  bad = symmetric_config();
  bad.step = 0.0;
  CHECK(fails_with(ErrorCode::ConfigError, [&] { build_geometry(st, bad); }));
}

TEST_CASE("flat symmetric construction matches the closed form") {
  const Spacetime st = Spacetime::minkowski();
  const auto geom = build_geometry(st, symmetric_config());

  CHECK(geom.p_E[0] == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 1; i < 4; ++i)
    CHECK(std::abs(geom.p_E[static_cast<std::size_t>(i)]) < 1e-12);

  // Interception at t = 1/(1-beta) = 2, displaced one unit along the axis.
  CHECK(geom.p_A[0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(geom.p_A[3] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(geom.p_B[0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(geom.p_B[3] == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK(std::abs(geom.p_A[1]) < 1e-9);
  CHECK(std::abs(geom.p_A[2]) < 1e-9);

  CHECK(geom.speed_A == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(geom.speed_B == doctest::Approx(0.5).epsilon(1e-9));

  // Lightcone crossing at t = 1/(1+beta) = 2/3.
  CHECK(geom.p_alpha[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  CHECK(geom.p_alpha[3] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  CHECK(geom.p_beta[3] == doctest::Approx(-1.0 / 3.0).epsilon(1e-6));
  CHECK(geom.s_alpha == doctest::Approx(std::sqrt(3.0) / 3.0).epsilon(1e-6));
  CHECK(geom.s_A == doctest::Approx(std::sqrt(3.0)).epsilon(1e-9));

  CHECK(geom.gamma_OE.kind == CurveKind::TimelikeGeodesic);
  CHECK(geom.gamma_OA.kind == CurveKind::TimelikeGeodesic);
  CHECK(geom.gamma_OB.kind == CurveKind::TimelikeGeodesic);
  CHECK(geom.gamma_EA.kind == CurveKind::NullGeodesic);
  CHECK(geom.gamma_alphaE.kind == CurveKind::NullGeodesic);
  CHECK(geom.null_residual_alpha < 1e-6);
  CHECK(geom.null_residual_beta < 1e-6);

  // The two measurement events are spacelike separated.
  const Vec4 gap = sub(geom.p_B, geom.p_A);
  CHECK(st.classify(geom.p_A, gap) == CausalClass::Spacelike);

  // Reference polarization: in the emission plane, transverse to the beam.
  CHECK(std::abs(st.inner(geom.p_E, geom.v_E.v, geom.d_E.v)) < 1e-7);
  CHECK(std::abs(st.inner(geom.p_E, geom.v_E.v, geom.u_E.v)) < 1e-7);
  CHECK(st.inner(geom.p_E, geom.v_E.v, geom.v_E.v) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("flat holonomy vanishes and the split is exact") {
  const Spacetime st = Spacetime::minkowski();
  const auto geom = build_geometry(st, symmetric_config());
  const auto holo = decompose_holonomy(st, geom);

  CHECK(std::abs(holo.theta_A1) < 1e-9);
  CHECK(std::abs(holo.theta_A2) < 1e-9);
  CHECK(std::abs(holo.theta_B1) < 1e-9);
  CHECK(std::abs(holo.theta_B2) < 1e-9);
  CHECK(std::abs(holo.loop_A) < 1e-9);
  CHECK(std::abs(holo.loop_B) < 1e-9);
  CHECK(holo.split_defect_A < 1e-9);
  CHECK(holo.split_defect_B < 1e-9);
}

TEST_CASE("flat angle extraction is planar trigonometry") {
  const Spacetime st = Spacetime::minkowski();
  const auto geom = build_geometry(st, symmetric_config());
  const auto holo = decompose_holonomy(st, geom);

  // theta_a = 0, theta_v = 0: the device and the polarization coincide.
  auto a0 = extract_angles(st, geom, 0, 0, 0.0, &holo);
  CHECK((a0.theta_A < 1e-9 || kTwoPi - a0.theta_A < 1e-9));
  CHECK(a0.theta_av == doctest::Approx(0.0));

  // theta_a = pi/3, theta_v = pi/6: difference comes out exactly.
  auto a1 = extract_angles(st, geom, 1, 0, kPi / 6.0, &holo);
  CHECK(a1.theta_A == doctest::Approx(kPi / 6.0).epsilon(1e-9));
  CHECK(a1.theta_av == doctest::Approx(kPi / 6.0).epsilon(1e-12));

  // Decomposition identity and the derived sums, flat case.
  for (const auto& a : {a0, a1}) {
    CHECK(split_sum_defect(a) < 1e-9);
    CHECK(split_sum_defect_b(a) < 1e-9);
    CHECK(a.psi_minus == doctest::Approx(wrap_two_pi(a.theta_A1 - a.theta_B1)).epsilon(1e-12));
    CHECK(wrap_pi(a.theta_minus - (a.theta_ab + a.psi_minus + kPi)) ==
          doctest::Approx(0.0).epsilon(1e-9));
    CHECK(wrap_pi(a.phi_plus - (a.theta_a + a.theta_b + a.theta_A1 + a.theta_B1 - kPi)) ==
          doctest::Approx(0.0).epsilon(1e-12));
    CHECK(a.phi_A < 1e-6);
    CHECK(a.phi_B < 1e-6);
  }

  auto a2 = extract_angles(st, geom, 2, 1, 0.4, &holo);
  CHECK(a2.theta_A == doctest::Approx(wrap_two_pi(kPi / 4.0 - 0.4)).epsilon(1e-9));
  CHECK(a2.theta_B == doctest::Approx(wrap_two_pi(kPi / 8.0 - 0.4)).epsilon(1e-9));

  CHECK(fails_with(ErrorCode::ConfigError, [&] { extract_angles(st, geom, 9, 0, 0.0, &holo); }));
  CHECK(fails_with(ErrorCode::ConfigError, [&] { extract_angles(st, geom, 0, 5, 0.0, &holo); }));
}

TEST_CASE("weak field construction keeps every causal invariant") {
  const Spacetime st = lumpy(1e-4);
  const auto geom = build_geometry(st, symmetric_config());

  CHECK(geom.gamma_OE.kind == CurveKind::TimelikeGeodesic);
  CHECK(geom.gamma_OA.kind == CurveKind::TimelikeGeodesic);
  CHECK(geom.gamma_OB.kind == CurveKind::TimelikeGeodesic);
  CHECK(geom.gamma_EA.kind == CurveKind::NullGeodesic);
  CHECK(geom.gamma_EB.kind == CurveKind::NullGeodesic);
  CHECK(geom.gamma_alphaE.kind == CurveKind::NullGeodesic);
  CHECK(geom.gamma_betaE.kind == CurveKind::NullGeodesic);
  CHECK(geom.null_residual_alpha < 1e-6);
  CHECK(geom.null_residual_beta < 1e-6);
  CHECK(geom.speed_A == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(geom.speed_B == doctest::Approx(0.5).epsilon(1e-9));

  CHECK(std::abs(st.inner(geom.p_E, geom.v_E.v, geom.d_E.v)) < 1e-7);
  CHECK(std::abs(st.inner(geom.p_E, geom.v_E.v, geom.u_E.v)) < 1e-7);

  // The split events sit on their worldlines: the head curve ends where the
  // tail begins, and the recombined arm ends at the measurement event.
  const Vec4 rejoin = sub(geom.gamma_alphaA.back().x, geom.p_A);
  CHECK(norm_euclid(rejoin) < 1e-7);

  const auto angles = extract_angles(st, geom, 1, 1, 0.3);
  CHECK(split_sum_defect(angles) < 1e-6);
  CHECK(split_sum_defect_b(angles) < 1e-6);
  CHECK(angles.phi_A < 1e-2);
  CHECK(angles.phi_B < 1e-2);
}

TEST_CASE("loop splitting is additive and holonomy grows with mass") {
  const auto cfg = symmetric_config();

  // A non-rotating lump bends the loops but does not turn the polarization
  // plane: the in-plane rotation stays at integrator-noise level even though
  // the transported vectors tilt out of the original plane.
  {
    const Spacetime st = lumpy(2e-4);
    const auto geom = build_geometry(st, cfg);
    const auto holo = decompose_holonomy(st, geom);
    CHECK(holo.split_defect_A < 1e-6);
    CHECK(holo.split_defect_B < 1e-6);
    CHECK(std::abs(holo.theta_A1) < 1e-8);
  }

  // A rotating lump does turn it, in proportion to its angular momentum.
  // Doubling the mass doubles the momentum, so the magnitude must climb.
  double previous = 1e-6;
  for (double mass : {1e-4, 2e-4, 4e-4}) {
    const Spacetime st = spinning(mass);
    const auto geom = build_geometry(st, cfg);
    const auto holo = decompose_holonomy(st, geom);

    CHECK(holo.split_defect_A < 1e-6);
    CHECK(holo.split_defect_B < 1e-6);
    CHECK(std::abs(holo.theta_A1) > previous);
    previous = std::abs(holo.theta_A1);
  }
}

TEST_CASE("angles are invariant under a rigid frame rotation") {
  // Rotating source, so the holonomy being checked for invariance is a real
  // signal a few decades above the comparison tolerance.
  const Spacetime st = spinning(1e-4);
  const double chi = 0.7;

  auto cfg = symmetric_config();
  const auto base_geom = build_geometry(st, cfg);
  const auto base_holo = decompose_holonomy(st, base_geom);
  const auto base = extract_angles(st, base_geom, 1, 0, 0.25, &base_holo);

  // Rotate e1, e2 by chi and compensate in every configured angle, so the
  // physical directions are unchanged.
  Frame rotated = base_geom.frame_O;
  rotated.e[1] = add(scale(base_geom.frame_O.e[1], std::cos(chi)),
                     scale(base_geom.frame_O.e[2], std::sin(chi)));
  rotated.e[2] = add(scale(base_geom.frame_O.e[1], -std::sin(chi)),
                     scale(base_geom.frame_O.e[2], std::cos(chi)));
  cfg.frame_O = rotated;
  for (double& d : cfg.dirs_a) d -= chi;
  for (double& d : cfg.dirs_b) d -= chi;

  const auto rot_geom = build_geometry(st, cfg);
  const auto rot_holo = decompose_holonomy(st, rot_geom);
  const auto rot = extract_angles(st, rot_geom, 1, 0, 0.25 - chi, &rot_holo);

  CHECK(wrap_pi(rot.theta_A - base.theta_A) == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(wrap_pi(rot.theta_B - base.theta_B) == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(wrap_pi(rot.theta_av - base.theta_av) == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(wrap_pi(rot.theta_A1 - base.theta_A1) == doctest::Approx(0.0).epsilon(1e-8));
}
