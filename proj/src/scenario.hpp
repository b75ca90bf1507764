// cchsh - the two-beam correlation experiment, built on a spacetime
//
// Cast of events: the origin O, where the emitter and both observers part
// ways and where every angle convention is anchored; the emission event E,
// one unit of the emitter's proper time later; the measurement events A and
// B, where the outgoing null beams catch up with the two observers; and the
// signal points alpha and beta, where each observer's worldline crosses the
// past lightcone of E.
//
// Construction order. The emitter worldline gamma_OE is shot along the frame
// time axis. The two beams leave E along u_E +/- d_E. Each observer is a
// timelike geodesic from O whose endpoint lies on the respective beam; the
// launch direction is found by matching the configured coordinate speed, so
// in symmetric spacetimes it is exactly the +/- d_O launch of the idealized
// description and in lumpy ones it is the corrected path that still meets
// the beam. alpha and beta come from a sign-change search of the causal
// character of the connector to E along each observer worldline.
//
// Angles. Measurement directions and the reference polarization live in the
// plane m_O spanned by frame axes e1, e2 at O. Transported copies of that
// plane ride with every worldline (m_A, m_B) and with the beams (mbar_A,
// mbar_B). Holonomy angles are reported for loops traversed observer-arm
// first (O -> alpha -> E -> O and alpha -> A -> E -> alpha, with the
// mirrored loops on the B side); with that orientation the measured angle at
// the apparatus decomposes as theta_A = theta_av + theta_A1 + theta_A2.
// No pi offset appears here: the flip from measuring against the opposite
// beam is applied by consumers through kOppositeBeamOffset.

#ifndef CCHSH_SCENARIO_HPP_
#define CCHSH_SCENARIO_HPP_

#include <cstddef>
#include <optional>
#include <vector>

#include "geometry.hpp"
#include "metric.hpp"

namespace cchsh {

struct ExperimentConfig {
  Vec4 p_O{};
  double tau_E = 1.0;          // emitter proper time from O to the emission event
  double observer_speed = 0.5; // coordinate-speed parameter in (0, 1)
  std::vector<double> dirs_a;  // measurement direction angles in m_O, side A
  std::vector<double> dirs_b;  // same for side B
  // Orthonormal frame at p_O; Gram-Schmidt from the chart axes when absent.
  std::optional<Frame> frame_O;
  // Beam/launch axis; frame e3 when absent. Must be unit spacelike and
  // orthogonal to e0, e1, e2 so the beams are null and the polarization
  // plane is transverse.
  std::optional<Vec4> d_O;
  double step = 1e-3;          // integrator sample spacing for every curve
};

struct ExperimentGeometry {
  ExperimentConfig config;
  Frame frame_O;

  Vec4 p_O{}, p_E{}, p_A{}, p_B{}, p_alpha{}, p_beta{};

  Curve gamma_OE;                      // emitter worldline, timelike
  Curve gamma_OA, gamma_OB;            // observer worldlines, timelike
  Curve gamma_EA, gamma_EB;            // beams, null
  Curve gamma_alphaE, gamma_betaE;     // signal geodesics onto the past cone of E, null
  Curve gamma_Oalpha, gamma_alphaA;    // observer arm A split at p_alpha
  Curve gamma_Obeta, gamma_betaB;      // observer arm B split at p_beta

  Plane m_O, m_E;            // polarization plane at O and its copy at E
  Plane m_A, m_B;            // apparatus planes, carried by the observers
  Plane mbar_A, mbar_B;      // beam-carried planes at the measurement events

  TangentVector u_E{};       // emitter 4-velocity at E
  TangentVector d_E{};       // beam spatial axis at E
  TangentVector v_E{};       // zero-angle reference polarization at E

  double s_alpha = 0.0, s_A = 0.0;  // proper times along gamma_OA
  double s_beta = 0.0, s_B = 0.0;   // proper times along gamma_OB
  double speed_A = 0.0, speed_B = 0.0;                    // achieved launch speeds
  double null_residual_alpha = 0.0, null_residual_beta = 0.0;  // |g(u,u)| / |u|^2 of the signal geodesics
};

// Loop holonomy angles for both arms, split at the signal points, plus the
// single-loop angles around the full circuits and the mismatch between the
// two. The split identity theta_arm = theta_1 + theta_2 is exact for pure
// in-plane rotations; out-of-plane tilt enters at second order, so the
// defect doubles as a smallness diagnostic.
struct HolonomySplit {
  double theta_A1 = 0.0, theta_A2 = 0.0;
  double theta_B1 = 0.0, theta_B2 = 0.0;
  double loop_A = 0.0, loop_B = 0.0;              // full-circuit angles
  double split_defect_A = 0.0, split_defect_B = 0.0;
};

// Every angle the downstream probability rules consume, for one choice of
// measurement directions and one emission polarization angle. Stored in
// [0, 2*pi).
struct AngleSet {
  double theta_a = 0.0, theta_b = 0.0, theta_ab = 0.0;
  double theta_v = 0.0;
  double theta_av = 0.0, theta_bv = 0.0;
  double theta_A1 = 0.0, theta_A2 = 0.0;
  double theta_B1 = 0.0, theta_B2 = 0.0;
  double theta_A = 0.0, theta_B = 0.0;   // transported-plane angles at the apparatuses
  double phi_A = 0.0, phi_B = 0.0;       // tilt of the beam plane against the apparatus plane
  double psi_minus = 0.0;                // theta_A1 - theta_B1
  double theta_plus = 0.0, theta_minus = 0.0;
  double phi_plus = 0.0;                 // theta_a + theta_b + theta_A1 + theta_B1 - pi
};

// Builds every event, curve, and plane of the experiment. ConfigError for
// invalid configs, NoInterception when an observer cannot be matched to its
// beam, ChartEscape when the construction leaves the chart.
ExperimentGeometry build_geometry(const Spacetime& st, const ExperimentConfig& config);

HolonomySplit decompose_holonomy(const Spacetime& st, const ExperimentGeometry& geom);

// Angles for one run. Direction indices select from the configured lists.
// The holonomy split is recomputed unless a precomputed one is supplied.
AngleSet extract_angles(const Spacetime& st, const ExperimentGeometry& geom, std::size_t choice_a,
                        std::size_t choice_b, double theta_v,
                        const HolonomySplit* split = nullptr);

}  // namespace cchsh

#endif  // CCHSH_SCENARIO_HPP_
