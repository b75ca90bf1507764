// cchsh - joint measurement probabilities
//
// Three levels of dynamics, in decreasing generality:
//
//   po_*    the full observer-side probability: beam-frame angles and the
//           reference direction integrated against their densities
//   pe_*    conditioned on everything in the joint causal past, where the
//           probability factorizes into independent per-arm integrals
//   simp_*  the simplified model where a single offset angle psi carries
//           all the correlation and the reference direction is uniform
//
// Angle conventions: writing theta_av = theta_a - theta_v for the analyzer
// direction measured from the reference, arm A responds at
// theta_av + theta_A1 + theta_A2 and arm B at theta_bv - pi + theta_B1 +
// theta_B2. The pi offset accounts for the B side analyzing the opposite
// beam; it lives in kOppositeBeamOffset and nowhere else.

#ifndef CCHSH_DYNAMICS_HPP_
#define CCHSH_DYNAMICS_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "distributions.hpp"

namespace cchsh {

// Outcome response f(outcome, theta): the probability of reading +1 or -1
// from an analyzer misaligned by theta. Completeness f(+1) + f(-1) = 1 is
// built in; tables store the +1 branch and derive the other.
class ResponseFunction {
 public:
  static constexpr double kCompletenessTol = 1e-12;

  // f(+1, theta) = cos^2 theta, the classical polarizer response.
  static ResponseFunction malus();
  // Linear periodic interpolation of f(+1, .) sampled on a uniform grid
  // over [0, 2pi), first sample at 0.
  static ResponseFunction from_table(std::vector<double> plus_values);
  // Validates the completeness of a separately sampled -1 branch first.
  static ResponseFunction from_tables(const std::vector<double>& plus_values,
                                      const std::vector<double>& minus_values);

  double operator()(int outcome, double theta) const;
  bool tabulated() const { return !plus_.empty(); }
  int table_size() const { return static_cast<int>(plus_.size()); }

 private:
  ResponseFunction() = default;
  std::vector<double> plus_;  // empty means the closed-form malus response
};

struct OutcomeProbabilities {
  double pp = 0.0;  // p(+1, +1)
  double pm = 0.0;  // p(+1, -1)
  double mp = 0.0;  // p(-1, +1)
  double mm = 0.0;  // p(-1, -1)

  double at(int outcome_a, int outcome_b) const;
  double& at(int outcome_a, int outcome_b);
  double sum() const { return pp + pm + mp + mm; }
  // E = p(++) + p(--) - p(+-) - p(-+), the correlation entering CHSH.
  double correlation() const { return pp + mm - pm - mp; }
};

// Reference-direction integral under the classical response and a uniform
// reference: 1/4 (1/2 + cos^2 theta_minus) for equal outcomes,
// 1/4 (1/2 + sin^2 theta_minus) for opposite ones.
double iv_closed_form(int outcome_a, int outcome_b, double theta_minus);

// Same integral by quadrature against an arbitrary reference density and
// response. theta_minus in the closed form corresponds to
// (theta_a - theta_b) + (theta_A1 - theta_B1) + pi here.
double iv_quadrature(const ResponseFunction& response, const AngleDistribution& theta_v_dist,
                     int outcome_a, int outcome_b, double theta_a, double theta_b,
                     double theta_a1, double theta_b1, int nodes = kDefaultNodes1D);

// One arm of the conditioned dynamics: integrates the response over the
// residual tilt accumulated between emission and the measurement point.
// theta_known is the part of the angle fixed by the conditioning.
double pe_marginal(const ResponseFunction& response, const AngleDistribution& tilt_dist,
                   int outcome, double theta_known, int nodes = 0);

// Conditioned joint probability: the product of the two marginals. The
// factorization is structural, not numerical.
double pe_probability(const ResponseFunction& response, const AngleDistribution& theta_a2_dist,
                      const AngleDistribution& theta_b2_dist, int outcome_a, int outcome_b,
                      double theta_a_known, double theta_b_known, int nodes = 0);

struct PoOptions {
  int joint_nodes_per_axis = kDefaultNodesPerAxis2D;
  int theta_v_nodes = 512;
  // Budget for each tilt marginal integral and the resolution of the
  // precomputed tilt-response tables (histogram tilts only; point-mass
  // tilts are evaluated exactly).
  int tilt_nodes = kDefaultNodes1D;
  int tilt_table_size = 4096;
};

// Full observer-side dynamics: expectation of the conditioned probability
// over the joint (theta_A1, theta_B1) density and the reference density.
// All four outcomes come from one set of quadratures, so the four always
// sum to 1 up to rounding.
OutcomeProbabilities po_probabilities(const ResponseFunction& response,
                                      const AngleDistribution& theta_v_dist,
                                      const JointAngleDistribution& joint,
                                      const AngleDistribution& theta_a2_dist,
                                      const AngleDistribution& theta_b2_dist, double theta_a,
                                      double theta_b, const PoOptions& options = {});

double po_probability(const ResponseFunction& response, const AngleDistribution& theta_v_dist,
                      const JointAngleDistribution& joint, const AngleDistribution& theta_a2_dist,
                      const AngleDistribution& theta_b2_dist, int outcome_a, int outcome_b,
                      double theta_a, double theta_b, const PoOptions& options = {});

// Simplified dynamics: integral of the closed-form reference integral
// against the offset density, evaluated per bin at the density's native
// resolution. Only theta_ab = theta_a - theta_b enters.
double simp_probability(const AngleDistribution& psi_dist, int outcome_a, int outcome_b,
                        double theta_ab);

struct McResult {
  OutcomeProbabilities probabilities;
  OutcomeProbabilities standard_errors;            // binomial, sqrt(p(1-p)/n)
  std::array<std::uint64_t, 4> counts = {0, 0, 0, 0};  // pp, pm, mp, mm
  std::uint64_t samples = 0;
};

// Monte Carlo cross-check of the observer-side dynamics with zero beam
// tilt. Outcomes are drawn independently per arm given the sampled angles.
// Counter-based streams keyed on (seed, sample index) make the counts
// bit-identical for any thread count.
McResult mc_probability(std::optional<std::uint64_t> seed, std::uint64_t n_samples,
                        const ResponseFunction& response, const AngleDistribution& theta_v_dist,
                        const JointAngleDistribution& joint, double theta_a, double theta_b,
                        int n_threads = 1);

// Single-offset variant: theta_A1 = 0 and theta_B1 = -psi with psi drawn
// from psi_dist, the sampling analogue of simp_probability.
McResult mc_probability(std::optional<std::uint64_t> seed, std::uint64_t n_samples,
                        const ResponseFunction& response, const AngleDistribution& theta_v_dist,
                        const AngleDistribution& psi_dist, double theta_a, double theta_b,
                        int n_threads = 1);

// The singlet-state probabilities the inverse problem tries to match:
// 1/2 sin^2(theta_ab / 2) for equal outcomes, 1/2 cos^2(theta_ab / 2) for
// opposite ones.
double quantum_target(int outcome_a, int outcome_b, double theta_ab);

}  // namespace cchsh

#endif  // CCHSH_DYNAMICS_HPP_
