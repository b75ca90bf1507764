// cchsh - the quantum-matching inverse problem
//
// The simplified dynamics leave one unknown, the offset density P(psi).
// Requiring the model to reproduce the singlet probabilities at a set of
// analyzer separations theta_ab gives a linear integral constraint per
// target:
//
//   1/2 - cos(theta_ab) = integral P(psi) cos^2(theta_ab + psi + pi) dpsi
//
// Discretized over bins this is a nonnegative least squares problem with a
// normalization constraint. Expanding cos^2 shows only the two second
// Fourier moments (C2, S2) of P enter, so feasibility reduces to a disc
// constraint those moments must satisfy; that analysis provides exact lower
// bounds the solver can be checked against.

#ifndef CCHSH_INVERSE_HPP_
#define CCHSH_INVERSE_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "distributions.hpp"

namespace cchsh {

struct InverseProblem {
  std::vector<double> targets;  // theta_ab values the matching must hold at
  int bins = 96;                // offset density resolution
  double regularization = 0.0;  // optional Tikhonov weight on the density
};

// Discretized constraints: row k is cos^2(theta_k + psi_j + pi) * dpsi over
// the bin nodes psi_j, with one trailing normalization row (all dpsi, rhs
// 1). Nodes sit at bin left edges so that angles commensurate with the bin
// width are represented exactly by a single bin.
struct LinearSystem {
  std::vector<std::vector<double>> matrix;
  std::vector<double> rhs;
  int target_rows = 0;
};

struct InverseSolution {
  AngleDistribution density;
  double residual = 0.0;  // RMS violation over the target rows
  double c2 = 0.0;        // second cosine moment of the density
  double s2 = 0.0;        // second sine moment
  bool feasible = false;  // residual below the feasibility tolerance
  int iterations = 0;
  double step_norm = 0.0;  // final projected-step displacement
};

struct SolveOptions {
  int max_iterations = 100000;
  double step_tolerance = 1e-10;      // projected-step displacement
  double feasibility_tolerance = 1e-8;
};

struct FourierFeasibility {
  // Per-target affine constraint a1*C2 + a2*S2 = b, stored as {a1, a2, b}.
  std::vector<std::array<double, 3>> constraints;
  double c2 = 0.0;  // best moments over the unit disc
  double s2 = 0.0;
  double residual_lower_bound = 0.0;  // RMS at those moments
  bool feasible = false;
  bool on_boundary = false;  // optimum pinned to the disc edge
};

void validate_problem(const InverseProblem& problem);

LinearSystem assemble_system(const InverseProblem& problem);

// Projected-gradient descent on the simplex of bin masses with exact line
// search along the projection arc (the step length is probed over a
// doubling ladder so the iterate can cross simplex faces in one move).
// Deterministic: no randomness enters. Throws NoConvergence with the best
// residual in the message if the iteration budget runs out.
InverseSolution solve_nnls(const InverseProblem& problem, const SolveOptions& options = {});

// Exact analysis of the same constraints in moment space: intersects the
// affine target constraints with the disc C2^2 + S2^2 <= 1 and returns the
// RMS lower bound every density must respect.
FourierFeasibility fourier_feasibility(const std::vector<double>& targets,
                                       double feasibility_tolerance = 1e-8);

// Analyzer settings for the four-correlation statistic, in the order
// (a, a', b, b').
struct AngleQuad {
  double a = 0.0;
  double a_alt = 0.0;
  double b = 0.0;
  double b_alt = 0.0;
};

// S = |E(a-b) - E(a-b')| + |E(a'-b) + E(a'-b')| with E computed from the
// simplified dynamics under the given offset density.
double chsh_statistic(const AngleDistribution& psi_dist, const AngleQuad& angles);

struct ChshMaximum {
  double s_value = 0.0;
  AngleQuad angles;
  std::vector<double> density_bins;  // the maximizing binned density
  int bins = 0;
  int rounds = 0;
};

// Coordinate ascent over binned offset densities and angle quadruples:
// alternates an analytic angle update (the correlation is a pure second
// harmonic, so optimal settings follow from its amplitude and phase) with
// an exact density update (the objective is piecewise linear in the bin
// masses, so some single-bin density is optimal). Seeded restarts vary the
// starting bin.
ChshMaximum maximize_chsh(int bins = 128, int restarts = 8, std::uint64_t seed = 1);

}  // namespace cchsh

#endif  // CCHSH_INVERSE_HPP_
