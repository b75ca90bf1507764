// cchsh - parameter sweeps tying the geometry to the dynamics
//
// A sweep walks a grid of central masses, builds the full experiment in each
// spacetime, splits the measured holonomies, and feeds the resulting angles
// into every level of the probability machinery: the single-offset closed
// form, the full observer-side quadrature, and (when a seed is given) the
// Monte Carlo estimator. Gridpoints are independent, failures are recorded
// in place of results, and all randomness flows through counter streams
// keyed by (seed, gridpoint), so reports are bit-identical for any thread
// count.

#ifndef CCHSH_SWEEP_HPP_
#define CCHSH_SWEEP_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dynamics.hpp"
#include "inverse.hpp"
#include "scenario.hpp"

namespace cchsh {

inline constexpr const char kCodeVersion[] = "cchsh 1.0.0";

// The non-swept part of the spacetime grid: each gridpoint reuses this lump
// shape at its own mass. Mass zero means exactly flat space.
struct SpacetimeFamily {
  double softening = 0.05;
  std::array<double, 3> center = {0.25, 0.2, 0.35};
  std::array<double, 3> spin = {0.0, 0.0, 0.0};
};

struct SweepSpec {
  SpacetimeFamily family;
  std::vector<double> masses;  // the parameter grid, one gridpoint each
  ExperimentConfig experiment;
  // Which of the configured analyzer directions the probability tables use.
  int choice_a = 0;
  int choice_b = 0;
  AngleDistribution theta_v = AngleDistribution::uniform();
  std::vector<AngleQuad> quads;           // CHSH settings evaluated per gridpoint
  std::vector<double> quantum_targets;    // separations for the singlet mismatch
  std::uint64_t mc_samples = 0;           // zero skips the Monte Carlo table
  std::optional<std::uint64_t> seed;      // required when mc_samples > 0
  int threads = 1;
};

struct GridpointRecord {
  int index = 0;
  double mass = 0.0;
  bool ok = false;
  std::string error;  // "<Code>: message" when the build failed

  // Split holonomies and the offset angle driving the simplified dynamics.
  double theta_a1 = 0.0;
  double theta_a2 = 0.0;
  double theta_b1 = 0.0;
  double theta_b2 = 0.0;
  double psi_minus = 0.0;

  OutcomeProbabilities simp;      // single-offset closed form
  OutcomeProbabilities po;        // full quadrature with the measured tilts
  OutcomeProbabilities mc_model;  // the zero-tilt quadrature the sampler draws from
  bool mc_run = false;
  McResult mc;

  std::vector<double> e_values;          // four correlations per quad, in quad order
  std::vector<double> s_values;          // one statistic per quad
  std::vector<double> quantum_mismatch;  // RMS outcome gap per target separation
};

struct SweepReport {
  std::uint64_t config_hash = 0;  // FNV-1a over the canonical spec text
  bool seeded = false;
  std::uint64_t seed_used = 0;
  std::string code_version;
  std::vector<GridpointRecord> records;
};

// Canonical text form of a spec; hashing it yields the provenance tag that
// reports and their consumers use to tell runs apart.
std::string canonical_spec_text(const SweepSpec& spec);
std::uint64_t spec_hash(const SweepSpec& spec);

// Runs every gridpoint, never throwing for per-gridpoint failures; those are
// recorded on their row and the sweep continues. Throws ConfigError for an
// invalid spec and SeedRequired when Monte Carlo is requested unseeded.
SweepReport run_sweep(const SweepSpec& spec);

// Randomized curvature draws for the empirical offset distribution. Draw k
// reads counter streams (seed, k, 0..4): mass and the three center
// coordinates interpolate their ranges, the spin magnitude is signed-uniform
// in [-spin_max, spin_max] about the z axis.
struct PerturbationSpec {
  double mass_low = 0.0;
  double mass_high = 0.0;
  std::array<double, 3> center_low = {0.25, 0.2, 0.35};
  std::array<double, 3> center_high = {0.25, 0.2, 0.35};
  double spin_max = 0.0;
  double softening = 0.05;
  int bins = 64;  // histogram resolution of the result
};

struct EmpiricalPsi {
  AngleDistribution distribution = AngleDistribution::uniform();
  std::vector<double> samples;  // offsets wrapped to (-pi, pi], draw order
  int failures = 0;
  int draws = 0;
};

// Builds one geometry per draw and histograms the measured offsets
// psi = theta_A1 - theta_B1. Failed builds are skipped and counted;
// TooManyFailures past twenty percent. Degenerate spread collapses to an
// exact point mass so downstream consumers see the atom, not a smeared bin.
EmpiricalPsi empirical_psi_distribution(const ExperimentConfig& experiment,
                                        const PerturbationSpec& perturbation, int n_draws,
                                        std::uint64_t seed, int threads = 1);

}  // namespace cchsh

#endif  // CCHSH_SWEEP_HPP_
