// Sweep tests. Flat gridpoints have closed forms for the whole table:
// psi = 0, E(s) = cos(2s)/2, and the outcome rows are 3/8 and 1/8 at zero
// separation. Curved gridpoints are checked against the same closed form
// evaluated at the measured offset, and the provenance contract (hash,
// seeding, thread invariance) is checked bit for bit.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "angles.hpp"
#include "distributions.hpp"
#include "error.hpp"
#include "sweep.hpp"

using namespace cchsh;

namespace {

template <typename Fn>
bool fails_with(ErrorCode code, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

SweepSpec base_spec() {
  SweepSpec spec;
  spec.masses = {0.0};
  spec.experiment.p_O = {0.0, 0.0, 0.0, 0.0};
  spec.experiment.tau_E = 1.0;
  spec.experiment.observer_speed = 0.5;
  spec.experiment.dirs_a = {0.0, kPi / 4.0};
  spec.experiment.dirs_b = {0.0, kPi / 8.0, 3.0 * kPi / 8.0};
  spec.experiment.step = 1e-2;
  return spec;
}

// The rotating lump from the scenario tests; first order in the mass, so a
// coarse integrator step still resolves the offset cleanly.
SpacetimeFamily rotating_family() {
  SpacetimeFamily family;
  family.softening = 0.05;
  family.center = {0.25, 0.2, 0.35};
  family.spin = {0.0, 0.0, 0.3};
  return family;
}

bool tables_close(const OutcomeProbabilities& x, const OutcomeProbabilities& y, double tol) {
  return std::abs(x.pp - y.pp) < tol && std::abs(x.pm - y.pm) < tol &&
         std::abs(x.mp - y.mp) < tol && std::abs(x.mm - y.mm) < tol;
}

bool records_identical(const GridpointRecord& x, const GridpointRecord& y) {
  return x.index == y.index && x.mass == y.mass && x.ok == y.ok && x.error == y.error &&
         x.theta_a1 == y.theta_a1 && x.theta_a2 == y.theta_a2 && x.theta_b1 == y.theta_b1 &&
         x.theta_b2 == y.theta_b2 && x.psi_minus == y.psi_minus &&
         x.simp.pp == y.simp.pp && x.simp.pm == y.simp.pm && x.simp.mp == y.simp.mp &&
         x.simp.mm == y.simp.mm && x.po.pp == y.po.pp && x.po.pm == y.po.pm &&
         x.po.mp == y.po.mp && x.po.mm == y.po.mm && x.mc_model.pp == y.mc_model.pp &&
         x.mc_model.pm == y.mc_model.pm && x.mc_model.mp == y.mc_model.mp &&
         x.mc_model.mm == y.mc_model.mm && x.mc_run == y.mc_run &&
         x.mc.counts == y.mc.counts && x.mc.samples == y.mc.samples &&
         x.e_values == y.e_values && x.s_values == y.s_values &&
         x.quantum_mismatch == y.quantum_mismatch;
}

}  // namespace

TEST_CASE("spec validation walks every field") {
  auto spec = base_spec();
  spec.masses = {};
  CHECK(fails_with(ErrorCode::ConfigError, [&] { run_sweep(spec); }));

  spec = base_spec();
  spec.masses = {0.0, -1e-4};
  CHECK(fails_with(ErrorCode::ConfigError, [&] { run_sweep(spec); }));

  spec = base_spec();
  spec.family.softening = 0.0;
  CHECK(fails_with(ErrorCode::ConfigError, [&] { run_sweep(spec); }));

  spec = base_spec();
  spec.choice_a = 2;
  CHECK(fails_with(ErrorCode::ConfigError, [&] { run_sweep(spec); }));

  spec = base_spec();
  spec.choice_b = -1;
  CHECK(fails_with(ErrorCode::ConfigError, [&] { run_sweep(spec); }));

  spec = base_spec();
  spec.threads = 0;
  CHECK(fails_with(ErrorCode::ConfigError, [&] { run_sweep(spec); }));

  spec = base_spec();
  spec.quads = {{0.0, 1.0 / 0.0, 0.0, 0.0}};
  CHECK(fails_with(ErrorCode::ConfigError, [&] { run_sweep(spec); }));

  // Monte Carlo without a seed is refused rather than silently seeded.
  spec = base_spec();
  spec.mc_samples = 20000;
  CHECK(fails_with(ErrorCode::SeedRequired, [&] { run_sweep(spec); }));

  // Undersized sample budgets are rejected up front, not per gridpoint.
  spec = base_spec();
  spec.mc_samples = 1000;
  spec.seed = 3;
  CHECK(fails_with(ErrorCode::ConfigError, [&] { run_sweep(spec); }));

  try {
    spec = base_spec();
    spec.choice_b = 7;
    run_sweep(spec);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.field() == "sweep.choice_b");
  }
}

TEST_CASE("a flat gridpoint reproduces the closed form") {
  auto spec = base_spec();
  spec.quads.push_back({0.0, 0.0, 0.0, 0.0});
  spec.quads.push_back({0.0, kPi / 4.0, kPi / 8.0, 3.0 * kPi / 8.0});
  spec.quantum_targets = {0.0, kPi / 2.0};

  const SweepReport report = run_sweep(spec);
  CHECK(report.code_version == std::string(kCodeVersion));
  CHECK(!report.seeded);
  REQUIRE(report.records.size() == 1);

  const GridpointRecord& rec = report.records[0];
  REQUIRE(rec.ok);
  CHECK(rec.error.empty());
  CHECK(!rec.mc_run);
  CHECK(std::abs(rec.psi_minus) < 1e-12);
  CHECK(std::abs(wrap_pi(rec.theta_a1 - rec.theta_b1) - rec.psi_minus) < 1e-12);

  // Equal analyzer directions: 3/8 for agreement, 1/8 for disagreement.
  CHECK(std::abs(rec.simp.pp - 0.375) < 1e-12);
  CHECK(std::abs(rec.simp.pm - 0.125) < 1e-12);
  CHECK(std::abs(rec.simp.mp - 0.125) < 1e-12);
  CHECK(std::abs(rec.simp.mm - 0.375) < 1e-12);
  CHECK(std::abs(rec.simp.sum() - 1.0) < 1e-12);

  // With no curvature there is no tilt, so all three tables coincide.
  CHECK(tables_close(rec.po, rec.simp, 1e-10));
  CHECK(tables_close(rec.mc_model, rec.simp, 1e-10));
  CHECK(std::abs(rec.po.sum() - 1.0) < 1e-12);

  // Degenerate quad: every separation is zero, E = 1/2, S = 1.
  REQUIRE(rec.e_values.size() == 8);
  REQUIRE(rec.s_values.size() == 2);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(rec.e_values[k] - 0.5) < 1e-12);
  CHECK(std::abs(rec.s_values[0] - 1.0) < 1e-12);

  // The optimal quad for a second-harmonic correlation of amplitude 1/2.
  const double quarter = std::sqrt(2.0) / 4.0;
  CHECK(std::abs(rec.e_values[4] - quarter) < 1e-12);
  CHECK(std::abs(rec.e_values[5] + quarter) < 1e-12);
  CHECK(std::abs(rec.e_values[6] - quarter) < 1e-12);
  CHECK(std::abs(rec.e_values[7] - quarter) < 1e-12);
  CHECK(std::abs(rec.s_values[1] - std::sqrt(2.0)) < 1e-12);
  for (double s : rec.s_values) CHECK(s <= std::sqrt(2.0) + 1e-6);

  // Distance to the singlet table: 3/8 at zero separation, 1/8 at pi/2.
  REQUIRE(rec.quantum_mismatch.size() == 2);
  CHECK(std::abs(rec.quantum_mismatch[0] - 0.375) < 1e-9);
  CHECK(std::abs(rec.quantum_mismatch[1] - 0.125) < 1e-9);
}

TEST_CASE("curved gridpoints pick up the measured offset") {
  auto spec = base_spec();
  spec.family = rotating_family();
  spec.masses = {0.0, 1e-4};
  spec.experiment.step = 2e-2;
  spec.quads.push_back({0.0, 0.0, 0.0, 0.0});

  const SweepReport report = run_sweep(spec);
  REQUIRE(report.records.size() == 2);
  const GridpointRecord& flat = report.records[0];
  const GridpointRecord& curved = report.records[1];
  REQUIRE(flat.ok);
  REQUIRE(curved.ok);

  CHECK(std::abs(flat.psi_minus) < 1e-12);
  CHECK(std::abs(curved.psi_minus) > 1e-5);

  // The zero-separation correlation drops below 1/2 once psi is nonzero,
  // and tracks cos(2 psi)/2 exactly under the point-mass offset.
  CHECK(flat.e_values[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(curved.e_values[0] < flat.e_values[0]);
  CHECK(std::abs(curved.e_values[0] - 0.5 * std::cos(2.0 * curved.psi_minus)) < 1e-10);

  for (const GridpointRecord* rec : {&flat, &curved}) {
    CHECK(std::abs(rec->simp.sum() - 1.0) < 1e-12);
    CHECK(std::abs(rec->po.sum() - 1.0) < 1e-12);
    CHECK(std::abs(rec->mc_model.sum() - 1.0) < 1e-12);
    for (double s : rec->s_values) CHECK(s <= std::sqrt(2.0) + 1e-6);
  }

  // Beam tilts feed the full quadrature only at second order, so the two
  // tables stay close for a weak lump.
  CHECK(tables_close(curved.po, curved.simp, 1e-6));
}

TEST_CASE("sampling agrees with the model it draws from") {
  auto spec = base_spec();
  spec.choice_b = 1;  // pi/8 separation, away from the symmetric point
  spec.mc_samples = 20000;
  spec.seed = 11;

  const SweepReport report = run_sweep(spec);
  CHECK(report.seeded);
  CHECK(report.seed_used == 11);
  REQUIRE(report.records.size() == 1);
  const GridpointRecord& rec = report.records[0];
  REQUIRE(rec.ok);
  REQUIRE(rec.mc_run);
  CHECK(rec.mc.samples == 20000);
  CHECK(rec.mc.counts[0] + rec.mc.counts[1] + rec.mc.counts[2] + rec.mc.counts[3] == 20000);

  // The sampler draws from the zero-tilt quadrature, so compare against
  // that table, not the tilted one.
  const double n = 20000.0;
  for (int oa : {+1, -1}) {
    for (int ob : {+1, -1}) {
      const double p = rec.mc_model.at(oa, ob);
      const double sigma = std::sqrt(p * (1.0 - p) / n);
      CHECK(std::abs(rec.mc.probabilities.at(oa, ob) - p) < 3.0 * sigma + 1e-12);
    }
  }
}

TEST_CASE("reports are bitwise identical for any thread count") {
  auto spec = base_spec();
  spec.family = rotating_family();
  spec.masses = {0.0, 1e-4, 2e-4};
  spec.experiment.step = 4e-2;
  spec.quads.push_back({0.0, kPi / 4.0, kPi / 8.0, 3.0 * kPi / 8.0});
  spec.quantum_targets = {kPi / 3.0};
  spec.mc_samples = 20000;
  spec.seed = 5;

  spec.threads = 1;
  const SweepReport one = run_sweep(spec);
  spec.threads = 4;
  const SweepReport four = run_sweep(spec);

  for (const GridpointRecord& rec : one.records) REQUIRE(rec.ok);

  // The thread count is an execution detail: it is excluded from the hash
  // and must not show up anywhere in the records.
  CHECK(one.config_hash == four.config_hash);
  CHECK(canonical_spec_text(spec) == canonical_spec_text(spec));
  REQUIRE(one.records.size() == four.records.size());
  for (std::size_t i = 0; i < one.records.size(); ++i) {
    CHECK(records_identical(one.records[i], four.records[i]));
  }

  auto reseeded = spec;
  reseeded.seed = 6;
  CHECK(spec_hash(reseeded) != spec_hash(spec));

  auto regridded = spec;
  regridded.masses.push_back(3e-4);
  CHECK(spec_hash(regridded) != spec_hash(spec));
  CHECK(spec_hash(spec) == one.config_hash);
}

TEST_CASE("failures land on their gridpoint and the sweep continues") {
  auto spec = base_spec();
  // Mass 50 at half a unit of distance is far outside the weak regime; the
  // time axis stops being timelike and the build must refuse.
  spec.masses = {0.0, 50.0};

  const SweepReport report = run_sweep(spec);
  REQUIRE(report.records.size() == 2);
  CHECK(report.records[0].ok);
  CHECK(!report.records[1].ok);
  CHECK(report.records[1].error.find("DegenerateMetric") == 0);
  CHECK(report.records[1].e_values.empty());
  CHECK(!report.records[1].mc_run);
  CHECK(report.records[1].mass == 50.0);
}

TEST_CASE("a quiet perturbation collapses to a point mass at zero offset") {
  ExperimentConfig experiment = base_spec().experiment;
  PerturbationSpec off;  // all ranges degenerate, every draw is flat space

  const EmpiricalPsi one = empirical_psi_distribution(experiment, off, 100, 42, 1);
  CHECK(one.draws == 100);
  CHECK(one.failures == 0);
  REQUIRE(one.samples.size() == 100);
  for (double v : one.samples) CHECK(std::abs(v) < 1e-15);

  CHECK(std::abs(one.distribution.atom_mass() - 1.0) < 1e-15);
  REQUIRE(one.distribution.atoms().size() == 1);
  CHECK(circular_distance(one.distribution.atoms()[0].angle, 0.0) < 1e-12);

  // Same draws, more workers: the counter streams ignore scheduling.
  const EmpiricalPsi three = empirical_psi_distribution(experiment, off, 100, 42, 3);
  CHECK(three.samples == one.samples);
  CHECK(three.failures == one.failures);
}

TEST_CASE("signed spins spread the offsets symmetrically") {
  ExperimentConfig experiment = base_spec().experiment;
  experiment.step = 4e-2;

  PerturbationSpec jitter;
  jitter.mass_low = 1e-4;
  jitter.mass_high = 1e-4;
  jitter.spin_max = 0.3;

  const EmpiricalPsi cloud = empirical_psi_distribution(experiment, jitter, 100, 7, 1);
  CHECK(cloud.failures == 0);
  REQUIRE(cloud.samples.size() == 100);

  const double lo = *std::min_element(cloud.samples.begin(), cloud.samples.end());
  const double hi = *std::max_element(cloud.samples.begin(), cloud.samples.end());
  CHECK(lo < -1e-5);
  CHECK(hi > 1e-5);

  double mean = 0.0;
  for (double v : cloud.samples) mean += v;
  mean /= 100.0;
  double var = 0.0;
  for (double v : cloud.samples) var += (v - mean) * (v - mean);
  var /= 99.0;
  // The spin is drawn sign-symmetrically and the offset is first order in
  // it, so the sample mean sits within sampling error of zero.
  CHECK(std::abs(mean) < 3.0 * std::sqrt(var / 100.0));

  // A genuine spread lands in the histogram, not in an atom.
  CHECK(cloud.distribution.atom_mass() < 1e-15);
  double total = 0.0;
  for (double d : cloud.distribution.density()) total += d * cloud.distribution.bin_width();
  CHECK(std::abs(total - 1.0) < 1e-9);
}

TEST_CASE("draw failures are tolerated only up to the budget") {
  ExperimentConfig experiment = base_spec().experiment;

  PerturbationSpec heavy;
  heavy.mass_low = 40.0;
  heavy.mass_high = 50.0;
  CHECK(fails_with(ErrorCode::TooManyFailures,
                   [&] { empirical_psi_distribution(experiment, heavy, 100, 1, 1); }));

  PerturbationSpec off;
  CHECK(fails_with(ErrorCode::ConfigError,
                   [&] { empirical_psi_distribution(experiment, off, 99, 1, 1); }));

  PerturbationSpec coarse;
  coarse.bins = 4;
  CHECK(fails_with(ErrorCode::ConfigError,
                   [&] { empirical_psi_distribution(experiment, coarse, 100, 1, 1); }));

  PerturbationSpec inverted;
  inverted.mass_low = 2.0;
  inverted.mass_high = 1.0;
  CHECK(fails_with(ErrorCode::ConfigError,
                   [&] { empirical_psi_distribution(experiment, inverted, 100, 1, 1); }));

  PerturbationSpec negative;
  negative.spin_max = -0.1;
  CHECK(fails_with(ErrorCode::ConfigError,
                   [&] { empirical_psi_distribution(experiment, negative, 100, 1, 1); }));
}
