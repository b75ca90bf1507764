#include "sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <string_view>
#include <thread>

#include "counter_rng.hpp"
#include "metric.hpp"

namespace cchsh {

namespace {

void require(bool ok, const std::string& message, const char* field) {
  if (!ok) throw Error(ErrorCode::ConfigError, message, field);
}

std::string format_error(const Error& e) {
  return std::string(error_name(e.code())) + ": " + e.what();
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

void put(std::string& out, double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g,", value);
  out += buf;
}

void put(std::string& out, std::span<const double> values) {
  for (double v : values) put(out, v);
  out += ';';
}

void put_distribution(std::string& out, const AngleDistribution& dist) {
  put(out, dist.density());
  for (const AngleAtom& atom : dist.atoms()) {
    put(out, atom.angle);
    put(out, atom.weight);
  }
  out += ';';
}

Spacetime gridpoint_spacetime(const SpacetimeFamily& family, double mass) {
  if (mass == 0.0) return Spacetime::minkowski();
  return Spacetime::weak_field(mass, family.softening, family.center, family.spin);
}

std::uint64_t gridpoint_seed(std::uint64_t seed, int index) {
  return counter_bits(seed, static_cast<std::uint64_t>(index), 0x5eedULL);
}

OutcomeProbabilities simp_outcomes(const AngleDistribution& psi, double theta_ab) {
  OutcomeProbabilities out;
  out.pp = simp_probability(psi, +1, +1, theta_ab);
  out.pm = simp_probability(psi, +1, -1, theta_ab);
  out.mp = simp_probability(psi, -1, +1, theta_ab);
  out.mm = simp_probability(psi, -1, -1, theta_ab);
  return out;
}

void validate_spec(const SweepSpec& spec) {
  require(!spec.masses.empty(), "mass grid is empty", "sweep.masses");
  for (double m : spec.masses) {
    require(std::isfinite(m) && m >= 0.0, "masses must be finite and non-negative",
            "sweep.masses");
  }
  require(std::isfinite(spec.family.softening) && spec.family.softening > 0.0,
          "softening must be positive", "sweep.family.softening");
  for (double c : spec.family.center) {
    require(std::isfinite(c), "lump center must be finite", "sweep.family.center");
  }
  for (double s : spec.family.spin) {
    require(std::isfinite(s), "lump spin must be finite", "sweep.family.spin");
  }
  require(spec.choice_a >= 0 &&
              spec.choice_a < static_cast<int>(spec.experiment.dirs_a.size()),
          "analyzer choice outside the configured directions", "sweep.choice_a");
  require(spec.choice_b >= 0 &&
              spec.choice_b < static_cast<int>(spec.experiment.dirs_b.size()),
          "analyzer choice outside the configured directions", "sweep.choice_b");
  for (const AngleQuad& q : spec.quads) {
    require(std::isfinite(q.a) && std::isfinite(q.a_alt) && std::isfinite(q.b) &&
                std::isfinite(q.b_alt),
            "quad angles must be finite", "sweep.quads");
  }
  for (double t : spec.quantum_targets) {
    require(std::isfinite(t), "target separations must be finite", "sweep.quantum_targets");
  }
  require(spec.threads >= 1, "thread count must be at least one", "sweep.threads");
  require(spec.mc_samples == 0 || spec.mc_samples >= 10000,
          "Monte Carlo needs at least 10^4 samples per gridpoint", "sweep.mc_samples");
  if (spec.mc_samples > 0 && !spec.seed.has_value()) {
    throw Error(ErrorCode::SeedRequired, "Monte Carlo sweeps need an explicit seed",
                "sweep.seed");
  }
}

GridpointRecord run_gridpoint(const SweepSpec& spec, int i) {
  GridpointRecord rec;
  rec.index = i;
  rec.mass = spec.masses[i];
  try {
    const Spacetime st = gridpoint_spacetime(spec.family, rec.mass);
    const ExperimentGeometry geom = build_geometry(st, spec.experiment);
    const HolonomySplit holo = decompose_holonomy(st, geom);
    const AngleSet angles = extract_angles(st, geom, spec.choice_a, spec.choice_b, 0.0, &holo);
    rec.theta_a1 = holo.theta_A1;
    rec.theta_a2 = holo.theta_A2;
    rec.theta_b1 = holo.theta_B1;
    rec.theta_b2 = holo.theta_B2;
    rec.psi_minus = angles.psi_minus;

    const auto psi = AngleDistribution::point_mass(rec.psi_minus);
    const auto tilt_a = AngleDistribution::point_mass(wrap_two_pi(rec.theta_a2));
    const auto tilt_b = AngleDistribution::point_mass(wrap_two_pi(rec.theta_b2));
    const auto no_tilt = AngleDistribution::point_mass(0.0);
    const auto joint = JointAngleDistribution::correlated(
        AngleDistribution::point_mass(wrap_two_pi(rec.theta_a1)), psi);
    const auto response = ResponseFunction::malus();

    const double theta_a = spec.experiment.dirs_a[spec.choice_a];
    const double theta_b = spec.experiment.dirs_b[spec.choice_b];
    rec.simp = simp_outcomes(psi, theta_a - theta_b);
    rec.po =
        po_probabilities(response, spec.theta_v, joint, tilt_a, tilt_b, theta_a, theta_b);
    rec.mc_model =
        po_probabilities(response, spec.theta_v, joint, no_tilt, no_tilt, theta_a, theta_b);
    if (spec.mc_samples > 0) {
      rec.mc = mc_probability(gridpoint_seed(*spec.seed, i), spec.mc_samples, response,
                              spec.theta_v, joint, theta_a, theta_b, 1);
      rec.mc_run = true;
    }

    for (const AngleQuad& q : spec.quads) {
      for (double sep : {q.a - q.b, q.a - q.b_alt, q.a_alt - q.b, q.a_alt - q.b_alt}) {
        rec.e_values.push_back(simp_outcomes(psi, sep).correlation());
      }
      rec.s_values.push_back(chsh_statistic(psi, q));
    }
    for (double target : spec.quantum_targets) {
      const OutcomeProbabilities model = simp_outcomes(psi, target);
      double acc = 0.0;
      for (int oa : {+1, -1}) {
        for (int ob : {+1, -1}) {
          const double gap = model.at(oa, ob) - quantum_target(oa, ob, target);
          acc += gap * gap;
        }
      }
      rec.quantum_mismatch.push_back(std::sqrt(acc / 4.0));
    }
    rec.ok = true;
  } catch (const Error& e) {
    rec = GridpointRecord{};
    rec.index = i;
    rec.mass = spec.masses[i];
    rec.ok = false;
    rec.error = format_error(e);
  }
  return rec;
}

// Runs fn(i) for i in [0, n) across the requested workers. Each index lands
// in its own slot, so the outcome is identical for any worker count.
template <typename Fn>
void parallel_indices(int n, int threads, Fn&& fn) {
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto pump = [&] {
    for (int i; (i = next.fetch_add(1)) < n;) fn(i);
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(pump);
  for (auto& t : pool) t.join();
}

}  // namespace

std::string canonical_spec_text(const SweepSpec& spec) {
  std::string out = "sweep/v1|";
  put(out, spec.family.softening);
  put(out, std::span<const double>(spec.family.center));
  put(out, std::span<const double>(spec.family.spin));
  put(out, spec.masses);
  put(out, std::span<const double>(spec.experiment.p_O));
  put(out, spec.experiment.tau_E);
  put(out, spec.experiment.observer_speed);
  put(out, spec.experiment.dirs_a);
  put(out, spec.experiment.dirs_b);
  put(out, spec.experiment.step);
  if (spec.experiment.d_O) {
    put(out, std::span<const double>(*spec.experiment.d_O));
  } else {
    out += "d:none;";
  }
  if (spec.experiment.frame_O) {
    put(out, std::span<const double>(spec.experiment.frame_O->base));
    for (const Vec4& e : spec.experiment.frame_O->e) put(out, std::span<const double>(e));
  } else {
    out += "f:none;";
  }
  out += std::to_string(spec.choice_a) + "," + std::to_string(spec.choice_b) + ";";
  put_distribution(out, spec.theta_v);
  for (const AngleQuad& q : spec.quads) {
    put(out, q.a);
    put(out, q.a_alt);
    put(out, q.b);
    put(out, q.b_alt);
  }
  out += ';';
  put(out, spec.quantum_targets);
  out += std::to_string(spec.mc_samples) + ";";
  out += spec.seed ? std::to_string(*spec.seed) : "unseeded";
  return out;
}

std::uint64_t spec_hash(const SweepSpec& spec) { return fnv1a64(canonical_spec_text(spec)); }

SweepReport run_sweep(const SweepSpec& spec) {
  validate_spec(spec);

  SweepReport report;
  report.config_hash = spec_hash(spec);
  report.seeded = spec.seed.has_value();
  report.seed_used = spec.seed.value_or(0);
  report.code_version = kCodeVersion;
  report.records.resize(spec.masses.size());

  parallel_indices(static_cast<int>(spec.masses.size()), spec.threads,
                   [&](int i) { report.records[i] = run_gridpoint(spec, i); });
  return report;
}

EmpiricalPsi empirical_psi_distribution(const ExperimentConfig& experiment,
                                        const PerturbationSpec& perturbation, int n_draws,
                                        std::uint64_t seed, int threads) {
  require(n_draws >= 100, "need at least 100 draws for an empirical distribution",
          "psi.n_draws");
  require(perturbation.bins >= AngleDistribution::kMinBins, "too few histogram bins",
          "psi.bins");
  require(std::isfinite(perturbation.mass_low) && std::isfinite(perturbation.mass_high) &&
              perturbation.mass_low >= 0.0 && perturbation.mass_low <= perturbation.mass_high,
          "mass range must satisfy 0 <= low <= high", "psi.mass");
  for (int k = 0; k < 3; ++k) {
    require(std::isfinite(perturbation.center_low[k]) &&
                std::isfinite(perturbation.center_high[k]) &&
                perturbation.center_low[k] <= perturbation.center_high[k],
            "center box must satisfy low <= high", "psi.center");
  }
  require(std::isfinite(perturbation.spin_max) && perturbation.spin_max >= 0.0,
          "spin bound must be non-negative", "psi.spin_max");
  require(std::isfinite(perturbation.softening) && perturbation.softening > 0.0,
          "softening must be positive", "psi.softening");
  require(threads >= 1, "thread count must be at least one", "psi.threads");

  std::vector<double> value(n_draws, 0.0);
  std::vector<char> ok(n_draws, 0);

  parallel_indices(n_draws, threads, [&](int k) {
    const std::uint64_t index = static_cast<std::uint64_t>(k);
    const double u_mass = counter_uniform(seed, index, 0);
    const double mass =
        perturbation.mass_low + (perturbation.mass_high - perturbation.mass_low) * u_mass;
    std::array<double, 3> center;
    for (int c = 0; c < 3; ++c) {
      const double u = counter_uniform(seed, index, 1 + c);
      center[c] = perturbation.center_low[c] +
                  (perturbation.center_high[c] - perturbation.center_low[c]) * u;
    }
    const double spin_z = perturbation.spin_max * (2.0 * counter_uniform(seed, index, 4) - 1.0);
    try {
      const Spacetime st =
          mass == 0.0 ? Spacetime::minkowski()
                      : Spacetime::weak_field(mass, perturbation.softening, center,
                                              {0.0, 0.0, spin_z});
      const ExperimentGeometry geom = build_geometry(st, experiment);
      const HolonomySplit holo = decompose_holonomy(st, geom);
      value[k] = wrap_pi(holo.theta_A1 - holo.theta_B1);
      ok[k] = 1;
    } catch (const Error&) {
      ok[k] = 0;
    }
  });

  EmpiricalPsi out;
  out.draws = n_draws;
  for (int k = 0; k < n_draws; ++k) {
    if (ok[k]) {
      out.samples.push_back(value[k]);
    } else {
      ++out.failures;
    }
  }
  if (5 * out.failures > n_draws) {
    throw Error(ErrorCode::TooManyFailures,
                std::to_string(out.failures) + " of " + std::to_string(n_draws) +
                    " geometry builds failed; over the 20% budget");
  }

  // Collapse a degenerate cloud to an exact atom.
  double sum_sin = 0.0;
  double sum_cos = 0.0;
  for (double v : out.samples) {
    sum_sin += std::sin(v);
    sum_cos += std::cos(v);
  }
  const double mean = std::atan2(sum_sin, sum_cos);
  double max_dev = 0.0;
  for (double v : out.samples) {
    max_dev = std::max(max_dev, circular_distance(v, mean));
  }
  if (max_dev < 1e-12) {
    out.distribution = AngleDistribution::point_mass(wrap_two_pi(mean), perturbation.bins);
    return out;
  }

  const int bins = perturbation.bins;
  const double width = kTwoPi / bins;
  std::vector<double> density(bins, 0.0);
  const double unit = 1.0 / (static_cast<double>(out.samples.size()) * width);
  for (double v : out.samples) {
    int bin = static_cast<int>(wrap_two_pi(v) / width);
    if (bin >= bins) bin = bins - 1;  // wrap_two_pi can land exactly on 2pi
    density[bin] += unit;
  }
  out.distribution = AngleDistribution::from_bins(std::move(density));
  return out;
}

}  // namespace cchsh
