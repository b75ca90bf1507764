#include "dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "counter_rng.hpp"

namespace cchsh {

namespace {

constexpr std::uint64_t kStreamThetaV = 0;
constexpr std::uint64_t kStreamJointBase = 1;  // joint draws use 1, 2, 3
constexpr std::uint64_t kStreamOutcomeA = 4;
constexpr std::uint64_t kStreamOutcomeB = 5;

int require_outcome(int value) {
  if (value != 1 && value != -1) {
    throw Error(ErrorCode::ConfigError,
                "outcome must be +1 or -1, got " + std::to_string(value));
  }
  return value;
}

int outcome_index(bool a_plus, bool b_plus) {
  return (a_plus ? 0 : 2) + (b_plus ? 0 : 1);
}

double lerp_periodic(const std::vector<double>& table, double angle) {
  const int n = static_cast<int>(table.size());
  const double pos = wrap_two_pi(angle) / (kTwoPi / n);
  int i0 = static_cast<int>(pos);
  if (i0 >= n) i0 = n - 1;
  const double frac = pos - i0;
  const int i1 = i0 + 1 == n ? 0 : i0 + 1;
  return table[i0] + frac * (table[i1] - table[i0]);
}

// The +1 response with the beam tilt integrated out:
// x -> E_tilt[ f(+1, x + t) ]. The histogram part is precomputed on a fine
// grid and interpolated; point masses are evaluated exactly, so tilt
// distributions made of atoms introduce no interpolation error at all.
class TiltedResponse {
 public:
  TiltedResponse(const ResponseFunction& response, const AngleDistribution& tilt,
                 const PoOptions& options)
      : response_(&response), tilt_(&tilt) {
    if (tilt.bin_mass() > 0.0) {
      table_.resize(static_cast<std::size_t>(std::max(options.tilt_table_size, 64)));
      const double step = kTwoPi / static_cast<double>(table_.size());
      for (std::size_t k = 0; k < table_.size(); ++k) {
        const double x = static_cast<double>(k) * step;
        table_[k] = tilt.expect_bins(
            [&](double t) { return (*response_)(+1, x + t); }, options.tilt_nodes);
      }
    }
  }

  double operator()(double x) const {
    double value = table_.empty() ? 0.0 : lerp_periodic(table_, x);
    for (const AngleAtom& atom : tilt_->atoms()) {
      value += atom.weight * (*response_)(+1, x + atom.angle);
    }
    return value;
  }

 private:
  const ResponseFunction* response_;
  const AngleDistribution* tilt_;
  std::vector<double> table_;
};

}  // namespace

ResponseFunction ResponseFunction::malus() { return ResponseFunction(); }

ResponseFunction ResponseFunction::from_table(std::vector<double> plus_values) {
  if (plus_values.size() < 8) {
    throw Error(ErrorCode::ConfigError, "response table needs at least 8 samples, got " +
                                            std::to_string(plus_values.size()));
  }
  for (std::size_t i = 0; i < plus_values.size(); ++i) {
    const double v = plus_values[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw Error(ErrorCode::ConfigError,
                  "response sample " + std::to_string(i) + " is outside [0, 1]");
    }
  }
  ResponseFunction f;
  f.plus_ = std::move(plus_values);
  return f;
}

ResponseFunction ResponseFunction::from_tables(const std::vector<double>& plus_values,
                                               const std::vector<double>& minus_values) {
  if (plus_values.size() != minus_values.size()) {
    throw Error(ErrorCode::ShapeMismatch, "response branch tables differ in size");
  }
  for (std::size_t i = 0; i < plus_values.size(); ++i) {
    if (std::abs(plus_values[i] + minus_values[i] - 1.0) > kCompletenessTol) {
      throw Error(ErrorCode::ConfigError,
                  "response branches do not sum to 1 at sample " + std::to_string(i));
    }
  }
  return from_table(plus_values);
}

double ResponseFunction::operator()(int outcome, double theta) const {
  require_outcome(outcome);
  if (plus_.empty()) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return outcome == 1 ? c * c : s * s;
  }
  const double plus = lerp_periodic(plus_, theta);
  return outcome == 1 ? plus : 1.0 - plus;
}

double OutcomeProbabilities::at(int outcome_a, int outcome_b) const {
  require_outcome(outcome_a);
  require_outcome(outcome_b);
  if (outcome_a == 1) return outcome_b == 1 ? pp : pm;
  return outcome_b == 1 ? mp : mm;
}

double& OutcomeProbabilities::at(int outcome_a, int outcome_b) {
  require_outcome(outcome_a);
  require_outcome(outcome_b);
  if (outcome_a == 1) return outcome_b == 1 ? pp : pm;
  return outcome_b == 1 ? mp : mm;
}

double iv_closed_form(int outcome_a, int outcome_b, double theta_minus) {
  require_outcome(outcome_a);
  require_outcome(outcome_b);
  if (outcome_a == outcome_b) {
    const double c = std::cos(theta_minus);
    return 0.25 * (0.5 + c * c);
  }
  const double s = std::sin(theta_minus);
  return 0.25 * (0.5 + s * s);
}

double iv_quadrature(const ResponseFunction& response, const AngleDistribution& theta_v_dist,
                     int outcome_a, int outcome_b, double theta_a, double theta_b,
                     double theta_a1, double theta_b1, int nodes) {
  require_outcome(outcome_a);
  require_outcome(outcome_b);
  const int n = checked_node_count(nodes);
  return theta_v_dist.expect(
      [&](double theta_v) {
        const double angle_a = theta_a - theta_v + theta_a1;
        const double angle_b = theta_b - theta_v - kOppositeBeamOffset + theta_b1;
        return response(outcome_a, angle_a) * response(outcome_b, angle_b);
      },
      n);
}

double pe_marginal(const ResponseFunction& response, const AngleDistribution& tilt_dist,
                   int outcome, double theta_known, int nodes) {
  require_outcome(outcome);
  return tilt_dist.expect([&](double t) { return response(outcome, theta_known + t); }, nodes);
}

double pe_probability(const ResponseFunction& response, const AngleDistribution& theta_a2_dist,
                      const AngleDistribution& theta_b2_dist, int outcome_a, int outcome_b,
                      double theta_a_known, double theta_b_known, int nodes) {
  return pe_marginal(response, theta_a2_dist, outcome_a, theta_a_known, nodes) *
         pe_marginal(response, theta_b2_dist, outcome_b, theta_b_known, nodes);
}

OutcomeProbabilities po_probabilities(const ResponseFunction& response,
                                      const AngleDistribution& theta_v_dist,
                                      const JointAngleDistribution& joint,
                                      const AngleDistribution& theta_a2_dist,
                                      const AngleDistribution& theta_b2_dist, double theta_a,
                                      double theta_b, const PoOptions& options) {
  const TiltedResponse ga(response, theta_a2_dist, options);
  const TiltedResponse gb(response, theta_b2_dist, options);

  const auto angle_a = [&](double theta_v, double t1) { return theta_a - theta_v + t1; };
  const auto angle_b = [&](double theta_v, double t2) {
    return theta_b - theta_v - kOppositeBeamOffset + t2;
  };

  // p(++) plus the two +1 marginals pin down all four outcomes through
  // completeness, which keeps the four summing to 1 up to rounding.
  const double joint_plus = joint.expect(
      [&](double t1, double t2) {
        return theta_v_dist.expect(
            [&](double v) { return ga(angle_a(v, t1)) * gb(angle_b(v, t2)); },
            options.theta_v_nodes);
      },
      options.joint_nodes_per_axis);
  const double marginal_a = joint.expect(
      [&](double t1, double) {
        return theta_v_dist.expect([&](double v) { return ga(angle_a(v, t1)); },
                                   options.theta_v_nodes);
      },
      options.joint_nodes_per_axis);
  const double marginal_b = joint.expect(
      [&](double, double t2) {
        return theta_v_dist.expect([&](double v) { return gb(angle_b(v, t2)); },
                                   options.theta_v_nodes);
      },
      options.joint_nodes_per_axis);

  OutcomeProbabilities p;
  p.pp = joint_plus;
  p.pm = marginal_a - joint_plus;
  p.mp = marginal_b - joint_plus;
  p.mm = 1.0 - marginal_a - marginal_b + joint_plus;
  return p;
}

double po_probability(const ResponseFunction& response, const AngleDistribution& theta_v_dist,
                      const JointAngleDistribution& joint, const AngleDistribution& theta_a2_dist,
                      const AngleDistribution& theta_b2_dist, int outcome_a, int outcome_b,
                      double theta_a, double theta_b, const PoOptions& options) {
  require_outcome(outcome_a);
  require_outcome(outcome_b);
  return po_probabilities(response, theta_v_dist, joint, theta_a2_dist, theta_b2_dist, theta_a,
                          theta_b, options)
      .at(outcome_a, outcome_b);
}

double simp_probability(const AngleDistribution& psi_dist, int outcome_a, int outcome_b,
                        double theta_ab) {
  require_outcome(outcome_a);
  require_outcome(outcome_b);
  return psi_dist.expect([&](double psi) {
    return iv_closed_form(outcome_a, outcome_b, theta_ab + psi + kOppositeBeamOffset);
  });
}

McResult mc_probability(std::optional<std::uint64_t> seed, std::uint64_t n_samples,
                        const ResponseFunction& response, const AngleDistribution& theta_v_dist,
                        const JointAngleDistribution& joint, double theta_a, double theta_b,
                        int n_threads) {
  if (!seed) {
    throw Error(ErrorCode::SeedRequired, "Monte Carlo estimates need an explicit seed");
  }
  if (n_samples < 10000) {
    throw Error(ErrorCode::ConfigError, "Monte Carlo needs at least 10^4 samples, got " +
                                            std::to_string(n_samples));
  }
  const std::uint64_t s = *seed;
  const int workers = std::clamp(n_threads, 1, 256);

  const auto count_range = [&](std::uint64_t lo, std::uint64_t hi,
                               std::array<std::uint64_t, 4>& counts) {
    for (std::uint64_t i = lo; i < hi; ++i) {
      const double theta_v = theta_v_dist.sample(s, i, kStreamThetaV);
      const auto [t1, t2] = joint.sample(s, i, kStreamJointBase);
      const double angle_a = theta_a - theta_v + t1;
      const double angle_b = theta_b - theta_v - kOppositeBeamOffset + t2;
      const bool a_plus = counter_uniform(s, i, kStreamOutcomeA) < response(+1, angle_a);
      const bool b_plus = counter_uniform(s, i, kStreamOutcomeB) < response(+1, angle_b);
      ++counts[outcome_index(a_plus, b_plus)];
    }
  };

  McResult result;
  result.samples = n_samples;
  if (workers == 1) {
    count_range(0, n_samples, result.counts);
  } else {
    // Integer counts per worker summed in worker order: the partition has
    // no effect on the totals, which is the reproducibility contract.
    std::vector<std::array<std::uint64_t, 4>> partial(
        static_cast<std::size_t>(workers), std::array<std::uint64_t, 4>{0, 0, 0, 0});
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::uint64_t chunk = (n_samples + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::uint64_t lo = std::min(n_samples, chunk * static_cast<std::uint64_t>(w));
      const std::uint64_t hi = std::min(n_samples, lo + chunk);
      pool.emplace_back(count_range, lo, hi, std::ref(partial[static_cast<std::size_t>(w)]));
    }
    for (std::thread& t : pool) t.join();
    for (const auto& c : partial) {
      for (int k = 0; k < 4; ++k) result.counts[static_cast<std::size_t>(k)] += c[static_cast<std::size_t>(k)];
    }
  }

  double* probs[4] = {&result.probabilities.pp, &result.probabilities.pm,
                      &result.probabilities.mp, &result.probabilities.mm};
  double* errors[4] = {&result.standard_errors.pp, &result.standard_errors.pm,
                       &result.standard_errors.mp, &result.standard_errors.mm};
  for (int k = 0; k < 4; ++k) {
    const double p =
        static_cast<double>(result.counts[static_cast<std::size_t>(k)]) / static_cast<double>(n_samples);
    *probs[k] = p;
    *errors[k] = std::sqrt(p * (1.0 - p) / static_cast<double>(n_samples));
  }
  return result;
}

McResult mc_probability(std::optional<std::uint64_t> seed, std::uint64_t n_samples,
                        const ResponseFunction& response, const AngleDistribution& theta_v_dist,
                        const AngleDistribution& psi_dist, double theta_a, double theta_b,
                        int n_threads) {
  const JointAngleDistribution joint =
      JointAngleDistribution::correlated(AngleDistribution::point_mass(0.0), psi_dist);
  return mc_probability(seed, n_samples, response, theta_v_dist, joint, theta_a, theta_b,
                        n_threads);
}

double quantum_target(int outcome_a, int outcome_b, double theta_ab) {
  require_outcome(outcome_a);
  require_outcome(outcome_b);
  const double half = 0.5 * theta_ab;
  if (outcome_a == outcome_b) {
    const double s = std::sin(half);
    return 0.5 * s * s;
  }
  const double c = std::cos(half);
  return 0.5 * c * c;
}

}  // namespace cchsh
