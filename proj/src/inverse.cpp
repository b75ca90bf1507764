#include "inverse.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "counter_rng.hpp"
#include "dynamics.hpp"

namespace cchsh {

namespace {

// Euclidean projection onto the probability simplex {q >= 0, sum q = 1}
// by the sort-and-threshold rule.
std::vector<double> project_simplex(std::vector<double> v) {
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double running = 0.0;
  double threshold = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    running += sorted[i];
    const double candidate = (running - 1.0) / static_cast<double>(i + 1);
    if (sorted[i] - candidate > 0.0) threshold = candidate;
  }
  for (double& x : v) x = std::max(x - threshold, 0.0);
  return v;
}

double rms(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc / static_cast<double>(v.size()));
}

// Second-harmonic coefficients of the correlation produced by one bin of
// unit mass: E_j(theta) integrates cos(2 theta + 2 psi) over the bin, which
// the antiderivative gives exactly.
struct BinHarmonic {
  double c = 0.0;  // coefficient of cos(2 theta) / 2
  double s = 0.0;  // coefficient of -sin(2 theta) / 2
};

BinHarmonic bin_harmonic(int j, int bins) {
  const double w = kTwoPi / bins;
  const double lo = j * w;
  const double hi = lo + w;
  BinHarmonic h;
  h.c = (std::sin(2.0 * hi) - std::sin(2.0 * lo)) / (2.0 * w);
  h.s = -(std::cos(2.0 * hi) - std::cos(2.0 * lo)) / (2.0 * w);
  return h;
}

// E(theta) for a density with integral moments (c, s): the simplified
// dynamics give E = (1/2)(c cos 2theta - s sin 2theta).
double harmonic_correlation(double c, double s, double theta) {
  return 0.5 * (c * std::cos(2.0 * theta) - s * std::sin(2.0 * theta));
}

double quad_statistic(double c, double s, const AngleQuad& q) {
  const double e_ab = harmonic_correlation(c, s, q.a - q.b);
  const double e_abp = harmonic_correlation(c, s, q.a - q.b_alt);
  const double e_apb = harmonic_correlation(c, s, q.a_alt - q.b);
  const double e_apbp = harmonic_correlation(c, s, q.a_alt - q.b_alt);
  return std::abs(e_ab - e_abp) + std::abs(e_apb + e_apbp);
}

}  // namespace

void validate_problem(const InverseProblem& problem) {
  if (problem.targets.empty()) {
    throw Error(ErrorCode::EmptyTargets, "inverse problem has no target angles");
  }
  if (problem.bins < AngleDistribution::kMinBins) {
    throw Error(ErrorCode::ConfigError,
                "inverse problem needs at least " +
                    std::to_string(AngleDistribution::kMinBins) + " bins, got " +
                    std::to_string(problem.bins));
  }
  if (!(problem.regularization >= 0.0) || !std::isfinite(problem.regularization)) {
    throw Error(ErrorCode::ConfigError, "regularization weight must be nonnegative");
  }
}

LinearSystem assemble_system(const InverseProblem& problem) {
  validate_problem(problem);
  const int n = problem.bins;
  const int k = static_cast<int>(problem.targets.size());
  const double w = kTwoPi / n;

  LinearSystem system;
  system.target_rows = k;
  system.matrix.assign(static_cast<std::size_t>(k) + 1,
                       std::vector<double>(static_cast<std::size_t>(n), 0.0));
  system.rhs.assign(static_cast<std::size_t>(k) + 1, 0.0);
  for (int row = 0; row < k; ++row) {
    const double theta = problem.targets[static_cast<std::size_t>(row)];
    for (int j = 0; j < n; ++j) {
      const double c = std::cos(theta + j * w + kPi);
      system.matrix[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)] = c * c * w;
    }
    system.rhs[static_cast<std::size_t>(row)] = 0.5 - std::cos(theta);
  }
  for (int j = 0; j < n; ++j) {
    system.matrix[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = w;
  }
  system.rhs[static_cast<std::size_t>(k)] = 1.0;
  return system;
}

InverseSolution solve_nnls(const InverseProblem& problem, const SolveOptions& options) {
  const LinearSystem system = assemble_system(problem);
  const int n = problem.bins;
  const int k = system.target_rows;
  const double w = kTwoPi / n;

  // Work in bin-mass variables q_j = p_j * dpsi, which live on the
  // probability simplex. The target rows divide through by dpsi.
  std::vector<std::vector<double>> b(static_cast<std::size_t>(k),
                                     std::vector<double>(static_cast<std::size_t>(n)));
  for (int row = 0; row < k; ++row) {
    for (int j = 0; j < n; ++j) {
      b[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)] =
          system.matrix[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)] / w;
    }
  }
  const double ridge = problem.regularization / (w * w);

  auto apply = [&](const std::vector<double>& q, std::vector<double>& out) {
    for (int row = 0; row < k; ++row) {
      double acc = 0.0;
      const std::vector<double>& line = b[static_cast<std::size_t>(row)];
      for (int j = 0; j < n; ++j) acc += line[static_cast<std::size_t>(j)] * q[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(row)] = acc;
    }
  };

  // Lipschitz constant of the gradient by power iteration on B^T B.
  std::vector<double> pow_vec(static_cast<std::size_t>(n), 1.0 / std::sqrt(double(n)));
  std::vector<double> tmp_k(static_cast<std::size_t>(k), 0.0);
  double lipschitz = 1.0;
  for (int it = 0; it < 30; ++it) {
    apply(pow_vec, tmp_k);
    std::vector<double> next(static_cast<std::size_t>(n), 0.0);
    for (int row = 0; row < k; ++row) {
      const std::vector<double>& line = b[static_cast<std::size_t>(row)];
      for (int j = 0; j < n; ++j) {
        next[static_cast<std::size_t>(j)] += line[static_cast<std::size_t>(j)] * tmp_k[static_cast<std::size_t>(row)];
      }
    }
    double norm = 0.0;
    for (double x : next) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-300) break;
    lipschitz = norm;
    for (int j = 0; j < n; ++j) pow_vec[static_cast<std::size_t>(j)] = next[static_cast<std::size_t>(j)] / norm;
  }
  lipschitz += ridge;

  const auto objective = [&](const std::vector<double>& q, std::vector<double>& work) {
    apply(q, work);
    double acc = 0.0;
    for (int row = 0; row < k; ++row) {
      const double miss = work[static_cast<std::size_t>(row)] - system.rhs[static_cast<std::size_t>(row)];
      acc += miss * miss;
    }
    for (int j = 0; j < n; ++j) acc += ridge * q[static_cast<std::size_t>(j)] * q[static_cast<std::size_t>(j)];
    return 0.5 * acc;
  };

  std::vector<double> q(static_cast<std::size_t>(n), 1.0 / n);
  std::vector<double> residual_vec(static_cast<std::size_t>(k), 0.0);
  std::vector<double> gradient(static_cast<std::size_t>(n), 0.0);
  std::vector<double> work(static_cast<std::size_t>(k), 0.0);
  double step_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  double current = objective(q, work);

  for (; iterations < options.max_iterations; ++iterations) {
    apply(q, residual_vec);
    for (int row = 0; row < k; ++row) residual_vec[static_cast<std::size_t>(row)] -= system.rhs[static_cast<std::size_t>(row)];
    for (int j = 0; j < n; ++j) {
      double acc = ridge * q[static_cast<std::size_t>(j)];
      for (int row = 0; row < k; ++row) {
        acc += b[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)] * residual_vec[static_cast<std::size_t>(row)];
      }
      gradient[static_cast<std::size_t>(j)] = acc;
    }

    // Exact line search along the projection arc: the base step 1/L also
    // serves as the stationarity measure, while longer probes let the
    // iterate hop across faces of the simplex in one move. A plain
    // fixed-step variant crawls on rank-deficient systems where the
    // kernel values of neighboring bins are nearly equal.
    std::vector<double> best_trial;
    double best_value = current;
    for (int scale = 0; scale <= 40; ++scale) {
      const double sigma = std::ldexp(1.0 / lipschitz, scale);
      std::vector<double> trial(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j) {
        trial[static_cast<std::size_t>(j)] =
            q[static_cast<std::size_t>(j)] - sigma * gradient[static_cast<std::size_t>(j)];
      }
      trial = project_simplex(std::move(trial));
      if (scale == 0) {
        double disp = 0.0;
        for (int j = 0; j < n; ++j) {
          const double d = trial[static_cast<std::size_t>(j)] - q[static_cast<std::size_t>(j)];
          disp += d * d;
        }
        step_norm = std::sqrt(disp);
      }
      const double value = objective(trial, work);
      if (value < best_value) {
        best_value = value;
        best_trial = std::move(trial);
      }
    }

    if (step_norm < options.step_tolerance || best_trial.empty()) {
      converged = step_norm < options.step_tolerance;
      if (converged) break;
      // No probe improved the objective; with a non-stationary iterate
      // that means the arithmetic has bottomed out.
      converged = true;
      break;
    }

    // Segment refinement between the iterate and the best probe; the
    // objective is quadratic along the chord, so the minimizer is closed
    // form.
    std::vector<double> direction(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      direction[static_cast<std::size_t>(j)] =
          best_trial[static_cast<std::size_t>(j)] - q[static_cast<std::size_t>(j)];
    }
    double slope = 0.0;
    double curvature = 0.0;
    for (int j = 0; j < n; ++j) {
      slope += gradient[static_cast<std::size_t>(j)] * direction[static_cast<std::size_t>(j)];
      curvature += ridge * direction[static_cast<std::size_t>(j)] * direction[static_cast<std::size_t>(j)];
    }
    std::vector<double> bd(static_cast<std::size_t>(k), 0.0);
    apply(direction, bd);
    for (int row = 0; row < k; ++row) curvature += bd[static_cast<std::size_t>(row)] * bd[static_cast<std::size_t>(row)];
    double t = 1.0;
    if (curvature > 0.0) t = std::clamp(-slope / curvature, 0.0, 1.0);
    if (t == 0.0) t = 1.0;
    std::vector<double> stepped(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      stepped[static_cast<std::size_t>(j)] =
          q[static_cast<std::size_t>(j)] + t * direction[static_cast<std::size_t>(j)];
    }
    const double stepped_value = objective(stepped, work);
    if (stepped_value < best_value) {
      q = std::move(stepped);
      current = stepped_value;
    } else {
      q = std::move(best_trial);
      current = best_value;
    }
  }

  // Rounding drifts the total mass by a few ulps per step; pin it back to
  // one so the density construction sees an exactly normalized histogram.
  double mass = 0.0;
  for (int j = 0; j < n; ++j) mass += q[static_cast<std::size_t>(j)];
  if (mass > 0.0) {
    for (int j = 0; j < n; ++j) q[static_cast<std::size_t>(j)] /= mass;
  }

  apply(q, residual_vec);
  for (int row = 0; row < k; ++row) residual_vec[static_cast<std::size_t>(row)] -= system.rhs[static_cast<std::size_t>(row)];
  const double final_rms = rms(residual_vec);

  if (!converged) {
    throw Error(ErrorCode::NoConvergence,
                "projected gradient used all " + std::to_string(options.max_iterations) +
                    " iterations; best residual " + std::to_string(final_rms) +
                    ", projected step " + std::to_string(step_norm));
  }

  double c2 = 0.0;
  double s2 = 0.0;
  std::vector<double> density(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double node = j * w;
    c2 += q[static_cast<std::size_t>(j)] * std::cos(2.0 * node);
    s2 += q[static_cast<std::size_t>(j)] * std::sin(2.0 * node);
    density[static_cast<std::size_t>(j)] = q[static_cast<std::size_t>(j)] / w;
  }

  InverseSolution solution{AngleDistribution::from_bins(std::move(density)),
                           final_rms,
                           c2,
                           s2,
                           final_rms < options.feasibility_tolerance,
                           iterations,
                           step_norm};
  return solution;
}

FourierFeasibility fourier_feasibility(const std::vector<double>& targets,
                                       double feasibility_tolerance) {
  if (targets.empty()) {
    throw Error(ErrorCode::EmptyTargets, "feasibility analysis has no target angles");
  }
  FourierFeasibility result;
  result.constraints.reserve(targets.size());
  for (double theta : targets) {
    result.constraints.push_back(
        {0.5 * std::cos(2.0 * theta), -0.5 * std::sin(2.0 * theta), -std::cos(theta)});
  }

  const auto objective = [&](double c, double s) {
    double acc = 0.0;
    for (const auto& row : result.constraints) {
      const double miss = row[0] * c + row[1] * s - row[2];
      acc += miss * miss;
    }
    return acc / static_cast<double>(result.constraints.size());
  };

  // Unconstrained least squares first: 2x2 normal equations.
  double a11 = 0.0, a12 = 0.0, a22 = 0.0, r1 = 0.0, r2 = 0.0;
  for (const auto& row : result.constraints) {
    a11 += row[0] * row[0];
    a12 += row[0] * row[1];
    a22 += row[1] * row[1];
    r1 += row[0] * row[2];
    r2 += row[1] * row[2];
  }
  const double det = a11 * a22 - a12 * a12;
  bool interior = false;
  if (std::abs(det) > 1e-14) {
    const double c = (a22 * r1 - a12 * r2) / det;
    const double s = (a11 * r2 - a12 * r1) / det;
    if (c * c + s * s <= 1.0) {
      result.c2 = c;
      result.s2 = s;
      interior = true;
    }
  }

  if (!interior) {
    // The objective is convex, so an exterior minimizer lands on the disc
    // boundary: scan the circle, then ternary-refine the best bracket.
    const int scan = 8192;
    double best_phi = 0.0;
    double best_val = objective(1.0, 0.0);
    for (int i = 1; i < scan; ++i) {
      const double phi = kTwoPi * i / scan;
      const double val = objective(std::cos(phi), std::sin(phi));
      if (val < best_val) {
        best_val = val;
        best_phi = phi;
      }
    }
    double lo = best_phi - kTwoPi / scan;
    double hi = best_phi + kTwoPi / scan;
    for (int it = 0; it < 200; ++it) {
      const double m1 = lo + (hi - lo) / 3.0;
      const double m2 = hi - (hi - lo) / 3.0;
      if (objective(std::cos(m1), std::sin(m1)) < objective(std::cos(m2), std::sin(m2))) {
        hi = m2;
      } else {
        lo = m1;
      }
    }
    const double phi = 0.5 * (lo + hi);
    result.c2 = std::cos(phi);
    result.s2 = std::sin(phi);
    result.on_boundary = true;
  }

  result.residual_lower_bound = std::sqrt(objective(result.c2, result.s2));
  result.feasible = result.residual_lower_bound < feasibility_tolerance;
  return result;
}

double chsh_statistic(const AngleDistribution& psi_dist, const AngleQuad& q) {
  const auto correlation = [&](double theta_ab) {
    double e = 0.0;
    for (int a : {+1, -1}) {
      for (int outcome_b : {+1, -1}) {
        const double p = simp_probability(psi_dist, a, outcome_b, theta_ab);
        e += (a == outcome_b ? p : -p);
      }
    }
    return e;
  };
  const double e_ab = correlation(q.a - q.b);
  const double e_abp = correlation(q.a - q.b_alt);
  const double e_apb = correlation(q.a_alt - q.b);
  const double e_apbp = correlation(q.a_alt - q.b_alt);
  return std::abs(e_ab - e_abp) + std::abs(e_apb + e_apbp);
}

ChshMaximum maximize_chsh(int bins, int restarts, std::uint64_t seed) {
  if (bins < AngleDistribution::kMinBins) {
    throw Error(ErrorCode::ConfigError, "maximizer needs at least " +
                                            std::to_string(AngleDistribution::kMinBins) +
                                            " bins");
  }
  if (restarts < 1) restarts = 1;

  std::vector<BinHarmonic> harmonics(static_cast<std::size_t>(bins));
  for (int j = 0; j < bins; ++j) harmonics[static_cast<std::size_t>(j)] = bin_harmonic(j, bins);

  ChshMaximum best;
  best.bins = bins;
  best.density_bins.assign(static_cast<std::size_t>(bins), 0.0);

  const double w = kTwoPi / bins;
  for (int restart = 0; restart < restarts; ++restart) {
    std::vector<double> mass(static_cast<std::size_t>(bins), 0.0);
    const int start =
        static_cast<int>(counter_bits(seed, static_cast<std::uint64_t>(restart), 0) %
                         static_cast<std::uint64_t>(bins));
    mass[static_cast<std::size_t>(start)] = 1.0;

    AngleQuad q;
    double current = 0.0;
    int round = 0;
    for (; round < 32; ++round) {
      // Moments of the current density, exact via the per-bin harmonics.
      double c = 0.0;
      double s = 0.0;
      for (int j = 0; j < bins; ++j) {
        c += mass[static_cast<std::size_t>(j)] * harmonics[static_cast<std::size_t>(j)].c;
        s += mass[static_cast<std::size_t>(j)] * harmonics[static_cast<std::size_t>(j)].s;
      }
      // Angle update: E(theta) = (R/2) cos(2 theta + phase), and the
      // classic optimal quadruple for a pure cosine correlation.
      const double phase = std::atan2(s, c);
      q.a = 0.0;
      q.a_alt = kPi / 4.0;
      q.b = 0.5 * (3.0 * kPi / 4.0 + phase);
      q.b_alt = 0.5 * (kPi / 4.0 + phase);

      // Density update: for fixed angles the statistic is a maximum of
      // linear functionals of the bin masses, so the best density is a
      // single bin; test every bin under both sign resolutions.
      int best_bin = 0;
      double best_bin_value = -1.0;
      for (int j = 0; j < bins; ++j) {
        const double value =
            quad_statistic(harmonics[static_cast<std::size_t>(j)].c,
                           harmonics[static_cast<std::size_t>(j)].s, q);
        if (value > best_bin_value) {
          best_bin_value = value;
          best_bin = j;
        }
      }
      std::fill(mass.begin(), mass.end(), 0.0);
      mass[static_cast<std::size_t>(best_bin)] = 1.0;

      if (best_bin_value <= current + 1e-12) {
        current = std::max(current, best_bin_value);
        break;
      }
      current = best_bin_value;
    }

    if (current > best.s_value) {
      best.s_value = current;
      best.angles = q;
      best.rounds = round + 1;
      for (int j = 0; j < bins; ++j) {
        best.density_bins[static_cast<std::size_t>(j)] = mass[static_cast<std::size_t>(j)] / w;
      }
    }
  }
  return best;
}

}  // namespace cchsh
