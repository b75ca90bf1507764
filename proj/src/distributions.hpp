// cchsh - binned probability densities on the circle
//
// The probability integrals all consume densities over [0, 2pi). We store
// them as uniform histograms plus an optional list of exact point masses.
// The atoms are what keep delta-style test cases exact: integrating a
// narrow bin against f only approximates f(angle), an atom reproduces it.

#ifndef CCHSH_DISTRIBUTIONS_HPP_
#define CCHSH_DISTRIBUTIONS_HPP_

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "angles.hpp"
#include "error.hpp"

namespace cchsh {

inline constexpr int kDefaultNodes1D = 2048;
inline constexpr int kDefaultNodesPerAxis2D = 256;
inline constexpr int kMinQuadratureNodes = 64;

// Composite Simpson on [a, b]. Interval count is forced up to an even
// number >= 2. On a full period of a smooth periodic integrand the uniform
// grid makes this spectrally accurate, far better than the O(h^4) bound.
template <typename F>
double simpson(F&& f, double a, double b, int intervals) {
  int n = intervals < 2 ? 2 : intervals;
  if (n % 2 != 0) ++n;
  const double h = (b - a) / n;
  double odd = 0.0;
  double even = 0.0;
  for (int i = 1; i < n; i += 2) odd += f(a + i * h);
  for (int i = 2; i < n; i += 2) even += f(a + i * h);
  return (h / 3.0) * (f(a) + 4.0 * odd + 2.0 * even + f(b));
}

// Validates a requested node count against the module floor.
int checked_node_count(int requested, int floor_nodes = kMinQuadratureNodes);

struct AngleAtom {
  double angle = 0.0;   // stored wrapped to [0, 2pi)
  double weight = 1.0;  // strictly positive
};

class AngleDistribution {
 public:
  static constexpr int kMinBins = 8;
  static constexpr double kNormTol = 1e-10;

  static AngleDistribution uniform(int bins = 64);
  static AngleDistribution point_mass(double angle, int bins = kMinBins);
  static AngleDistribution from_bins(std::vector<double> density);
  // General form: histogram plus point masses, total mass 1.
  static AngleDistribution mixture(std::vector<double> density, std::vector<AngleAtom> atoms);

  int bin_count() const { return static_cast<int>(density_.size()); }
  double bin_width() const { return kTwoPi / bin_count(); }
  const std::vector<double>& density() const { return density_; }
  const std::vector<AngleAtom>& atoms() const { return atoms_; }
  double atom_mass() const { return atom_mass_; }
  double bin_mass() const { return 1.0 - atom_mass_; }

  // Histogram part only; point masses have no pointwise density.
  double density_at(double angle) const;

  // Histogram contribution to E[g]: per-bin Simpson panels weighted by the
  // bin densities. `nodes` is the total panel budget across all bins (0
  // picks the 1-D default). Keeping panels inside bins means the piecewise
  // constant density never straddles a quadrature interval.
  template <typename F>
  double expect_bins(F&& g, int nodes = 0) const {
    const int total = nodes == 0 ? kDefaultNodes1D : checked_node_count(nodes);
    const int n = bin_count();
    int per_bin = total / n;
    if (per_bin < 2) per_bin = 2;
    if (per_bin % 2 != 0) ++per_bin;
    const double w = bin_width();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      if (density_[i] == 0.0) continue;
      const double a = i * w;
      acc += density_[i] * simpson(g, a, a + w, per_bin);
    }
    return acc;
  }

  // E[g] = histogram panels + exact atom terms.
  template <typename F>
  double expect(F&& g, int nodes = 0) const {
    double acc = expect_bins(g, nodes);
    for (const AngleAtom& atom : atoms_) acc += atom.weight * g(atom.angle);
    return acc;
  }

  // Inverse-CDF draw from the counter stream; pure in (seed, index, stream).
  double sample(std::uint64_t seed, std::uint64_t index, std::uint64_t stream = 0) const;

 private:
  AngleDistribution(std::vector<double> density, std::vector<AngleAtom> atoms);

  std::vector<double> density_;
  std::vector<AngleAtom> atoms_;
  double atom_mass_ = 0.0;
  std::vector<double> cdf_;  // cumulative mass: atoms first, then bins
};

// Joint density over (theta_A1, theta_B1). Three shapes cover everything
// the dynamics needs:
//   Grid        an N x N histogram, fully general
//   Product     independent marginals
//   Correlated  theta_A1 = t, theta_B1 = t - psi with independent t, psi;
//               this is the single-degree-of-freedom family where only
//               psi = theta_A1 - theta_B1 carries information
class JointAngleDistribution {
 public:
  enum class Kind { Grid, Product, Correlated };

  static JointAngleDistribution grid(int bins_per_axis, std::vector<double> density);
  static JointAngleDistribution product(AngleDistribution first, AngleDistribution second);
  static JointAngleDistribution correlated(AngleDistribution along, AngleDistribution offset);

  Kind kind() const { return kind_; }
  int bin_count() const { return bins_; }
  const std::vector<double>& grid_density() const;
  // Product: the two marginals. Correlated: the t and psi factors.
  const AngleDistribution& first() const;
  const AngleDistribution& second() const;

  // E[g(theta_A1, theta_B1)]. nodes_per_axis 0 picks the 2-D default.
  template <typename G>
  double expect(G&& g, int nodes_per_axis = 0) const {
    const int per_axis =
        nodes_per_axis == 0 ? kDefaultNodesPerAxis2D : checked_node_count(nodes_per_axis);
    switch (kind_) {
      case Kind::Grid: {
        const double w = kTwoPi / bins_;
        int per_cell = per_axis / bins_;
        if (per_cell < 2) per_cell = 2;
        if (per_cell % 2 != 0) ++per_cell;
        double acc = 0.0;
        for (int i = 0; i < bins_; ++i) {
          for (int j = 0; j < bins_; ++j) {
            const double rho = grid_[static_cast<std::size_t>(i) * bins_ + j];
            if (rho == 0.0) continue;
            const double x0 = i * w;
            const double y0 = j * w;
            auto row = [&](double x) {
              return simpson([&](double y) { return g(x, y); }, y0, y0 + w, per_cell);
            };
            acc += rho * simpson(row, x0, x0 + w, per_cell);
          }
        }
        return acc;
      }
      case Kind::Product:
        return a_->expect(
            [&](double x) { return b_->expect([&](double y) { return g(x, y); }, per_axis); },
            per_axis);
      case Kind::Correlated:
        return a_->expect(
            [&](double t) {
              return b_->expect([&](double psi) { return g(t, wrap_two_pi(t - psi)); }, per_axis);
            },
            per_axis);
    }
    throw Error(ErrorCode::Internal, "joint distribution kind out of range");
  }

  // Draw (theta_A1, theta_B1); substreams stream_base and stream_base + 1
  // (and + 2 for in-cell jitter on grids) are consumed.
  std::pair<double, double> sample(std::uint64_t seed, std::uint64_t index,
                                   std::uint64_t stream_base = 0) const;

 private:
  JointAngleDistribution() = default;

  Kind kind_ = Kind::Grid;
  int bins_ = 0;
  std::vector<double> grid_;      // row-major, index i * bins_ + j
  std::vector<double> cell_cdf_;  // cumulative cell mass for sampling
  std::optional<AngleDistribution> a_;
  std::optional<AngleDistribution> b_;
};

}  // namespace cchsh

#endif  // CCHSH_DISTRIBUTIONS_HPP_
