#include "distributions.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "counter_rng.hpp"

namespace cchsh {

namespace {

void check_density_values(const std::vector<double>& density, int min_bins) {
  if (static_cast<int>(density.size()) < min_bins) {
    throw Error(ErrorCode::ConfigError,
                "angle distribution needs at least " + std::to_string(min_bins) +
                    " bins, got " + std::to_string(density.size()));
  }
  for (std::size_t i = 0; i < density.size(); ++i) {
    if (!(density[i] >= 0.0) || !std::isfinite(density[i])) {
      throw Error(ErrorCode::ConfigError,
                  "density bin " + std::to_string(i) + " is negative or not finite");
    }
  }
}

}  // namespace

int checked_node_count(int requested, int floor_nodes) {
  if (requested < floor_nodes) {
    throw Error(ErrorCode::ResolutionTooLow,
                "quadrature needs at least " + std::to_string(floor_nodes) +
                    " nodes, got " + std::to_string(requested));
  }
  return requested % 2 == 0 ? requested : requested + 1;
}

AngleDistribution::AngleDistribution(std::vector<double> density, std::vector<AngleAtom> atoms)
    : density_(std::move(density)), atoms_(std::move(atoms)) {
  check_density_values(density_, kMinBins);
  atom_mass_ = 0.0;
  for (AngleAtom& atom : atoms_) {
    if (!(atom.weight > 0.0) || !std::isfinite(atom.weight)) {
      throw Error(ErrorCode::ConfigError, "point mass weight must be positive and finite");
    }
    atom.angle = wrap_two_pi(atom.angle);
    atom_mass_ += atom.weight;
  }
  double bin_mass = 0.0;
  for (double rho : density_) bin_mass += rho * bin_width();
  const double total = bin_mass + atom_mass_;
  if (std::abs(total - 1.0) > kNormTol) {
    throw Error(ErrorCode::ConfigError,
                "distribution mass is " + std::to_string(total) + ", expected 1");
  }
  // Cumulative masses for inverse-CDF sampling: atoms first, then bins.
  cdf_.reserve(atoms_.size() + density_.size());
  double running = 0.0;
  for (const AngleAtom& atom : atoms_) {
    running += atom.weight;
    cdf_.push_back(running);
  }
  for (double rho : density_) {
    running += rho * bin_width();
    cdf_.push_back(running);
  }
  if (!cdf_.empty()) cdf_.back() = 1.0;
}

AngleDistribution AngleDistribution::uniform(int bins) {
  std::vector<double> density(static_cast<std::size_t>(std::max(bins, 1)), 1.0 / kTwoPi);
  return AngleDistribution(std::move(density), {});
}

AngleDistribution AngleDistribution::point_mass(double angle, int bins) {
  std::vector<double> density(static_cast<std::size_t>(std::max(bins, 1)), 0.0);
  return AngleDistribution(std::move(density), {AngleAtom{angle, 1.0}});
}

AngleDistribution AngleDistribution::from_bins(std::vector<double> density) {
  return AngleDistribution(std::move(density), {});
}

AngleDistribution AngleDistribution::mixture(std::vector<double> density,
                                             std::vector<AngleAtom> atoms) {
  return AngleDistribution(std::move(density), std::move(atoms));
}

double AngleDistribution::density_at(double angle) const {
  const double a = wrap_two_pi(angle);
  int i = static_cast<int>(a / bin_width());
  if (i >= bin_count()) i = bin_count() - 1;
  return density_[static_cast<std::size_t>(i)];
}

double AngleDistribution::sample(std::uint64_t seed, std::uint64_t index,
                                 std::uint64_t stream) const {
  const double u = counter_uniform(seed, index, stream);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  std::size_t k = static_cast<std::size_t>(it - cdf_.begin());
  if (k >= cdf_.size()) k = cdf_.size() - 1;
  if (k < atoms_.size()) return atoms_[k].angle;
  const std::size_t bin = k - atoms_.size();
  const double below = k == 0 ? 0.0 : cdf_[k - 1];
  const double mass = density_[bin] * bin_width();
  const double frac = mass > 0.0 ? std::clamp((u - below) / mass, 0.0, 1.0) : 0.0;
  return wrap_two_pi((static_cast<double>(bin) + frac) * bin_width());
}

JointAngleDistribution JointAngleDistribution::grid(int bins_per_axis,
                                                    std::vector<double> density) {
  if (bins_per_axis < AngleDistribution::kMinBins) {
    throw Error(ErrorCode::ConfigError,
                "joint grid needs at least " + std::to_string(AngleDistribution::kMinBins) +
                    " bins per axis, got " + std::to_string(bins_per_axis));
  }
  const std::size_t expected =
      static_cast<std::size_t>(bins_per_axis) * static_cast<std::size_t>(bins_per_axis);
  if (density.size() != expected) {
    throw Error(ErrorCode::ShapeMismatch,
                "joint grid density has " + std::to_string(density.size()) +
                    " entries, expected " + std::to_string(expected));
  }
  const double w = kTwoPi / bins_per_axis;
  double total = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) {
    if (!(density[i] >= 0.0) || !std::isfinite(density[i])) {
      throw Error(ErrorCode::ConfigError,
                  "joint density cell " + std::to_string(i) + " is negative or not finite");
    }
    total += density[i] * w * w;
  }
  if (std::abs(total - 1.0) > AngleDistribution::kNormTol) {
    throw Error(ErrorCode::ConfigError,
                "joint distribution mass is " + std::to_string(total) + ", expected 1");
  }
  JointAngleDistribution joint;
  joint.kind_ = Kind::Grid;
  joint.bins_ = bins_per_axis;
  joint.grid_ = std::move(density);
  joint.cell_cdf_.reserve(joint.grid_.size());
  double running = 0.0;
  for (double rho : joint.grid_) {
    running += rho * w * w;
    joint.cell_cdf_.push_back(running);
  }
  joint.cell_cdf_.back() = 1.0;
  return joint;
}

JointAngleDistribution JointAngleDistribution::product(AngleDistribution first,
                                                       AngleDistribution second) {
  JointAngleDistribution joint;
  joint.kind_ = Kind::Product;
  joint.a_ = std::move(first);
  joint.b_ = std::move(second);
  return joint;
}

JointAngleDistribution JointAngleDistribution::correlated(AngleDistribution along,
                                                          AngleDistribution offset) {
  JointAngleDistribution joint;
  joint.kind_ = Kind::Correlated;
  joint.a_ = std::move(along);
  joint.b_ = std::move(offset);
  return joint;
}

const std::vector<double>& JointAngleDistribution::grid_density() const {
  if (kind_ != Kind::Grid) {
    throw Error(ErrorCode::Internal, "grid_density on a non-grid joint distribution");
  }
  return grid_;
}

const AngleDistribution& JointAngleDistribution::first() const {
  if (!a_) throw Error(ErrorCode::Internal, "no marginal stored for a grid joint distribution");
  return *a_;
}

const AngleDistribution& JointAngleDistribution::second() const {
  if (!b_) throw Error(ErrorCode::Internal, "no marginal stored for a grid joint distribution");
  return *b_;
}

std::pair<double, double> JointAngleDistribution::sample(std::uint64_t seed, std::uint64_t index,
                                                         std::uint64_t stream_base) const {
  switch (kind_) {
    case Kind::Grid: {
      const double u = counter_uniform(seed, index, stream_base);
      const auto it = std::upper_bound(cell_cdf_.begin(), cell_cdf_.end(), u);
      std::size_t cell = static_cast<std::size_t>(it - cell_cdf_.begin());
      if (cell >= cell_cdf_.size()) cell = cell_cdf_.size() - 1;
      const std::size_t i = cell / bins_;
      const std::size_t j = cell % bins_;
      const double w = kTwoPi / bins_;
      const double jx = counter_uniform(seed, index, stream_base + 1);
      const double jy = counter_uniform(seed, index, stream_base + 2);
      return {wrap_two_pi((static_cast<double>(i) + jx) * w),
              wrap_two_pi((static_cast<double>(j) + jy) * w)};
    }
    case Kind::Product:
      return {a_->sample(seed, index, stream_base), b_->sample(seed, index, stream_base + 1)};
    case Kind::Correlated: {
      const double t = a_->sample(seed, index, stream_base);
      const double psi = b_->sample(seed, index, stream_base + 1);
      return {t, wrap_two_pi(t - psi)};
    }
  }
  throw Error(ErrorCode::Internal, "joint distribution kind out of range");
}

}  // namespace cchsh
