// cchsh - spacetime metrics and Christoffel symbols
//
// Coordinates are a single global chart x = (x0, x1, x2, x3) with signature
// (-,+,+,+). Builtin families:
//   minkowski       flat, closed-form connection (identically zero)
//   weak-field      linearized point mass, softened so the potential is
//                   smooth everywhere: Phi = -M / sqrt(|x-c|^2 + s^2)
//   product-sphere  flat time x round 2-sphere x line, the curvature oracle
//   grid            coefficients tabulated on a regular grid (CSV), with
//                   multilinear interpolation
//
// Leaving the chart (coordinate bound, or the grid's bounding box) is a hard
// error; there is no atlas.

#ifndef CCHSH_METRIC_HPP_
#define CCHSH_METRIC_HPP_

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"

namespace cchsh {

enum class ChristoffelMode { ClosedForm, CentralDifference };

enum class CausalClass { Timelike, Null, Spacelike };

struct Christoffel {
  // Gamma^mu_{alpha beta}, symmetric in the lower pair.
  std::array<double, 64> v{};

  double& at(int mu, int a, int b) { return v[static_cast<std::size_t>(16 * mu + 4 * a + b)]; }
  double at(int mu, int a, int b) const { return v[static_cast<std::size_t>(16 * mu + 4 * a + b)]; }
};

class Metric {
 public:
  virtual ~Metric() = default;

  virtual Mat4 value(const Vec4& x) const = 0;
  virtual bool has_closed_form() const { return false; }
  virtual Christoffel closed_form(const Vec4& x) const;
  // Period of each coordinate, 0 when the coordinate is not periodic. Used
  // by closure checks so that a loop may wind once around a periodic chart
  // direction.
  virtual std::array<double, 4> coordinate_periods() const { return {0.0, 0.0, 0.0, 0.0}; }
  virtual std::string name() const = 0;
};

class MinkowskiMetric final : public Metric {
 public:
  Mat4 value(const Vec4&) const override;
  bool has_closed_form() const override { return true; }
  Christoffel closed_form(const Vec4&) const override { return {}; }
  std::string name() const override { return "minkowski"; }
};

// Linearized lump. `spin` is the specific angular momentum a = J/M; when it
// is nonzero the metric gains the frame-dragging cross terms
// g_{0i} = -2 M (a x d)_i / (|d|^2 + s^2)^{3/2}, the piece that actually
// rotates polarization planes. A purely static potential does not: transport
// around any closed loop then returns transverse vectors unrotated, so tests
// that need a nonzero loop rotation must spin the source.
class WeakFieldMetric final : public Metric {
 public:
  WeakFieldMetric(double mass, double softening, std::array<double, 3> center,
                  std::array<double, 3> spin = {0.0, 0.0, 0.0});

  Mat4 value(const Vec4& x) const override;
  // The closed form covers the static case; the spinning metric falls back
  // to central differences.
  bool has_closed_form() const override { return !spinning_; }
  Christoffel closed_form(const Vec4& x) const override;
  std::string name() const override { return "weak-field"; }

  double mass() const { return mass_; }

 private:
  double potential(const Vec4& x, Vec4& grad) const;

  double mass_;
  double softening_;
  std::array<double, 3> center_;
  std::array<double, 3> spin_;
  bool spinning_ = false;
};

class ProductSphereMetric final : public Metric {
 public:
  explicit ProductSphereMetric(double radius);

  Mat4 value(const Vec4& x) const override;
  bool has_closed_form() const override { return true; }
  Christoffel closed_form(const Vec4& x) const override;
  std::array<double, 4> coordinate_periods() const override { return {0.0, 0.0, kSpherePeriod, 0.0}; }
  std::string name() const override { return "product-sphere"; }

  static constexpr double kSpherePeriod = 6.283185307179586476925286766559;

 private:
  double radius_;
};

// Metric coefficients tabulated on a regular 4-d grid, multilinearly
// interpolated. Axes may be degenerate (a single coordinate value), in which
// case the metric is constant along them.
class GridMetric final : public Metric {
 public:
  static std::shared_ptr<GridMetric> load_csv(const std::string& path);

  Mat4 value(const Vec4& x) const override;
  std::string name() const override { return "grid"; }

  const std::array<std::vector<double>, 4>& axes() const { return axes_; }

 private:
  std::array<std::vector<double>, 4> axes_;
  std::vector<std::array<double, 16>> cells_;  // row-major over axes

  std::size_t flat_index(const std::array<std::size_t, 4>& idx) const;
};

// Arbitrary callable metric; test scaffolding for degenerate and analytic
// cases.
class CallbackMetric final : public Metric {
 public:
  explicit CallbackMetric(std::function<Mat4(const Vec4&)> fn, std::string label = "callback")
      : fn_(std::move(fn)), label_(std::move(label)) {}

  Mat4 value(const Vec4& x) const override { return fn_(x); }
  std::string name() const override { return label_; }

 private:
  std::function<Mat4(const Vec4&)> fn_;
  std::string label_;
};

struct SpacetimeOptions {
  ChristoffelMode mode = ChristoffelMode::ClosedForm;
  double fd_step = 1e-5;
  double chart_bound = 100.0;
};

// A metric plus evaluation policy: how to get the connection, the finite
// difference step, and the chart bound.
class Spacetime {
 public:
  using Options = SpacetimeOptions;

  Spacetime(std::shared_ptr<const Metric> metric, Options opts = {});

  static Spacetime minkowski();
  static Spacetime weak_field(double mass, double softening,
                              std::array<double, 3> center = {0.0, 0.0, 0.0},
                              std::array<double, 3> spin = {0.0, 0.0, 0.0}, Options opts = {});
  static Spacetime product_sphere(double radius, Options opts = {});
  static Spacetime from_grid_csv(const std::string& path, Options opts = {});

  // Metric value with symmetry and nondegeneracy checks.
  Mat4 metric_at(const Vec4& x) const;
  Mat4 inverse_metric_at(const Vec4& x) const;
  Christoffel christoffel(const Vec4& x) const;
  // Connection by central differences regardless of closed-form
  // availability; the cross-check path.
  Christoffel christoffel_central_difference(const Vec4& x, double step) const;

  double inner(const Vec4& base, const Vec4& v, const Vec4& w) const;
  CausalClass classify(const Vec4& base, const Vec4& v) const;

  void require_in_chart(const Vec4& x) const;
  double chart_bound() const { return opts_.chart_bound; }
  std::array<double, 4> periods() const { return metric_->coordinate_periods(); }
  const Metric& metric() const { return *metric_; }
  const Options& options() const { return opts_; }

  // Coordinate displacement a - b with periodic components wrapped to the
  // nearest representative.
  Vec4 chart_displacement(const Vec4& a, const Vec4& b) const;

 private:
  std::shared_ptr<const Metric> metric_;
  Options opts_;
};

}  // namespace cchsh

#endif  // CCHSH_METRIC_HPP_
