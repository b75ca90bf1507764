// cchsh - metric implementations

#include "metric.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "angles.hpp"

namespace cchsh {

namespace {

constexpr double kDetFloor = 1e-12;
constexpr double kSymmetryTol = 1e-9;
// Relative threshold separating null from timelike/spacelike.
constexpr double kCausalTol = 1e-9;

}  // namespace

Christoffel Metric::closed_form(const Vec4&) const {
  throw Error(ErrorCode::Internal, "metric '" + name() + "' has no closed-form connection");
}

// ---------------------------------------------------------------------------
// Minkowski

Mat4 MinkowskiMetric::value(const Vec4&) const {
  Mat4 g;
  g.at(0, 0) = -1.0;
  g.at(1, 1) = 1.0;
  g.at(2, 2) = 1.0;
  g.at(3, 3) = 1.0;
  return g;
}

// ---------------------------------------------------------------------------
// Weak field

WeakFieldMetric::WeakFieldMetric(double mass, double softening, std::array<double, 3> center,
                                 std::array<double, 3> spin)
    : mass_(mass), softening_(softening), center_(center), spin_(spin) {
  if (mass < 0.0) throw Error(ErrorCode::ConfigError, "weak-field mass must be >= 0");
  if (softening <= 0.0) throw Error(ErrorCode::ConfigError, "weak-field softening must be > 0");
  for (double s : spin) {
    if (!std::isfinite(s)) throw Error(ErrorCode::ConfigError, "weak-field spin must be finite");
    if (s != 0.0) spinning_ = true;
  }
}

double WeakFieldMetric::potential(const Vec4& x, Vec4& grad) const {
  const double dx = x[1] - center_[0];
  const double dy = x[2] - center_[1];
  const double dz = x[3] - center_[2];
  const double r2 = dx * dx + dy * dy + dz * dz + softening_ * softening_;
  const double r = std::sqrt(r2);
  const double phi = -mass_ / r;
  const double f = mass_ / (r2 * r);  // d(-M/r)/dx_i = M x_i / r^3
  grad = {0.0, f * dx, f * dy, f * dz};
  return phi;
}

Mat4 WeakFieldMetric::value(const Vec4& x) const {
  Vec4 grad;
  const double phi = potential(x, grad);
  Mat4 g;
  g.at(0, 0) = -(1.0 + 2.0 * phi);
  g.at(1, 1) = 1.0 - 2.0 * phi;
  g.at(2, 2) = 1.0 - 2.0 * phi;
  g.at(3, 3) = 1.0 - 2.0 * phi;
  if (spinning_) {
    const double dx = x[1] - center_[0];
    const double dy = x[2] - center_[1];
    const double dz = x[3] - center_[2];
    const double r2 = dx * dx + dy * dy + dz * dz + softening_ * softening_;
    const double f = -2.0 * mass_ / (r2 * std::sqrt(r2));
    const double ax = f * (spin_[1] * dz - spin_[2] * dy);
    const double ay = f * (spin_[2] * dx - spin_[0] * dz);
    const double az = f * (spin_[0] * dy - spin_[1] * dx);
    g.at(0, 1) = ax;
    g.at(1, 0) = ax;
    g.at(0, 2) = ay;
    g.at(2, 0) = ay;
    g.at(0, 3) = az;
    g.at(3, 0) = az;
  }
  return g;
}

Christoffel WeakFieldMetric::closed_form(const Vec4& x) const {
  Vec4 grad;
  const double phi = potential(x, grad);
  const double a = 1.0 / (1.0 + 2.0 * phi);
  const double b = 1.0 / (1.0 - 2.0 * phi);

  Christoffel c;
  for (int i = 1; i < 4; ++i) {
    c.at(0, 0, i) = grad[i] * a;
    c.at(0, i, 0) = grad[i] * a;
    c.at(i, 0, 0) = grad[i] * b;
    for (int j = 1; j < 4; ++j) {
      for (int k = 1; k < 4; ++k) {
        double val = 0.0;
        if (j == k) val += grad[i];
        if (i == j) val -= grad[k];
        if (i == k) val -= grad[j];
        c.at(i, j, k) = val * b;
      }
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Product sphere: ds^2 = -dt^2 + R^2 (dth^2 + sin^2 th dph^2) + dz^2

ProductSphereMetric::ProductSphereMetric(double radius) : radius_(radius) {
  if (radius <= 0.0) throw Error(ErrorCode::ConfigError, "product-sphere radius must be > 0");
}

Mat4 ProductSphereMetric::value(const Vec4& x) const {
  const double s = std::sin(x[1]);
  Mat4 g;
  g.at(0, 0) = -1.0;
  g.at(1, 1) = radius_ * radius_;
  g.at(2, 2) = radius_ * radius_ * s * s;
  g.at(3, 3) = 1.0;
  return g;
}

Christoffel ProductSphereMetric::closed_form(const Vec4& x) const {
  const double th = x[1];
  const double s = std::sin(th);
  const double c = std::cos(th);
  Christoffel out;
  out.at(1, 2, 2) = -s * c;
  if (std::abs(s) < 1e-12) {
    throw Error(ErrorCode::DegenerateMetric, "product-sphere chart is singular at the poles");
  }
  const double cot = c / s;
  out.at(2, 1, 2) = cot;
  out.at(2, 2, 1) = cot;
  return out;
}

// ---------------------------------------------------------------------------
// Grid metric

std::size_t GridMetric::flat_index(const std::array<std::size_t, 4>& idx) const {
  std::size_t f = 0;
  for (int d = 0; d < 4; ++d) f = f * axes_[static_cast<std::size_t>(d)].size() + idx[static_cast<std::size_t>(d)];
  return f;
}

std::shared_ptr<GridMetric> GridMetric::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open metric grid file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "empty metric grid file: " + path);

  // Header must be x0,x1,x2,x3,g00,g01,...,g33 (row-major metric block).
  {
    std::string squashed;
    for (char ch : line)
      if (!std::isspace(static_cast<unsigned char>(ch))) squashed += ch;
    std::string expected = "x0,x1,x2,x3";
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) expected += ",g" + std::to_string(i) + std::to_string(j);
    if (squashed != expected)
      throw Error(ErrorCode::IoError, "bad metric grid header in " + path + " (want " + expected + ")");
  }

  struct Row {
    Vec4 x;
    std::array<double, 16> g;
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    Row row{};
    std::string tok;
    for (int k = 0; k < 20; ++k) {
      if (!std::getline(ss, tok, ',')) {
        throw Error(ErrorCode::IoError,
                    path + ":" + std::to_string(line_no) + ": expected 20 comma-separated values");
      }
      double v = 0.0;
      try {
        v = std::stod(tok);
      } catch (const std::exception&) {
        throw Error(ErrorCode::IoError,
                    path + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
      }
      if (k < 4)
        row.x[static_cast<std::size_t>(k)] = v;
      else
        row.g[static_cast<std::size_t>(k - 4)] = v;
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw Error(ErrorCode::IoError, "metric grid has no data rows: " + path);

  auto grid = std::make_shared<GridMetric>();
  for (int d = 0; d < 4; ++d) {
    std::vector<double> vals;
    vals.reserve(rows.size());
    for (const Row& r : rows) vals.push_back(r.x[static_cast<std::size_t>(d)]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               vals.end());
    grid->axes_[static_cast<std::size_t>(d)] = std::move(vals);
  }

  std::size_t total = 1;
  for (const auto& ax : grid->axes_) total *= ax.size();
  if (total != rows.size()) {
    throw Error(ErrorCode::IoError, "metric grid is not a full tensor product grid: " + path + " (" +
                                        std::to_string(rows.size()) + " rows, expected " +
                                        std::to_string(total) + ")");
  }

  grid->cells_.assign(total, {});
  std::vector<bool> seen(total, false);
  for (const Row& r : rows) {
    std::array<std::size_t, 4> idx{};
    for (int d = 0; d < 4; ++d) {
      const auto& ax = grid->axes_[static_cast<std::size_t>(d)];
      auto it = std::lower_bound(ax.begin(), ax.end(), r.x[static_cast<std::size_t>(d)] - 1e-12);
      idx[static_cast<std::size_t>(d)] = static_cast<std::size_t>(it - ax.begin());
    }
    const std::size_t f = grid->flat_index(idx);
    if (seen[f]) throw Error(ErrorCode::IoError, "duplicate grid node in " + path);
    seen[f] = true;
    grid->cells_[f] = r.g;
  }
  return grid;
}

Mat4 GridMetric::value(const Vec4& x) const {
  // Locate the cell along each axis; outside the bounding box is off-chart.
  std::array<std::size_t, 4> lo{};
  std::array<double, 4> t{};
  for (int d = 0; d < 4; ++d) {
    const auto& ax = axes_[static_cast<std::size_t>(d)];
    const double v = x[static_cast<std::size_t>(d)];
    if (ax.size() == 1) {
      lo[static_cast<std::size_t>(d)] = 0;
      t[static_cast<std::size_t>(d)] = 0.0;
      continue;
    }
    if (v < ax.front() - 1e-9 || v > ax.back() + 1e-9)
      throw Error(ErrorCode::ChartEscape, "point leaves the metric grid along axis " + std::to_string(d));
    auto it = std::upper_bound(ax.begin(), ax.end(), v);
    std::size_t hi = static_cast<std::size_t>(it - ax.begin());
    if (hi == 0) hi = 1;
    if (hi >= ax.size()) hi = ax.size() - 1;
    lo[static_cast<std::size_t>(d)] = hi - 1;
    const double a = ax[hi - 1];
    const double b = ax[hi];
    t[static_cast<std::size_t>(d)] = (v - a) / (b - a);
  }

  Mat4 g;
  for (int corner = 0; corner < 16; ++corner) {
    double w = 1.0;
    std::array<std::size_t, 4> idx = lo;
    for (int d = 0; d < 4; ++d) {
      const bool up = (corner >> d) & 1;
      const auto& ax = axes_[static_cast<std::size_t>(d)];
      if (up) {
        if (ax.size() == 1) {
          w = 0.0;
          break;
        }
        idx[static_cast<std::size_t>(d)] = lo[static_cast<std::size_t>(d)] + 1;
        w *= t[static_cast<std::size_t>(d)];
      } else {
        w *= (ax.size() == 1) ? 1.0 : (1.0 - t[static_cast<std::size_t>(d)]);
      }
    }
    if (w == 0.0) continue;
    const auto& cell = cells_[flat_index(idx)];
    for (int k = 0; k < 16; ++k) g.m[static_cast<std::size_t>(k)] += w * cell[static_cast<std::size_t>(k)];
  }
  return g;
}

// ---------------------------------------------------------------------------
// Spacetime

Spacetime::Spacetime(std::shared_ptr<const Metric> metric, Options opts)
    : metric_(std::move(metric)), opts_(opts) {
  if (!metric_) throw Error(ErrorCode::Internal, "null metric");
  if (opts_.mode == ChristoffelMode::ClosedForm && !metric_->has_closed_form())
    opts_.mode = ChristoffelMode::CentralDifference;
}

Spacetime Spacetime::minkowski() { return Spacetime(std::make_shared<MinkowskiMetric>()); }

Spacetime Spacetime::weak_field(double mass, double softening, std::array<double, 3> center,
                                std::array<double, 3> spin, Options opts) {
  return Spacetime(std::make_shared<WeakFieldMetric>(mass, softening, center, spin), opts);
}

Spacetime Spacetime::product_sphere(double radius, Options opts) {
  return Spacetime(std::make_shared<ProductSphereMetric>(radius), opts);
}

Spacetime Spacetime::from_grid_csv(const std::string& path, Options opts) {
  opts.mode = ChristoffelMode::CentralDifference;
  return Spacetime(GridMetric::load_csv(path), opts);
}

Mat4 Spacetime::metric_at(const Vec4& x) const {
  const Mat4 g = metric_->value(x);
  double scale = 0.0;
  for (double v : g.m) scale = std::max(scale, std::abs(v));
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      if (std::abs(g.at(i, j) - g.at(j, i)) > kSymmetryTol * std::max(1.0, scale))
        throw Error(ErrorCode::DegenerateMetric, "metric is not symmetric at the evaluation point");
    }
  }
  if (std::abs(mat_det(g)) < kDetFloor)
    throw Error(ErrorCode::DegenerateMetric, "metric determinant below 1e-12");
  return g;
}

Mat4 Spacetime::inverse_metric_at(const Vec4& x) const {
  Mat4 inv;
  if (!mat_inverse(metric_at(x), inv))
    throw Error(ErrorCode::DegenerateMetric, "metric is numerically singular");
  return inv;
}

Christoffel Spacetime::christoffel_central_difference(const Vec4& x, double step) const {
  std::array<Mat4, 4> dg;
  for (int a = 0; a < 4; ++a) {
    Vec4 xp = x;
    Vec4 xm = x;
    xp[static_cast<std::size_t>(a)] += step;
    xm[static_cast<std::size_t>(a)] -= step;
    const Mat4 gp = metric_->value(xp);
    const Mat4 gm = metric_->value(xm);
    for (int k = 0; k < 16; ++k)
      dg[static_cast<std::size_t>(a)].m[static_cast<std::size_t>(k)] =
          (gp.m[static_cast<std::size_t>(k)] - gm.m[static_cast<std::size_t>(k)]) / (2.0 * step);
  }
  const Mat4 ginv = inverse_metric_at(x);
  Christoffel c;
  for (int mu = 0; mu < 4; ++mu) {
    for (int a = 0; a < 4; ++a) {
      for (int b = a; b < 4; ++b) {
        double s = 0.0;
        for (int nu = 0; nu < 4; ++nu) {
          s += ginv.at(mu, nu) * (dg[static_cast<std::size_t>(a)].at(nu, b) +
                                  dg[static_cast<std::size_t>(b)].at(a, nu) -
                                  dg[static_cast<std::size_t>(nu)].at(a, b));
        }
        c.at(mu, a, b) = 0.5 * s;
        c.at(mu, b, a) = 0.5 * s;
      }
    }
  }
  return c;
}

Christoffel Spacetime::christoffel(const Vec4& x) const {
  require_in_chart(x);
  if (opts_.mode == ChristoffelMode::ClosedForm && metric_->has_closed_form())
    return metric_->closed_form(x);
  return christoffel_central_difference(x, opts_.fd_step);
}

double Spacetime::inner(const Vec4& base, const Vec4& v, const Vec4& w) const {
  return bilinear(metric_at(base), v, w);
}

CausalClass Spacetime::classify(const Vec4& base, const Vec4& v) const {
  const double s = inner(base, v, v);
  const double scale = std::max(1.0, dot_euclid(v, v));
  if (std::abs(s) <= kCausalTol * scale) return CausalClass::Null;
  return s < 0.0 ? CausalClass::Timelike : CausalClass::Spacelike;
}

void Spacetime::require_in_chart(const Vec4& x) const {
  for (double c : x) {
    if (!std::isfinite(c))
      throw Error(ErrorCode::IntegrationDiverged, "non-finite coordinate encountered");
    if (std::abs(c) > opts_.chart_bound)
      throw Error(ErrorCode::ChartEscape, "coordinate exceeds chart bound");
  }
}

Vec4 Spacetime::chart_displacement(const Vec4& a, const Vec4& b) const {
  Vec4 d = sub(a, b);
  const std::array<double, 4> periods = metric_->coordinate_periods();
  for (int i = 0; i < 4; ++i) {
    const double p = periods[static_cast<std::size_t>(i)];
    if (p > 0.0) {
      double r = std::remainder(d[static_cast<std::size_t>(i)], p);
      d[static_cast<std::size_t>(i)] = r;
    }
  }
  return d;
}

}  // namespace cchsh
