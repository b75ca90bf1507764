// Geometry tests. The curvature oracle is the product sphere, where the
// holonomy of a latitude circle is known in closed form: a vector carried
// once around colatitude th0 rotates by -2*pi*cos(th0) in the (theta, phi)
// plane, which is congruent mod 2*pi to the enclosed solid angle.

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "angles.hpp"
#include "geometry.hpp"
#include "metric.hpp"

using namespace cchsh;

namespace {

template <typename Fn>
bool fails_with(ErrorCode want, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == want;
  } catch (...) {
    return false;
  }
  return false;
}

// Latitude circle at colatitude th0, once around in +phi, n sample intervals.
Curve latitude_loop(double th0, int n) {
  return sampled_curve([th0](double t) { return Vec4{0.0, th0, t, 0.0}; },
                       [](double) { return Vec4{0.0, 0.0, 1.0, 0.0}; }, 0.0, kTwoPi, n);
}

Plane latitude_plane(double th0, double radius) {
  Plane p;
  p.base = {0.0, th0, 0.0, 0.0};
  p.e1 = {0.0, 1.0 / radius, 0.0, 0.0};
  p.e2 = {0.0, 0.0, 1.0 / (radius * std::sin(th0)), 0.0};
  return p;
}

double latitude_holonomy(const Spacetime& st, double th0, double radius, int n) {
  const Curve loop = latitude_loop(th0, n);
  const Plane plane = latitude_plane(th0, radius);
  const TangentVector probe{plane.base, plane.e1};
  return loop_holonomy_angle(st, std::span<const Curve>(&loop, 1), plane, probe);
}

std::filesystem::path temp_csv(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << body;
  return path;
}

const char* kGridHeader = "x0,x1,x2,x3,g00,g01,g02,g03,g10,g11,g12,g13,g20,g21,g22,g23,g30,g31,g32,g33\n";

// Diagonal test metric tabulated on a non-uniform grid, multilinear in the
// coordinates so interpolation reproduces it exactly:
//   g11 = 1 + 0.1*x1 + 0.02*x1*x2, everything else Minkowski.
std::string grid_body(bool skip_last, bool duplicate_first) {
  const std::vector<double> ax1{-1.0, 0.0, 2.0};
  const std::vector<double> ax2{-1.0, 1.0};
  const std::vector<double> ax3{-2.0, 0.0, 1.0};
  std::vector<std::string> rows;
  for (double x1 : ax1) {
    for (double x2 : ax2) {
      for (double x3 : ax3) {
        const double g11 = 1.0 + 0.1 * x1 + 0.02 * x1 * x2;
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "0,%g,%g,%g,-1,0,0,0,0,%.17g,0,0,0,0,1,0,0,0,0,1\n", x1, x2, x3, g11);
        rows.emplace_back(buf);
      }
    }
  }
  if (skip_last) rows.pop_back();
  if (duplicate_first) rows.back() = rows.front();
  std::string body = kGridHeader;
  // Reversed on purpose; row order must not matter.
  for (auto it = rows.rbegin(); it != rows.rend(); ++it) body += *it;
  return body;
}

}  // namespace

TEST_CASE("angle wrapping conventions") {
  CHECK(wrap_two_pi(-0.1) == doctest::Approx(kTwoPi - 0.1).epsilon(1e-12));
  CHECK(wrap_two_pi(kTwoPi) == doctest::Approx(0.0));
  CHECK(wrap_two_pi(5.0 * kPi) == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(wrap_pi(kPi) == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(wrap_pi(-kPi) == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(wrap_pi(1.5 * kPi) == doctest::Approx(-0.5 * kPi).epsilon(1e-12));
  CHECK(circular_distance(0.1, kTwoPi - 0.1) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("minkowski connection vanishes and geodesics are straight") {
  const Spacetime st = Spacetime::minkowski();
  const Christoffel c = st.christoffel({0.3, -1.0, 2.0, 0.5});
  for (double v : c.v) CHECK(v == 0.0);

  const Christoffel fd = st.christoffel_central_difference({0.3, -1.0, 2.0, 0.5}, 1e-5);
  for (double v : fd.v) CHECK(std::abs(v) < 1e-12);

  const Vec4 start{0.0, 1.0, -2.0, 0.5};
  const Vec4 u{1.0, 0.3, 0.0, -0.2};
  const Curve c1 = shoot_geodesic(st, start, {start, u}, 2.0, 0.01);
  CHECK(c1.kind == CurveKind::TimelikeGeodesic);
  CHECK(c1.samples.size() % 2 == 1);  // even interval count
  for (int i = 0; i < 4; ++i) {
    CHECK(c1.back().x[static_cast<std::size_t>(i)] ==
          doctest::Approx(start[static_cast<std::size_t>(i)] + 2.0 * u[static_cast<std::size_t>(i)])
              .epsilon(1e-13));
    CHECK(c1.back().u[static_cast<std::size_t>(i)] ==
          doctest::Approx(u[static_cast<std::size_t>(i)]).epsilon(1e-13));
  }

  // Transport along any flat curve is the identity.
  const Curve arc = sampled_curve(
      [](double t) { return Vec4{t, std::sin(t), std::cos(t), 0.0}; },
      [](double t) { return Vec4{1.0, std::cos(t), -std::sin(t), 0.0}; }, 0.0, 2.0, 64);
  const TangentVector moved = parallel_transport(st, {arc.front().x, {0.2, -1.0, 0.7, 0.4}}, arc);
  CHECK(std::abs(moved.v[0] - 0.2) < 1e-14);
  CHECK(std::abs(moved.v[1] + 1.0) < 1e-14);
  CHECK(std::abs(moved.v[2] - 0.7) < 1e-14);
  CHECK(std::abs(moved.v[3] - 0.4) < 1e-14);
}

TEST_CASE("flat square loop carries no holonomy") {
  const Spacetime st = Spacetime::minkowski();
  auto segment = [](Vec4 a, Vec4 b) {
    const Vec4 d = sub(b, a);
    return sampled_curve([a, d](double t) { return axpy(t, d, a); },
                         [d](double) { return d; }, 0.0, 1.0, 8);
  };
  const Vec4 p0{0.0, 0.0, 0.0, 0.0};
  const Vec4 p1{0.0, 1.0, 0.0, 0.0};
  const Vec4 p2{0.0, 1.0, 1.0, 0.0};
  const Vec4 p3{0.0, 0.0, 1.0, 0.0};
  const std::vector<Curve> loop{segment(p0, p1), segment(p1, p2), segment(p2, p3), segment(p3, p0)};
  const Plane plane{p0, {0.0, 1.0, 0.0, 0.0}, {0.0, 0.0, 1.0, 0.0}};
  const TangentVector probe{p0, {0.0, std::cos(0.4), std::sin(0.4), 0.0}};
  CHECK(std::abs(loop_holonomy_angle(st, loop, plane, probe)) < 1e-14);
}

TEST_CASE("plane angles measure oriented projections") {
  const Spacetime st = Spacetime::minkowski();
  const Plane plane{{0, 0, 0, 0}, {0.0, 1.0, 0.0, 0.0}, {0.0, 0.0, 1.0, 0.0}};
  for (double a : {0.0, 1.0, 2.1, 4.0, 6.0}) {
    const TangentVector u{plane.base, {0.3, std::cos(a), std::sin(a), -0.2}};
    CHECK(plane_angle(st, plane, u) == doctest::Approx(a).epsilon(1e-12));
  }
  // Vectors orthogonal to the plane have no angle.
  CHECK(fails_with(ErrorCode::OrthogonalProjection, [&] {
    plane_angle(st, plane, {plane.base, {1.0, 0.0, 0.0, 0.3}});
  }));
  // The plane basis must be orthonormal.
  const Plane bad{{0, 0, 0, 0}, {0.0, 2.0, 0.0, 0.0}, {0.0, 0.0, 1.0, 0.0}};
  CHECK_THROWS_AS(plane_angle(st, bad, {bad.base, {0.0, 1.0, 0.0, 0.0}}), Error);
}

TEST_CASE("central differences reproduce closed-form connections") {
  const Vec4 x{0.2, 1.4, -0.6, 0.9};

  SUBCASE("weak field") {
    const Spacetime st = Spacetime::weak_field(0.01, 0.1);
    const Christoffel exact = st.christoffel(x);
    const Christoffel fd5 = st.christoffel_central_difference(x, 1e-5);
    const Christoffel fd6 = st.christoffel_central_difference(x, 1e-6);
    for (std::size_t k = 0; k < 64; ++k) {
      CHECK(std::abs(exact.v[k] - fd5.v[k]) < 1e-9);
      CHECK(std::abs(fd5.v[k] - fd6.v[k]) < 5e-9);
    }
  }

  SUBCASE("product sphere") {
    const Spacetime st = Spacetime::product_sphere(2.0);
    const Vec4 p{0.0, 1.1, 0.7, 0.0};
    const Christoffel exact = st.christoffel(p);
    const Christoffel fd = st.christoffel_central_difference(p, 1e-5);
    for (std::size_t k = 0; k < 64; ++k) CHECK(std::abs(exact.v[k] - fd.v[k]) < 1e-9);
    CHECK(exact.at(1, 2, 2) == doctest::Approx(-std::sin(1.1) * std::cos(1.1)).epsilon(1e-12));
    CHECK(exact.at(2, 1, 2) == doctest::Approx(std::cos(1.1) / std::sin(1.1)).epsilon(1e-12));
  }
}

TEST_CASE("latitude loop holonomy matches the closed form") {
  const Spacetime st = Spacetime::product_sphere(1.0);

  SUBCASE("several colatitudes") {
    for (double th0 : {std::acos(0.25), 1.0, 2.0}) {
      const double expected = wrap_pi(-kTwoPi * std::cos(th0));
      CHECK(std::abs(latitude_holonomy(st, th0, 1.0, 512) - expected) < 1e-8);
      // Congruent mod 2*pi to the solid angle enclosed by the loop.
      const double solid = kTwoPi * (1.0 - std::cos(th0));
      CHECK(std::abs(wrap_pi(latitude_holonomy(st, th0, 1.0, 512) - solid)) < 1e-8);
    }
  }

  SUBCASE("radius does not enter") {
    const Spacetime big = Spacetime::product_sphere(3.0);
    const double th0 = std::acos(0.25);
    CHECK(std::abs(latitude_holonomy(big, th0, 3.0, 512) - (-0.5 * kPi)) < 1e-8);
  }

  SUBCASE("reversal flips the sign") {
    const double th0 = std::acos(0.25);
    const Curve loop = latitude_loop(th0, 512).reversed();
    const Plane plane = latitude_plane(th0, 1.0);
    const TangentVector probe{plane.base, plane.e1};
    const double h = loop_holonomy_angle(st, std::span<const Curve>(&loop, 1), plane, probe);
    CHECK(std::abs(h - 0.5 * kPi) < 1e-8);
  }

  SUBCASE("probe independence") {
    const double th0 = std::acos(0.25);
    const Plane plane = latitude_plane(th0, 1.0);
    const Curve loop = latitude_loop(th0, 512);
    const std::span<const Curve> span(&loop, 1);
    const double h1 = loop_holonomy_angle(st, span, plane, {plane.base, plane.e1});
    const double h2 = loop_holonomy_angle(st, span, plane, {plane.base, plane.e2});
    Vec4 mixed = axpy(1.0, plane.e1, scale(plane.e2, 1.0));
    mixed[3] = 0.5;  // an out-of-plane component must not matter
    const double h3 = loop_holonomy_angle(st, span, plane, {plane.base, mixed});
    CHECK(std::abs(h1 - h2) < 1e-10);
    CHECK(std::abs(h1 - h3) < 1e-10);
  }
}

TEST_CASE("transport converges at fourth order") {
  const Spacetime st = Spacetime::product_sphere(1.0);
  const double th0 = std::acos(0.75);
  const double exact = wrap_pi(-kTwoPi * 0.75);
  const double e16 = std::abs(latitude_holonomy(st, th0, 1.0, 16) - exact);
  const double e32 = std::abs(latitude_holonomy(st, th0, 1.0, 32) - exact);
  const double e64 = std::abs(latitude_holonomy(st, th0, 1.0, 64) - exact);
  CHECK(e16 > 1e-4);
  CHECK(e64 < 1e-4);
  CHECK(e16 / e32 > 10.0);
  CHECK(e16 / e32 < 24.0);
  CHECK(e32 / e64 > 10.0);
  CHECK(e32 / e64 < 24.0);
}

TEST_CASE("splitting a curve does not change transport") {
  const Spacetime st = Spacetime::product_sphere(1.0);
  const double th0 = 1.1;
  const Curve whole = latitude_loop(th0, 512);
  const Curve first = sampled_curve([th0](double t) { return Vec4{0.0, th0, t, 0.0}; },
                                    [](double) { return Vec4{0.0, 0.0, 1.0, 0.0}; }, 0.0, kPi, 256);
  const Curve second = sampled_curve([th0](double t) { return Vec4{0.0, th0, t, 0.0}; },
                                     [](double) { return Vec4{0.0, 0.0, 1.0, 0.0}; }, kPi, kTwoPi, 256);
  const TangentVector v{whole.front().x, {0.0, 1.0, 0.3, 0.0}};
  const TangentVector a = parallel_transport(st, v, whole);
  const std::vector<Curve> halves{first, second};
  const TangentVector b = transport_along(st, v, halves);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(a.v[static_cast<std::size_t>(i)] - b.v[static_cast<std::size_t>(i)]) < 1e-14);
}

TEST_CASE("great circles close after one revolution") {
  const Spacetime st = Spacetime::product_sphere(2.0);
  const Vec4 start{0.0, 0.5 * kPi, 0.0, 0.0};

  SUBCASE("equatorial") {
    const Curve c = shoot_geodesic(st, start, {start, {0.0, 0.0, 0.5, 0.0}}, kTwoPi * 2.0, 0.005);
    const Vec4 gap = st.chart_displacement(c.back().x, start);
    CHECK(norm_euclid(gap) < 1e-7);
    CHECK(geodesic_residual(st, c) < 1e-3);
  }

  SUBCASE("tilted") {
    const double psi = 0.5;
    const Vec4 u{0.0, -std::sin(psi) / 2.0, std::cos(psi) / 2.0, 0.0};
    CHECK(st.inner(start, u, u) == doctest::Approx(1.0).epsilon(1e-12));
    const Curve c = shoot_geodesic(st, start, {start, u}, kTwoPi * 2.0, 0.005);
    const Vec4 gap = st.chart_displacement(c.back().x, start);
    CHECK(norm_euclid(gap) < 1e-6);
  }

  SUBCASE("a latitude circle is not a geodesic") {
    CHECK(geodesic_residual(st, latitude_loop(1.0, 128)) > 0.1);
  }
}

TEST_CASE("parallel transport preserves inner products") {
  const Spacetime st = Spacetime::weak_field(0.01, 0.1);
  const Vec4 start{0.0, 1.5, 0.0, 0.0};
  Vec4 u{1.0, 0.2, 0.3, 0.1};
  const double n = std::sqrt(-st.inner(start, u, u));
  u = scale(u, 1.0 / n);
  const Curve c = shoot_geodesic(st, start, {start, u}, 3.0, 0.005);

  const Frame f = orthonormal_frame_at(st, start);
  const TangentVector v1{start, f.e[1]};
  const TangentVector v2{start, f.e[2]};
  const double before = st.inner(start, v1.v, v2.v);
  const double n1_before = st.inner(start, v1.v, v1.v);

  const TangentVector w1 = parallel_transport(st, v1, c);
  const TangentVector w2 = parallel_transport(st, v2, c);
  const Vec4 end = c.back().x;
  CHECK(std::abs(st.inner(end, w1.v, w2.v) - before) < 1e-10);
  CHECK(std::abs(st.inner(end, w1.v, w1.v) - n1_before) < 1e-10);

  // The curve's own tangent is parallel along it.
  const TangentVector t0{start, c.front().u};
  const TangentVector t1 = parallel_transport(st, t0, c);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(t1.v[static_cast<std::size_t>(i)] - c.back().u[static_cast<std::size_t>(i)]) < 1e-8);

  // Transporting back along the reversed curve restores the vector.
  const TangentVector back = parallel_transport(st, w1, c.reversed());
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(back.v[static_cast<std::size_t>(i)] - v1.v[static_cast<std::size_t>(i)]) < 1e-9);

  // And a transported frame stays orthonormal.
  const Frame moved = transport_frame(st, f, c);
  CHECK(frame_orthonormality_defect(st, moved) < 1e-9);
}

TEST_CASE("orthonormal frames have vanishing defect") {
  SUBCASE("flat recovers the coordinate basis") {
    const Spacetime st = Spacetime::minkowski();
    const Frame f = orthonormal_frame_at(st, {0, 0, 0, 0});
    CHECK(frame_orthonormality_defect(st, f) < 1e-15);
    CHECK(f.e[0][0] == doctest::Approx(1.0));
    CHECK(f.e[1][1] == doctest::Approx(1.0));
  }
  SUBCASE("weak field") {
    const Spacetime st = Spacetime::weak_field(0.01, 0.1);
    const Frame f = orthonormal_frame_at(st, {0.0, 1.2, -0.4, 0.3});
    CHECK(frame_orthonormality_defect(st, f) < 1e-12);
  }
  SUBCASE("product sphere") {
    const Spacetime st = Spacetime::product_sphere(2.0);
    const Frame f = orthonormal_frame_at(st, {0.0, 1.1, 0.7, 0.0});
    CHECK(frame_orthonormality_defect(st, f) < 1e-12);
  }
}

TEST_CASE("boundary connections recover flat-space intervals") {
  const Spacetime st = Spacetime::minkowski();
  const Vec4 from{0.0, 0.0, 0.0, 0.0};

  SUBCASE("timelike pairs come back in proper time") {
    const Vec4 to{1.0, 0.3, 0.0, 0.0};
    const Curve c = connect_geodesic(st, from, to, CurveKind::TimelikeGeodesic);
    CHECK(c.kind == CurveKind::TimelikeGeodesic);
    CHECK(c.back().param == doctest::Approx(std::sqrt(0.91)).epsilon(1e-10));
    CHECK(st.inner(from, c.front().u, c.front().u) == doctest::Approx(-1.0).epsilon(1e-10));
    const Vec4 mid = c.position_at(0.5 * c.back().param);
    CHECK(mid[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(mid[1] == doctest::Approx(0.15).epsilon(1e-9));
    for (int i = 0; i < 4; ++i)
      CHECK(std::abs(c.back().x[static_cast<std::size_t>(i)] - to[static_cast<std::size_t>(i)]) < 1e-9);
  }

  SUBCASE("spacelike pairs come back in proper length") {
    const Vec4 to{0.2, 1.0, 0.0, 0.0};
    const Curve c = connect_geodesic(st, from, to, CurveKind::General);
    CHECK(c.kind == CurveKind::General);
    CHECK(c.back().param == doctest::Approx(std::sqrt(0.96)).epsilon(1e-10));
    CHECK(st.inner(from, c.front().u, c.front().u) == doctest::Approx(1.0).epsilon(1e-10));
  }

  SUBCASE("null pairs keep the affine unit interval") {
    const Vec4 to{1.0, 0.6, 0.8, 0.0};
    const Curve c = connect_geodesic(st, from, to, CurveKind::NullGeodesic);
    CHECK(c.kind == CurveKind::NullGeodesic);
    CHECK(c.back().param == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(st.inner(from, c.front().u, c.front().u)) < 1e-9);
  }

  SUBCASE("the causal type of the pair is enforced") {
    CHECK(fails_with(ErrorCode::WrongCausalType, [&] {
      connect_geodesic(st, from, {0.2, 1.0, 0.0, 0.0}, CurveKind::TimelikeGeodesic);
    }));
    CHECK(fails_with(ErrorCode::WrongCausalType, [&] {
      connect_geodesic(st, from, {1.0, 0.3, 0.0, 0.0}, CurveKind::NullGeodesic);
    }));
  }
}

TEST_CASE("boundary connections handle curvature and periodic charts") {
  SUBCASE("weak field slows clocks") {
    // Straight-line estimate: the proper-time deficit against the flat value
    // sqrt(25 - 16) = 3 is -Int Phi dt * (1+v^2)/(1-v^2) * sqrt(1-v^2), about
    // 0.14 for this trajectory.
    const Spacetime st = Spacetime::weak_field(0.01, 0.1);
    const Curve c = connect_geodesic(st, {0.0, -2.0, 0.5, 0.0}, {5.0, 2.0, 0.5, 0.0},
                                     CurveKind::TimelikeGeodesic);
    CHECK(c.back().param < 2.95);
    CHECK(c.back().param > 2.80);
    CHECK(st.inner(c.front().x, c.front().u, c.front().u) == doctest::Approx(-1.0).epsilon(1e-8));
  }

  SUBCASE("spatial connections deflect toward the mass") {
    // With equal-height endpoints the path arcs away from the center, like a
    // thrown ball, while the tangent direction rotates toward it.
    const Spacetime st = Spacetime::weak_field(0.01, 0.1);
    const Curve c = connect_geodesic(st, {0.0, -3.0, 0.8, 0.0}, {0.0, 3.0, 0.8, 0.0},
                                     CurveKind::General);
    CHECK(c.back().param > 6.0);
    CHECK(c.back().param < 6.2);
    const Vec4 mid = c.position_at(0.5 * c.back().param);
    CHECK(mid[2] > 0.8 + 1e-3);
    CHECK(mid[2] < 0.9);
    CHECK(c.front().u[2] > 1e-4);
    CHECK(c.back().u[2] < -1e-4);
  }

  SUBCASE("the shooting target wraps around the periodic seam") {
    const Spacetime st = Spacetime::product_sphere(1.0);
    const Vec4 from{0.0, 1.2, 0.3, 0.0};
    const Vec4 to{0.0, 1.2, 6.0, 0.0};
    const Curve c = connect_geodesic(st, from, to, CurveKind::General);
    // Shorter arc runs backwards through phi = 0.
    const double dphi = 6.0 - 0.3 - kTwoPi;
    const double cos_sigma = std::cos(1.2) * std::cos(1.2) +
                             std::sin(1.2) * std::sin(1.2) * std::cos(dphi);
    CHECK(c.back().param == doctest::Approx(std::acos(cos_sigma)).epsilon(1e-6));
    CHECK(norm_euclid(st.chart_displacement(c.back().x, to)) < 1e-6);
  }
}

TEST_CASE("chart and loop failures raise typed errors") {
  SUBCASE("leaving the chart bound") {
    const Spacetime st(std::make_shared<MinkowskiMetric>(), {.chart_bound = 5.0});
    CHECK(fails_with(ErrorCode::ChartEscape, [&] {
      shoot_geodesic(st, {0, 0, 0, 0}, {{0, 0, 0, 0}, {1.0, 0.0, 0.0, 0.0}}, 10.0, 0.01);
    }));
  }

  SUBCASE("pole of the sphere chart") {
    const Spacetime st = Spacetime::product_sphere(1.0);
    CHECK(fails_with(ErrorCode::DegenerateMetric, [&] { st.christoffel({0.0, 1e-13, 0.0, 0.0}); }));
    CHECK(fails_with(ErrorCode::DegenerateMetric, [&] { st.metric_at({0.0, 0.0, 0.0, 0.0}); }));
  }

  SUBCASE("open loops are rejected") {
    const Spacetime st = Spacetime::product_sphere(1.0);
    const double th0 = 1.0;
    const Curve half = sampled_curve([th0](double t) { return Vec4{0.0, th0, t, 0.0}; },
                                     [](double) { return Vec4{0.0, 0.0, 1.0, 0.0}; }, 0.0, kPi, 64);
    const Plane plane = latitude_plane(th0, 1.0);
    CHECK(fails_with(ErrorCode::OpenLoop, [&] {
      loop_holonomy_angle(st, std::span<const Curve>(&half, 1), plane, {plane.base, plane.e1});
    }));
  }

  SUBCASE("mismatched bases are rejected") {
    const Spacetime st = Spacetime::minkowski();
    const Plane plane{{0, 0, 0, 0}, {0.0, 1.0, 0.0, 0.0}, {0.0, 0.0, 1.0, 0.0}};
    CHECK(fails_with(ErrorCode::BaseMismatch, [&] {
      plane_angle(st, plane, {{1.0, 0, 0, 0}, {0.0, 1.0, 0.0, 0.0}});
    }));
  }

  SUBCASE("chains must be contiguous") {
    const Spacetime st = Spacetime::minkowski();
    auto seg = [](double x0) {
      return sampled_curve([x0](double t) { return Vec4{0.0, x0 + t, 0.0, 0.0}; },
                           [](double) { return Vec4{0.0, 1.0, 0.0, 0.0}; }, 0.0, 1.0, 4);
    };
    const std::vector<Curve> chain{seg(0.0), seg(5.0)};
    CHECK(fails_with(ErrorCode::OpenLoop, [&] {
      transport_along(st, {chain.front().front().x, {0.0, 1.0, 0.0, 0.0}}, chain);
    }));
  }

  SUBCASE("degenerate callback metrics are caught") {
    const Spacetime asym(std::make_shared<CallbackMetric>([](const Vec4&) {
      Mat4 g;
      g.at(0, 0) = -1.0;
      g.at(1, 1) = 1.0;
      g.at(2, 2) = 1.0;
      g.at(3, 3) = 1.0;
      g.at(0, 1) = 0.5;  // no matching (1,0) entry
      return g;
    }));
    CHECK(fails_with(ErrorCode::DegenerateMetric, [&] { asym.metric_at({0, 0, 0, 0}); }));

    const Spacetime singular(std::make_shared<CallbackMetric>([](const Vec4&) { return Mat4{}; }));
    CHECK(fails_with(ErrorCode::DegenerateMetric, [&] { singular.metric_at({0, 0, 0, 0}); }));
  }
}

TEST_CASE("causal classification uses the local metric") {
  const Spacetime st = Spacetime::weak_field(0.01, 0.1);
  const Vec4 x{0.0, 2.0, 0.0, 0.0};
  CHECK(st.classify(x, {1.0, 0.0, 0.0, 0.0}) == CausalClass::Timelike);
  CHECK(st.classify(x, {0.0, 1.0, 0.0, 0.0}) == CausalClass::Spacelike);
  // g is not the flat metric here, so the flat null ray is actually timelike:
  // |g00| > g11 pulls (1,1,0,0) inside the cone.
  const Mat4 g = st.metric_at(x);
  const double q = g.at(0, 0) + g.at(1, 1);
  CHECK(q > 0.0);
  CHECK(st.classify(x, {1.0, 1.0, 0.0, 0.0}) == CausalClass::Spacelike);
  // Scale the time component to sit exactly on the cone.
  const double t = std::sqrt(g.at(1, 1) / -g.at(0, 0));
  CHECK(st.classify(x, {t, 1.0, 0.0, 0.0}) == CausalClass::Null);
}

TEST_CASE("sampled curves interpolate positions and tangents") {
  const Curve c = sampled_curve(
      [](double t) { return Vec4{t, t * t * t, 2.0 * t, 0.0}; },
      [](double t) { return Vec4{1.0, 3.0 * t * t, 2.0, 0.0}; }, 0.0, 2.0, 2);
  // Cubic data is reproduced exactly by the Hermite segments.
  const Vec4 p = c.position_at(0.77);
  CHECK(p[1] == doctest::Approx(0.77 * 0.77 * 0.77).epsilon(1e-12));
  const Vec4 u = c.tangent_at(0.77);
  CHECK(u[1] == doctest::Approx(3.0 * 0.77 * 0.77).epsilon(1e-12));

  CHECK_THROWS_AS(sampled_curve([](double) { return Vec4{}; }, [](double) { return Vec4{}; },
                                0.0, 1.0, 3),
                  Error);

  SUBCASE("reversal mirrors the parameterization") {
    const Curve r = c.reversed();
    CHECK(r.length() == doctest::Approx(c.length()));
    for (int i = 0; i < 4; ++i) {
      CHECK(r.front().x[static_cast<std::size_t>(i)] ==
            doctest::Approx(c.back().x[static_cast<std::size_t>(i)]));
      CHECK(r.front().u[static_cast<std::size_t>(i)] ==
            doctest::Approx(-c.back().u[static_cast<std::size_t>(i)]));
    }
    const Vec4 a = r.position_at(0.6);
    const Vec4 b = c.position_at(c.length() - 0.6);
    for (int i = 0; i < 4; ++i)
      CHECK(a[static_cast<std::size_t>(i)] ==
            doctest::Approx(b[static_cast<std::size_t>(i)]).epsilon(1e-12));
  }
}

TEST_CASE("grid metrics interpolate tabulated coefficients") {
  const auto path = temp_csv("cchsh_grid_ok.csv", grid_body(false, false));
  const Spacetime st = Spacetime::from_grid_csv(path.string());

  SUBCASE("multilinear data is reproduced exactly") {
    const Vec4 x{5.0, 0.5, 0.0, -1.0};  // x0 axis is degenerate, any value works
    const Mat4 g = st.metric_at(x);
    CHECK(g.at(1, 1) == doctest::Approx(1.05).epsilon(1e-12));
    CHECK(g.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(g.at(2, 2) == doctest::Approx(1.0).epsilon(1e-12));

    const Mat4 g2 = st.metric_at({-3.0, 1.3, 0.2, 0.4});
    CHECK(g2.at(1, 1) == doctest::Approx(1.0 + 0.13 + 0.02 * 1.3 * 0.2).epsilon(1e-12));
  }

  SUBCASE("the connection comes from differencing the interpolant") {
    const Vec4 x{0.3, 0.5, 0.0, -1.0};
    const Christoffel c = st.christoffel(x);
    const double g11 = 1.05;
    CHECK(c.at(1, 1, 1) == doctest::Approx(0.5 * 0.1 / g11).epsilon(1e-6));
    CHECK(c.at(1, 1, 2) == doctest::Approx(0.5 * 0.02 * 0.5 / g11).epsilon(1e-6));
    CHECK(c.at(2, 1, 1) == doctest::Approx(-0.5 * 0.02 * 0.5).epsilon(1e-6));
  }

  SUBCASE("outside the tabulated box is off-chart") {
    CHECK(fails_with(ErrorCode::ChartEscape, [&] { st.metric_at({0.0, 3.0, 0.0, -1.0}); }));
  }
}

TEST_CASE("bad grid files are rejected with io errors") {
  CHECK(fails_with(ErrorCode::IoError, [] {
    Spacetime::from_grid_csv((std::filesystem::temp_directory_path() / "missing.csv").string());
  }));
  CHECK(fails_with(ErrorCode::IoError, [] {
    Spacetime::from_grid_csv(temp_csv("cchsh_grid_hdr.csv", "a,b,c\n1,2,3\n").string());
  }));
  CHECK(fails_with(ErrorCode::IoError, [] {
    Spacetime::from_grid_csv(temp_csv("cchsh_grid_hole.csv", grid_body(true, false)).string());
  }));
  CHECK(fails_with(ErrorCode::IoError, [] {
    Spacetime::from_grid_csv(temp_csv("cchsh_grid_dup.csv", grid_body(false, true)).string());
  }));
  CHECK(fails_with(ErrorCode::IoError, [] {
    Spacetime::from_grid_csv(
        temp_csv("cchsh_grid_junk.csv", std::string(kGridHeader) + "0,0,0,zero,-1,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1\n")
            .string());
  }));
}
