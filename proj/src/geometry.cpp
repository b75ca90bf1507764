// cchsh - geometry implementations

#include "geometry.hpp"

#include <algorithm>
#include <cmath>

#include "angles.hpp"

namespace cchsh {

namespace {

constexpr double kBaseMatchTol = 1e-9;
constexpr double kLoopClosureTol = 1e-6;
constexpr double kProjectionFloor = 1e-9;
constexpr double kPlaneOrthoTol = 1e-6;

void require_same_base(const Vec4& a, const Vec4& b, const char* what) {
  if (norm_euclid(sub(a, b)) > kBaseMatchTol)
    throw Error(ErrorCode::BaseMismatch, std::string(what) + ": objects are based at different points");
}

Vec4 geodesic_accel(const Christoffel& c, const Vec4& u) {
  Vec4 a{};
  for (int mu = 0; mu < 4; ++mu) {
    double s = 0.0;
    for (int al = 0; al < 4; ++al) {
      const double ua = u[static_cast<std::size_t>(al)];
      if (ua == 0.0) continue;
      for (int be = 0; be < 4; ++be)
        s += c.at(mu, al, be) * ua * u[static_cast<std::size_t>(be)];
    }
    a[static_cast<std::size_t>(mu)] = -s;
  }
  return a;
}

// One RK4 step of the geodesic equation.
void geodesic_step(const Spacetime& st, Vec4& x, Vec4& u, double h) {
  const Vec4 a1 = geodesic_accel(st.christoffel(x), u);
  const Vec4 x2 = axpy(0.5 * h, u, x);
  const Vec4 u2 = axpy(0.5 * h, a1, u);
  const Vec4 a2 = geodesic_accel(st.christoffel(x2), u2);
  const Vec4 x3 = axpy(0.5 * h, u2, x);
  const Vec4 u3 = axpy(0.5 * h, a2, u);
  const Vec4 a3 = geodesic_accel(st.christoffel(x3), u3);
  const Vec4 x4 = axpy(h, u3, x);
  const Vec4 u4 = axpy(h, a3, u);
  const Vec4 a4 = geodesic_accel(st.christoffel(x4), u4);

  for (int i = 0; i < 4; ++i) {
    x[static_cast<std::size_t>(i)] +=
        h / 6.0 * (u[static_cast<std::size_t>(i)] + 2.0 * u2[static_cast<std::size_t>(i)] +
                   2.0 * u3[static_cast<std::size_t>(i)] + u4[static_cast<std::size_t>(i)]);
    u[static_cast<std::size_t>(i)] +=
        h / 6.0 * (a1[static_cast<std::size_t>(i)] + 2.0 * a2[static_cast<std::size_t>(i)] +
                   2.0 * a3[static_cast<std::size_t>(i)] + a4[static_cast<std::size_t>(i)]);
  }
}

int even_step_count(double length, double step) {
  const int n = static_cast<int>(std::ceil(std::abs(length) / std::max(step, 1e-12)));
  return std::max(2, n + (n % 2));
}

// Transport generator at a curve sample: (A v)^mu = -Gamma^mu_{ab} u^a v^b.
struct TransportMatrix {
  std::array<double, 16> m{};

  static TransportMatrix at(const Spacetime& st, const CurveSample& s) {
    const Christoffel c = st.christoffel(s.x);
    TransportMatrix t;
    for (int mu = 0; mu < 4; ++mu) {
      for (int be = 0; be < 4; ++be) {
        double v = 0.0;
        for (int al = 0; al < 4; ++al) v += c.at(mu, al, be) * s.u[static_cast<std::size_t>(al)];
        t.m[static_cast<std::size_t>(4 * mu + be)] = -v;
      }
    }
    return t;
  }

  Vec4 apply(const Vec4& v) const {
    Vec4 r{};
    for (int i = 0; i < 4; ++i) {
      double s = 0.0;
      for (int j = 0; j < 4; ++j) s += m[static_cast<std::size_t>(4 * i + j)] * v[j];
      r[static_cast<std::size_t>(i)] = s;
    }
    return r;
  }
};

// RK4 step of dv/dt = A(t) v over [t0, t0+h] given A at t0, t0+h/2, t0+h.
Vec4 transport_step(const TransportMatrix& a0, const TransportMatrix& am, const TransportMatrix& a1,
                    const Vec4& v, double h) {
  const Vec4 k1 = a0.apply(v);
  const Vec4 k2 = am.apply(axpy(0.5 * h, k1, v));
  const Vec4 k3 = am.apply(axpy(0.5 * h, k2, v));
  const Vec4 k4 = a1.apply(axpy(h, k3, v));
  Vec4 r = v;
  for (int i = 0; i < 4; ++i)
    r[static_cast<std::size_t>(i)] += h / 6.0 *
                                      (k1[static_cast<std::size_t>(i)] + 2.0 * k2[static_cast<std::size_t>(i)] +
                                       2.0 * k3[static_cast<std::size_t>(i)] + k4[static_cast<std::size_t>(i)]);
  return r;
}

CurveSample hermite_midpoint(const CurveSample& a, const CurveSample& b) {
  const double h = b.param - a.param;
  CurveSample mid;
  mid.param = a.param + 0.5 * h;
  for (int i = 0; i < 4; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    // Cubic Hermite at t = 1/2 and its derivative.
    mid.x[k] = 0.5 * (a.x[k] + b.x[k]) + 0.125 * h * (a.u[k] - b.u[k]);
    mid.u[k] = 1.5 * (b.x[k] - a.x[k]) / h - 0.25 * (a.u[k] + b.u[k]);
  }
  return mid;
}

}  // namespace

Curve Curve::reversed() const {
  Curve r;
  r.kind = kind;
  r.samples.reserve(samples.size());
  const double p0 = samples.front().param;
  const double p1 = samples.back().param;
  for (auto it = samples.rbegin(); it != samples.rend(); ++it) {
    CurveSample s;
    s.param = p0 + (p1 - it->param);
    s.x = it->x;
    s.u = scale(it->u, -1.0);
    r.samples.push_back(s);
  }
  return r;
}

Vec4 Curve::position_at(double param) const {
  const auto& ss = samples;
  if (param <= ss.front().param) return ss.front().x;
  if (param >= ss.back().param) return ss.back().x;
  auto it = std::upper_bound(ss.begin(), ss.end(), param,
                             [](double p, const CurveSample& s) { return p < s.param; });
  const CurveSample& b = *it;
  const CurveSample& a = *(it - 1);
  const double h = b.param - a.param;
  const double t = (param - a.param) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  Vec4 out;
  for (int i = 0; i < 4; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    out[k] = (2 * t3 - 3 * t2 + 1) * a.x[k] + (t3 - 2 * t2 + t) * h * a.u[k] +
             (-2 * t3 + 3 * t2) * b.x[k] + (t3 - t2) * h * b.u[k];
  }
  return out;
}

Vec4 Curve::tangent_at(double param) const {
  const auto& ss = samples;
  if (param <= ss.front().param) return ss.front().u;
  if (param >= ss.back().param) return ss.back().u;
  auto it = std::upper_bound(ss.begin(), ss.end(), param,
                             [](double p, const CurveSample& s) { return p < s.param; });
  const CurveSample& b = *it;
  const CurveSample& a = *(it - 1);
  const double h = b.param - a.param;
  const double t = (param - a.param) / h;
  const double t2 = t * t;
  Vec4 out;
  for (int i = 0; i < 4; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    out[k] = (6 * t2 - 6 * t) * (a.x[k] - b.x[k]) / h + (3 * t2 - 4 * t + 1) * a.u[k] +
             (3 * t2 - 2 * t) * b.u[k];
  }
  return out;
}

Curve shoot_geodesic(const Spacetime& st, const Vec4& start, const TangentVector& v0,
                     double length, double step) {
  require_same_base(start, v0.base, "shoot_geodesic");
  st.require_in_chart(start);
  if (length <= 0.0) throw Error(ErrorCode::Internal, "shoot_geodesic: length must be > 0");

  const int n = even_step_count(length, step);
  const double h = length / n;

  Curve curve;
  curve.kind = CurveKind::General;
  curve.samples.reserve(static_cast<std::size_t>(n) + 1);

  Vec4 x = start;
  Vec4 u = v0.v;
  curve.samples.push_back({0.0, x, u});
  for (int i = 0; i < n; ++i) {
    geodesic_step(st, x, u, h);
    st.require_in_chart(x);
    curve.samples.push_back({(i + 1) * h, x, u});
  }

  switch (st.classify(start, v0.v)) {
    case CausalClass::Timelike: curve.kind = CurveKind::TimelikeGeodesic; break;
    case CausalClass::Null: curve.kind = CurveKind::NullGeodesic; break;
    case CausalClass::Spacelike: curve.kind = CurveKind::General; break;
  }
  return curve;
}

namespace {

// Endpoint of the affine-[0,1] geodesic with initial tangent w; no sample
// storage, used inside the shooting iteration.
Vec4 shoot_endpoint(const Spacetime& st, const Vec4& from, const Vec4& w, int n) {
  Vec4 x = from;
  Vec4 u = w;
  const double h = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    geodesic_step(st, x, u, h);
    st.require_in_chart(x);
  }
  return x;
}

}  // namespace

Curve connect_geodesic(const Spacetime& st, const Vec4& from, const Vec4& to, CurveKind kind,
                       const ConnectOptions& opts) {
  st.require_in_chart(from);
  st.require_in_chart(to);

  Vec4 w = st.chart_displacement(to, from);
  const double chord = norm_euclid(w);
  if (chord < 1e-12)
    throw Error(ErrorCode::Internal, "connect_geodesic: endpoints coincide");
  const int n = std::max(16, even_step_count(chord, opts.step));

  auto miss = [&](const Vec4& trial) -> Vec4 {
    return st.chart_displacement(shoot_endpoint(st, from, trial, n), to);
  };

  Vec4 f = miss(w);
  double fn = norm_euclid(f);
  int it = 0;
  for (; it < opts.max_iter && fn > opts.tol; ++it) {
    // Forward-difference Jacobian d(miss)/d(w).
    Mat4 jac;
    const double delta = 1e-7 * std::max(1.0, chord);
    for (int c = 0; c < 4; ++c) {
      Vec4 wp = w;
      wp[static_cast<std::size_t>(c)] += delta;
      Vec4 fp;
      try {
        fp = miss(wp);
      } catch (const Error&) {
        // Perturbed shot left the chart; difference backwards instead.
        wp[static_cast<std::size_t>(c)] = w[static_cast<std::size_t>(c)] - delta;
        const Vec4 fm = miss(wp);
        for (int r = 0; r < 4; ++r)
          jac.at(r, c) = (f[static_cast<std::size_t>(r)] - fm[static_cast<std::size_t>(r)]) / delta;
        continue;
      }
      for (int r = 0; r < 4; ++r)
        jac.at(r, c) = (fp[static_cast<std::size_t>(r)] - f[static_cast<std::size_t>(r)]) / delta;
    }

    Mat4 jinv;
    if (!mat_inverse(jac, jinv))
      throw Error(ErrorCode::NoConvergence, "connect_geodesic: singular shooting Jacobian");
    const Vec4 dw = mat_vec(jinv, f);

    // Damped update: halve until the miss shrinks.
    double alpha = 1.0;
    bool accepted = false;
    for (int back = 0; back < 12; ++back) {
      const Vec4 w_try = axpy(-alpha, dw, w);
      try {
        const Vec4 f_try = miss(w_try);
        const double fn_try = norm_euclid(f_try);
        if (fn_try < fn) {
          w = w_try;
          f = f_try;
          fn = fn_try;
          accepted = true;
          break;
        }
      } catch (const Error&) {
        // off-chart trial: shrink further
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
  }

  if (fn > opts.accept_tol)
    throw Error(ErrorCode::NoConvergence,
                "connect_geodesic: endpoint miss " + std::to_string(fn) + " after " +
                    std::to_string(it) + " iterations");

  // Causal character of the converged connector.
  const double q = st.inner(from, w, w);
  const double scale2 = dot_euclid(w, w);
  CausalClass cls;
  if (std::abs(q) <= opts.causal_tol * scale2)
    cls = CausalClass::Null;
  else
    cls = q < 0.0 ? CausalClass::Timelike : CausalClass::Spacelike;

  const bool want_timelike = kind == CurveKind::TimelikeGeodesic;
  const bool want_null = kind == CurveKind::NullGeodesic;
  if ((want_timelike && cls != CausalClass::Timelike) || (want_null && cls != CausalClass::Null))
    throw Error(ErrorCode::WrongCausalType, "connect_geodesic: connector has the wrong causal character");

  // Final integration with sample storage, in the natural parameterization.
  double scale_param = 1.0;
  if (cls == CausalClass::Timelike)
    scale_param = std::sqrt(-q);
  else if (cls == CausalClass::Spacelike)
    scale_param = std::sqrt(q);

  Curve curve;
  curve.kind = want_null ? CurveKind::NullGeodesic
                         : (cls == CausalClass::Timelike ? CurveKind::TimelikeGeodesic : CurveKind::General);
  curve.samples.reserve(static_cast<std::size_t>(n) + 1);
  Vec4 x = from;
  Vec4 u = w;
  const double h = 1.0 / n;
  curve.samples.push_back({0.0, x, scale(u, 1.0 / scale_param)});
  for (int i = 0; i < n; ++i) {
    geodesic_step(st, x, u, h);
    st.require_in_chart(x);
    curve.samples.push_back({(i + 1) * h * scale_param, x, scale(u, 1.0 / scale_param)});
  }
  return curve;
}

TangentVector parallel_transport(const Spacetime& st, const TangentVector& v, const Curve& curve) {
  require_same_base(v.base, curve.front().x, "parallel_transport");

  Vec4 comp = v.v;
  const auto& ss = curve.samples;
  std::size_t i = 0;
  while (i + 2 < ss.size() || i + 1 < ss.size()) {
    if (i + 2 < ss.size()) {
      const TransportMatrix a0 = TransportMatrix::at(st, ss[i]);
      const TransportMatrix am = TransportMatrix::at(st, ss[i + 1]);
      const TransportMatrix a1 = TransportMatrix::at(st, ss[i + 2]);
      comp = transport_step(a0, am, a1, comp, ss[i + 2].param - ss[i].param);
      i += 2;
    } else {
      // Odd trailing interval: synthesize the midpoint sample.
      const CurveSample mid = hermite_midpoint(ss[i], ss[i + 1]);
      const TransportMatrix a0 = TransportMatrix::at(st, ss[i]);
      const TransportMatrix am = TransportMatrix::at(st, mid);
      const TransportMatrix a1 = TransportMatrix::at(st, ss[i + 1]);
      comp = transport_step(a0, am, a1, comp, ss[i + 1].param - ss[i].param);
      i += 1;
    }
  }
  for (double c : comp)
    if (!std::isfinite(c))
      throw Error(ErrorCode::IntegrationDiverged, "parallel transport produced non-finite components");
  return TangentVector{curve.back().x, comp};
}

TangentVector transport_along(const Spacetime& st, const TangentVector& v,
                              std::span<const Curve> curves) {
  TangentVector cur = v;
  for (const Curve& c : curves) {
    if (norm_euclid(st.chart_displacement(cur.base, c.front().x)) > kLoopClosureTol)
      throw Error(ErrorCode::OpenLoop, "transport_along: curve chain is not contiguous");
    // Re-base exactly onto the next curve's start so tiny endpoint mismatch
    // does not accumulate into the base-point check.
    cur.base = c.front().x;
    cur = parallel_transport(st, cur, c);
  }
  return cur;
}

Frame transport_frame(const Spacetime& st, const Frame& frame, const Curve& curve) {
  Frame out;
  out.base = curve.back().x;
  for (int i = 0; i < 4; ++i)
    out.e[static_cast<std::size_t>(i)] =
        parallel_transport(st, TangentVector{frame.base, frame.e[static_cast<std::size_t>(i)]}, curve).v;
  return out;
}

double plane_angle(const Spacetime& st, const Plane& plane, const TangentVector& u) {
  require_same_base(plane.base, u.base, "plane_angle");
  const Mat4 g = st.metric_at(plane.base);
  const double n1 = bilinear(g, plane.e1, plane.e1);
  const double n2 = bilinear(g, plane.e2, plane.e2);
  const double x12 = bilinear(g, plane.e1, plane.e2);
  if (std::abs(n1 - 1.0) > kPlaneOrthoTol || std::abs(n2 - 1.0) > kPlaneOrthoTol ||
      std::abs(x12) > kPlaneOrthoTol)
    throw Error(ErrorCode::Internal, "plane_angle: plane basis is not orthonormal spacelike");

  const double c1 = bilinear(g, u.v, plane.e1);
  const double c2 = bilinear(g, u.v, plane.e2);
  if (std::hypot(c1, c2) < kProjectionFloor)
    throw Error(ErrorCode::OrthogonalProjection, "plane_angle: projection onto the plane vanishes");
  return wrap_two_pi(std::atan2(c2, c1));
}

double loop_holonomy_angle(const Spacetime& st, std::span<const Curve> loop, const Plane& plane,
                           const TangentVector& probe) {
  if (loop.empty()) throw Error(ErrorCode::OpenLoop, "loop_holonomy_angle: empty loop");
  require_same_base(plane.base, probe.base, "loop_holonomy_angle");
  if (norm_euclid(st.chart_displacement(loop.front().front().x, plane.base)) > kLoopClosureTol)
    throw Error(ErrorCode::BaseMismatch, "loop_holonomy_angle: loop does not start at the base point");
  if (norm_euclid(st.chart_displacement(loop.back().back().x, loop.front().front().x)) >
      kLoopClosureTol)
    throw Error(ErrorCode::OpenLoop, "loop_holonomy_angle: loop does not close");

  const double before = plane_angle(st, plane, probe);
  TangentVector carried = probe;
  carried.base = loop.front().front().x;
  carried = transport_along(st, carried, loop);
  carried.base = plane.base;
  const double after = plane_angle(st, plane, carried);
  return wrap_pi(after - before);
}

double loop_rotation_angle(const Spacetime& st, std::span<const Curve> loop, const Plane& plane) {
  if (loop.empty()) throw Error(ErrorCode::OpenLoop, "loop_rotation_angle: empty loop");
  if (norm_euclid(st.chart_displacement(loop.front().front().x, plane.base)) > kLoopClosureTol)
    throw Error(ErrorCode::BaseMismatch, "loop_rotation_angle: loop does not start at the base point");
  if (norm_euclid(st.chart_displacement(loop.back().back().x, loop.front().front().x)) >
      kLoopClosureTol)
    throw Error(ErrorCode::OpenLoop, "loop_rotation_angle: loop does not close");

  const Vec4 start = loop.front().front().x;
  TangentVector c1{start, plane.e1};
  TangentVector c2{start, plane.e2};
  c1 = transport_along(st, c1, loop);
  c2 = transport_along(st, c2, loop);

  const Mat4 g = st.metric_at(plane.base);
  const double m11 = bilinear(g, c1.v, plane.e1);
  const double m12 = bilinear(g, c1.v, plane.e2);
  const double m21 = bilinear(g, c2.v, plane.e1);
  const double m22 = bilinear(g, c2.v, plane.e2);
  if (std::hypot(m11 + m22, m12 - m21) < kProjectionFloor)
    throw Error(ErrorCode::OrthogonalProjection,
                "loop_rotation_angle: transported plane is orthogonal to the reference plane");
  return std::atan2(m12 - m21, m11 + m22);
}

Frame orthonormal_frame_at(const Spacetime& st, const Vec4& x) {
  const Mat4 g = st.metric_at(x);
  Frame f;
  f.base = x;
  for (int i = 0; i < 4; ++i) {
    Vec4 v{};
    v[static_cast<std::size_t>(i)] = 1.0;
    for (int j = 0; j < i; ++j) {
      const Vec4& ej = f.e[static_cast<std::size_t>(j)];
      const double num = bilinear(g, v, ej);
      const double den = bilinear(g, ej, ej);
      v = axpy(-num / den, ej, v);
    }
    const double q = bilinear(g, v, v);
    if (i == 0) {
      if (q >= 0.0)
        throw Error(ErrorCode::DegenerateMetric, "coordinate x0 axis is not timelike here");
      f.e[0] = scale(v, 1.0 / std::sqrt(-q));
    } else {
      if (q <= 0.0)
        throw Error(ErrorCode::DegenerateMetric, "coordinate axis is not spacelike here");
      f.e[static_cast<std::size_t>(i)] = scale(v, 1.0 / std::sqrt(q));
    }
  }
  return f;
}

double frame_orthonormality_defect(const Spacetime& st, const Frame& frame) {
  const Mat4 g = st.metric_at(frame.base);
  double defect = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double want = (i == j) ? (i == 0 ? -1.0 : 1.0) : 0.0;
      const double got =
          bilinear(g, frame.e[static_cast<std::size_t>(i)], frame.e[static_cast<std::size_t>(j)]);
      defect = std::max(defect, std::abs(got - want));
    }
  }
  return defect;
}

Curve sampled_curve(const std::function<Vec4(double)>& x, const std::function<Vec4(double)>& u,
                    double t0, double t1, int n, CurveKind kind) {
  if (n < 2 || n % 2 != 0)
    throw Error(ErrorCode::Internal, "sampled_curve: sample interval count must be even and >= 2");
  Curve c;
  c.kind = kind;
  c.samples.reserve(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    const double t = t0 + (t1 - t0) * i / n;
    c.samples.push_back({t - t0, x(t), u(t)});
  }
  return c;
}

double geodesic_residual(const Spacetime& st, const Curve& curve) {
  double worst = 0.0;
  const auto& ss = curve.samples;
  for (std::size_t i = 1; i + 1 < ss.size(); ++i) {
    const double h = ss[i + 1].param - ss[i - 1].param;
    const Vec4 dudt = scale(sub(ss[i + 1].u, ss[i - 1].u), 1.0 / h);
    const Vec4 gamma_uu = geodesic_accel(st.christoffel(ss[i].x), ss[i].u);
    worst = std::max(worst, norm_euclid(sub(dudt, gamma_uu)));
  }
  return worst;
}

}  // namespace cchsh
