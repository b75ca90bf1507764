// cchsh - small fixed-size linear algebra for 4-d spacetime work
//
// Hand-rolled on purpose: everything here is 4x4 or smaller, hot inside
// integrator loops, and simple enough that a matrix library would only add
// a dependency to the shared object.

#ifndef CCHSH_LINALG_HPP_
#define CCHSH_LINALG_HPP_

#include <array>
#include <cmath>
#include <cstddef>

namespace cchsh {

using Vec4 = std::array<double, 4>;

struct Mat4 {
  // Row-major storage.
  std::array<double, 16> m{};

  double& at(int i, int j) { return m[static_cast<std::size_t>(4 * i + j)]; }
  double at(int i, int j) const { return m[static_cast<std::size_t>(4 * i + j)]; }
};

inline Vec4 add(const Vec4& a, const Vec4& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]};
}

inline Vec4 sub(const Vec4& a, const Vec4& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]};
}

inline Vec4 scale(const Vec4& a, double s) {
  return {a[0] * s, a[1] * s, a[2] * s, a[3] * s};
}

inline Vec4 axpy(double s, const Vec4& x, const Vec4& y) {
  // s*x + y
  return {s * x[0] + y[0], s * x[1] + y[1], s * x[2] + y[2], s * x[3] + y[3]};
}

// Plain euclidean dot, used only for step control and convergence measures,
// never as a physical inner product.
inline double dot_euclid(const Vec4& a, const Vec4& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}

inline double norm_euclid(const Vec4& a) { return std::sqrt(dot_euclid(a, a)); }

inline Vec4 mat_vec(const Mat4& g, const Vec4& v) {
  Vec4 r{};
  for (int i = 0; i < 4; ++i) {
    double s = 0.0;
    for (int j = 0; j < 4; ++j) s += g.at(i, j) * v[j];
    r[i] = s;
  }
  return r;
}

// Metric contraction v^a g_ab w^b.
inline double bilinear(const Mat4& g, const Vec4& v, const Vec4& w) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) s += v[i] * g.at(i, j) * w[j];
  return s;
}

// Gauss-Jordan inverse with partial pivoting. Returns false when the matrix
// is numerically singular (smallest pivot below `pivot_floor`).
inline bool mat_inverse(const Mat4& in, Mat4& out, double pivot_floor = 1e-12) {
  std::array<double, 32> a{};  // augmented [in | I]
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) a[static_cast<std::size_t>(8 * i + j)] = in.at(i, j);
    a[static_cast<std::size_t>(8 * i + 4 + i)] = 1.0;
  }
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    double best = std::abs(a[static_cast<std::size_t>(8 * col + col)]);
    for (int r = col + 1; r < 4; ++r) {
      double c = std::abs(a[static_cast<std::size_t>(8 * r + col)]);
      if (c > best) {
        best = c;
        pivot = r;
      }
    }
    if (best < pivot_floor) return false;
    if (pivot != col) {
      for (int j = 0; j < 8; ++j)
        std::swap(a[static_cast<std::size_t>(8 * pivot + j)], a[static_cast<std::size_t>(8 * col + j)]);
    }
    const double inv_p = 1.0 / a[static_cast<std::size_t>(8 * col + col)];
    for (int j = 0; j < 8; ++j) a[static_cast<std::size_t>(8 * col + j)] *= inv_p;
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = a[static_cast<std::size_t>(8 * r + col)];
      if (f == 0.0) continue;
      for (int j = 0; j < 8; ++j)
        a[static_cast<std::size_t>(8 * r + j)] -= f * a[static_cast<std::size_t>(8 * col + j)];
    }
  }
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out.at(i, j) = a[static_cast<std::size_t>(8 * i + 4 + j)];
  return true;
}

inline double mat_det(const Mat4& in) {
  // LU with partial pivoting; good enough for a 4x4 signature check.
  std::array<double, 16> a = in.m;
  double det = 1.0;
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    double best = std::abs(a[static_cast<std::size_t>(4 * col + col)]);
    for (int r = col + 1; r < 4; ++r) {
      double c = std::abs(a[static_cast<std::size_t>(4 * r + col)]);
      if (c > best) {
        best = c;
        pivot = r;
      }
    }
    if (best == 0.0) return 0.0;
    if (pivot != col) {
      for (int j = 0; j < 4; ++j)
        std::swap(a[static_cast<std::size_t>(4 * pivot + j)], a[static_cast<std::size_t>(4 * col + j)]);
      det = -det;
    }
    const double p = a[static_cast<std::size_t>(4 * col + col)];
    det *= p;
    for (int r = col + 1; r < 4; ++r) {
      const double f = a[static_cast<std::size_t>(4 * r + col)] / p;
      for (int j = col; j < 4; ++j)
        a[static_cast<std::size_t>(4 * r + j)] -= f * a[static_cast<std::size_t>(4 * col + j)];
    }
  }
  return det;
}

}  // namespace cchsh

#endif  // CCHSH_LINALG_HPP_
