#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "rdls/mesh.hpp"
#include "rdls/sparse.hpp"

namespace rdls::test {

/// Uniform Kuhn mesh of the unit cube with n cells per side.
inline Mesh unit_cube(int n) {
  const auto outer = GeometryPrimitive::box({0, 0, 0}, {1, 1, 1});
  const auto inner = GeometryPrimitive::centered_box({0.5, 0.5, 0.5}, {0.4, 0.4, 0.4});
  return generate_box_mesh(outer, inner, 1.0 / n, 1.0 / n);
}

inline Mesh reference_tet() {
  return Mesh::build({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {Tet{0, 1, 2, 3}});
}

inline std::vector<double> random_vector(std::size_t n, unsigned seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double rel_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0, n = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    n += b[i] * b[i];
  }
  return std::sqrt(d) / std::max(std::sqrt(n), 1e-300);
}

/// Gaussian elimination with partial pivoting on a dense copy; an oracle
/// independent of the library's factorizations.
inline std::vector<double> dense_solve(const CsrMatrix& a, std::span<const double> b) {
  auto m = a.to_dense();
  std::vector<double> x(b.begin(), b.end());
  const std::size_t n = m.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(m[i][k]) > std::abs(m[p][k])) p = i;
    std::swap(m[k], m[p]);
    std::swap(x[k], x[p]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = m[i][k] / m[k][k];
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) m[i][j] -= f * m[k][j];
      x[i] -= f * x[k];
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    double s = x[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= m[k][j] * x[j];
    x[k] = s / m[k][k];
  }
  return x;
}

}  // namespace rdls::test
