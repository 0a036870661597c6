#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "rdls/geometry.hpp"
#include "rdls/mesh.hpp"

namespace rdls {

struct PointLocation {
  Index element = -1;
  std::array<double, 4> bary{};
};

/// Uniform bucket grid over the mesh bounding box; each bucket lists the
/// elements whose bounding boxes overlap it.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh) : mesh_(&mesh) {
    lo_ = hi_ = mesh.nodes().front();
    for (const Vec3& x : mesh.nodes())
      for (int d = 0; d < 3; ++d) {
        lo_[d] = std::min(lo_[d], x[d]);
        hi_[d] = std::max(hi_[d], x[d]);
      }
    const double vol = std::max((hi_[0] - lo_[0]) * (hi_[1] - lo_[1]) * (hi_[2] - lo_[2]), 1e-300);
    const double target = std::max(1.0, static_cast<double>(mesh.num_tets()) / 4.0);
    const double cell = std::cbrt(vol / target);
    for (int d = 0; d < 3; ++d) {
      dims_[d] = std::clamp(static_cast<int>(std::ceil((hi_[d] - lo_[d]) / cell)), 1, 1024);
      inv_[d] = dims_[d] / std::max(hi_[d] - lo_[d], 1e-300);
    }
    std::vector<std::size_t> count(cells() + 1, 0);
    auto range = [&](std::size_t e, auto&& f) {
      const auto c = mesh.corners(e);
      std::array<int, 3> a{}, b{};
      for (int d = 0; d < 3; ++d) {
        double mn = c[0][d], mx = c[0][d];
        for (int k = 1; k < 4; ++k) {
          mn = std::min(mn, c[k][d]);
          mx = std::max(mx, c[k][d]);
        }
        a[d] = clamp_cell(d, mn);
        b[d] = clamp_cell(d, mx);
      }
      for (int i = a[0]; i <= b[0]; ++i)
        for (int j = a[1]; j <= b[1]; ++j)
          for (int k = a[2]; k <= b[2]; ++k) f(flat(i, j, k));
    };
    for (std::size_t e = 0; e < mesh.num_tets(); ++e) range(e, [&](std::size_t c) { ++count[c + 1]; });
    for (std::size_t c = 0; c < cells(); ++c) count[c + 1] += count[c];
    start_ = count;
    items_.resize(count.back());
    for (std::size_t e = 0; e < mesh.num_tets(); ++e)
      range(e, [&](std::size_t c) { items_[count[c]++] = static_cast<Index>(e); });
  }

  /// Element containing `x` (first by element index among candidates), or
  /// nothing when `x` lies outside the mesh.
  std::optional<PointLocation> locate(const Vec3& x, double tol = 1e-10) const {
    for (int d = 0; d < 3; ++d) {
      const double pad = tol * (hi_[d] - lo_[d] + 1.0);
      if (x[d] < lo_[d] - pad || x[d] > hi_[d] + pad) return std::nullopt;
    }
    const std::size_t c = flat(clamp_cell(0, x[0]), clamp_cell(1, x[1]), clamp_cell(2, x[2]));
    for (std::size_t k = start_[c]; k < start_[c + 1]; ++k) {
      const Index e = items_[k];
      const auto b = barycentric(e, x);
      if (b[0] >= -tol && b[1] >= -tol && b[2] >= -tol && b[3] >= -tol) return PointLocation{e, b};
    }
    return std::nullopt;
  }

  /// P1 interpolation of a nodal field at `x`.
  std::optional<double> interpolate(std::span<const double> field, const Vec3& x) const {
    const auto loc = locate(x);
    if (!loc) return std::nullopt;
    const Tet& t = mesh_->tets()[loc->element];
    double v = 0.0;
    for (int a = 0; a < 4; ++a) v += loc->bary[a] * field[t[a]];
    return v;
  }

  std::array<double, 4> barycentric(Index e, const Vec3& x) const {
    const auto c = mesh_->corners(e);
    const double v = tet_signed_volume(c[0], c[1], c[2], c[3]);
    std::array<double, 4> b{};
    b[0] = tet_signed_volume(x, c[1], c[2], c[3]) / v;
    b[1] = tet_signed_volume(c[0], x, c[2], c[3]) / v;
    b[2] = tet_signed_volume(c[0], c[1], x, c[3]) / v;
    b[3] = 1.0 - b[0] - b[1] - b[2];
    return b;
  }

 private:
  std::size_t cells() const { return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]; }
  std::size_t flat(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k;
  }
  int clamp_cell(int d, double v) const {
    return std::clamp(static_cast<int>(std::floor((v - lo_[d]) * inv_[d])), 0, dims_[d] - 1);
  }

  const Mesh* mesh_;
  Vec3 lo_{}, hi_{};
  std::array<int, 3> dims_{};
  std::array<double, 3> inv_{};
  std::vector<std::size_t> start_;
  std::vector<Index> items_;
};

}  // namespace rdls
