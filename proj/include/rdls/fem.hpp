#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "rdls/error.hpp"
#include "rdls/geometry.hpp"
#include "rdls/mesh.hpp"
#include "rdls/sparse.hpp"

namespace rdls {

using Mat4 = std::array<std::array<double, 4>, 4>;

struct ElementMatrices {
  Mat4 mass{};
  Mat4 stiffness{};
};

/// Volume and constant P1 basis gradients of one tet.
struct ElementGeometry {
  double volume = 0.0;
  std::array<Vec3, 4> grad{};
};

inline ElementGeometry element_geometry(const std::array<Vec3, 4>& x) {
  const Vec3 e1 = x[1] - x[0], e2 = x[2] - x[0], e3 = x[3] - x[0];
  const double det = dot(e1, cross(e2, e3));
  double l = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) l = std::max(l, norm(x[a] - x[b]));
  if (!(std::abs(det) > 1e-14 * l * l * l)) throw AssemblyError("degenerate tetrahedron");
  ElementGeometry g;
  g.volume = std::abs(det) / 6.0;
  // Rows of the inverse Jacobian are the gradients of barycentrics 1..3.
  g.grad[1] = (1.0 / det) * cross(e2, e3);
  g.grad[2] = (1.0 / det) * cross(e3, e1);
  g.grad[3] = (1.0 / det) * cross(e1, e2);
  g.grad[0] = -1.0 * (g.grad[1] + g.grad[2] + g.grad[3]);
  return g;
}

/// Consistent P1 mass (V/20 * [2 on diagonal, 1 off]) and stiffness
/// (V * grad_a . grad_b) of one tet.
inline ElementMatrices element_matrices(const std::array<Vec3, 4>& x) {
  const ElementGeometry g = element_geometry(x);
  ElementMatrices m;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      m.mass[a][b] = g.volume / 20.0 * (a == b ? 2.0 : 1.0);
      m.stiffness[a][b] = g.volume * dot(g.grad[a], g.grad[b]);
    }
  return m;
}

inline ElementMatrices element_matrices(const Mesh& mesh, std::size_t e) {
  return element_matrices(mesh.corners(e));
}

/// Nodes pinned by the penalty method: A_kk += weight, b_k += weight * target.
struct PenaltySet {
  std::vector<Index> nodes;
  double target = 0.0;
  double weight = 1e10;
};

/// Inputs of one backward-Euler step of
///   u_t = div(D grad u) - k1 s u + f
/// multiplied through by alpha = 1 / (1 + dt k1 s), giving
///   A = M + diag(alpha) dt K_D,   b = diag(alpha) (M u_prev + dt M f).
/// All nodal vectors are indexed like the mesh nodes.
struct AssemblyInput {
  const Mesh* mesh = nullptr;
  double dt = 0.0;
  std::span<const double> diffusion;  // D^e per node
  std::span<const double> alpha;      // per node, in (0, 1]
  std::span<const double> source;     // f per node
  std::span<const double> previous;   // u^n per node
  PenaltySet penalty;
  bool lump_mass = false;
};

/// Assembles over a subset of mesh elements given in a local node numbering.
/// The sparsity pattern, scatter positions and element geometry are built
/// once; `assemble` only recomputes values, since coefficients change every
/// step.
class LocalAssembler {
 public:
  LocalAssembler() = default;

  LocalAssembler(const Mesh& mesh, std::span<const Index> elements, std::span<const Tet> local_tets,
                 std::size_t num_local_nodes)
      : tets_(local_tets.begin(), local_tets.end()) {
    matrix_ = pattern_from_elements(num_local_nodes, local_tets);
    scatter_.resize(tets_.size());
    geom_.resize(tets_.size());
    for (std::size_t e = 0; e < tets_.size(); ++e) {
      const ElementGeometry g = element_geometry(mesh.corners(elements[e]));
      auto& k = geom_[e];
      k.volume = g.volume;
      int c = 0;
      for (int a = 0; a < 4; ++a)
        for (int b = a; b < 4; ++b) k.stiff[c++] = g.volume * dot(g.grad[a], g.grad[b]);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          scatter_[e][4 * a + b] = matrix_.find(static_cast<std::size_t>(tets_[e][a]), tets_[e][b]);
    }
  }

  std::size_t num_nodes() const noexcept { return matrix_.rows; }
  const CsrMatrix& matrix() const noexcept { return matrix_; }
  CsrMatrix& matrix() noexcept { return matrix_; }

  /// Fills `matrix()` and `rhs` for the local nodes. Rows of nodes whose
  /// incident elements are not all in this assembler are partial.
  /// `penalized` flags local nodes pinned to `penalty_target`.
  void assemble(double dt, std::span<const double> diffusion, std::span<const double> alpha,
                std::span<const double> source, std::span<const double> previous, bool lump,
                std::span<const char> penalized, double penalty_target, double penalty_weight,
                std::vector<double>& rhs) {
    const std::size_t n = num_nodes();
    std::fill(matrix_.val.begin(), matrix_.val.end(), 0.0);
    rhs.assign(n, 0.0);
    for (std::size_t e = 0; e < tets_.size(); ++e) {
      const Tet& t = tets_[e];
      const auto& g = geom_[e];
      const double d = 0.25 * (diffusion[t[0]] + diffusion[t[1]] + diffusion[t[2]] + diffusion[t[3]]);
      const auto& pos = scatter_[e];
      const double mdiag = lump ? g.volume / 4.0 : g.volume / 10.0;
      const double moff = lump ? 0.0 : g.volume / 20.0;
      double um = 0.0, fm = 0.0;
      if (!lump) {
        for (int b = 0; b < 4; ++b) {
          um += previous[t[b]];
          fm += source[t[b]];
        }
      }
      int c = 0;
      std::array<double, 16> kk{};
      for (int a = 0; a < 4; ++a)
        for (int b = a; b < 4; ++b) {
          kk[4 * a + b] = kk[4 * b + a] = g.stiff[c++];
        }
      for (int a = 0; a < 4; ++a) {
        const double scale = alpha[t[a]] * dt * d;
        for (int b = 0; b < 4; ++b) {
          double v = scale * kk[4 * a + b];
          if (a == b) v += mdiag;
          else v += moff;
          matrix_.val[pos[4 * a + b]] += v;
        }
        // (M u)_a over this element: moff * sum + (mdiag - moff) * u_a
        const double mu = moff * um + (mdiag - moff) * previous[t[a]];
        const double mf = moff * fm + (mdiag - moff) * source[t[a]];
        rhs[t[a]] += alpha[t[a]] * (mu + dt * mf);
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!penalized.empty() && penalized[i]) {
        matrix_.val[matrix_.find(i, static_cast<Index>(i))] += penalty_weight;
        rhs[i] += penalty_weight * penalty_target;
      }
  }

 private:
  struct Geometry {
    double volume = 0.0;
    std::array<double, 10> stiff{};  // upper triangle of V grad_a . grad_b
  };

  std::vector<Tet> tets_;
  CsrMatrix matrix_;
  std::vector<std::array<std::int64_t, 16>> scatter_;
  std::vector<Geometry> geom_;
};

namespace detail {

inline void check_nodal(std::span<const double> v, std::size_t n, const char* name) {
  if (v.size() != n)
    throw ConformanceError(std::string("assemble_system: '") + name + "' has " +
                           std::to_string(v.size()) + " entries, expected " + std::to_string(n));
  for (double x : v)
    if (!std::isfinite(x)) throw ValidationError(std::string("assemble_system: non-finite value in '") + name + "'");
}

}  // namespace detail

/// Serial assembly of the whole-mesh system described by `in`.
inline std::pair<CsrMatrix, std::vector<double>> assemble_system(const AssemblyInput& in) {
  if (in.mesh == nullptr) throw ArgumentError("assemble_system: no mesh");
  const Mesh& mesh = *in.mesh;
  const std::size_t n = mesh.num_nodes();
  if (!(in.dt > 0.0)) throw ValidationError("assemble_system: dt must be positive");
  detail::check_nodal(in.diffusion, n, "diffusion");
  detail::check_nodal(in.alpha, n, "alpha");
  detail::check_nodal(in.source, n, "source");
  detail::check_nodal(in.previous, n, "previous");
  for (std::size_t i = 0; i < n; ++i) {
    if (in.diffusion[i] < 0.0) throw ValidationError("assemble_system: negative diffusion coefficient");
    if (!(in.alpha[i] > 0.0 && in.alpha[i] <= 1.0)) throw ValidationError("assemble_system: alpha outside (0,1]");
  }
  if (!std::isfinite(in.penalty.target) || !std::isfinite(in.penalty.weight))
    throw ValidationError("assemble_system: non-finite penalty");

  std::vector<Index> all(mesh.num_tets());
  for (std::size_t e = 0; e < all.size(); ++e) all[e] = static_cast<Index>(e);
  LocalAssembler asmb(mesh, all, mesh.tets(), n);
  std::vector<char> pen(n, 0);
  for (Index k : in.penalty.nodes) {
    if (k < 0 || static_cast<std::size_t>(k) >= n) throw ConformanceError("assemble_system: penalty node out of range");
    pen[k] = 1;
  }
  std::vector<double> b;
  asmb.assemble(in.dt, in.diffusion, in.alpha, in.source, in.previous, in.lump_mass, pen, in.penalty.target,
                in.penalty.weight, b);
  return {std::move(asmb.matrix()), std::move(b)};
}

/// Consistent mass (`which == 0`) or unit-coefficient stiffness (`which == 1`).
inline CsrMatrix global_matrix(const Mesh& mesh, int which) {
  CsrMatrix m = pattern_from_elements(mesh.num_nodes(), mesh.tets());
  for (std::size_t e = 0; e < mesh.num_tets(); ++e) {
    const auto em = element_matrices(mesh, e);
    const Tet& t = mesh.tets()[e];
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        m.val[m.find(t[a], t[b])] += which == 0 ? em.mass[a][b] : em.stiffness[a][b];
  }
  return m;
}

inline CsrMatrix mass_matrix(const Mesh& mesh) { return global_matrix(mesh, 0); }
inline CsrMatrix stiffness_matrix(const Mesh& mesh) { return global_matrix(mesh, 1); }

/// Row-sum lumping.
inline std::vector<double> lump_mass(const CsrMatrix& m) {
  std::vector<double> d(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (auto k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) d[i] += m.val[k];
    if (!(d[i] > 0.0)) throw GeometryError("lump_mass: non-positive lumped entry in row " + std::to_string(i));
  }
  return d;
}

/// Row-sum lumped mass of the whole mesh, without building the matrix.
inline std::vector<double> lumped_mass(const Mesh& mesh) {
  std::vector<double> d(mesh.num_nodes(), 0.0);
  for (std::size_t e = 0; e < mesh.num_tets(); ++e) {
    const double v = mesh.volume(e) / 4.0;
    for (Index i : mesh.tets()[e]) d[i] += v;
  }
  return d;
}

}  // namespace rdls
