#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <vector>

#include "rdls/cluster.hpp"
#include "rdls/error.hpp"
#include "rdls/fem.hpp"
#include "rdls/geometry.hpp"
#include "rdls/locate.hpp"
#include "rdls/mesh.hpp"
#include "rdls/physics.hpp"

namespace rdls {

/// Euclidean signed distance to the primitive's surface, positive inside.
inline double signed_distance(const GeometryPrimitive& g, const Vec3& x) {
  if (g.kind == GeometryPrimitive::Kind::sphere) return g.radius - norm(x - g.center);
  Vec3 q{};
  double inside = std::numeric_limits<double>::infinity();
  for (int d = 0; d < 3; ++d) {
    const double lo = x[d] - g.lo[d], hi = g.hi[d] - x[d];
    inside = std::min({inside, lo, hi});
    q[d] = std::max({-lo, -hi, 0.0});
  }
  return inside >= 0.0 ? inside : -norm(q);
}

inline std::vector<double> init_signed_distance(const Mesh& mesh, const GeometryPrimitive& inner) {
  inner.validate();
  std::vector<double> phi(mesh.num_nodes());
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = signed_distance(inner, mesh.nodes()[i]);
  return phi;
}

/// Constant P1 gradient of `phi` on element `e`.
inline Vec3 element_gradient(const Mesh& mesh, std::size_t e, std::span<const double> phi) {
  const auto g = element_geometry(mesh.corners(e));
  const Tet& t = mesh.tets()[e];
  Vec3 r{};
  for (int a = 0; a < 4; ++a) r = r + phi[t[a]] * g.grad[a];
  return r;
}

/// Nodal gradient recovery: volume-weighted averages of the element
/// gradients (`grad`) and of their magnitudes (`magnitude`).
struct RecoveredGradient {
  std::vector<Vec3> grad;
  std::vector<double> magnitude;
};

inline RecoveredGradient recover_gradient(const Mesh& mesh, std::span<const double> phi) {
  const std::size_t n = mesh.num_nodes();
  RecoveredGradient r;
  r.grad.assign(n, Vec3{});
  r.magnitude.assign(n, 0.0);
  std::vector<double> w(n, 0.0);
  for (std::size_t e = 0; e < mesh.num_tets(); ++e) {
    const auto g = element_geometry(mesh.corners(e));
    const Tet& t = mesh.tets()[e];
    Vec3 ge{};
    for (int a = 0; a < 4; ++a) ge = ge + phi[t[a]] * g.grad[a];
    const double m = norm(ge);
    for (Index i : t) {
      r.grad[i] = r.grad[i] + g.volume * ge;
      r.magnitude[i] += g.volume * m;
      w[i] += g.volume;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    r.grad[i] = (1.0 / w[i]) * r.grad[i];
    r.magnitude[i] /= w[i];
  }
  return r;
}

/// Distributed `recover_gradient`. Element gradients are computed by the
/// worker whose partition part holds the element; nodal averages are then
/// summed per owned node over its elements in ascending order, which
/// reproduces the serial sums bit for bit for any worker count.
class GradientRecovery {
 public:
  explicit GradientRecovery(const Mesh& mesh) : mesh_(&mesh), adj_(node_element_adjacency(mesh)) {
    volume_.resize(mesh.num_tets());
    for (std::size_t e = 0; e < mesh.num_tets(); ++e) volume_[e] = element_geometry(mesh.corners(e)).volume;
  }

  void compute(Cluster& cluster, std::span<const double> phi, RecoveredGradient& out) {
    const std::size_t n = mesh_->num_nodes();
    if (phi.size() != n) throw ConformanceError("recover_gradient: field size does not match the mesh");
    grad_.resize(mesh_->num_tets());
    out.grad.resize(n);
    out.magnitude.resize(n);
    const auto& dec = cluster.decomposition();
    cluster.pool().run([&](int w) {
      const auto& sd = dec.subdomains[w];
      for (std::size_t l = 0; l < sd.num_local_elements; ++l) {
        if (sd.is_ghost_element[l]) continue;
        const Index e = sd.elements[l];
        const auto g = element_geometry(mesh_->corners(e));
        const Tet& t = mesh_->tets()[e];
        Vec3 ge{};
        for (int a = 0; a < 4; ++a) ge = ge + phi[t[a]] * g.grad[a];
        grad_[e] = ge;
      }
    });
    cluster.for_owned([&](int, Index i) {
      Vec3 gsum{};
      double msum = 0.0, wsum = 0.0;
      for (Index e : adj_.of(i)) {
        const double v = volume_[e];
        gsum = gsum + v * grad_[e];
        msum += v * norm(grad_[e]);
        wsum += v;
      }
      out.grad[i] = (1.0 / wsum) * gsum;
      out.magnitude[i] = msum / wsum;
    });
  }

 private:
  const Mesh* mesh_;
  NodeElementAdjacency adj_;
  std::vector<double> volume_;
  std::vector<Vec3> grad_;
};

/// Normal interface speed from the Rankine-Hugoniot balance
///   V = D^e dc/dn / (mg_sol - mg_sat)
/// evaluated on the narrow band |phi| <= band_width * h. The normal
/// derivative is a one-sided difference over h between the points h and 2h
/// into the medium from the interface foot point, so that it never mixes in
/// values from the pinned bulk.
class InterfaceVelocity {
 public:
  InterfaceVelocity(const Mesh& mesh, const PointLocator& locator, double band_width = 3.0)
      : mesh_(&mesh), loc_(&locator), h_(mesh.min_edge_h()), band_(band_width * mesh.min_edge_h()) {}

  double h() const noexcept { return h_; }
  double band() const noexcept { return band_; }
  bool in_band(double phi) const noexcept { return std::abs(phi) <= band_; }

  /// Velocity at band node `i`. `grad` is the recovered nodal gradient of phi.
  double at(std::size_t i, std::span<const double> phi, std::span<const Vec3> grad, std::span<const double> c_mg,
            std::span<const double> c_film, const ChemParams& p) const {
    const double gn = norm(grad[i]);
    if (!(gn >= 1e-12))
      throw GeometryError("interface_velocity: degenerate level-set gradient at node " + std::to_string(i));
    const Vec3 nrm = (1.0 / gn) * grad[i];
    const Vec3 foot = mesh_->nodes()[i] - phi[i] * nrm;
    const Vec3 x1 = foot - h_ * nrm, x2 = foot - 2.0 * h_ * nrm;
    const auto l1 = loc_->locate(x1);
    const auto l2 = loc_->locate(x2);
    if (!l1 || !l2) return 0.0;  // no medium on that side
    auto interp = [&](const PointLocation& l, std::span<const double> f) {
      const Tet& t = mesh_->tets()[l.element];
      return l.bary[0] * f[t[0]] + l.bary[1] * f[t[1]] + l.bary[2] * f[t[2]] + l.bary[3] * f[t[3]];
    };
    const double dcdn = (interp(*l1, c_mg) - interp(*l2, c_mg)) / h_;
    const double film = std::clamp(interp(*l1, c_film), 0.0, p.film_max());
    const double v = effective_diffusion(film, p) * dcdn / (p.mg_sol - p.mg_sat);
    return std::max(v, 0.0);  // dissolution only
  }

 private:
  const Mesh* mesh_;
  const PointLocator* loc_;
  double h_, band_;
};

/// Mesh-edge graph (CSR adjacency, Euclidean edge weights).
class NodeGraph {
 public:
  explicit NodeGraph(const Mesh& mesh) {
    const CsrMatrix pat = pattern_from_elements(mesh.num_nodes(), mesh.tets());
    offset_ = pat.row_ptr;
    nbr_ = pat.col;
    len_.resize(nbr_.size());
    for (std::size_t i = 0; i < pat.rows; ++i)
      for (auto k = offset_[i]; k < offset_[i + 1]; ++k)
        len_[k] = norm(mesh.nodes()[i] - mesh.nodes()[nbr_[k]]);
  }

  std::size_t size() const noexcept { return offset_.size() - 1; }

  /// Copies each source's value to every node whose nearest source (graph
  /// distance) it is. Without sources the field is set to `fallback`.
  void extend(std::span<const char> source, std::span<double> value, double fallback = 0.0) const {
    const std::size_t n = size();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<Index> from(n, -1);
    using Item = std::pair<double, Index>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
    for (std::size_t i = 0; i < n; ++i)
      if (source[i]) {
        dist[i] = 0.0;
        from[i] = static_cast<Index>(i);
        q.emplace(0.0, static_cast<Index>(i));
      }
    while (!q.empty()) {
      const auto [d, u] = q.top();
      q.pop();
      if (d > dist[u]) continue;
      for (auto k = offset_[u]; k < offset_[u + 1]; ++k) {
        const Index v = nbr_[k];
        const double nd = d + len_[k];
        if (nd < dist[v]) {
          dist[v] = nd;
          from[v] = from[u];
          q.emplace(nd, v);
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!source[i]) value[i] = from[i] >= 0 ? value[from[i]] : fallback;
  }

 private:
  std::vector<std::int64_t> offset_;
  std::vector<Index> nbr_;
  std::vector<double> len_;
};

/// Serial band velocity plus nearest-band extension to the whole mesh.
inline std::vector<double> interface_velocity(const Mesh& mesh, std::span<const double> phi,
                                              std::span<const double> c_mg, std::span<const double> c_film,
                                              const ChemParams& p) {
  const std::size_t n = mesh.num_nodes();
  if (phi.size() != n || c_mg.size() != n || c_film.size() != n)
    throw ConformanceError("interface_velocity: field sizes do not match the mesh");
  if (!(p.mg_sol > p.mg_sat)) throw ConfigError("mg_sol", "must exceed mg_sat");
  const PointLocator loc(mesh);
  const InterfaceVelocity iv(mesh, loc);
  const auto rg = recover_gradient(mesh, phi);
  std::vector<double> v(n, 0.0);
  std::vector<char> band(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (iv.in_band(phi[i])) {
      band[i] = 1;
      v[i] = iv.at(i, phi, rg.grad, c_mg, c_film, p);
    }
  NodeGraph(mesh).extend(band, v);
  return v;
}

/// Backward-Euler FEM step of phi_t + V |grad phi| = 0 with consistent mass
/// and |grad phi| lagged at the previous step (nodal recovered magnitude):
///   M phi' = M phi - dt M (V g).
/// `phi` is updated in place.
inline SolveStats advance_levelset(Cluster& cluster, std::span<double> phi, std::span<const double> velocity,
                                   std::span<const double> grad_magnitude, double dt, const SolverConfig& cfg) {
  const std::size_t n = cluster.mesh().num_nodes();
  if (phi.size() != n || velocity.size() != n || grad_magnitude.size() != n)
    throw ConformanceError("advance_levelset: field sizes do not match the mesh");
  if (!(dt > 0.0)) throw ArgumentError("advance_levelset: dt must be positive");
  std::vector<double> zero(n), one(n), src(n), prev(phi.begin(), phi.end());
  cluster.for_owned([&](int, Index g) {
    zero[g] = 0.0;
    one[g] = 1.0;
    src[g] = -velocity[g] * grad_magnitude[g];
    phi[g] = prev[g] + dt * src[g];
  });
  StepSystem sys;
  sys.dt = dt;
  sys.diffusion = zero;
  sys.alpha = one;
  sys.source = src;
  sys.previous = prev;
  sys.lump_mass = false;
  return cluster.solve(sys, phi, cfg);
}

namespace detail {

inline double positive_volume(const std::array<Vec3, 4>& x, const std::array<double, 4>& f) {
  int pos[4], neg[4], np = 0, nn = 0;
  for (int a = 0; a < 4; ++a) (f[a] > 0.0 ? pos[np++] : neg[nn++]) = a;
  const double vol = std::abs(tet_signed_volume(x[0], x[1], x[2], x[3]));
  if (np == 0) return 0.0;
  if (np == 4) return vol;
  if (np == 1) {
    const int a = pos[0];
    double r = vol;
    for (int k = 0; k < 3; ++k) r *= f[a] / (f[a] - f[neg[k]]);
    return r;
  }
  if (np == 3) {
    const int b = neg[0];
    double r = vol;
    for (int k = 0; k < 3; ++k) r *= f[b] / (f[b] - f[pos[k]]);
    return vol - r;
  }
  // Two and two: the positive part is a wedge with triangular ends at the
  // two positive vertices; split it into three tets.
  const int a = pos[0], b = pos[1], c = neg[0], d = neg[1];
  const Vec3 pac = zero_crossing(x[a], x[c], f[a], f[c]), pad = zero_crossing(x[a], x[d], f[a], f[d]);
  const Vec3 pbc = zero_crossing(x[b], x[c], f[b], f[c]), pbd = zero_crossing(x[b], x[d], f[b], f[d]);
  return std::abs(tet_signed_volume(x[a], pac, pad, x[b])) + std::abs(tet_signed_volume(pac, pad, x[b], pbc)) +
         std::abs(tet_signed_volume(pad, x[b], pbc, pbd));
}

inline double isosurface_area(const std::array<Vec3, 4>& x, const std::array<double, 4>& f) {
  int pos[4], neg[4], np = 0, nn = 0;
  for (int a = 0; a < 4; ++a) (f[a] >= 0.0 ? pos[np++] : neg[nn++]) = a;
  if (np == 0 || np == 4) return 0.0;
  auto cut = [&](int i, int j) { return zero_crossing(x[i], x[j], f[i], f[j]); };
  if (np == 1 || np == 3) {
    const int lone = np == 1 ? pos[0] : neg[0];
    const int* other = np == 1 ? neg : pos;
    return triangle_area(cut(lone, other[0]), cut(lone, other[1]), cut(lone, other[2]));
  }
  const int a = pos[0], b = pos[1], c = neg[0], d = neg[1];
  const Vec3 pac = cut(a, c), pad = cut(a, d), pbd = cut(b, d), pbc = cut(b, c);
  return triangle_area(pac, pad, pbd) + triangle_area(pac, pbd, pbc);
}

inline std::array<double, 4> nodal(const Mesh& mesh, std::size_t e, std::span<const double> phi) {
  const Tet& t = mesh.tets()[e];
  return {phi[t[0]], phi[t[1]], phi[t[2]], phi[t[3]]};
}

}  // namespace detail

/// Volume of {phi >= 0} within element `e`, by exact slicing of the P1 field.
inline double element_solid_volume(const Mesh& mesh, std::size_t e, std::span<const double> phi) {
  return detail::positive_volume(mesh.corners(e), detail::nodal(mesh, e, phi));
}

/// Area of the phi = 0 isosurface within element `e` (marching tetrahedra;
/// nodes with phi = 0 count as positive).
inline double element_interface_area(const Mesh& mesh, std::size_t e, std::span<const double> phi) {
  return detail::isosurface_area(mesh.corners(e), detail::nodal(mesh, e, phi));
}

inline double solid_volume(const Mesh& mesh, std::span<const double> phi) {
  double v = 0.0;
  for (std::size_t e = 0; e < mesh.num_tets(); ++e) v += element_solid_volume(mesh, e, phi);
  return v;
}

inline double interface_area(const Mesh& mesh, std::span<const double> phi) {
  double a = 0.0;
  for (std::size_t e = 0; e < mesh.num_tets(); ++e) a += element_interface_area(mesh, e, phi);
  return a;
}

/// Subdomain-partial sums over non-ghost elements, added in subdomain order.
inline double solid_volume(Cluster& cluster, std::span<const double> phi, bool exclude_ghosts = true) {
  const auto& dec = cluster.decomposition();
  return cluster.reduce([&](int w) {
    const auto& sd = dec.subdomains[w];
    double v = 0.0;
    for (std::size_t l = 0; l < sd.num_local_elements; ++l)
      if (!exclude_ghosts || !sd.is_ghost_element[l]) v += element_solid_volume(cluster.mesh(), sd.elements[l], phi);
    return v;
  });
}

inline double interface_area(Cluster& cluster, std::span<const double> phi, bool exclude_ghosts = true) {
  const auto& dec = cluster.decomposition();
  return cluster.reduce([&](int w) {
    const auto& sd = dec.subdomains[w];
    double a = 0.0;
    for (std::size_t l = 0; l < sd.num_local_elements; ++l)
      if (!exclude_ghosts || !sd.is_ghost_element[l]) a += element_interface_area(cluster.mesh(), sd.elements[l], phi);
    return a;
  });
}

/// Dissolved metal in grams: mg_sol [g/L] times the lost solid volume
/// [mm^3 = 1e-6 L].
inline double mass_loss(double solid_volume_0, double solid_volume_t, const ChemParams& p) {
  return p.mg_sol * (solid_volume_0 - solid_volume_t) * 1e-6;
}

inline double mass_loss(const Mesh& mesh, std::span<const double> phi_t, std::span<const double> phi_0,
                        const ChemParams& p) {
  return mass_loss(solid_volume(mesh, phi_0), solid_volume(mesh, phi_t), p);
}

inline constexpr double gas_constant = 8.314;  // J/(mol K)

/// Evolved hydrogen per exposed area, ideal gas: (m / M) R T / (P A), in
/// m^3 of gas per m^2 of surface. `area_m2` in m^2.
inline double hydrogen_volume(double mass_lost_g, double area_m2, const ChemParams& p) {
  if (!(area_m2 > 0.0)) throw ArgumentError("hydrogen_volume: area must be positive");
  return (mass_lost_g / p.mg_molar) * gas_constant * p.temperature / (p.pressure * area_m2);
}

}  // namespace rdls
