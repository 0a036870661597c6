#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "rdls/error.hpp"
#include "rdls/geometry.hpp"

namespace rdls {

using Index = std::int32_t;
using Tet = std::array<Index, 4>;

struct BoundaryFace {
  std::array<Index, 3> nodes;
  int tag = 0;

  friend bool operator==(const BoundaryFace&, const BoundaryFace&) = default;
};

/// Axis-aligned box or sphere, in mm.
struct GeometryPrimitive {
  enum class Kind { box, sphere };

  Kind kind = Kind::box;
  Vec3 lo{};      // box
  Vec3 hi{};      // box
  Vec3 center{};  // sphere
  double radius = 0.0;

  static GeometryPrimitive box(const Vec3& lo, const Vec3& hi) {
    GeometryPrimitive g;
    g.kind = Kind::box;
    g.lo = lo;
    g.hi = hi;
    g.validate();
    return g;
  }

  static GeometryPrimitive sphere(const Vec3& center, double radius) {
    GeometryPrimitive g;
    g.kind = Kind::sphere;
    g.center = center;
    g.radius = radius;
    g.validate();
    return g;
  }

  /// Box centered at `center` with the given full extents.
  static GeometryPrimitive centered_box(const Vec3& center, const Vec3& extents) {
    return box(center - 0.5 * extents, center + 0.5 * extents);
  }

  void validate() const {
    if (kind == Kind::box) {
      for (int d = 0; d < 3; ++d)
        if (!(hi[d] > lo[d])) throw GeometryError("box primitive needs positive extents");
    } else if (!(radius > 0.0)) {
      throw GeometryError("sphere primitive needs a positive radius");
    }
  }

  Vec3 bbox_lo() const { return kind == Kind::box ? lo : center - Vec3{radius, radius, radius}; }
  Vec3 bbox_hi() const { return kind == Kind::box ? hi : center + Vec3{radius, radius, radius}; }

  double volume() const {
    if (kind == Kind::box) return (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]);
    return 4.0 / 3.0 * std::numbers::pi * radius * radius * radius;
  }
};

/// Unstructured linear tetrahedral mesh. Coordinates in mm.
///
/// Construct through `Mesh::build`, which validates connectivity and
/// orientation and records the smallest edge length.
class Mesh {
 public:
  Mesh() = default;

  static Mesh build(std::vector<Vec3> nodes, std::vector<Tet> tets,
                    std::vector<BoundaryFace> faces = {}) {
    Mesh m;
    m.nodes_ = std::move(nodes);
    m.tets_ = std::move(tets);
    m.faces_ = std::move(faces);
    m.validate();
    m.min_edge_h_ = m.compute_min_edge();
    return m;
  }

  const std::vector<Vec3>& nodes() const noexcept { return nodes_; }
  const std::vector<Tet>& tets() const noexcept { return tets_; }
  const std::vector<BoundaryFace>& boundary_faces() const noexcept { return faces_; }
  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_tets() const noexcept { return tets_.size(); }

  /// Length of the smallest element edge over the whole mesh.
  double min_edge_h() const noexcept { return min_edge_h_; }

  std::array<Vec3, 4> corners(std::size_t e) const {
    const Tet& t = tets_[e];
    return {nodes_[t[0]], nodes_[t[1]], nodes_[t[2]], nodes_[t[3]]};
  }

  double volume(std::size_t e) const {
    const auto c = corners(e);
    return tet_signed_volume(c[0], c[1], c[2], c[3]);
  }

  Vec3 centroid(std::size_t e) const {
    const auto c = corners(e);
    return 0.25 * (c[0] + c[1] + c[2] + c[3]);
  }

  double max_edge(std::size_t e) const {
    const auto c = corners(e);
    double m = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b) m = std::max(m, norm(c[a] - c[b]));
    return m;
  }

  double total_volume() const {
    double v = 0.0;
    for (std::size_t e = 0; e < tets_.size(); ++e) v += std::abs(volume(e));
    return v;
  }

 private:
  void validate() const {
    const auto n = static_cast<Index>(nodes_.size());
    for (std::size_t e = 0; e < tets_.size(); ++e) {
      for (Index v : tets_[e])
        if (v < 0 || v >= n)
          throw ValidationError("tet " + std::to_string(e) + " references node " +
                                std::to_string(v) + " outside [0," + std::to_string(n) + ")");
      if (!(volume(e) > 0.0))
        throw ValidationError("tet " + std::to_string(e) + " has non-positive volume");
    }
    for (const auto& f : faces_)
      for (Index v : f.nodes)
        if (v < 0 || v >= n) throw ValidationError("boundary face references node out of range");
  }

  double compute_min_edge() const {
    double h = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < tets_.size(); ++e) {
      const auto c = corners(e);
      for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) h = std::min(h, norm(c[a] - c[b]));
    }
    return h;
  }

  std::vector<Vec3> nodes_;
  std::vector<Tet> tets_;
  std::vector<BoundaryFace> faces_;
  double min_edge_h_ = 0.0;
};

/// Signed volume of tet `t` over `nodes`: one sixth of the triple product.
/// Indices must be distinct.
inline double signed_volume(const Tet& t, const std::vector<Vec3>& nodes) {
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      if (t[a] == t[b]) throw ArgumentError("signed_volume: repeated node index");
  return tet_signed_volume(nodes[t[0]], nodes[t[1]], nodes[t[2]], nodes[t[3]]);
}

/// True when the tet is flat relative to its own size.
inline bool is_degenerate(const Tet& t, const std::vector<Vec3>& nodes) {
  double l = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) l = std::max(l, norm(nodes[t[a]] - nodes[t[b]]));
  return std::abs(signed_volume(t, nodes)) <= 1e-14 * l * l * l;
}

/// Faces shared by exactly one tet, oriented outward.
inline std::vector<std::array<Index, 3>> exterior_faces(const Mesh& mesh) {
  struct Entry {
    std::array<Index, 3> key;
    std::array<Index, 3> oriented;
  };
  static constexpr int kFace[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
  std::vector<Entry> all;
  all.reserve(mesh.num_tets() * 4);
  for (const Tet& t : mesh.tets()) {
    for (const auto& f : kFace) {
      std::array<Index, 3> o{t[f[0]], t[f[1]], t[f[2]]};
      auto k = o;
      std::sort(k.begin(), k.end());
      all.push_back({k, o});
    }
  }
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.key < b.key; });
  std::vector<std::array<Index, 3>> out;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i + 1;
    while (j < all.size() && all[j].key == all[i].key) ++j;
    if (j - i == 1) out.push_back(all[i].oriented);
    i = j;
  }
  return out;
}

/// Number of tets sharing each distinct face; used to check mesh conformity.
inline std::vector<int> face_multiplicities(const Mesh& mesh) {
  std::vector<std::array<Index, 3>> keys;
  keys.reserve(mesh.num_tets() * 4);
  for (const Tet& t : mesh.tets()) {
    for (int skip = 0; skip < 4; ++skip) {
      std::array<Index, 3> k{};
      int c = 0;
      for (int a = 0; a < 4; ++a)
        if (a != skip) k[c++] = t[a];
      std::sort(k.begin(), k.end());
      keys.push_back(k);
    }
  }
  std::sort(keys.begin(), keys.end());
  std::vector<int> counts;
  for (std::size_t i = 0; i < keys.size();) {
    std::size_t j = i + 1;
    while (j < keys.size() && keys[j] == keys[i]) ++j;
    counts.push_back(static_cast<int>(j - i));
    i = j;
  }
  return counts;
}

inline bool is_connected(const Mesh& mesh) {
  if (mesh.num_tets() == 0) return false;
  std::vector<Index> parent(mesh.num_nodes());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](Index x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<char> used(mesh.num_nodes(), 0);
  for (const Tet& t : mesh.tets()) {
    for (Index v : t) used[v] = 1;
    for (int a = 1; a < 4; ++a) {
      const Index r0 = find(t[0]), r1 = find(t[a]);
      if (r0 != r1) parent[std::max(r0, r1)] = std::min(r0, r1);
    }
  }
  Index root = -1;
  for (std::size_t v = 0; v < mesh.num_nodes(); ++v) {
    if (!used[v]) return false;
    const Index r = find(static_cast<Index>(v));
    if (root < 0) root = r;
    if (r != root) return false;
  }
  return true;
}

namespace detail {

/// Grid coordinates along one axis: uniform spacing <= fine_h over
/// [fine_lo, fine_hi], geometric growth (ratio 1.3) up to coarse_h outside.
inline std::vector<double> graded_axis(double a, double b, double fine_lo, double fine_hi,
                                       double coarse_h, double fine_h) {
  auto uniform = [](double lo, double hi, double h, std::vector<double>& out) {
    const auto n = std::max<long>(1, static_cast<long>(std::ceil((hi - lo) / h - 1e-9)));
    for (long i = 1; i <= n; ++i) out.push_back(i == n ? hi : lo + (hi - lo) * double(i) / double(n));
  };
  // Cell sizes growing away from the fine zone, scaled to cover `len` exactly.
  auto grading = [&](double len) {
    std::vector<double> sizes;
    double s = fine_h, sum = 0.0;
    while (sum < len - 1e-12 * len) {
      s = std::min(s * 1.3, coarse_h);
      sizes.push_back(s);
      sum += s;
    }
    if (sizes.size() > 1 && sum - len > 0.5 * sizes.back()) {
      sum -= sizes.back();
      sizes.pop_back();
    }
    for (double& x : sizes) x *= len / sum;
    return sizes;
  };

  std::vector<double> x{a};
  if (fine_h >= coarse_h) {
    uniform(a, b, coarse_h, x);
    return x;
  }
  fine_lo = std::max(a, fine_lo);
  fine_hi = std::min(b, fine_hi);
  if (fine_lo > a) {
    auto sizes = grading(fine_lo - a);
    double p = a;
    for (auto it = sizes.rbegin(); it != sizes.rend(); ++it) {
      p += *it;
      x.push_back(p);
    }
    x.back() = fine_lo;
  }
  uniform(fine_lo, fine_hi, fine_h, x);
  if (fine_hi < b) {
    auto sizes = grading(b - fine_hi);
    double p = fine_hi;
    for (double s : sizes) {
      p += s;
      x.push_back(p);
    }
    x.back() = b;
  }
  return x;
}

}  // namespace detail

struct MeshLimits {
  std::size_t max_elements = 20'000'000;
};

/// Tensor-product grid over the `outer` box, graded so that cells within
/// two fine cells of the `inner` primitive's bounding box have sides at most
/// `fine_h`; cells grow geometrically to `coarse_h` elsewhere. Every cell is
/// split into the 6 Kuhn tetrahedra around its main diagonal, which keeps
/// the mesh conforming and every dihedral angle non-obtuse.
///
/// Boundary faces carry tags 1..6 for the -x,+x,-y,+y,-z,+z sides.
inline Mesh generate_box_mesh(const GeometryPrimitive& outer, const GeometryPrimitive& inner,
                              double coarse_h, double fine_h, MeshLimits limits = {}) {
  if (outer.kind != GeometryPrimitive::Kind::box) throw GeometryError("outer primitive must be a box");
  outer.validate();
  inner.validate();
  if (!(fine_h > 0.0) || !(coarse_h >= fine_h) || !std::isfinite(coarse_h))
    throw GeometryError("mesh sizes must satisfy 0 < fine_h <= coarse_h");
  const Vec3 ilo = inner.bbox_lo(), ihi = inner.bbox_hi();
  for (int d = 0; d < 3; ++d)
    if (!(ilo[d] > outer.lo[d] && ihi[d] < outer.hi[d]))
      throw GeometryError("inner primitive is not strictly contained in the outer box");

  std::array<std::vector<double>, 3> axis;
  double cells = 1.0;
  for (int d = 0; d < 3; ++d) {
    const double margin = 2.0 * fine_h;
    // Cheap upper bound first so absurd sizes fail before allocating.
    const double est = (outer.hi[d] - outer.lo[d]) / fine_h;
    if (est * 6.0 > static_cast<double>(limits.max_elements) * 4.0)
      throw ResourceError("fine_h too small: element budget exceeded");
    axis[d] = detail::graded_axis(outer.lo[d], outer.hi[d], ilo[d] - margin, ihi[d] + margin,
                                  coarse_h, fine_h);
    cells *= static_cast<double>(axis[d].size() - 1);
  }
  if (6.0 * cells > static_cast<double>(limits.max_elements))
    throw ResourceError("mesh would have " + std::to_string(static_cast<long long>(6.0 * cells)) +
                        " elements, above the budget of " + std::to_string(limits.max_elements));

  const auto nx = static_cast<Index>(axis[0].size()), ny = static_cast<Index>(axis[1].size()),
             nz = static_cast<Index>(axis[2].size());
  auto id = [&](Index i, Index j, Index k) { return i + nx * (j + ny * k); };

  std::vector<Vec3> nodes;
  nodes.reserve(static_cast<std::size_t>(nx) * ny * nz);
  for (Index k = 0; k < nz; ++k)
    for (Index j = 0; j < ny; ++j)
      for (Index i = 0; i < nx; ++i) nodes.push_back({axis[0][i], axis[1][j], axis[2][k]});

  static constexpr int kPerm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::vector<Tet> tets;
  tets.reserve(static_cast<std::size_t>(6.0 * cells));
  for (Index k = 0; k + 1 < nz; ++k)
    for (Index j = 0; j + 1 < ny; ++j)
      for (Index i = 0; i + 1 < nx; ++i)
        for (const auto& p : kPerm) {
          std::array<Index, 3> c{i, j, k};
          Tet t{};
          t[0] = id(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[p[s]];
            t[s + 1] = id(c[0], c[1], c[2]);
          }
          if (tet_signed_volume(nodes[t[0]], nodes[t[1]], nodes[t[2]], nodes[t[3]]) < 0.0)
            std::swap(t[2], t[3]);
          tets.push_back(t);
        }

  Mesh tmp = Mesh::build(nodes, tets);
  std::vector<BoundaryFace> faces;
  for (const auto& f : exterior_faces(tmp)) {
    auto on = [&](int d, double v) {
      return nodes[f[0]][d] == v && nodes[f[1]][d] == v && nodes[f[2]][d] == v;
    };
    int tag = 0;
    for (int d = 0; d < 3 && tag == 0; ++d) {
      if (on(d, outer.lo[d])) tag = 2 * d + 1;
      else if (on(d, outer.hi[d])) tag = 2 * d + 2;
    }
    faces.push_back({f, tag});
  }
  return Mesh::build(std::move(nodes), std::move(tets), std::move(faces));
}

// ---------------------------------------------------------------------------
// ASCII mesh format:
//
//   rdmesh 1
//   nodes N
//   x y z            (N lines)
//   tets M
//   i j k l          (M lines, zero-based)
//   bfaces K         (optional)
//   i j k tag        (K lines)
//
// '#' starts a comment. Doubles are written in shortest round-trip form.
// ---------------------------------------------------------------------------

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  /// Next non-empty line with comments stripped, split into tokens.
  bool next(std::vector<std::string_view>& tokens) {
    while (std::getline(in_, buf_)) {
      ++line_;
      if (auto p = buf_.find('#'); p != std::string::npos) buf_.resize(p);
      tokens.clear();
      std::string_view s(buf_);
      std::size_t i = 0;
      while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) tokens.push_back(s.substr(i, j - i));
        i = j;
      }
      if (!tokens.empty()) return true;
    }
    return false;
  }

  std::size_t line() const noexcept { return line_; }

 private:
  std::istream& in_;
  std::string buf_;
  std::size_t line_ = 0;
};

template <class T>
T parse_number(std::string_view tok, std::size_t line) {
  T v{};
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw ParseError(line, "cannot parse number '" + std::string(tok) + "'");
  return v;
}

inline std::size_t expect_section(LineReader& r, std::vector<std::string_view>& tok,
                                  std::string_view name) {
  if (!r.next(tok)) throw ParseError(r.line() + 1, "missing '" + std::string(name) + "' section");
  if (tok.size() != 2 || tok[0] != name)
    throw ParseError(r.line(), "expected '" + std::string(name) + " <count>'");
  const auto n = parse_number<long long>(tok[1], r.line());
  if (n < 0) throw ParseError(r.line(), "negative count");
  return static_cast<std::size_t>(n);
}

inline void write_double(std::ostream& os, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  os.write(buf, res.ptr - buf);
}

}  // namespace detail

inline Mesh read_mesh(std::istream& in) {
  detail::LineReader r(in);
  std::vector<std::string_view> tok;
  if (!r.next(tok) || tok.size() != 2 || tok[0] != "rdmesh" || tok[1] != "1")
    throw ParseError(r.line(), "expected header 'rdmesh 1'");

  const std::size_t nn = detail::expect_section(r, tok, "nodes");
  std::vector<Vec3> nodes(nn);
  for (std::size_t i = 0; i < nn; ++i) {
    if (!r.next(tok) || tok.size() != 3) throw ParseError(r.line(), "expected 'x y z'");
    for (int d = 0; d < 3; ++d) nodes[i][d] = detail::parse_number<double>(tok[d], r.line());
  }

  const std::size_t nt = detail::expect_section(r, tok, "tets");
  std::vector<Tet> tets(nt);
  for (std::size_t e = 0; e < nt; ++e) {
    if (!r.next(tok) || tok.size() != 4) throw ParseError(r.line(), "expected 4 node indices");
    for (int a = 0; a < 4; ++a) {
      const auto v = detail::parse_number<long long>(tok[a], r.line());
      if (v < 0 || v >= static_cast<long long>(nn))
        throw ParseError(r.line(), "node index " + std::to_string(v) + " out of range for " +
                                       std::to_string(nn) + " nodes");
      tets[e][a] = static_cast<Index>(v);
    }
    const auto& t = tets[e];
    const double vol = tet_signed_volume(nodes[t[0]], nodes[t[1]], nodes[t[2]], nodes[t[3]]);
    if (!(vol > 0.0)) throw ParseError(r.line(), "tet has non-positive volume");
  }

  std::vector<BoundaryFace> faces;
  if (r.next(tok)) {
    if (tok.size() != 2 || tok[0] != "bfaces") throw ParseError(r.line(), "expected 'bfaces <count>'");
    const auto nf = detail::parse_number<long long>(tok[1], r.line());
    if (nf < 0) throw ParseError(r.line(), "negative count");
    faces.resize(static_cast<std::size_t>(nf));
    for (auto& f : faces) {
      if (!r.next(tok) || tok.size() != 4) throw ParseError(r.line(), "expected 'i j k tag'");
      for (int a = 0; a < 3; ++a) {
        const auto v = detail::parse_number<long long>(tok[a], r.line());
        if (v < 0 || v >= static_cast<long long>(nn))
          throw ParseError(r.line(), "face node index " + std::to_string(v) + " out of range");
        f.nodes[a] = static_cast<Index>(v);
      }
      f.tag = detail::parse_number<int>(tok[3], r.line());
    }
    if (r.next(tok)) throw ParseError(r.line(), "unexpected trailing content");
  }

  Mesh m = Mesh::build(std::move(nodes), std::move(tets), std::move(faces));
  if (!is_connected(m)) throw ValidationError("mesh is not a single connected component");
  return m;
}

inline void write_mesh(const Mesh& mesh, std::ostream& os) {
  os << "rdmesh 1\n";
  os << "nodes " << mesh.num_nodes() << '\n';
  for (const Vec3& p : mesh.nodes()) {
    detail::write_double(os, p[0]);
    os << ' ';
    detail::write_double(os, p[1]);
    os << ' ';
    detail::write_double(os, p[2]);
    os << '\n';
  }
  os << "tets " << mesh.num_tets() << '\n';
  for (const Tet& t : mesh.tets()) os << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  if (!mesh.boundary_faces().empty()) {
    os << "bfaces " << mesh.boundary_faces().size() << '\n';
    for (const auto& f : mesh.boundary_faces())
      os << f.nodes[0] << ' ' << f.nodes[1] << ' ' << f.nodes[2] << ' ' << f.tag << '\n';
  }
}

inline Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open mesh file '" + path + "'");
  return read_mesh(in);
}

inline void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ArgumentError("cannot write mesh file '" + path + "'");
  write_mesh(mesh, os);
  if (!os) throw ArgumentError("write failed for '" + path + "'");
}

}  // namespace rdls
