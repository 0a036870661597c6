#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "rdls/error.hpp"
#include "rdls/mesh.hpp"

namespace rdls {

/// Node -> incident elements, in CSR layout.
struct NodeElementAdjacency {
  std::vector<std::int64_t> offset;
  std::vector<Index> element;

  std::span<const Index> of(std::size_t node) const {
    return {element.data() + offset[node], element.data() + offset[node + 1]};
  }
};

inline NodeElementAdjacency node_element_adjacency(const Mesh& mesh) {
  NodeElementAdjacency adj;
  adj.offset.assign(mesh.num_nodes() + 1, 0);
  for (const Tet& t : mesh.tets())
    for (Index v : t) ++adj.offset[v + 1];
  std::partial_sum(adj.offset.begin(), adj.offset.end(), adj.offset.begin());
  adj.element.resize(adj.offset.back());
  std::vector<std::int64_t> fill(adj.offset.begin(), adj.offset.end() - 1);
  for (std::size_t e = 0; e < mesh.num_tets(); ++e)
    for (Index v : mesh.tets()[e]) adj.element[fill[v]++] = static_cast<Index>(e);
  return adj;
}

struct Partition {
  int num_parts = 0;
  std::vector<int> part_of_element;

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s(num_parts, 0);
    for (int p : part_of_element) ++s[p];
    return s;
  }
};

/// Recursive coordinate bisection on element centroids. Each cut is made
/// along the axis of largest centroid extent, at the rank that splits the
/// part count proportionally, so part sizes differ by at most one element
/// per level. `seed` only decides between axes of equal extent; ties along
/// the cut axis are broken by element index.
inline Partition partition_mesh(const Mesh& mesh, int num_parts, unsigned seed = 0) {
  if (num_parts < 1) throw ArgumentError("partition_mesh: need at least one part");
  if (static_cast<std::size_t>(num_parts) > mesh.num_tets())
    throw ArgumentError("partition_mesh: more parts than elements");

  std::vector<Vec3> cen(mesh.num_tets());
  for (std::size_t e = 0; e < mesh.num_tets(); ++e) cen[e] = mesh.centroid(e);
  std::vector<Index> ids(mesh.num_tets());
  std::iota(ids.begin(), ids.end(), 0);

  Partition p;
  p.num_parts = num_parts;
  p.part_of_element.assign(mesh.num_tets(), 0);

  auto recurse = [&](auto&& self, std::size_t b, std::size_t e, int parts, int first) -> void {
    if (parts == 1) {
      for (std::size_t i = b; i < e; ++i) p.part_of_element[ids[i]] = first;
      return;
    }
    Vec3 lo = cen[ids[b]], hi = lo;
    for (std::size_t i = b; i < e; ++i)
      for (int d = 0; d < 3; ++d) {
        lo[d] = std::min(lo[d], cen[ids[i]][d]);
        hi[d] = std::max(hi[d], cen[ids[i]][d]);
      }
    const double span = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
    int axis = -1;
    for (int k = 0; k < 3; ++k) {
      const int d = static_cast<int>((k + seed) % 3);
      if (hi[d] - lo[d] >= span * (1.0 - 1e-12)) {
        axis = d;
        break;
      }
    }
    const int left = parts / 2;
    const std::size_t n = e - b;
    const std::size_t cut = b + (n * static_cast<std::size_t>(left) + parts / 2) / parts;
    std::nth_element(ids.begin() + b, ids.begin() + cut, ids.begin() + e, [&](Index x, Index y) {
      return cen[x][axis] < cen[y][axis] || (cen[x][axis] == cen[y][axis] && x < y);
    });
    self(self, b, cut, left, first);
    self(self, cut, e, parts - left, first + left);
  };
  recurse(recurse, 0, ids.size(), num_parts, 0);
  return p;
}

/// One overlapping subdomain.
///
/// `elements` lists global element ids: the first `num_local_elements` are
/// the subdomain proper (its partition part plus `delta` adjacency layers);
/// the remainder is a one-layer assembly halo that makes every row of a
/// local node complete. `nodes` is ordered the same way: nodes of the
/// subdomain proper first, halo-only nodes after.
struct Subdomain {
  std::vector<Index> elements;
  std::size_t num_local_elements = 0;
  std::vector<char> is_ghost_element;  // per local element: not in this partition part
  std::vector<Index> nodes;            // restriction map: local -> global
  std::size_t num_local_nodes = 0;
  std::vector<double> pou_weight;      // per local node
  std::vector<Index> owned;            // local indices with weight 1
  std::vector<Index> ghost_nodes;      // local indices owned by another subdomain
  std::vector<Tet> local_tets;         // all `elements` in local numbering

  std::span<const Index> local_elements() const { return {elements.data(), num_local_elements}; }
  std::span<const Index> local_nodes() const { return {nodes.data(), num_local_nodes}; }
};

struct OverlapDecomposition {
  int delta = 0;
  std::size_t num_global_nodes = 0;
  std::vector<int> owner;  // per global node
  std::vector<Subdomain> subdomains;

  int size() const noexcept { return static_cast<int>(subdomains.size()); }
};

/// Grows every partition part by `delta` layers of node-adjacent elements
/// and assigns each global node to the lowest-id part that contains it in
/// the non-overlapping partition. The owner's weight is 1 and every other
/// copy's weight is 0, so the weighted reconstruction is exact.
inline OverlapDecomposition build_overlap(const Mesh& mesh, const Partition& partition, int delta) {
  if (delta < 0) throw ArgumentError("build_overlap: delta must be >= 0");
  if (partition.part_of_element.size() != mesh.num_tets())
    throw ConformanceError("build_overlap: partition does not match mesh");
  const auto adj = node_element_adjacency(mesh);
  const std::size_t nn = mesh.num_nodes(), ne = mesh.num_tets();

  OverlapDecomposition dec;
  dec.delta = delta;
  dec.num_global_nodes = nn;
  dec.owner.assign(nn, partition.num_parts);
  for (std::size_t e = 0; e < ne; ++e)
    for (Index v : mesh.tets()[e])
      dec.owner[v] = std::min(dec.owner[v], partition.part_of_element[e]);
  dec.subdomains.resize(partition.num_parts);

  std::vector<int> elem_stamp(ne, -1), node_stamp(nn, -1);
  std::vector<Index> local_of(nn, -1);
  for (int s = 0; s < partition.num_parts; ++s) {
    Subdomain& sd = dec.subdomains[s];
    std::vector<Index> layer;
    for (std::size_t e = 0; e < ne; ++e)
      if (partition.part_of_element[e] == s) {
        layer.push_back(static_cast<Index>(e));
        elem_stamp[e] = s;
      }
    if (layer.empty()) throw ArgumentError("build_overlap: empty partition part");
    std::vector<Index> local(layer);
    auto grow = [&](const std::vector<Index>& from) {
      std::vector<Index> next;
      for (Index e : from)
        for (Index v : mesh.tets()[e])
          for (Index f : adj.of(v))
            if (elem_stamp[f] != s) {
              elem_stamp[f] = s;
              next.push_back(f);
            }
      std::sort(next.begin(), next.end());
      return next;
    };
    for (int k = 0; k < delta; ++k) {
      layer = grow(layer);
      local.insert(local.end(), layer.begin(), layer.end());
    }
    std::vector<Index> halo = grow(layer);
    std::sort(local.begin(), local.end());

    sd.elements = local;
    sd.num_local_elements = local.size();
    sd.elements.insert(sd.elements.end(), halo.begin(), halo.end());
    sd.is_ghost_element.resize(sd.num_local_elements);
    for (std::size_t i = 0; i < sd.num_local_elements; ++i)
      sd.is_ghost_element[i] = partition.part_of_element[local[i]] != s;

    auto collect = [&](std::span<const Index> elems) {
      std::vector<Index> ns;
      for (Index e : elems)
        for (Index v : mesh.tets()[e])
          if (node_stamp[v] != s) {
            node_stamp[v] = s;
            ns.push_back(v);
          }
      std::sort(ns.begin(), ns.end());
      return ns;
    };
    sd.nodes = collect(sd.local_elements());
    sd.num_local_nodes = sd.nodes.size();
    const auto halo_nodes = collect(std::span<const Index>(halo));
    sd.nodes.insert(sd.nodes.end(), halo_nodes.begin(), halo_nodes.end());

    for (std::size_t l = 0; l < sd.nodes.size(); ++l) local_of[sd.nodes[l]] = static_cast<Index>(l);
    sd.pou_weight.resize(sd.num_local_nodes);
    for (std::size_t l = 0; l < sd.num_local_nodes; ++l) {
      const bool mine = dec.owner[sd.nodes[l]] == s;
      sd.pou_weight[l] = mine ? 1.0 : 0.0;
      (mine ? sd.owned : sd.ghost_nodes).push_back(static_cast<Index>(l));
    }
    sd.local_tets.reserve(sd.elements.size());
    for (Index e : sd.elements) {
      const Tet& t = mesh.tets()[e];
      sd.local_tets.push_back({local_of[t[0]], local_of[t[1]], local_of[t[2]], local_of[t[3]]});
    }
  }
  return dec;
}

/// R_i x for every subdomain (values at the subdomain's local nodes).
inline std::vector<std::vector<double>> restrict_to_subdomains(const OverlapDecomposition& dec,
                                                               std::span<const double> global) {
  if (global.size() != dec.num_global_nodes)
    throw ConformanceError("restrict: vector size does not match decomposition");
  std::vector<std::vector<double>> out(dec.subdomains.size());
  for (std::size_t s = 0; s < dec.subdomains.size(); ++s) {
    const auto& sd = dec.subdomains[s];
    out[s].resize(sd.num_local_nodes);
    for (std::size_t l = 0; l < sd.num_local_nodes; ++l) out[s][l] = global[sd.nodes[l]];
  }
  return out;
}

/// Sum over subdomains of R_i^T D_i x_i, accumulated in subdomain order.
inline std::vector<double> assemble_global_from_local(const OverlapDecomposition& dec,
                                                      const std::vector<std::vector<double>>& locals) {
  if (locals.size() != dec.subdomains.size())
    throw ConformanceError("assemble_global_from_local: wrong number of subdomain vectors");
  std::vector<double> g(dec.num_global_nodes, 0.0);
  for (std::size_t s = 0; s < locals.size(); ++s) {
    const auto& sd = dec.subdomains[s];
    if (locals[s].size() != sd.num_local_nodes)
      throw ConformanceError("assemble_global_from_local: subdomain " + std::to_string(s) +
                             " vector has wrong size");
    for (std::size_t l = 0; l < sd.num_local_nodes; ++l) g[sd.nodes[l]] += sd.pou_weight[l] * locals[s][l];
  }
  return g;
}

}  // namespace rdls
