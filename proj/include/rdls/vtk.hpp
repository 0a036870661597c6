#pragma once

#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rdls/error.hpp"
#include "rdls/mesh.hpp"

namespace rdls {

struct VtkField {
  std::string name;
  std::span<const double> values;
};

/// Legacy ASCII unstructured grid (VTK 3.0) with scalar point and cell data.
inline void write_vtk(const Mesh& mesh, std::span<const VtkField> point_data, std::span<const VtkField> cell_data,
                      std::ostream& os, const std::string& title = "rdls") {
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << mesh.num_nodes() << " double\n";
  os.precision(17);
  for (const Vec3& p : mesh.nodes()) os << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
  os << "CELLS " << mesh.num_tets() << ' ' << 5 * mesh.num_tets() << '\n';
  for (const Tet& t : mesh.tets()) os << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  os << "CELL_TYPES " << mesh.num_tets() << '\n';
  for (std::size_t e = 0; e < mesh.num_tets(); ++e) os << "10\n";
  auto block = [&](std::span<const VtkField> fields, std::size_t n, const char* kind) {
    if (fields.empty()) return;
    os << kind << ' ' << n << '\n';
    for (const auto& f : fields) {
      if (f.values.size() != n) throw ConformanceError("vtk: field '" + f.name + "' has the wrong length");
      os << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : f.values) os << v << '\n';
    }
  };
  block(point_data, mesh.num_nodes(), "POINT_DATA");
  block(cell_data, mesh.num_tets(), "CELL_DATA");
}

inline void save_vtk(const Mesh& mesh, std::span<const VtkField> point_data, std::span<const VtkField> cell_data,
                     const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ArgumentError("cannot write '" + path + "'");
  write_vtk(mesh, point_data, cell_data, os);
  if (!os) throw ArgumentError("write failed for '" + path + "'");
}

/// Snapshot with the three model fields as point data.
inline void save_snapshot(const Mesh& mesh, std::span<const double> phi, std::span<const double> c_mg,
                          std::span<const double> c_film, const std::string& path) {
  const VtkField f[] = {{"phi", phi}, {"c_mg", c_mg}, {"c_film", c_film}};
  save_vtk(mesh, f, {}, path);
}

/// Debug view of a partition: element colour = subdomain id.
inline void save_partition_vtk(const Mesh& mesh, std::span<const int> part_of_element, const std::string& path) {
  std::vector<double> id(part_of_element.begin(), part_of_element.end());
  const VtkField f[] = {{"subdomain", id}};
  save_vtk(mesh, {}, f, path);
}

}  // namespace rdls
