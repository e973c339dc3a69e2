#include "schom/vtk.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace schom {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

VtkStructuredPoints::VtkStructuredPoints(std::array<int, 3> point_dims,
                                         const Eigen::Vector3d& origin, double spacing)
    : dims_(point_dims), origin_(origin), spacing_(spacing) {}

void VtkStructuredPoints::add_point_scalars(const std::string& name,
                                            std::vector<double> values) {
  const std::size_t n = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  if (values.size() != n) throw std::invalid_argument("point field size mismatch: " + name);
  point_fields_.push_back({name, std::move(values), false});
}

void VtkStructuredPoints::add_point_vectors(const std::string& name, std::vector<double> xyz) {
  const std::size_t n = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  if (xyz.size() != 3 * n) throw std::invalid_argument("point vector size mismatch: " + name);
  point_fields_.push_back({name, std::move(xyz), true});
}

void VtkStructuredPoints::add_cell_scalars(const std::string& name,
                                           std::vector<double> values) {
  const std::size_t n =
      static_cast<std::size_t>(dims_[0] - 1) * (dims_[1] - 1) * (dims_[2] - 1);
  if (values.size() != n) throw std::invalid_argument("cell field size mismatch: " + name);
  cell_fields_.push_back({name, std::move(values), false});
}

void VtkStructuredPoints::write(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);

  out << "# vtk DataFile Version 3.0\n";
  out << "schom field export\n";
  out << "ASCII\n";
  out << "DATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << dims_[0] << ' ' << dims_[1] << ' ' << dims_[2] << '\n';
  out << "ORIGIN " << fmt(origin_.x()) << ' ' << fmt(origin_.y()) << ' ' << fmt(origin_.z())
      << '\n';
  out << "SPACING " << fmt(spacing_) << ' ' << fmt(spacing_) << ' ' << fmt(spacing_) << '\n';

  auto write_fields = [&](const std::vector<Field>& fields, std::size_t count,
                          const char* kind) {
    if (fields.empty()) return;
    out << kind << ' ' << count << '\n';
    for (const Field& f : fields) {
      if (f.vectors) {
        out << "VECTORS " << f.name << " double\n";
        for (std::size_t i = 0; i < count; ++i)
          out << fmt(f.values[3 * i]) << ' ' << fmt(f.values[3 * i + 1]) << ' '
              << fmt(f.values[3 * i + 2]) << '\n';
      } else {
        out << "SCALARS " << f.name << " double 1\n";
        out << "LOOKUP_TABLE default\n";
        for (std::size_t i = 0; i < count; ++i) out << fmt(f.values[i]) << '\n';
      }
    }
  };

  write_fields(point_fields_, static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2],
               "POINT_DATA");
  write_fields(cell_fields_,
               static_cast<std::size_t>(dims_[0] - 1) * (dims_[1] - 1) * (dims_[2] - 1),
               "CELL_DATA");
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace schom
