#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace schom {

/// Legacy-VTK ASCII structured-points writer. Dimensions count points; cell
/// fields must have (nx-1)(ny-1)(nz-1) entries, point fields nx*ny*nz.
class VtkStructuredPoints {
 public:
  VtkStructuredPoints(std::array<int, 3> point_dims, const Eigen::Vector3d& origin,
                      double spacing);

  void add_point_scalars(const std::string& name, std::vector<double> values);
  void add_point_vectors(const std::string& name, std::vector<double> xyz);  // 3 per point
  void add_cell_scalars(const std::string& name, std::vector<double> values);

  void write(const std::string& path) const;

 private:
  struct Field {
    std::string name;
    std::vector<double> values;
    bool vectors = false;
  };
  std::array<int, 3> dims_;
  Eigen::Vector3d origin_;
  double spacing_;
  std::vector<Field> point_fields_;
  std::vector<Field> cell_fields_;
};

}  // namespace schom
