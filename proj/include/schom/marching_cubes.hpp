#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace schom {

/// Triangle soup in millimeters; three consecutive vertices per triangle,
/// counter-clockwise seen from the positive side of the field.
struct TriMesh {
  std::vector<Eigen::Vector3f> vertices;

  std::size_t triangles() const { return vertices.size() / 3; }
};

/// Classic marching cubes of the zero level set of f sampled on a regular
/// grid of nx*ny*nz cells spanning [lo, hi]. The surface encloses f > 0.
TriMesh marching_cubes(const std::function<double(const Eigen::Vector3d&)>& f,
                       const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, int nx, int ny,
                       int nz);

}  // namespace schom
