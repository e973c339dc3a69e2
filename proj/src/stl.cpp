#include "schom/stl.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace schom {

void write_stl(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);

  char header[80] = {};
  std::strncpy(header, "schom binary STL", sizeof(header) - 1);
  out.write(header, sizeof(header));
  const std::uint32_t count = static_cast<std::uint32_t>(mesh.triangles());
  out.write(reinterpret_cast<const char*>(&count), 4);

  for (std::size_t t = 0; t < mesh.triangles(); ++t) {
    const Eigen::Vector3f& a = mesh.vertices[3 * t];
    const Eigen::Vector3f& b = mesh.vertices[3 * t + 1];
    const Eigen::Vector3f& c = mesh.vertices[3 * t + 2];
    Eigen::Vector3f n = (b - a).cross(c - a);
    const float len = n.norm();
    if (len > 0.0f) n /= len;
    float rec[12] = {n.x(), n.y(), n.z(), a.x(), a.y(), a.z(),
                     b.x(), b.y(), b.z(), c.x(), c.y(), c.z()};
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    const std::uint16_t attr = 0;
    out.write(reinterpret_cast<const char*>(&attr), 2);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace schom
