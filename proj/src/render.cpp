#include "lifted/render.hpp"

#include <algorithm>
#include <array>
#include <climits>
#include <cmath>
#include <fstream>
#include <limits>

#include "lifted/io.hpp"
#include "lifted/parallel.hpp"

namespace lifted {

namespace {

struct PreparedTriangle {
  Vec2 pa, pb, pc;
  Vec3 depth;               // per-vertex depth
  Eigen::Matrix3d attr;     // column j = vertex j's attribute (rows past C are 0)
  std::array<int, 3> key;   // sorted vertex indices; breaks depth ties
  int min_x, max_x, min_y, max_y;
  double inv_area;
};

double cross2(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

/// Shared scanline core. Requires slot writes per pixel only; rows are
/// processed independently so thread count cannot change the result.
template <typename Shade>
void scan_triangles(const std::vector<PreparedTriangle>& tris, int width, int height,
                    Shade&& shade) {
  parallel_for(0, height, [&](int y) {
    for (std::size_t idx = 0; idx < tris.size(); ++idx) {
      const PreparedTriangle& tri = tris[idx];
      if (y < tri.min_y || y > tri.max_y) continue;
      for (int x = tri.min_x; x <= tri.max_x; ++x) {
        const Vec2 s{double(x), double(y)};
        const double la = cross2(tri.pb - s, tri.pc - s) * tri.inv_area;
        const double lb = cross2(tri.pc - s, tri.pa - s) * tri.inv_area;
        const double lc = cross2(tri.pa - s, tri.pb - s) * tri.inv_area;
        if (la < 0 || lb < 0 || lc < 0) continue;
        shade(x, y, tri, la, lb, lc);
      }
    }
  });
}

std::vector<PreparedTriangle> prepare(const Points2& projected, const VecX& depths,
                                      const std::vector<Triangle>& triangles,
                                      const Eigen::MatrixXd& attributes, int width, int height) {
  std::vector<PreparedTriangle> out;
  out.reserve(triangles.size());
  const int cols = int(attributes.cols());
  for (const Triangle& t : triangles) {
    PreparedTriangle p;
    p.pa = projected.row(t.a);
    p.pb = projected.row(t.b);
    p.pc = projected.row(t.c);
    const double area = cross2(p.pb - p.pa, p.pc - p.pa);
    if (area == 0.0) continue;
    p.inv_area = 1.0 / area;
    p.depth = Vec3(depths[t.a], depths[t.b], depths[t.c]);
    p.attr.setZero();
    for (int c = 0; c < cols; ++c) {
      p.attr(c, 0) = attributes(t.a, c);
      p.attr(c, 1) = attributes(t.b, c);
      p.attr(c, 2) = attributes(t.c, c);
    }
    p.key = {t.a, t.b, t.c};
    std::sort(p.key.begin(), p.key.end());
    const double lo_x = std::min({p.pa.x(), p.pb.x(), p.pc.x()});
    const double hi_x = std::max({p.pa.x(), p.pb.x(), p.pc.x()});
    const double lo_y = std::min({p.pa.y(), p.pb.y(), p.pc.y()});
    const double hi_y = std::max({p.pa.y(), p.pb.y(), p.pc.y()});
    p.min_x = std::max(0, int(std::ceil(lo_x)));
    p.max_x = std::min(width - 1, int(std::floor(hi_x)));
    p.min_y = std::max(0, int(std::ceil(lo_y)));
    p.max_y = std::min(height - 1, int(std::floor(hi_y)));
    out.push_back(p);
  }
  return out;
}

constexpr std::array<int, 3> kNoTriangle = {INT_MAX, INT_MAX, INT_MAX};

}  // namespace

RasterImage rasterize(const Points3& points, const std::vector<Triangle>& triangles,
                      const CameraPose& camera, int width, int height,
                      const Eigen::MatrixXd& attributes) {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("rasterize: image dimensions must be positive");
  if (attributes.rows() != points.rows() || attributes.cols() > 3)
    throw std::invalid_argument("rasterize: attributes must be N x C with C <= 3");
  RasterImage image;
  image.width = width;
  image.height = height;
  image.r = Channel::Zero(height, width);
  image.g = Channel::Zero(height, width);
  image.b = Channel::Zero(height, width);
  image.depth = Channel::Zero(height, width);
  image.foreground = Mask::Zero(height, width);

  const Points2 projected = project(points, camera);
  const VecX depths = camera_depth(points, camera);
  const std::vector<PreparedTriangle> tris =
      prepare(projected, depths, triangles, attributes, width, height);

  std::vector<std::array<int, 3>> winner(std::size_t(width) * height, kNoTriangle);
  scan_triangles(tris, width, height,
                 [&](int x, int y, const PreparedTriangle& tri, double la, double lb, double lc) {
                   const double z = la * tri.depth[0] + lb * tri.depth[1] + lc * tri.depth[2];
                   std::array<int, 3>& w = winner[std::size_t(y) * width + x];
                   const bool taken = image.foreground(y, x) != 0;
                   if (taken && !(z < image.depth(y, x) ||
                                  (z == image.depth(y, x) && tri.key < w)))
                     return;
                   image.foreground(y, x) = 1;
                   image.depth(y, x) = z;
                   w = tri.key;
                   const Vec3 a = tri.attr * Vec3(la, lb, lc);
                   image.r(y, x) = a[0];
                   image.g(y, x) = a[1];
                   image.b(y, x) = a[2];
                 });
  return image;
}

NormalMap render_normal_map_uv(const ShapeModel& model, const InstanceRecord& inst,
                               int width, int height) {
  if (width < 2 || height < 2)
    throw std::invalid_argument("render_normal_map_uv: map must be at least 2x2");
  const Points3 shape = instance_shape(model, inst);
  const Mat3 R = quat_to_rotmat(inst.camera.q);
  const Points3 posed = shape * R.transpose();
  const std::vector<Triangle> triangles = triangulate(model.grid);
  const Points3 normals = vertex_normals(posed, triangles);

  const int n_vertices = model.vertex_count();
  Points2 texel(n_vertices, 2);
  for (int i = 0; i < n_vertices; ++i) {
    const Vec2 uv = model.grid.uv(i);
    texel(i, 0) = uv[0] * (width - 1);
    texel(i, 1) = uv[1] * (height - 1);
  }

  NormalMap map;
  map.width = width;
  map.height = height;
  map.nx = Channel::Zero(height, width);
  map.ny = Channel::Zero(height, width);
  map.nz = Channel::Zero(height, width);
  map.defined = Mask::Zero(height, width);

  const VecX flat_depth = VecX::Zero(n_vertices);
  const std::vector<PreparedTriangle> tris =
      prepare(texel, flat_depth, triangles, normals, width, height);
  std::vector<std::array<int, 3>> winner(std::size_t(width) * height, kNoTriangle);
  scan_triangles(tris, width, height,
                 [&](int x, int y, const PreparedTriangle& tri, double la, double lb, double lc) {
                   std::array<int, 3>& w = winner[std::size_t(y) * width + x];
                   if (!(tri.key < w)) return;
                   const Vec3 n = tri.attr * Vec3(la, lb, lc);
                   const double len = n.norm();
                   if (len == 0.0) return;
                   w = tri.key;
                   map.nx(y, x) = n[0] / len;
                   map.ny(y, x) = n[1] / len;
                   map.nz(y, x) = n[2] / len;
                   map.defined(y, x) = 1;
                 });
  return map;
}

void export_obj(const std::string& path, const Points3& points,
                const std::vector<Triangle>& triangles, const Points2& uv) {
  if (uv.rows() != points.rows())
    throw std::invalid_argument("export_obj: uv row count must match points");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    out << "v " << format_double(points(i, 0)) << " " << format_double(points(i, 1)) << " "
        << format_double(points(i, 2)) << "\n";
  for (Eigen::Index i = 0; i < uv.rows(); ++i)
    out << "vt " << format_double(uv(i, 0)) << " " << format_double(uv(i, 1)) << "\n";
  for (const Triangle& t : triangles)
    out << "f " << t.a + 1 << "/" << t.a + 1 << " " << t.b + 1 << "/" << t.b + 1 << " "
        << t.c + 1 << "/" << t.c + 1 << "\n";
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

}  // namespace lifted
