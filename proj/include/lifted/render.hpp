#pragma once

#include <string>
#include <vector>

#include "lifted/geometry.hpp"
#include "lifted/lux.hpp"
#include "lifted/model.hpp"
#include "lifted/types.hpp"

namespace lifted {

struct RasterImage {
  int width = 0;
  int height = 0;
  Channel r, g, b;    // interpolated attribute channels (unused ones stay 0)
  Channel depth;      // finite where foreground
  Mask foreground;
};

/// Z-buffered rasterization under the scaled-orthographic camera. Samples at
/// integer pixel coordinates; `attributes` is N x C with C <= 3, interpolated
/// barycentrically into (r, g, b). Depth ties go to the triangle with the
/// lexicographically smallest sorted vertex triple, so the image does not
/// depend on triangle submission order.
RasterImage rasterize(const Points3& points, const std::vector<Triangle>& triangles,
                      const CameraPose& camera, int width, int height,
                      const Eigen::MatrixXd& attributes);

/// Camera-frame vertex normals of the instance's posed shape, rasterized over
/// the UV triangulation: texel (ix, iy) sits at uv = (ix/(W-1), iy/(H-1)).
/// Interpolated normals are renormalized per texel.
NormalMap render_normal_map_uv(const ShapeModel& model, const InstanceRecord& inst,
                               int width, int height);

/// Wavefront OBJ with v/vt/f records, 1-based, faces referencing both vertex
/// and texture indices.
void export_obj(const std::string& path, const Points3& points,
                const std::vector<Triangle>& triangles, const Points2& uv);

}  // namespace lifted
