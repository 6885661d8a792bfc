#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "helpers.hpp"
#include "lifted/geometry.hpp"
#include "lifted/io.hpp"
#include "lifted/model.hpp"
#include "lifted/parallel.hpp"
#include "lifted/render.hpp"

using namespace lifted;
using namespace lifted::testutil;

namespace {

ShapeModel flat_square_model(int n) {
  ShapeModel model;
  model.grid.n = n;
  const int N = model.vertex_count();
  model.mean.resize(N, 3);
  for (int i = 0; i < N; ++i) {
    const Vec2 uv = model.grid.uv(i);
    model.mean.row(i) << uv[0] - 0.5, uv[1] - 0.5, 0.0;
  }
  return model;
}

InstanceRecord plain_instance(const ShapeModel& model) {
  InstanceRecord inst;
  inst.id = "r";
  inst.code_identity = VecX::Zero(Eigen::Index(model.identity_basis.size()));
  inst.code_expression = VecX::Zero(Eigen::Index(model.expression_basis.size()));
  inst.observations = Points2::Zero(model.vertex_count(), 2);
  inst.visibility.assign(std::size_t(model.vertex_count()), 0);
  return inst;
}

double cross2(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

// Same sampling rule as the renderer, applied one pixel at a time.
struct NaiveHit {
  bool hit = false;
  double depth = 0.0;
  std::array<int, 3> key{};
  Vec3 attr = Vec3::Zero();
};

NaiveHit naive_pixel(const Points2& projected, const VecX& depths,
                     const std::vector<Triangle>& triangles, const Eigen::MatrixXd& attributes,
                     int x, int y) {
  NaiveHit best;
  const Vec2 s{double(x), double(y)};
  for (const Triangle& t : triangles) {
    const Vec2 pa = projected.row(t.a);
    const Vec2 pb = projected.row(t.b);
    const Vec2 pc = projected.row(t.c);
    const double area = cross2(pb - pa, pc - pa);
    if (area == 0.0) continue;
    const double la = cross2(pb - s, pc - s) / area;
    const double lb = cross2(pc - s, pa - s) / area;
    const double lc = cross2(pa - s, pb - s) / area;
    if (la < 0 || lb < 0 || lc < 0) continue;
    const double z = la * depths[t.a] + lb * depths[t.b] + lc * depths[t.c];
    std::array<int, 3> key = {t.a, t.b, t.c};
    std::sort(key.begin(), key.end());
    if (best.hit && !(z < best.depth || (z == best.depth && key < best.key))) continue;
    best.hit = true;
    best.depth = z;
    best.key = key;
    best.attr.setZero();
    for (int c = 0; c < attributes.cols() && c < 3; ++c)
      best.attr[c] = la * attributes(t.a, c) + lb * attributes(t.b, c) + lc * attributes(t.c, c);
  }
  return best;
}

bool images_identical(const RasterImage& a, const RasterImage& b) {
  return (a.foreground == b.foreground).all() && (a.r == b.r).all() && (a.g == b.g).all() &&
         (a.b == b.b).all() && (a.depth == b.depth).all();
}

}  // namespace

TEST_CASE("single triangle interpolates its vertex attributes") {
  Points3 points(3, 3);
  points << 10, 10, 0, 30, 10, 0, 10, 30, 0;
  const std::vector<Triangle> triangles = {{0, 1, 2}};
  Eigen::MatrixXd attributes = Eigen::MatrixXd::Identity(3, 3);
  CameraPose camera;
  camera.sigma = 1.0;
  camera.t = Vec2{0.0, 0.0};

  const RasterImage image = rasterize(points, triangles, camera, 64, 64, attributes);

  CHECK(image.foreground(10, 10) == 1);
  CHECK(image.r(10, 10) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(image.foreground(10, 30) == 1);
  CHECK(image.g(10, 30) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(image.foreground(9, 10) == 0);
  CHECK(image.foreground(21, 20) == 0);  // just outside the hypotenuse

  for (int y = 10; y <= 30; ++y)
    for (int x = 10; x <= 30; ++x) {
      const double la = (40.0 - x - y) / 20.0;  // affine in x and y
      const double lb = (x - 10.0) / 20.0;
      const double lc = (y - 10.0) / 20.0;
      const bool inside = la >= 0 && lb >= 0 && lc >= 0;
      CHECK(image.foreground(y, x) == (inside ? 1 : 0));
      if (!inside) continue;
      CHECK(image.r(y, x) == doctest::Approx(la).epsilon(1e-12));
      CHECK(image.g(y, x) == doctest::Approx(lb).epsilon(1e-12));
      CHECK(image.b(y, x) == doctest::Approx(lc).epsilon(1e-12));
    }
}

TEST_CASE("nearer surface wins the depth test") {
  // camera depth is -(R p)_z, so larger z is closer to the viewer
  Points3 points(6, 3);
  points << 5, 5, 0, 25, 5, 0, 5, 25, 0, 5, 5, 1, 25, 5, 1, 5, 25, 1;
  const std::vector<Triangle> triangles = {{0, 1, 2}, {3, 4, 5}};
  Eigen::MatrixXd attributes(6, 1);
  attributes << 1, 1, 1, 2, 2, 2;
  CameraPose camera;

  const RasterImage front_last = rasterize(points, triangles, camera, 32, 32, attributes);
  CHECK(front_last.r(10, 10) == 2.0);
  CHECK(front_last.depth(10, 10) == -1.0);

  const std::vector<Triangle> reversed = {{3, 4, 5}, {0, 1, 2}};
  const RasterImage front_first = rasterize(points, reversed, camera, 32, 32, attributes);
  CHECK(front_first.r(10, 10) == 2.0);
}

TEST_CASE("tilted triangle depth matches interpolation") {
  Points3 points(3, 3);
  points << 4, 4, 0, 20, 4, 2, 4, 20, -2;
  const std::vector<Triangle> triangles = {{0, 1, 2}};
  const Eigen::MatrixXd attributes = Eigen::MatrixXd::Zero(3, 1);
  CameraPose camera;
  const RasterImage image = rasterize(points, triangles, camera, 32, 32, attributes);
  for (int y = 4; y < 20; ++y)
    for (int x = 4; x < 20; ++x) {
      if (!image.foreground(y, x)) continue;
      const double lb = (x - 4.0) / 16.0;
      const double lc = (y - 4.0) / 16.0;
      CHECK(image.depth(y, x) == doctest::Approx(-(2.0 * lb - 2.0 * lc)).epsilon(1e-12));
    }
}

TEST_CASE("rasterization matches the naive per-pixel oracle") {
  std::mt19937_64 rng(201);
  const ShapeModel model = random_model(rng, 5, 0, 0);
  const Points3 points = model.mean;
  const std::vector<Triangle> triangles = triangulate(model.grid);
  Eigen::MatrixXd attributes(points.rows(), 3);
  for (Eigen::Index i = 0; i < attributes.size(); ++i) attributes(i) = gauss(rng);
  CameraPose camera;
  camera.q = random_unit_quat(rng);
  camera.sigma = 9.0;
  camera.t = Vec2{24.0, 24.0};
  const int size = 48;

  const RasterImage image = rasterize(points, triangles, camera, size, size, attributes);
  const Points2 projected = project(points, camera);
  const VecX depths = camera_depth(points, camera);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const NaiveHit hit = naive_pixel(projected, depths, triangles, attributes, x, y);
      REQUIRE(image.foreground(y, x) == (hit.hit ? 1 : 0));
      if (!hit.hit) continue;
      CHECK(std::abs(image.depth(y, x) - hit.depth) < 1e-9);
      CHECK(std::abs(image.r(y, x) - hit.attr[0]) < 1e-9);
      CHECK(std::abs(image.g(y, x) - hit.attr[1]) < 1e-9);
      CHECK(std::abs(image.b(y, x) - hit.attr[2]) < 1e-9);
    }
}

TEST_CASE("submission order and thread count leave the image bitwise unchanged") {
  std::mt19937_64 rng(202);
  // the flat lattice mesh lands pixels exactly on shared edges, forcing ties
  const ShapeModel flat = flat_square_model(8);
  const ShapeModel bumpy = random_model(rng, 6, 0, 0);

  for (const ShapeModel* model : {&flat, &bumpy}) {
    const Points3& points = model->mean;
    std::vector<Triangle> triangles = triangulate(model->grid);
    Eigen::MatrixXd attributes(points.rows(), 2);
    for (Eigen::Index i = 0; i < attributes.size(); ++i) attributes(i) = gauss(rng);
    CameraPose camera;
    camera.q = model == &flat ? Vec4{1, 0, 0, 0} : random_unit_quat(rng);
    camera.sigma = model == &flat ? 100.0 : 20.0;
    camera.t = Vec2{64.0, 64.0};

    const RasterImage forward = rasterize(points, triangles, camera, 128, 128, attributes);
    std::reverse(triangles.begin(), triangles.end());
    const RasterImage reversed = rasterize(points, triangles, camera, 128, 128, attributes);
    CHECK(images_identical(forward, reversed));

    set_max_threads(1);
    const RasterImage serial = rasterize(points, triangles, camera, 128, 128, attributes);
    set_max_threads(4);
    const RasterImage parallel = rasterize(points, triangles, camera, 128, 128, attributes);
    set_max_threads(0);
    CHECK(images_identical(serial, parallel));
    CHECK(images_identical(reversed, serial));
  }
}

TEST_CASE("whole-pixel camera shifts translate the image") {
  std::mt19937_64 rng(203);
  const int dx = 30, dy = -20;

  // exactly representable lattice: the shift is bitwise
  {
    const ShapeModel model = flat_square_model(4);
    const std::vector<Triangle> triangles = triangulate(model.grid);
    Eigen::MatrixXd attributes(model.mean.rows(), 1);
    for (Eigen::Index i = 0; i < attributes.size(); ++i) attributes(i) = gauss(rng);
    CameraPose camera;
    camera.sigma = 100.0;
    camera.t = Vec2{110.0, 130.0};
    CameraPose moved_camera = camera;
    moved_camera.t += Vec2{double(dx), double(dy)};

    const RasterImage base = rasterize(model.mean, triangles, camera, 256, 256, attributes);
    const RasterImage moved = rasterize(model.mean, triangles, moved_camera, 256, 256, attributes);
    int compared = 0;
    for (int y = 0; y < 256; ++y)
      for (int x = 0; x < 256; ++x) {
        const int xs = x + dx, ys = y + dy;
        if (xs < 0 || xs >= 256 || ys < 0 || ys >= 256) continue;
        REQUIRE(base.foreground(y, x) == moved.foreground(ys, xs));
        if (!base.foreground(y, x)) continue;
        CHECK(base.r(y, x) == moved.r(ys, xs));
        ++compared;
      }
    CHECK(compared > 10000);
  }

  // fractional coordinates round differently after the shift, so only the
  // values are compared, not the bits
  {
    const ShapeModel model = random_model(rng, 4, 0, 0);
    const std::vector<Triangle> triangles = triangulate(model.grid);
    Eigen::MatrixXd attributes(model.mean.rows(), 1);
    for (Eigen::Index i = 0; i < attributes.size(); ++i) attributes(i) = gauss(rng);
    CameraPose camera;
    camera.q = random_unit_quat(rng);
    camera.sigma = 15.0;
    camera.t = Vec2{110.5, 130.5};
    CameraPose moved_camera = camera;
    moved_camera.t += Vec2{double(dx), double(dy)};

    const RasterImage base = rasterize(model.mean, triangles, camera, 256, 256, attributes);
    const RasterImage moved = rasterize(model.mean, triangles, moved_camera, 256, 256, attributes);
    int compared = 0;
    for (int y = 0; y < 256; ++y)
      for (int x = 0; x < 256; ++x) {
        const int xs = x + dx, ys = y + dy;
        if (xs < 0 || xs >= 256 || ys < 0 || ys >= 256) continue;
        REQUIRE(base.foreground(y, x) == moved.foreground(ys, xs));
        if (!base.foreground(y, x)) continue;
        CHECK(std::abs(base.r(y, x) - moved.r(ys, xs)) < 1e-9);
        CHECK(std::abs(base.depth(y, x) - moved.depth(ys, xs)) < 1e-9);
        ++compared;
      }
    CHECK(compared > 100);
  }
}

TEST_CASE("flat square coverage matches its projected area") {
  const ShapeModel model = flat_square_model(8);
  const std::vector<Triangle> triangles = triangulate(model.grid);
  const Eigen::MatrixXd attributes = Eigen::MatrixXd::Zero(model.mean.rows(), 1);
  CameraPose camera;
  camera.sigma = 200.0;
  camera.t = Vec2{128.0, 128.0};

  const RasterImage image = rasterize(model.mean, triangles, camera, 256, 256, attributes);
  const int count = int(image.foreground.cast<int>().sum());
  CHECK(count == 201 * 201);  // every lattice pixel of the 200-wide square
  CHECK(std::abs(count - camera.sigma * camera.sigma) < 0.02 * camera.sigma * camera.sigma);
}

TEST_CASE("foreground area shrinks as yaw turns the square away") {
  const ShapeModel model = flat_square_model(8);
  const std::vector<Triangle> triangles = triangulate(model.grid);
  const Eigen::MatrixXd attributes = Eigen::MatrixXd::Zero(model.mean.rows(), 1);

  int previous = INT_MAX;
  for (const double deg : {0.0, 20.0, 40.0, 60.0}) {
    CameraPose camera;
    camera.q = axis_angle_quat(Vec3::UnitY(), deg * M_PI / 180.0);
    camera.sigma = 200.0;
    camera.t = Vec2{128.0, 128.0};
    const RasterImage image = rasterize(model.mean, triangles, camera, 256, 256, attributes);
    const int count = int(image.foreground.cast<int>().sum());
    CHECK(count < previous);
    const double expected = 200.0 * 200.0 * std::cos(deg * M_PI / 180.0);
    CHECK(std::abs(count - expected) < 0.03 * expected);
    previous = count;
  }
}

TEST_CASE("rasterize rejects bad arguments") {
  const ShapeModel model = flat_square_model(2);
  const std::vector<Triangle> triangles = triangulate(model.grid);
  CameraPose camera;
  CHECK_THROWS_AS(rasterize(model.mean, triangles, camera, 0, 16,
                            Eigen::MatrixXd::Zero(model.mean.rows(), 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      rasterize(model.mean, triangles, camera, 16, 16, Eigen::MatrixXd::Zero(3, 1)),
      std::invalid_argument);
  CHECK_THROWS_AS(rasterize(model.mean, triangles, camera, 16, 16,
                            Eigen::MatrixXd::Zero(model.mean.rows(), 4)),
                  std::invalid_argument);
}

TEST_CASE("flat surface gives a constant normal map") {
  const ShapeModel model = flat_square_model(4);
  const InstanceRecord inst = plain_instance(model);
  const NormalMap map = render_normal_map_uv(model, inst, 33, 33);
  for (int y = 0; y < 33; ++y)
    for (int x = 0; x < 33; ++x) {
      REQUIRE(map.defined(y, x) == 1);
      CHECK(map.nx(y, x) == 0.0);
      CHECK(map.ny(y, x) == 0.0);
      CHECK(map.nz(y, x) == 1.0);
    }
}

TEST_CASE("corner texels reproduce the corner vertex normals") {
  std::mt19937_64 rng(204);
  ShapeModel model = flat_square_model(4);
  model.mean.col(2) = 0.2 * VecX::NullaryExpr(model.mean.rows(), [&](Eigen::Index) {
    return gauss(rng);
  });
  InstanceRecord inst = plain_instance(model);
  inst.camera.q = random_unit_quat(rng);

  const int size = 65;
  const NormalMap map = render_normal_map_uv(model, inst, size, size);

  const Mat3 R = quat_to_rotmat(inst.camera.q);
  const Points3 posed = (instance_shape(model, inst) * R.transpose()).eval();
  const Points3 normals = vertex_normals(posed, triangulate(model.grid));

  for (Eigen::Index i = 0; i < model.mean.rows(); ++i) {
    const Vec2 uv = model.grid.uv(int(i));
    const bool corner = (uv[0] == 0.0 || uv[0] == 1.0) && (uv[1] == 0.0 || uv[1] == 1.0);
    if (!corner) continue;
    const int x = int(uv[0] * (size - 1));
    const int y = int(uv[1] * (size - 1));
    REQUIRE(map.defined(y, x) == 1);
    const Vec3 expected = normals.row(i).normalized();
    CHECK(std::abs(map.nx(y, x) - expected.x()) < 1e-9);
    CHECK(std::abs(map.ny(y, x) - expected.y()) < 1e-9);
    CHECK(std::abs(map.nz(y, x) - expected.z()) < 1e-9);
  }
}

TEST_CASE("normal map matches a naive uv rasterization") {
  std::mt19937_64 rng(205);
  ShapeModel model = flat_square_model(3);
  model.mean.col(2) = 0.3 * VecX::NullaryExpr(model.mean.rows(), [&](Eigen::Index) {
    return gauss(rng);
  });
  InstanceRecord inst = plain_instance(model);
  inst.camera.q = random_unit_quat(rng);

  const int size = 40;
  const NormalMap map = render_normal_map_uv(model, inst, size, size);

  const Mat3 R = quat_to_rotmat(inst.camera.q);
  const Points3 posed = (instance_shape(model, inst) * R.transpose()).eval();
  const std::vector<Triangle> triangles = triangulate(model.grid);
  const Points3 normals = vertex_normals(posed, triangles);
  Points2 texel(model.mean.rows(), 2);
  for (Eigen::Index i = 0; i < model.mean.rows(); ++i) {
    const Vec2 uv = model.grid.uv(int(i));
    texel.row(i) << uv[0] * (size - 1), uv[1] * (size - 1);
  }

  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      // key-only winner: the first triangle in sorted-index order that covers
      NaiveHit best;
      const Vec2 s{double(x), double(y)};
      for (const Triangle& t : triangles) {
        const Vec2 pa = texel.row(t.a);
        const Vec2 pb = texel.row(t.b);
        const Vec2 pc = texel.row(t.c);
        const double area = cross2(pb - pa, pc - pa);
        if (area == 0.0) continue;
        const double la = cross2(pb - s, pc - s) / area;
        const double lb = cross2(pc - s, pa - s) / area;
        const double lc = cross2(pa - s, pb - s) / area;
        if (la < 0 || lb < 0 || lc < 0) continue;
        std::array<int, 3> key = {t.a, t.b, t.c};
        std::sort(key.begin(), key.end());
        if (best.hit && !(key < best.key)) continue;
        Vec3 n = la * normals.row(t.a) + lb * normals.row(t.b) + lc * normals.row(t.c);
        if (n.norm() == 0.0) continue;
        best.hit = true;
        best.key = key;
        best.attr = n.normalized();
      }
      REQUIRE(map.defined(y, x) == (best.hit ? 1 : 0));
      if (!best.hit) continue;
      CHECK(std::abs(map.nx(y, x) - best.attr.x()) < 1e-9);
      CHECK(std::abs(map.ny(y, x) - best.attr.y()) < 1e-9);
      CHECK(std::abs(map.nz(y, x) - best.attr.z()) < 1e-9);
    }
}

TEST_CASE("obj export counts and round trip") {
  std::mt19937_64 rng(206);

  const ShapeModel tiny = flat_square_model(1);
  const std::string tiny_path = temp_path("tiny.obj");
  export_obj(tiny_path, tiny.mean, triangulate(tiny.grid), [&] {
    Points2 uv(tiny.mean.rows(), 2);
    for (Eigen::Index i = 0; i < uv.rows(); ++i) uv.row(i) = tiny.grid.uv(int(i));
    return uv;
  }());

  const ShapeModel big = random_model(rng, 64, 0, 0);
  Points2 big_uv(big.mean.rows(), 2);
  for (Eigen::Index i = 0; i < big_uv.rows(); ++i) big_uv.row(i) = big.grid.uv(int(i));
  const std::string big_path = temp_path("big.obj");
  export_obj(big_path, big.mean, triangulate(big.grid), big_uv);

  auto parse = [](const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    Points3 v(0, 3);
    Points2 vt(0, 2);
    std::vector<std::array<int, 3>> f;
    std::string line;
    std::vector<Vec3> vs;
    std::vector<Vec2> vts;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      std::string tag;
      ss >> tag;
      if (tag == "v") {
        Vec3 p;
        ss >> p.x() >> p.y() >> p.z();
        vs.push_back(p);
      } else if (tag == "vt") {
        Vec2 p{0, 0};
        ss >> p.x() >> p.y();
        vts.push_back(p);
      } else if (tag == "f") {
        std::array<int, 3> tri{};
        for (int c = 0; c < 3; ++c) {
          std::string pair;
          ss >> pair;
          tri[c] = std::atoi(pair.c_str());
          REQUIRE(pair.find('/') != std::string::npos);
          CHECK(std::atoi(pair.substr(pair.find('/') + 1).c_str()) == tri[c]);
        }
        f.push_back(tri);
      }
    }
    v.resize(Eigen::Index(vs.size()), 3);
    vt.resize(Eigen::Index(vts.size()), 2);
    for (std::size_t i = 0; i < vs.size(); ++i) v.row(Eigen::Index(i)) = vs[i];
    for (std::size_t i = 0; i < vts.size(); ++i) vt.row(Eigen::Index(i)) = vts[i];
    return std::tuple{v, vt, f};
  };

  {
    const auto [v, vt, f] = parse(tiny_path);
    CHECK(v.rows() == 4);
    CHECK(vt.rows() == 4);
    CHECK(f.size() == 2);
  }
  {
    const auto [v, vt, f] = parse(big_path);
    REQUIRE(v.rows() == 4225);
    CHECK(vt.rows() == 4225);
    CHECK(f.size() == 8192);
    CHECK((v - big.mean).cwiseAbs().maxCoeff() == 0.0);  // shortest round-trip text
    CHECK((vt - big_uv).cwiseAbs().maxCoeff() == 0.0);
    const std::vector<Triangle> triangles = triangulate(big.grid);
    for (std::size_t i = 0; i < f.size(); ++i) {
      CHECK(f[i][0] == triangles[i].a + 1);
      CHECK(f[i][1] == triangles[i].b + 1);
      CHECK(f[i][2] == triangles[i].c + 1);
    }
  }
  std::remove(tiny_path.c_str());
  std::remove(big_path.c_str());
}

TEST_CASE("obj export insists on matching uv rows") {
  const ShapeModel model = flat_square_model(1);
  CHECK_THROWS_AS(
      export_obj(temp_path("bad.obj"), model.mean, triangulate(model.grid), Points2::Zero(2, 2)),
      std::invalid_argument);
}
