#pragma once

#include <random>
#include <string>

#include "lifted/model.hpp"
#include "lifted/types.hpp"

namespace lifted::testutil {

inline double unit(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gauss(std::mt19937_64& rng, double stddev = 1.0) {
  return std::normal_distribution<double>(0.0, stddev)(rng);
}

inline Points3 random_points(std::mt19937_64& rng, int n, double scale = 1.0) {
  Points3 p(n, 3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) p(i, c) = gauss(rng, scale);
  return p;
}

inline Vec4 random_unit_quat(std::mt19937_64& rng) {
  Vec4 q;
  for (int c = 0; c < 4; ++c) q[c] = gauss(rng);
  return q.normalized();
}

inline CameraPose random_camera(std::mt19937_64& rng) {
  CameraPose cam;
  cam.q = random_unit_quat(rng);
  cam.t = Vec2(gauss(rng), gauss(rng));
  cam.sigma = uniform(rng, 0.5, 2.0);
  return cam;
}

inline ShapeModel random_model(std::mt19937_64& rng, int n, int identity_dims,
                               int expression_dims) {
  ShapeModel model;
  model.grid.n = n;
  const int N = model.vertex_count();
  model.mean = random_points(rng, N);
  for (int s = 0; s < identity_dims; ++s)
    model.identity_basis.push_back(random_points(rng, N, 0.1));
  for (int s = 0; s < expression_dims; ++s)
    model.expression_basis.push_back(random_points(rng, N, 0.1));
  return model;
}

inline InstanceRecord random_instance(std::mt19937_64& rng, const ShapeModel& model,
                                      double visible_fraction = 1.0) {
  InstanceRecord inst;
  inst.id = "t" + std::to_string(rng() % 100000);
  const int N = model.vertex_count();
  inst.observations = Points2::Zero(N, 2);
  inst.visibility.assign(N, 0);
  for (int i = 0; i < N; ++i) {
    inst.visibility[i] = unit(rng) < visible_fraction ? 1 : 0;
    if (inst.visibility[i]) inst.observations.row(i) = Vec2(gauss(rng), gauss(rng));
  }
  inst.code_identity = VecX::Zero(model.identity_dim());
  inst.code_expression = VecX::Zero(model.expression_dim());
  for (int s = 0; s < model.identity_dim(); ++s) inst.code_identity[s] = gauss(rng);
  for (int s = 0; s < model.expression_dim(); ++s) inst.code_expression[s] = gauss(rng);
  inst.camera = random_camera(rng);
  return inst;
}

inline Dataset random_dataset(std::mt19937_64& rng, int n, int identity_dims,
                              int expression_dims, int instances,
                              double visible_fraction = 1.0) {
  Dataset dataset;
  dataset.model = random_model(rng, n, identity_dims, expression_dims);
  for (int k = 0; k < instances; ++k) {
    InstanceRecord inst = random_instance(rng, dataset.model, visible_fraction);
    inst.id = "t" + std::to_string(k);
    dataset.instances.push_back(std::move(inst));
  }
  return dataset;
}

// Unique temp path under the build tree; caller cleans up or leaves for the OS.
inline std::string temp_path(const std::string& name) {
  static int counter = 0;
  return "tmp_" + std::to_string(counter++) + "_" + name;
}

}  // namespace lifted::testutil
