#include <cstdio>
#include <random>

#include <doctest.h>

#include "helpers.hpp"
#include "lifted/io.hpp"
#include "lifted/model.hpp"

using namespace lifted;
using namespace lifted::testutil;

TEST_CASE("uv grid indexing round trips") {
  const UvGrid grid{3};
  CHECK(grid.vertex_count() == 16);
  for (int iv = 0; iv <= 3; ++iv)
    for (int iu = 0; iu <= 3; ++iu) {
      const int i = grid.index(iu, iv);
      const Vec2 uv = grid.uv(i);
      CHECK(uv.x() == doctest::Approx(iu / 3.0));
      CHECK(uv.y() == doctest::Approx(iv / 3.0));
    }
}

TEST_CASE("zero codes give the mean shape") {
  std::mt19937_64 rng(31);
  const ShapeModel model = random_model(rng, 3, 2, 2);
  const Points3 shape =
      instance_shape(model, VecX::Zero(2).eval(), VecX::Zero(2).eval());
  CHECK((shape - model.mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("shape is linear in the basis") {
  std::mt19937_64 rng(32);
  ShapeModel model = random_model(rng, 2, 0, 0);
  model.identity_basis.push_back(model.mean);
  VecX code(1);
  code << 1.0;
  const Points3 shape = instance_shape(model, code, VecX::Zero(0).eval());
  CHECK((shape - 2.0 * model.mean).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("shape matches a per-vertex summation oracle") {
  std::mt19937_64 rng(33);
  const ShapeModel model = random_model(rng, 3, 2, 3);
  VecX si(2), se(3);
  for (int s = 0; s < 2; ++s) si[s] = gauss(rng);
  for (int s = 0; s < 3; ++s) se[s] = gauss(rng);
  const Points3 shape = instance_shape(model, si, se);

  for (int i = 0; i < model.vertex_count(); ++i)
    for (int c = 0; c < 3; ++c) {
      double v = model.mean(i, c);
      for (int s = 0; s < 2; ++s) v += si[s] * model.identity_basis[s](i, c);
      for (int s = 0; s < 3; ++s) v += se[s] * model.expression_basis[s](i, c);
      CHECK(shape(i, c) == doctest::Approx(v).epsilon(1e-12));
    }
}

TEST_CASE("code length mismatches name the offending axis") {
  std::mt19937_64 rng(34);
  const ShapeModel model = random_model(rng, 2, 2, 1);
  CHECK_THROWS_WITH_AS(
      instance_shape(model, VecX::Zero(3).eval(), VecX::Zero(1).eval()),
      doctest::Contains("identity"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      instance_shape(model, VecX::Zero(2).eval(), VecX::Zero(4).eval()),
      doctest::Contains("expression"), std::invalid_argument);
}

TEST_CASE("instance deviation excludes the mean") {
  std::mt19937_64 rng(35);
  Dataset dataset = random_dataset(rng, 2, 2, 1, 1);
  const InstanceRecord& inst = dataset.instances[0];
  const Points3 dev = instance_deviation(dataset.model, inst);
  const Points3 shape = instance_shape(dataset.model, inst);
  CHECK((shape - dataset.model.mean - dev).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("validation rejects malformed models and datasets") {
  std::mt19937_64 rng(36);
  ShapeModel model = random_model(rng, 2, 1, 1);
  CHECK_NOTHROW(validate(model));

  ShapeModel bad_rows = model;
  bad_rows.mean = Points3::Zero(3, 3);
  CHECK_THROWS_AS(validate(bad_rows), std::runtime_error);

  ShapeModel bad_value = model;
  bad_value.identity_basis[0](1, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate(bad_value), std::runtime_error);

  Dataset dataset = random_dataset(rng, 2, 1, 1, 2);
  CHECK_NOTHROW(validate(dataset));

  Dataset bad_code = dataset;
  bad_code.instances[1].code_identity = VecX::Zero(3);
  CHECK_THROWS_AS(validate(bad_code), std::runtime_error);

  Dataset bad_vis = dataset;
  bad_vis.instances[0].visibility.pop_back();
  CHECK_THROWS_AS(validate(bad_vis), std::runtime_error);

  Dataset bad_sigma = dataset;
  bad_sigma.instances[0].camera.sigma = 0.0;
  CHECK_THROWS_AS(validate(bad_sigma), std::runtime_error);
}

TEST_CASE("model files round trip bit exactly") {
  std::mt19937_64 rng(37);
  const ShapeModel model = random_model(rng, 3, 2, 2);
  const std::string path = temp_path("model.json");
  save_model(path, model);
  const ShapeModel loaded = load_model(path);

  CHECK(loaded.grid.n == model.grid.n);
  CHECK((loaded.mean - model.mean).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(loaded.identity_dim() == model.identity_dim());
  REQUIRE(loaded.expression_dim() == model.expression_dim());
  for (int s = 0; s < model.identity_dim(); ++s)
    CHECK((loaded.identity_basis[s] - model.identity_basis[s]).cwiseAbs().maxCoeff() == 0.0);
  for (int s = 0; s < model.expression_dim(); ++s)
    CHECK((loaded.expression_basis[s] - model.expression_basis[s]).cwiseAbs().maxCoeff() ==
          0.0);
  std::remove(path.c_str());
}

TEST_CASE("dataset files round trip bit exactly") {
  std::mt19937_64 rng(38);
  Dataset dataset = random_dataset(rng, 2, 1, 2, 3, 0.8);
  dataset.instances[0].labels = InstanceLabels{"id1", "exp2", "pose3"};
  const std::string model_path = temp_path("model.json");
  const std::string data_path = temp_path("dataset.jsonl");
  save_model(model_path, dataset.model);
  save_dataset(data_path, dataset);
  const Dataset loaded = load_dataset(model_path, data_path);

  REQUIRE(loaded.size() == dataset.size());
  for (int k = 0; k < dataset.size(); ++k) {
    const InstanceRecord& a = dataset.instances[k];
    const InstanceRecord& b = loaded.instances[k];
    CHECK(a.id == b.id);
    CHECK(a.visibility == b.visibility);
    CHECK((a.observations - b.observations).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.code_identity - b.code_identity).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.code_expression - b.code_expression).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.camera.q - b.camera.q).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.camera.t - b.camera.t).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.camera.sigma == b.camera.sigma);
    CHECK(a.labels.has_value() == b.labels.has_value());
    if (a.labels) {
      CHECK(a.labels->identity_id == b.labels->identity_id);
      CHECK(a.labels->expression_id == b.labels->expression_id);
      CHECK(a.labels->pose_id == b.labels->pose_id);
    }
  }
  std::remove(model_path.c_str());
  std::remove(data_path.c_str());
}

TEST_CASE("observation files omit codes and cameras") {
  std::mt19937_64 rng(39);
  Dataset dataset = random_dataset(rng, 2, 2, 1, 2, 0.7);
  const std::string path = temp_path("obs.jsonl");
  save_observations(path, dataset);
  const auto instances = load_instances(path, dataset.model);

  REQUIRE(instances.size() == dataset.instances.size());
  for (std::size_t k = 0; k < instances.size(); ++k) {
    CHECK(instances[k].visibility == dataset.instances[k].visibility);
    for (int i = 0; i < dataset.model.vertex_count(); ++i)
      if (dataset.instances[k].visibility[i])
        CHECK((instances[k].observations.row(i) - dataset.instances[k].observations.row(i))
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    CHECK(instances[k].code_identity.isZero(0));
    CHECK(instances[k].code_expression.isZero(0));
    CHECK(instances[k].camera.sigma == 1.0);
    CHECK((instances[k].camera.q - Vec4(1, 0, 0, 0)).cwiseAbs().maxCoeff() == 0.0);
  }
  std::remove(path.c_str());
}
