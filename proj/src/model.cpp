#include "lifted/model.hpp"

namespace lifted {

namespace {

void check_block(const Points3& block, int n_vertices, const std::string& what) {
  if (block.rows() != n_vertices)
    throw std::runtime_error("model validation: " + what + " has " +
                             std::to_string(block.rows()) + " vertices, expected " +
                             std::to_string(n_vertices));
  if (!block.allFinite())
    throw std::runtime_error("model validation: " + what + " contains non-finite values");
}

}  // namespace

void validate(const ShapeModel& model) {
  if (model.grid.n < 1)
    throw std::runtime_error("model validation: grid subdivision n must be >= 1");
  const int n_vertices = model.grid.vertex_count();
  check_block(model.mean, n_vertices, "mean shape");
  for (int s = 0; s < model.identity_dim(); ++s)
    check_block(model.identity_basis[s], n_vertices, "identity basis " + std::to_string(s));
  for (int s = 0; s < model.expression_dim(); ++s)
    check_block(model.expression_basis[s], n_vertices, "expression basis " + std::to_string(s));
}

void validate(const Dataset& dataset) {
  validate(dataset.model);
  const int n_vertices = dataset.model.vertex_count();
  const int dim_i = dataset.model.identity_dim();
  const int dim_e = dataset.model.expression_dim();
  for (const InstanceRecord& inst : dataset.instances) {
    const std::string who = "instance '" + inst.id + "'";
    if (inst.observations.rows() != n_vertices)
      throw std::runtime_error("dataset validation: " + who + " observation rows " +
                               std::to_string(inst.observations.rows()) + " != vertex count " +
                               std::to_string(n_vertices));
    if (int(inst.visibility.size()) != n_vertices)
      throw std::runtime_error("dataset validation: " + who + " visibility size mismatch");
    if (inst.code_identity.size() != dim_i)
      throw std::runtime_error("dataset validation: " + who + " identity code length " +
                               std::to_string(inst.code_identity.size()) + " != I=" +
                               std::to_string(dim_i));
    if (inst.code_expression.size() != dim_e)
      throw std::runtime_error("dataset validation: " + who + " expression code length " +
                               std::to_string(inst.code_expression.size()) + " != E=" +
                               std::to_string(dim_e));
    if (!inst.code_identity.allFinite() || !inst.code_expression.allFinite())
      throw std::runtime_error("dataset validation: " + who + " has non-finite codes");
    for (int i = 0; i < n_vertices; ++i)
      if (inst.visibility[i] && !inst.observations.row(i).allFinite())
        throw std::runtime_error("dataset validation: " + who +
                                 " has a non-finite visible observation at vertex " +
                                 std::to_string(i));
    if (!(inst.camera.sigma > 0))
      throw std::runtime_error("dataset validation: " + who + " camera sigma must be positive");
    if (!(std::abs(inst.camera.q.norm() - 1.0) <= 1e-6))
      throw std::runtime_error("dataset validation: " + who + " camera quaternion is not unit");
  }
}

}  // namespace lifted
