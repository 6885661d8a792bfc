#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lifted/correspond.hpp"
#include "lifted/evalkit.hpp"
#include "lifted/geometry.hpp"
#include "lifted/io.hpp"
#include "lifted/lux.hpp"
#include "lifted/model.hpp"
#include "lifted/objective.hpp"
#include "lifted/parallel.hpp"
#include "lifted/render.hpp"
#include "lifted/solver.hpp"
#include "lifted/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lifted;

namespace {

struct Manifest {
  std::string command;
  json config = json::object();
  std::uint64_t seed = 0;
  json inputs = json::object();
  std::vector<std::string> outputs;
  json extra = json::object();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void add_input(const std::string& path) { inputs[path] = hash_file(path); }

  void write(const fs::path& dir) {
    json j;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    for (auto& [key, value] : extra.items()) j[key] = value;
    j["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text_file((dir / "manifest.json").string(), j.dump(2) + "\n");
  }
};

fs::path ensure_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

std::string loss_history_csv(const std::vector<LossReport>& history) {
  std::ostringstream out;
  out << "epoch,term,value\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    const LossReport& r = history[e];
    auto row = [&](const char* term, double v) {
      out << e << "," << term << "," << format_double(v) << "\n";
    };
    row("reproj", r.reproj);
    row("triplet_expression", r.triplet_expression);
    row("triplet_identity", r.triplet_identity);
    row("triplet_pose", r.triplet_pose);
    row("reg_scale", r.reg_scale);
    row("reg_shape", r.reg_shape);
    row("total", r.total);
  }
  return out.str();
}

json weights_json(const LossWeights& w) {
  return {{"lambda_3d", w.lambda_3d},
          {"lambda_disentangle", w.lambda_disentangle},
          {"lambda_scale", w.lambda_scale},
          {"lambda_shape", w.lambda_shape},
          {"triplet_margin", w.triplet_margin}};
}

const InstanceRecord& find_instance(const Dataset& dataset, const std::string& id) {
  for (const InstanceRecord& inst : dataset.instances)
    if (inst.id == id) return inst;
  throw std::runtime_error("unknown instance id '" + id + "'");
}

/// Composes the instance camera with a pixel framing that fits the projected
/// points into the image with a margin.
CameraPose frame_camera(const CameraPose& camera, const Points2& projected, int width,
                        int height) {
  Vec2 lo = projected.colwise().minCoeff();
  Vec2 hi = projected.colwise().maxCoeff();
  const Vec2 extent = hi - lo;
  const double span = std::max(extent.x(), extent.y());
  const double scale = span > 0 ? 0.9 * std::min(width - 1, height - 1) / span : 1.0;
  const Vec2 center = 0.5 * (lo + hi);
  CameraPose out = camera;
  out.sigma = camera.sigma * scale;
  out.t = (camera.t - center) * scale + 0.5 * Vec2(width - 1, height - 1);
  return out;
}

/// Headlight-shaded grayscale render of a posed shape.
void render_shaded_ppm(const std::string& path, const ShapeModel& model, const Points3& shape,
                       const CameraPose& camera, int width, int height) {
  const std::vector<Triangle> triangles = triangulate(model.grid);
  const Mat3 R = quat_to_rotmat(camera.q);
  const Points3 posed = shape * R.transpose();
  const Points3 normals = vertex_normals(posed, triangles);
  Eigen::MatrixXd attr(shape.rows(), 1);
  for (Eigen::Index i = 0; i < shape.rows(); ++i) attr(i, 0) = std::max(0.0, normals(i, 2));
  const CameraPose framed = frame_camera(camera, project(shape, camera), width, height);
  const RasterImage image = rasterize(shape, triangles, framed, width, height, attr);
  write_ppm(path, image.r, image.r, image.r);
}

Vec9 load_light(const std::string& path) {
  const json j = json::parse(read_text_file(path));
  if (!j.is_array() || j.size() != 9)
    throw std::runtime_error("light file '" + path + "': expected a 9-number array");
  Vec9 L;
  for (int s = 0; s < 9; ++s) L[s] = j.at(s).get<double>();
  return L;
}

void save_light(const std::string& path, const Vec9& L) {
  json j = json::array();
  for (int s = 0; s < 9; ++s) j.push_back(L[s]);
  write_text_file(path, j.dump() + "\n");
}

Channel texture_to_gray(const PfmImage& image) {
  if (image.channels == 1) return unpack_channel(image, 0);
  Channel gray(image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      gray(y, x) = (image.at(x, y, 0) + image.at(x, y, 1) + image.at(x, y, 2)) / 3.0;
  return gray;
}

void save_normal_map(const std::string& path, const NormalMap& map) {
  write_pfm(path, pack_pfm(map.nx, map.ny, map.nz));
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  SynthConfig config;
  std::string out;
};

int run_synth(const SynthArgs& args) {
  Manifest manifest;
  manifest.command = "synth";
  manifest.seed = args.config.seed;
  manifest.config = {{"n", args.config.n},
                     {"I", args.config.identity_dims},
                     {"E", args.config.expression_dims},
                     {"K", args.config.instance_count},
                     {"yaw", {args.config.yaw_min_deg, args.config.yaw_max_deg}},
                     {"pitch", {args.config.pitch_min_deg, args.config.pitch_max_deg}},
                     {"roll", {args.config.roll_min_deg, args.config.roll_max_deg}},
                     {"sigma", {args.config.sigma_min, args.config.sigma_max}},
                     {"t_range", args.config.t_range},
                     {"noise_std", args.config.noise_std},
                     {"occlusion_rate", args.config.occlusion_rate},
                     {"identity_groups", args.config.identity_groups},
                     {"expression_groups", args.config.expression_groups},
                     {"pose_groups", args.config.pose_groups},
                     {"with_lux", args.config.with_lux},
                     {"texture_size", args.config.texture_size}};
  const fs::path dir = ensure_out_dir(args.out);
  const SynthOutput out = generate(args.config);

  auto emit = [&](const std::string& name, auto&& writer) {
    writer((dir / name).string());
    manifest.outputs.push_back(name);
  };
  emit("model_gt.json", [&](const std::string& p) { save_model(p, out.dataset.model); });
  emit("dataset_gt.jsonl", [&](const std::string& p) { save_dataset(p, out.dataset); });
  emit("observations.jsonl", [&](const std::string& p) { save_observations(p, out.dataset); });
  emit("landmarks2d.jsonl",
       [&](const std::string& p) { save_landmark_frames(p, out.landmarks_2d); });
  emit("landmarks3d.jsonl",
       [&](const std::string& p) { save_landmark_frames(p, out.landmarks_3d); });
  emit("landmark_spec.json",
       [&](const std::string& p) { save_landmark_spec(p, out.landmark_spec); });
  if (out.lux) {
    emit("texture.pfm", [&](const std::string& p) { write_pfm(p, pack_pfm(out.lux->texture)); });
    emit("normals_gt.pfm", [&](const std::string& p) { save_normal_map(p, out.lux->normals); });
    emit("albedo_gt.pfm", [&](const std::string& p) { write_pfm(p, pack_pfm(out.lux->albedo)); });
    emit("light_gt.json", [&](const std::string& p) { save_light(p, out.lux->L); });
  }
  manifest.write(dir);
  std::cout << "wrote " << manifest.outputs.size() << " files to " << dir.string() << "\n";
  return 0;
}

// ---- fit -------------------------------------------------------------------

struct FitArgs {
  std::string observations;
  std::string uv_dir;
  double tau = 0.0;  // 0 = default half cell
  int n = 16, identity_dims = 4, expression_dims = 3;
  SolverConfig solver;
  std::string out;
};

int run_fit(const FitArgs& args) {
  Manifest manifest;
  manifest.command = "fit";
  manifest.seed = args.solver.seed;
  manifest.config = {{"n", args.n},
                     {"I", args.identity_dims},
                     {"E", args.expression_dims},
                     {"lr", args.solver.lr},
                     {"decay_factor", args.solver.decay_factor},
                     {"decay_every_epochs", args.solver.decay_every_epochs},
                     {"epochs", args.solver.epochs},
                     {"batch_size", args.solver.batch_size},
                     {"use_triplets", args.solver.use_triplets},
                     {"weights", weights_json(args.solver.weights)}};

  Dataset dataset;
  dataset.model.grid.n = args.n;
  dataset.model.identity_basis.assign(args.identity_dims,
                                      Points3::Zero(dataset.model.vertex_count(), 3));
  dataset.model.expression_basis.assign(args.expression_dims,
                                        Points3::Zero(dataset.model.vertex_count(), 3));
  dataset.model.mean = Points3::Zero(dataset.model.vertex_count(), 3);

  if (!args.uv_dir.empty()) {
    std::vector<fs::path> maps;
    for (const auto& entry : fs::directory_iterator(args.uv_dir))
      if (entry.path().extension() == ".pfm") maps.push_back(entry.path());
    std::sort(maps.begin(), maps.end());
    if (maps.empty()) throw std::runtime_error("no .pfm maps in '" + args.uv_dir + "'");
    const double tau = args.tau > 0 ? args.tau : default_tau(dataset.model.grid);
    manifest.config["tau"] = tau;
    for (const fs::path& p : maps) {
      manifest.add_input(p.string());
      const UvMap map = load_uv_map(p.string());
      InstanceRecord inst;
      inst.id = p.stem().string();
      auto [obs, vis] = extract_observations(map, dataset.model.grid, tau);
      inst.observations = std::move(obs);
      inst.visibility = std::move(vis);
      inst.code_identity = VecX::Zero(args.identity_dims);
      inst.code_expression = VecX::Zero(args.expression_dims);
      dataset.instances.push_back(std::move(inst));
    }
  } else {
    manifest.add_input(args.observations);
    dataset.instances = load_instances(args.observations, dataset.model);
  }

  initialize(dataset, args.solver);
  const FitResult result = fit(dataset, args.solver);

  const fs::path dir = ensure_out_dir(args.out);
  save_model((dir / "model_fit.json").string(), dataset.model);
  save_dataset((dir / "dataset_fit.jsonl").string(), dataset);
  write_text_file((dir / "loss.csv").string(), loss_history_csv(result.history));
  manifest.outputs = {"model_fit.json", "dataset_fit.jsonl", "loss.csv"};
  if (!result.excluded.empty()) {
    json excluded = json::array();
    for (int k : result.excluded) excluded.push_back(dataset.instances[k].id);
    manifest.extra["excluded_instances"] = excluded;
  }
  if (!result.history.empty()) {
    const LossReport& last = result.history.back();
    manifest.extra["final_losses"] = {{"reproj", last.reproj}, {"total", last.total}};
  }
  manifest.write(dir);
  std::cout << "fit " << dataset.size() << " instances, final total loss "
            << format_double(result.history.back().total) << "\n";
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string model, dataset, gt, spec;
  std::string mode = "3d";
  bool no_rotation = false;
  std::vector<double> bins = {0, 30, 60, 90};
  std::string out;
};

int run_eval(const EvalArgs& args) {
  Manifest manifest;
  manifest.command = "eval";
  manifest.config = {{"mode", args.mode}, {"rotation", !args.no_rotation}, {"bins", args.bins}};
  manifest.add_input(args.model);
  manifest.add_input(args.dataset);
  manifest.add_input(args.gt);
  manifest.add_input(args.spec);

  const Dataset dataset = load_dataset(args.model, args.dataset);
  const LandmarkSpec spec = load_landmark_spec(args.spec);
  validate(spec, dataset.model.vertex_count());
  const std::vector<LandmarkFrame> gt_frames = load_landmark_frames(args.gt);
  std::map<std::string, const LandmarkFrame*> by_id;
  for (const LandmarkFrame& f : gt_frames) by_id[f.id] = &f;

  std::vector<std::string> missing;
  for (const InstanceRecord& inst : dataset.instances)
    if (!by_id.count(inst.id)) missing.push_back(inst.id);
  if (!missing.empty()) {
    std::string list;
    for (const std::string& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw std::runtime_error("ground truth missing instance ids: " + list);
  }

  const bool mode_2d = args.mode == "2d";
  std::vector<double> scores, yaws;
  std::ostringstream per_instance;
  per_instance << "id,yaw_deg,score\n";
  for (const InstanceRecord& inst : dataset.instances) {
    const LandmarkFrame& gt = *by_id.at(inst.id);
    const Eigen::MatrixXd pred = predict_landmarks(dataset.model, inst, spec, mode_2d);
    double score;
    if (mode_2d) {
      if (gt.landmarks.cols() != 2)
        throw std::runtime_error("2d mode but ground truth has 3d landmarks");
      score = nme_2d(pred, gt.landmarks, gt.left_eye, gt.right_eye);
    } else {
      if (gt.landmarks.cols() != 3)
        throw std::runtime_error("3d mode but ground truth has 2d landmarks");
      score = nme_3d(pred, gt.landmarks, !args.no_rotation);
    }
    const double yaw = gt.has_yaw
                           ? gt.yaw_deg
                           : yaw_angle(quat_to_rotmat(inst.camera.q)) * 180.0 / 3.14159265358979323846;
    scores.push_back(score);
    yaws.push_back(yaw);
    per_instance << inst.id << "," << format_double(yaw) << "," << format_double(score) << "\n";
  }

  const std::vector<YawBinStat> rows = report_by_yaw(scores, yaws, args.bins);
  const fs::path dir = ensure_out_dir(args.out);
  write_text_file((dir / "report.csv").string(), yaw_report_csv(rows));
  write_text_file((dir / "scores.csv").string(), per_instance.str());
  manifest.outputs = {"report.csv", "scores.csv"};
  manifest.write(dir);
  std::cout << "overall mean " << format_double(rows.back().mean) << " over "
            << rows.back().count << " instances\n";
  return 0;
}

// ---- render ----------------------------------------------------------------

struct RenderArgs {
  std::string model, dataset, id;
  int width = 256, height = 256;
  std::vector<double> yaw_offsets = {0.0};
  std::string out;
};

int run_render(const RenderArgs& args) {
  Manifest manifest;
  manifest.command = "render";
  manifest.config = {{"id", args.id},
                     {"width", args.width},
                     {"height", args.height},
                     {"yaw_offsets", args.yaw_offsets}};
  manifest.add_input(args.model);
  manifest.add_input(args.dataset);

  const Dataset dataset = load_dataset(args.model, args.dataset);
  const InstanceRecord& inst = find_instance(dataset, args.id);
  const Points3 shape = instance_shape(dataset.model, inst);
  const fs::path dir = ensure_out_dir(args.out);

  Points2 uv(dataset.model.vertex_count(), 2);
  for (int i = 0; i < dataset.model.vertex_count(); ++i) uv.row(i) = dataset.model.grid.uv(i);
  export_obj((dir / "mesh.obj").string(), shape, triangulate(dataset.model.grid), uv);
  manifest.outputs.push_back("mesh.obj");

  for (std::size_t j = 0; j < args.yaw_offsets.size(); ++j) {
    CameraPose camera = inst.camera;
    camera.q = quat_multiply(
        camera.q, axis_angle_quat(Vec3::UnitY(), args.yaw_offsets[j] * 3.14159265358979323846 / 180.0));
    char name[64];
    std::snprintf(name, sizeof name, "render_%03zu.ppm", j);
    render_shaded_ppm((dir / name).string(), dataset.model, shape, camera, args.width,
                      args.height);
    manifest.outputs.push_back(name);
  }
  manifest.write(dir);
  std::cout << "wrote " << manifest.outputs.size() << " files to " << dir.string() << "\n";
  return 0;
}

// ---- interpolate -----------------------------------------------------------

struct InterpolateArgs {
  std::string model, dataset, id_a, id_b;
  int frames = 5;
  int width = 256, height = 256;
  std::string out;
};

int run_interpolate(const InterpolateArgs& args) {
  if (args.frames < 2) throw std::runtime_error("interpolate: need at least 2 frames");
  Manifest manifest;
  manifest.command = "interpolate";
  manifest.config = {{"id_a", args.id_a},
                     {"id_b", args.id_b},
                     {"frames", args.frames},
                     {"width", args.width},
                     {"height", args.height}};
  manifest.add_input(args.model);
  manifest.add_input(args.dataset);

  const Dataset dataset = load_dataset(args.model, args.dataset);
  const InstanceRecord& a = find_instance(dataset, args.id_a);
  const InstanceRecord& b = find_instance(dataset, args.id_b);
  const fs::path dir = ensure_out_dir(args.out);

  Points2 uv(dataset.model.vertex_count(), 2);
  for (int i = 0; i < dataset.model.vertex_count(); ++i) uv.row(i) = dataset.model.grid.uv(i);
  const std::vector<Triangle> triangles = triangulate(dataset.model.grid);

  for (int f = 0; f < args.frames; ++f) {
    const double alpha = double(f) / (args.frames - 1);
    InstanceRecord blend;
    blend.code_identity = (1.0 - alpha) * a.code_identity + alpha * b.code_identity;
    blend.code_expression = (1.0 - alpha) * a.code_expression + alpha * b.code_expression;
    blend.camera.q = slerp(a.camera.q, b.camera.q, alpha);
    blend.camera.t = (1.0 - alpha) * a.camera.t + alpha * b.camera.t;
    blend.camera.sigma = (1.0 - alpha) * a.camera.sigma + alpha * b.camera.sigma;
    const Points3 shape = instance_shape(dataset.model, blend.code_identity, blend.code_expression);
    char obj_name[64], ppm_name[64];
    std::snprintf(obj_name, sizeof obj_name, "frame_%03d.obj", f);
    std::snprintf(ppm_name, sizeof ppm_name, "frame_%03d.ppm", f);
    export_obj((dir / obj_name).string(), shape, triangles, uv);
    render_shaded_ppm((dir / ppm_name).string(), dataset.model, shape, blend.camera, args.width,
                      args.height);
    manifest.outputs.push_back(obj_name);
    manifest.outputs.push_back(ppm_name);
  }
  manifest.write(dir);
  std::cout << "wrote " << args.frames << " frames to " << dir.string() << "\n";
  return 0;
}

// ---- lux -------------------------------------------------------------------

struct LuxArgs {
  std::string texture, model, dataset, id;
  LuxConfig config;
  std::string relight;
  std::string interp_a, interp_b;
  int frames = 5;
  std::string out;
};

int run_lux(const LuxArgs& args) {
  Manifest manifest;
  manifest.command = "lux";
  manifest.config = {{"id", args.id},
                     {"iterations", args.config.iterations},
                     {"lr", args.config.lr},
                     {"lambda_shade", args.config.weights.lambda_shade},
                     {"lambda_albedo", args.config.weights.lambda_albedo},
                     {"huber_delta", args.config.weights.huber_delta}};
  manifest.add_input(args.texture);
  manifest.add_input(args.model);
  manifest.add_input(args.dataset);

  const Dataset dataset = load_dataset(args.model, args.dataset);
  const InstanceRecord& inst = find_instance(dataset, args.id);
  const PfmImage texture_image = read_pfm(args.texture);
  const Channel texture = texture_to_gray(texture_image);
  const NormalMap normals =
      render_normal_map_uv(dataset.model, inst, texture_image.width, texture_image.height);

  const ShMapState state = decompose(texture, normals, args.config);
  const fs::path dir = ensure_out_dir(args.out);
  write_pfm((dir / "albedo.pfm").string(), pack_pfm(state.albedo));
  write_pfm((dir / "shading.pfm").string(), pack_pfm(state.shading_adapted));
  write_pfm((dir / "recon.pfm").string(), pack_pfm(state.shading_adapted * state.albedo));
  save_normal_map((dir / "normals.pfm").string(), normals);
  save_light((dir / "light.json").string(), state.L);
  manifest.outputs = {"albedo.pfm", "shading.pfm", "recon.pfm", "normals.pfm", "light.json"};
  manifest.extra["reconstruction_residual"] = reconstruction_residual(state, texture);

  if (!args.relight.empty()) {
    manifest.add_input(args.relight);
    const Vec9 L = load_light(args.relight);
    const Channel relit = render_shading(normals, L) * state.albedo;
    write_pfm((dir / "relit.pfm").string(), pack_pfm(relit));
    manifest.outputs.push_back("relit.pfm");
  }
  if (!args.interp_a.empty() || !args.interp_b.empty()) {
    if (args.interp_a.empty() || args.interp_b.empty() || args.frames < 2)
      throw std::runtime_error("lux interpolation needs --interp-a, --interp-b, --frames >= 2");
    manifest.add_input(args.interp_a);
    manifest.add_input(args.interp_b);
    const Vec9 La = load_light(args.interp_a);
    const Vec9 Lb = load_light(args.interp_b);
    for (int f = 0; f < args.frames; ++f) {
      const double alpha = double(f) / (args.frames - 1);
      const Vec9 L = (1.0 - alpha) * La + alpha * Lb;
      const Channel frame = render_shading(normals, L) * state.albedo;
      char name[64];
      std::snprintf(name, sizeof name, "interp_%03d.pfm", f);
      write_pfm((dir / name).string(), pack_pfm(frame));
      manifest.outputs.push_back(name);
    }
  }
  manifest.write(dir);
  std::cout << "reconstruction residual "
            << format_double(reconstruction_residual(state, texture)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lifted: low-rank surface model fitting from 2D observations"};
  app.require_subcommand(1);
  int threads = 0;

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic ground-truth dataset");
  synth->add_option("--n", synth_args.config.n, "grid resolution (n+1 vertices per side)");
  synth->add_option("--I", synth_args.config.identity_dims, "identity basis size");
  synth->add_option("--E", synth_args.config.expression_dims, "expression basis size");
  synth->add_option("--K", synth_args.config.instance_count, "instance count");
  synth->add_option("--yaw-min", synth_args.config.yaw_min_deg, "min yaw, degrees");
  synth->add_option("--yaw-max", synth_args.config.yaw_max_deg, "max yaw, degrees");
  synth->add_option("--pitch-min", synth_args.config.pitch_min_deg, "min pitch, degrees");
  synth->add_option("--pitch-max", synth_args.config.pitch_max_deg, "max pitch, degrees");
  synth->add_option("--roll-min", synth_args.config.roll_min_deg, "min roll, degrees");
  synth->add_option("--roll-max", synth_args.config.roll_max_deg, "max roll, degrees");
  synth->add_option("--sigma-min", synth_args.config.sigma_min, "min camera scale");
  synth->add_option("--sigma-max", synth_args.config.sigma_max, "max camera scale");
  synth->add_option("--t-range", synth_args.config.t_range, "translation range");
  synth->add_option("--noise-std", synth_args.config.noise_std, "observation noise std");
  synth->add_option("--occlusion", synth_args.config.occlusion_rate, "occlusion rate in [0,1)");
  synth->add_option("--identity-groups", synth_args.config.identity_groups, "identity groups");
  synth->add_option("--expression-groups", synth_args.config.expression_groups,
                    "expression groups");
  synth->add_option("--pose-groups", synth_args.config.pose_groups, "pose groups");
  synth->add_option("--seed", synth_args.config.seed, "RNG seed");
  synth->add_flag("--with-lux", synth_args.config.with_lux, "emit illumination ground truth");
  synth->add_option("--texture-size", synth_args.config.texture_size, "lux texture size");
  synth->add_option("--out", synth_args.out, "output directory")->required();

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit the model to observations");
  fit_cmd->add_option("--observations", fit_args.observations, "observation JSONL file");
  fit_cmd->add_option("--uv-dir", fit_args.uv_dir, "directory of per-instance UV-map PFMs");
  fit_cmd->add_option("--tau", fit_args.tau, "UV match threshold (default half a grid cell)");
  fit_cmd->add_option("--n", fit_args.n, "grid resolution");
  fit_cmd->add_option("--I", fit_args.identity_dims, "identity basis size");
  fit_cmd->add_option("--E", fit_args.expression_dims, "expression basis size");
  fit_cmd->add_option("--lr", fit_args.solver.lr, "Adam learning rate");
  fit_cmd->add_option("--decay-factor", fit_args.solver.decay_factor, "lr decay factor");
  fit_cmd->add_option("--decay-every", fit_args.solver.decay_every_epochs,
                      "epochs between decays");
  fit_cmd->add_option("--epochs", fit_args.solver.epochs, "epoch count");
  fit_cmd->add_option("--batch-size", fit_args.solver.batch_size, "instances per batch");
  fit_cmd->add_option("--seed", fit_args.solver.seed, "RNG seed");
  bool no_triplets = false;
  fit_cmd->add_flag("--no-triplets", no_triplets, "disable disentanglement triplets");
  fit_cmd->add_option("--lambda-3d", fit_args.solver.weights.lambda_3d, "reprojection weight");
  fit_cmd->add_option("--lambda-disentangle", fit_args.solver.weights.lambda_disentangle,
                      "triplet weight");
  fit_cmd->add_option("--lambda-scale", fit_args.solver.weights.lambda_scale,
                      "camera scale penalty");
  fit_cmd->add_option("--lambda-shape", fit_args.solver.weights.lambda_shape,
                      "deviation penalty");
  fit_cmd->add_option("--margin", fit_args.solver.weights.triplet_margin, "triplet margin");
  fit_cmd->add_option("--out", fit_args.out, "output directory")->required();

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "landmark evaluation against ground truth");
  eval_cmd->add_option("--model", eval_args.model, "fitted model JSON")->required();
  eval_cmd->add_option("--dataset", eval_args.dataset, "fitted dataset JSONL")->required();
  eval_cmd->add_option("--gt", eval_args.gt, "ground-truth landmark JSONL")->required();
  eval_cmd->add_option("--spec", eval_args.spec, "landmark spec JSON")->required();
  eval_cmd->add_option("--mode", eval_args.mode, "2d or 3d")
      ->check(CLI::IsMember({"2d", "3d"}));
  eval_cmd->add_flag("--no-rotation", eval_args.no_rotation,
                     "exclude rotation from Procrustes alignment");
  eval_cmd->add_option("--bins", eval_args.bins, "yaw bin edges, degrees")->delimiter(',');
  eval_cmd->add_option("--out", eval_args.out, "output directory")->required();

  RenderArgs render_args;
  CLI::App* render_cmd = app.add_subcommand("render", "render a fitted instance");
  render_cmd->add_option("--model", render_args.model, "fitted model JSON")->required();
  render_cmd->add_option("--dataset", render_args.dataset, "fitted dataset JSONL")->required();
  render_cmd->add_option("--id", render_args.id, "instance id")->required();
  render_cmd->add_option("--width", render_args.width, "image width");
  render_cmd->add_option("--height", render_args.height, "image height");
  render_cmd->add_option("--yaw-offsets", render_args.yaw_offsets, "yaw offsets, degrees")
      ->delimiter(',');
  render_cmd->add_option("--out", render_args.out, "output directory")->required();

  InterpolateArgs interp_args;
  CLI::App* interp_cmd =
      app.add_subcommand("interpolate", "interpolate codes and cameras between two instances");
  interp_cmd->add_option("--model", interp_args.model, "fitted model JSON")->required();
  interp_cmd->add_option("--dataset", interp_args.dataset, "fitted dataset JSONL")->required();
  interp_cmd->add_option("--id-a", interp_args.id_a, "first instance id")->required();
  interp_cmd->add_option("--id-b", interp_args.id_b, "second instance id")->required();
  interp_cmd->add_option("--frames", interp_args.frames, "frame count");
  interp_cmd->add_option("--width", interp_args.width, "image width");
  interp_cmd->add_option("--height", interp_args.height, "image height");
  interp_cmd->add_option("--out", interp_args.out, "output directory")->required();

  LuxArgs lux_args;
  CLI::App* lux_cmd = app.add_subcommand("lux", "albedo and illumination decomposition");
  lux_cmd->add_option("--texture", lux_args.texture, "texture PFM")->required();
  lux_cmd->add_option("--model", lux_args.model, "fitted model JSON")->required();
  lux_cmd->add_option("--dataset", lux_args.dataset, "fitted dataset JSONL")->required();
  lux_cmd->add_option("--id", lux_args.id, "instance id")->required();
  lux_cmd->add_option("--iterations", lux_args.config.iterations, "optimizer iterations");
  lux_cmd->add_option("--lr", lux_args.config.lr, "optimizer step size");
  lux_cmd->add_option("--lambda-shade", lux_args.config.weights.lambda_shade,
                      "shading smoothness weight");
  lux_cmd->add_option("--lambda-albedo", lux_args.config.weights.lambda_albedo,
                      "albedo smoothness weight");
  lux_cmd->add_option("--huber-delta", lux_args.config.weights.huber_delta,
                      "consistency Huber delta");
  lux_cmd->add_option("--relight", lux_args.relight, "re-render with this light JSON");
  lux_cmd->add_option("--interp-a", lux_args.interp_a, "light interpolation start JSON");
  lux_cmd->add_option("--interp-b", lux_args.interp_b, "light interpolation end JSON");
  lux_cmd->add_option("--frames", lux_args.frames, "interpolation frame count");
  lux_cmd->add_option("--out", lux_args.out, "output directory")->required();

  for (CLI::App* sub : {synth, fit_cmd, eval_cmd, render_cmd, interp_cmd, lux_cmd})
    sub->add_option("--threads", threads, "worker thread cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (threads > 0) set_max_threads(threads);
  fit_args.solver.use_triplets = !no_triplets;

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (fit_cmd->parsed()) {
      if (fit_args.observations.empty() && fit_args.uv_dir.empty()) {
        std::cerr << "fit: need --observations or --uv-dir\n";
        return 2;
      }
      return run_fit(fit_args);
    }
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (render_cmd->parsed()) return run_render(render_args);
    if (interp_cmd->parsed()) return run_interpolate(interp_args);
    if (lux_cmd->parsed()) return run_lux(lux_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
