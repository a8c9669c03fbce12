#include "physweave/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"
#include "physweave/parallel.hpp"

namespace physweave::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3) {
    throw PipelineError(std::string("camera json: '") + key + "' must be an array of 3 numbers");
  }
  return Vec3(j[key][0].get<double>(), j[key][1].get<double>(), j[key][2].get<double>());
}

void write_text(const fs::path& path, const std::string& text) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw PipelineError("cannot write " + path.string());
  f << text;
  if (!f) throw PipelineError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw PipelineError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_manifest(const fs::path& out, const std::string& command, std::uint64_t seed, const ScenePaths& scene,
                    ordered_json settings) {
  ordered_json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["seed"] = seed;
  m["scene"] = scene.root.string();
  const fs::path cfg = scene.config();
  m["config"] = cfg.string();
  m["config_sha256"] = fs::exists(cfg) ? sha256_file(cfg) : "";
  m["settings"] = std::move(settings);
  write_text(out / ("manifest_" + command + ".json"), m.dump(2) + "\n");
}

RgbImage read_image(const fs::path& path) {
  return path.extension() == ".ppm" ? read_ppm(path) : read_png(path);
}

// Segmentation sidecar written by export_frame: gray value = min(seg, 255).
std::vector<std::int32_t> read_seg(const fs::path& path) {
  const MaskImage m = read_png_mask(path);
  std::vector<std::int32_t> seg(m.values.size());
  for (std::size_t i = 0; i < seg.size(); ++i) seg[i] = static_cast<std::int32_t>(std::lround(m.values[i] * 255.f));
  return seg;
}

fs::path seg_sidecar(const fs::path& frame) {
  return frame.parent_path() / (frame.stem().string() + "_seg.png");
}

MaskImage object_mask_from_seg(const std::vector<std::int32_t>& seg, int w, int h) {
  MaskImage m(w, h);
  for (std::size_t i = 0; i < seg.size(); ++i) m.values[i] = seg[i] >= 2 ? 1.f : 0.f;
  return m;
}

json aabb_json(const Aabb& b) { return {{"min", vec_json(b.min())}, {"max", vec_json(b.max())}}; }

}  // namespace

// --- Scene files -------------------------------------------------------------

fs::path ScenePaths::config() const { return config_override.empty() ? root / "config.json" : config_override; }

fs::path resolve_mesh_path(const ScenePaths& scene, const sceneconfig::ObjectSpec& object) {
  std::vector<fs::path> tried;
  if (!object.mesh_ref.empty()) tried.push_back(scene.root / object.mesh_ref);
  if (!object.name.empty()) tried.push_back(scene.meshes_dir() / (object.name + ".obj"));
  tried.push_back(scene.meshes_dir() / (std::to_string(object.index) + ".obj"));
  for (const auto& p : tried) {
    if (fs::exists(p)) return p;
  }
  std::string msg = "mesh for object " + std::to_string(object.index) + " not found; tried";
  for (const auto& p : tried) msg += " " + p.string();
  throw PipelineError(msg);
}

SceneInput load_scene_input(const ScenePaths& scene) {
  if (!fs::is_directory(scene.root)) throw PipelineError("scene directory not found: " + scene.root.string());
  const fs::path cfg_path = scene.config();
  if (!fs::exists(cfg_path)) throw PipelineError("missing scene config: " + cfg_path.string());
  SceneInput in;
  in.config = sceneconfig::load_scene_config(cfg_path);
  in.warnings = in.config.warnings;
  for (const auto& w : sceneconfig::validate_config(in.config, scene.root)) {
    // Meshes without a mesh_ref resolve by name or index below, or fail loudly.
    if (!w.ends_with(": no mesh_ref")) in.warnings.push_back(w);
  }
  if (in.config.objects.empty()) throw PipelineError("scene config has no objects: " + cfg_path.string());
  for (const auto& o : in.config.objects) in.meshes.push_back(load_obj(resolve_mesh_path(scene, o)));
  return in;
}

fs::path aligned_mesh_path(const fs::path& out, int index) {
  return out / "aligned" / (std::to_string(index) + ".obj");
}

std::vector<TriMesh> load_aligned_meshes(const fs::path& out, std::size_t count) {
  std::vector<TriMesh> meshes;
  for (std::size_t i = 0; i < count; ++i) {
    const fs::path p = aligned_mesh_path(out, static_cast<int>(i));
    if (!fs::exists(p)) throw PipelineError("aligned mesh not found: " + p.string() + " (run align first)");
    meshes.push_back(load_obj(p));
  }
  return meshes;
}

std::string camera_to_json(const CameraPose& pose) {
  ordered_json j;
  j["position"] = vec_json(pose.position);
  j["look_at"] = vec_json(pose.look_at);
  j["up"] = vec_json(pose.up);
  j["fov_deg"] = pose.fov_deg;
  return j.dump(2);
}

CameraPose camera_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw PipelineError(std::string("camera json: ") + e.what());
  }
  if (j.contains("camera")) j = j["camera"];
  CameraPose pose;
  pose.position = vec_from(j, "position");
  pose.look_at = vec_from(j, "look_at");
  if (j.contains("up")) pose.up = vec_from(j, "up");
  if (j.contains("fov_deg")) pose.fov_deg = j["fov_deg"].get<double>();
  pose.validate();
  return pose;
}

CameraPose load_camera(const fs::path& path) {
  if (!fs::exists(path)) throw PipelineError("camera pose not found: " + path.string());
  return camera_from_json(read_text(path));
}

MaskImage load_gt_mask(const fs::path& masks, int width, int height) {
  std::vector<fs::path> files;
  if (fs::is_directory(masks)) {
    for (const auto& e : fs::directory_iterator(masks)) {
      if (e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::exists(masks)) {
    files.push_back(masks);
  }
  if (files.empty()) {
    throw PipelineError("missing mask: expected " +
                        (fs::is_directory(masks) ? (masks / "*.png").string() : masks.string()));
  }
  MaskImage out(width, height);
  for (const auto& f : files) {
    MaskImage m = read_png_mask(f);
    if (m.width != width || m.height != height) m = resize_area(m, width, height);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = std::max(out.values[i], m.values[i]);
  }
  return out;
}

RgbImage load_background(const ScenePaths& scene, const sceneconfig::SceneConfig& cfg, int width, int height,
                         std::vector<std::string>* warnings) {
  const fs::path p = cfg.background_ref.empty() ? scene.background() : scene.root / cfg.background_ref;
  if (!fs::exists(p)) {
    if (warnings) warnings->push_back("background not found: " + p.string() + "; using flat grey");
    return RgbImage(width, height, {0.5f, 0.5f, 0.5f});
  }
  RgbImage bg = read_png(p);
  if (bg.width != width || bg.height != height) bg = resize_area(bg, width, height);
  return bg;
}

// --- Rendering ---------------------------------------------------------------

std::vector<Rgb> object_colors(const sceneconfig::SceneConfig& cfg) {
  std::vector<Rgb> colors;
  for (const auto& o : cfg.objects) {
    colors.push_back({static_cast<float>(o.surface_color[0]), static_cast<float>(o.surface_color[1]),
                      static_cast<float>(o.surface_color[2])});
  }
  return colors;
}

Aabb geometry_bounds(const sim::ObjectGeometry& g) {
  if (!g.mesh.empty()) return aabb(g.mesh);
  const Aabb b = aabb(std::span<const Vec3>(g.points));
  return Aabb::from_min_max(b.min() - Vec3::Constant(g.point_radius), b.max() + Vec3::Constant(g.point_radius));
}

RenderedFrame render_scene(const std::vector<sim::ObjectGeometry>& geometry, const std::vector<Rgb>& colors,
                           const CameraPose& camera, const RenderSettings& settings) {
  std::vector<camopt::RenderMesh> meshes;
  std::vector<camopt::RenderParticles> particles;
  for (const auto& g : geometry) {
    const auto id = static_cast<std::int32_t>(g.object_index + 2);
    const Rgb color = static_cast<std::size_t>(g.object_index) < colors.size()
                          ? colors[g.object_index]
                          : camopt::palette_color(static_cast<std::size_t>(g.object_index));
    if (!g.mesh.empty()) {
      meshes.push_back({g.mesh, id, color});
    } else if (!g.points.empty()) {
      particles.push_back({g.points, g.point_radius, id, color});
    }
  }
  camopt::RenderOptions opts;
  opts.ground_plane = true;
  auto raster = camopt::rasterize(meshes, particles, camera, settings.width, settings.height, opts);
  RenderedFrame out;
  out.frame = settings.background.width == settings.width && settings.background.height == settings.height
                  ? render::composite_frame(raster.frame, settings.background, settings.shadow_strength)
                  : raster.frame;
  out.depth = std::move(raster.depth);
  return out;
}

// --- align ---------------------------------------------------------------------

AlignResult cmd_align(const AlignOptions& o) {
  const SceneInput in = load_scene_input(o.scene);
  const fs::path out = o.out.empty() ? o.scene.default_out() : o.out;
  AlignResult r;
  ordered_json report;

  std::vector<Aabb> before;
  for (const auto& m : in.meshes) before.push_back(aabb(m));
  r.overlapping_pairs_before = posealign::count_overlapping_pairs(before);

  if (in.meshes.size() == 1) {
    r.single_object = true;
    const auto c = posealign::canonical_align(in.meshes[0]);
    r.meshes = {c.mesh};
    report["path"] = "single_object_canonical";
  } else {
    posealign::GroundEstimate est;
    try {
      est = posealign::adaptive_ground_estimation(in.meshes, o.ransac, Vec3::UnitZ(), o.seed);
    } catch (const posealign::GroundEstimationError& e) {
      throw PipelineError(std::string("plane estimation exhausted after ") + std::to_string(e.attempts) +
                          " attempts: " + e.what());
    }
    const auto norm = posealign::normalize_scene(in.meshes, est.plane);
    const auto pen = posealign::resolve_penetration(norm.meshes, o.penetration);
    r.meshes = pen.meshes;
    report["path"] = "scene_ground_plane";
    report["plane"] = {{"normal", vec_json(est.plane.normal)},
                       {"offset", est.plane.offset},
                       {"inliers", est.plane.inliers.size()},
                       {"inlier_rms", est.plane.inlier_rms},
                       {"refined", est.refined},
                       {"anchor_count", est.anchor_count},
                       {"attempts_used", est.attempts_used}};
    json attempts = json::array();
    for (const auto& a : est.attempts) {
      attempts.push_back({{"attempt", a.attempt},
                          {"percent", a.percent},
                          {"distance_threshold", a.distance_threshold},
                          {"alignment", a.alignment},
                          {"accepted", a.accepted}});
    }
    report["attempts"] = attempts;
    json rot = json::array();
    for (int i = 0; i < 3; ++i) rot.push_back({norm.transform.rotation(i, 0), norm.transform.rotation(i, 1), norm.transform.rotation(i, 2)});
    report["transform"] = {{"rotation", rot}, {"translation", vec_json(norm.transform.translation)}};
    json disp = json::array();
    for (const auto& d : pen.displacements) disp.push_back(vec_json(d));
    report["penetration"] = {{"displacements", disp},
                             {"residual_padded_overlaps", pen.residual_overlaps},
                             {"residual_overlaps", pen.residual_strict_overlaps}};
  }

  metrics::PhysicsFrame frame;
  for (const auto& m : r.meshes) frame.objects.push_back(aabb(m));
  const auto rates = metrics::physics_rates(std::vector{frame});
  r.penetration_rate = rates.penetration_rate;
  r.support_violation_rate = rates.support_violation_rate;

  report["single_object"] = r.single_object;
  report["objects"] = r.meshes.size();
  report["overlapping_pairs_before"] = r.overlapping_pairs_before;
  report["penetration_rate"] = rates.pr_defined ? json(r.penetration_rate) : json(nullptr);
  report["support_violation_rate"] = r.support_violation_rate;
  report["warnings"] = in.warnings;
  r.report_json = report.dump(2);

  for (std::size_t i = 0; i < r.meshes.size(); ++i) {
    fs::create_directories(out / "aligned");
    write_obj(r.meshes[i], aligned_mesh_path(out, static_cast<int>(i)));
  }
  write_text(out / "align_report.json", r.report_json + "\n");
  write_manifest(out, "align", o.seed, o.scene,
                 {{"distance_threshold", o.ransac.distance_threshold},
                  {"ransac_iterations", o.ransac.iterations},
                  {"padding", o.penetration.padding},
                  {"delta_max", o.penetration.delta_max},
                  {"penetration_iterations", o.penetration.iterations}});
  return r;
}

// --- camopt --------------------------------------------------------------------

CamOptResult cmd_camopt(const CamOptOptions& o) {
  const SceneInput in = load_scene_input(o.scene);
  const fs::path out = o.out.empty() ? o.scene.default_out() : o.out;
  const auto meshes = load_aligned_meshes(out, in.meshes.size());

  const fs::path target_path = o.target.value_or(o.scene.target());
  if (!fs::exists(target_path)) throw PipelineError("missing target image: expected " + target_path.string());
  const RgbImage image = read_png(target_path);
  const MaskImage mask = load_gt_mask(o.mask.value_or(o.scene.masks_dir()), image.width, image.height);

  camopt::CamOptScene scene;
  const auto colors = object_colors(in.config);
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    scene.meshes.push_back({meshes[i], static_cast<std::int32_t>(i + 2), colors[i]});
  }
  scene.options.ground_plane = true;
  camopt::CamOptConfig cfg = o.config;
  cfg.seed = o.seed;

  CamOptResult r;
  r.init = camopt::camera_init(meshes);
  camopt::SearchBounds bounds{r.init.position, o.search_radius};
  bounds.validate();
  r.fit = camopt::coarse_to_fine(r.init, camopt::make_target(image, mask, cfg.objective_size), scene, cfg, bounds);

  const auto full = camopt::rasterize(scene.meshes, {}, r.fit.pose, image.width, image.height, scene.options);
  r.mask_iou = metrics::mask_iou(full.mask, mask);
  r.reproj_error_px = metrics::mask_pixel_count(full.mask) > 0 && metrics::mask_pixel_count(mask) > 0
                          ? metrics::reprojection_error(full.mask, mask)
                          : std::numeric_limits<double>::infinity();

  ordered_json cam = json::parse(camera_to_json(r.fit.pose), nullptr, true, false);
  ordered_json doc;
  doc["camera"] = cam;
  doc["init_camera"] = json::parse(camera_to_json(r.init));
  doc["loss"] = r.fit.loss;
  doc["init_loss"] = r.fit.init_loss;
  doc["global_loss"] = r.fit.global_loss;
  doc["powell_iterations"] = r.fit.powell_iterations;
  doc["reproj_error_px"] = std::isfinite(r.reproj_error_px) ? json(r.reproj_error_px) : json(nullptr);
  doc["mask_iou"] = r.mask_iou;
  doc["search_radius"] = vec_json(o.search_radius);
  write_text(out / "camera.json", doc.dump(2) + "\n");

  std::ostringstream trace;
  trace << std::setprecision(17) << "stage,x,y,z,loss\n";
  for (const auto& e : r.fit.trace) {
    trace << e.stage << ',' << e.position.x() << ',' << e.position.y() << ',' << e.position.z() << ',' << e.loss
          << '\n';
  }
  write_text(out / "camopt_trace.csv", trace.str());
  write_manifest(out, "camopt", o.seed, o.scene,
                 {{"target", target_path.string()},
                  {"search_radius", vec_json(o.search_radius)},
                  {"n_random", cfg.n_random},
                  {"powell_max_iter", cfg.powell_max_iter},
                  {"objective_size", cfg.objective_size},
                  {"w_obj", cfg.w_obj},
                  {"w_bg", cfg.w_bg},
                  {"w_mask", cfg.w_mask}});
  return r;
}

// --- simulate ------------------------------------------------------------------

SimulateResult cmd_simulate(const SimulateOptions& o) {
  if (o.output_fps <= 0) throw PipelineError("output fps must be positive");
  if (o.resolution <= 0) throw PipelineError("resolution must be positive");
  const SceneInput in = load_scene_input(o.scene);
  const fs::path out = o.out.empty() ? o.scene.default_out() : o.out;
  const auto meshes = load_aligned_meshes(out, in.meshes.size());
  SimulateResult r;
  r.warnings = in.warnings;

  CameraPose base;
  if (fs::exists(out / "camera.json")) {
    base = load_camera(out / "camera.json");
  } else {
    base = camopt::camera_init(meshes);
    r.warnings.push_back("no camera.json in the output directory; using the initial camera heuristic");
  }

  sim::SimParams params;
  params.dt = in.config.sim.dt;
  params.substeps = in.config.sim.substeps;
  params.seed = o.seed;
  sim::SimState state = sim::build_sim(in.config, meshes, params);
  for (const auto& w : state.warnings) r.warnings.push_back(w);

  const int steps = o.steps < 0 ? in.config.sim.steps : o.steps;
  r.decimation = std::max(1, static_cast<int>(std::lround(static_cast<double>(in.config.sim.render_fps) / o.output_fps)));

  // Exported frame k shows the state at the start of simulation frame k * decimation.
  std::vector<std::pair<int, std::vector<sim::ObjectGeometry>>> snapshots;
  if (steps > 0) snapshots.emplace_back(0, sim::scene_geometry(state));
  std::ostringstream step_log;
  try {
    sim::run_sim(state, steps, [&](const sim::SimState& st, const sim::StepReport& rep) {
      ordered_json line;
      line["frame"] = rep.frame;
      line["time"] = st.time;
      line["active_fields"] = rep.active_fields;
      line["rigid_contacts"] = rep.rigid_contacts;
      line["escaped_particles"] = rep.escaped_particles;
      line["kinetic_energy"] = rep.kinetic_energy;
      step_log << line.dump() << '\n';
      if (st.frame % r.decimation == 0 && st.frame < steps) snapshots.emplace_back(st.frame, sim::scene_geometry(st));
    });
  } catch (const sim::SimulationDiverged& e) {
    throw PipelineError("simulation diverged in the " + e.solver() + " solver at frame " + std::to_string(e.frame()));
  }
  r.simulated_frames = state.frame;

  const fs::path frames_dir = out / "frames";
  fs::create_directories(frames_dir);
  for (const auto& stale : list_frames(frames_dir)) {
    fs::remove(stale);
    fs::remove(seg_sidecar(stale));
    fs::remove(stale.parent_path() / (stale.stem().string() + "_depth.png"));
  }

  RenderSettings settings;
  settings.width = settings.height = o.resolution;
  settings.background = load_background(o.scene, in.config, o.resolution, o.resolution, &r.warnings);
  const auto colors = object_colors(in.config);
  const std::string ext = o.format == render::ImageFormat::png ? "png" : "ppm";
  const double depth_far = 2.0 * (base.position - base.look_at).norm();

  std::vector<std::string> physics(snapshots.size());
  parallel_for(snapshots.size(), [&](std::size_t k) {
    const auto& [sim_frame, geometry] = snapshots[k];
    const CameraPose pose = render::camera_motion_pose(o.camera_mode, sim_frame, base);
    const RenderedFrame rendered = render_scene(geometry, colors, pose, settings);
    const fs::path path = render::frame_path(frames_dir, static_cast<int>(k), ext);
    render::export_frame(rendered.frame, path, o.format, true);
    if (o.export_conditions) {
      std::vector<std::uint8_t> gray(rendered.depth.size());
      for (std::size_t i = 0; i < gray.size(); ++i) {
        const double z = rendered.depth[i];
        gray[i] = std::isfinite(z) ? quantize(static_cast<float>(std::clamp(1.0 - z / depth_far, 0.0, 1.0))) : 0;
      }
      write_png_gray(o.resolution, o.resolution, gray, frames_dir / (path.stem().string() + "_depth.png"));
    }
    ordered_json line;
    line["frame"] = k;
    line["sim_frame"] = sim_frame;
    json objects = json::array();
    for (const auto& g : geometry) {
      json b = aabb_json(geometry_bounds(g));
      b["index"] = g.object_index;
      objects.push_back(b);
    }
    line["objects"] = objects;
    line["object_pixels"] = std::count_if(rendered.frame.seg.begin(), rendered.frame.seg.end(),
                                          [](std::int32_t s) { return s >= 2; });
    line["width"] = o.resolution;
    line["height"] = o.resolution;
    physics[k] = line.dump();
  });
  r.exported_frames = static_cast<int>(snapshots.size());

  std::string physics_text;
  for (const auto& l : physics) physics_text += l + "\n";
  write_text(frames_dir / "physics.jsonl", physics_text);
  write_text(out / "step_log.jsonl", step_log.str());
  if (o.export_conditions) {
    ordered_json cond;
    cond["frames"] = "frame_%05d." + ext;
    cond["segmentation"] = "frame_%05d_seg.png: gray = min(id, 255); 0 background, 1 ground, >= 2 object index + 2";
    cond["depth_proxy"] = "frame_%05d_depth.png: gray = 255 * clamp(1 - z / far, 0, 1), 0 where empty";
    cond["depth_far_m"] = depth_far;
    cond["fps"] = o.output_fps;
    write_text(frames_dir / "conditions.json", cond.dump(2) + "\n");
  }
  write_manifest(out, "simulate", o.seed, o.scene,
                 {{"steps", steps},
                  {"dt", params.dt},
                  {"substeps", params.substeps},
                  {"render_fps", in.config.sim.render_fps},
                  {"output_fps", o.output_fps},
                  {"decimation", r.decimation},
                  {"camera_mode", std::string(render::to_string(o.camera_mode))},
                  {"resolution", o.resolution},
                  {"export_conditions", o.export_conditions},
                  {"warnings", r.warnings}});
  return r;
}

// --- metrics -------------------------------------------------------------------

std::vector<fs::path> list_frames(const fs::path& dir) {
  std::vector<fs::path> frames;
  if (!fs::is_directory(dir)) return frames;
  for (const auto& e : fs::directory_iterator(dir)) {
    const fs::path& p = e.path();
    const std::string stem = p.stem().string();
    if ((p.extension() != ".png" && p.extension() != ".ppm") || stem.rfind("frame_", 0) != 0) continue;
    if (stem.ends_with("_seg") || stem.ends_with("_depth")) continue;
    frames.push_back(p);
  }
  std::sort(frames.begin(), frames.end());
  return frames;
}

metrics::MetricsReport cmd_metrics(const MetricsOptions& o) {
  const auto frames = list_frames(o.frames_dir);
  if (frames.empty()) throw PipelineError("no frames in " + o.frames_dir.string());
  metrics::MetricsReport rep;
  rep.frame_count = static_cast<int>(frames.size());

  const RgbImage first = read_image(frames.front());
  const int w = first.width, h = first.height;

  if (o.reference && fs::exists(*o.reference)) {
    RgbImage ref = read_png(*o.reference);
    if (ref.width != w || ref.height != h) ref = resize_area(ref, w, h);
    rep.ssim = metrics::ssim(first, ref);
    rep.lpips_fallback = metrics::lpips_fallback(first, ref);
  } else {
    rep.flags.push_back(o.reference ? "reference image missing: " + o.reference->string() : "no reference image");
  }

  const fs::path first_seg = seg_sidecar(frames.front());
  if (!fs::exists(first_seg)) {
    rep.flags.push_back("segmentation sidecar missing: " + first_seg.string());
  } else if (!o.gt_masks) {
    rep.flags.push_back("no ground-truth masks");
  } else {
    try {
      const MaskImage gt = load_gt_mask(*o.gt_masks, w, h);
      const MaskImage rendered = object_mask_from_seg(read_seg(first_seg), w, h);
      rep.mask_iou = metrics::mask_iou(rendered, gt);
      if (metrics::mask_pixel_count(rendered) > 0 && metrics::mask_pixel_count(gt) > 0) {
        rep.reproj_error_px = metrics::reprojection_error(rendered, gt);
      } else {
        rep.flags.push_back("reprojection undefined: empty mask");
      }
    } catch (const PipelineError& e) {
      rep.flags.push_back(e.what());
    }
  }

  const fs::path physics_path = o.frames_dir / "physics.jsonl";
  std::vector<metrics::PhysicsFrame> physics;
  if (fs::exists(physics_path)) {
    std::istringstream lines(read_text(physics_path));
    for (std::string line; std::getline(lines, line);) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      metrics::PhysicsFrame f;
      for (const auto& b : j.at("objects")) {
        f.objects.push_back(Aabb::from_min_max(Vec3(b["min"][0], b["min"][1], b["min"][2]),
                                               Vec3(b["max"][0], b["max"][1], b["max"][2])));
      }
      f.mask_pixels = j.at("object_pixels").get<std::size_t>();
      f.width = j.at("width").get<int>();
      f.height = j.at("height").get<int>();
      physics.push_back(std::move(f));
    }
  } else {
    rep.flags.push_back("physics state missing: " + physics_path.string());
    for (const auto& f : frames) {
      const fs::path seg = seg_sidecar(f);
      if (!fs::exists(seg)) {
        physics.clear();
        break;
      }
      const auto ids = read_seg(seg);
      metrics::PhysicsFrame pf;
      pf.mask_pixels = static_cast<std::size_t>(std::count_if(ids.begin(), ids.end(), [](std::int32_t s) { return s >= 2; }));
      pf.width = w;
      pf.height = h;
      physics.push_back(std::move(pf));
    }
  }
  if (!physics.empty()) {
    const auto rates = metrics::physics_rates(physics);
    if (rates.pr_defined) rep.penetration_rate = rates.penetration_rate;
    else rep.flags.push_back("penetration rate undefined: fewer than two objects");
    if (rates.svr_defined) rep.support_violation_rate = rates.support_violation_rate;
    else if (fs::exists(physics_path)) rep.flags.push_back("support violation rate undefined: no objects");
    rep.interaction_success_rate = rates.interaction_success_rate;
  }

  // Stream the sequence so only two frames are resident.
  metrics::FlowParams flow;
  flow.stride = o.flow_stride;
  std::vector<double> mean_flow, lap_var;
  metrics::GrayImage prev = metrics::to_gray(first);
  lap_var.push_back(metrics::laplacian_variance(prev));
  for (std::size_t t = 1; t < frames.size(); ++t) {
    const RgbImage img = read_image(frames[t]);
    if (img.width != w || img.height != h) throw PipelineError("frame size changes at " + frames[t].string());
    metrics::GrayImage cur = metrics::to_gray(img);
    mean_flow.push_back(metrics::lucas_kanade_flow(prev, cur, flow).mean_magnitude());
    lap_var.push_back(metrics::laplacian_variance(cur));
    prev = std::move(cur);
  }
  if (!mean_flow.empty()) {
    const auto motion = metrics::summarize_motion(mean_flow);
    rep.motion_amplitude = motion.amplitude;
    rep.motion_smoothness = motion.smoothness;
  } else {
    rep.flags.push_back("motion undefined: fewer than two frames");
  }
  rep.aesthetic = metrics::aesthetic_from_variances(lap_var);

  const fs::path out = o.out.empty() ? o.frames_dir : o.out;
  write_text(out / "metrics.json", metrics::to_json(rep) + "\n");
  write_text(out / "metrics.csv", metrics::csv_header() + "\n" + metrics::to_csv_row(rep) + "\n");
  return rep;
}

std::string sha256_file(const fs::path& path) {
  const std::string data = read_text(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw PipelineError("sha256 failed for " + path.string());
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

}  // namespace physweave::pipeline
