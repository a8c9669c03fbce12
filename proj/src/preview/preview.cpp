#include "physweave/preview.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "physweave/camopt.hpp"
#include "physweave/pipeline.hpp"

namespace physweave::preview {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kFieldDisabled = INT_MAX;

constexpr std::pair<CommandKind, std::string_view> kCommandNames[] = {
    {CommandKind::apply_point_force, "apply_point_force"},
    {CommandKind::toggle_field, "toggle_field"},
    {CommandKind::set_camera_mode, "set_camera_mode"},
    {CommandKind::pause, "pause"},
    {CommandKind::resume, "resume"},
    {CommandKind::reset, "reset"},
    {CommandKind::set_timescale, "set_timescale"},
};

constexpr std::string_view kPayloadFields[] = {"x_px", "y_px", "dir_x", "dir_y", "strength", "index", "mode",
                                               "timescale"};

double finite_number(const json& j, const char* key) {
  if (!j.contains(key)) throw CommandError(std::string("missing field '") + key + "'");
  const json& v = j[key];
  if (!v.is_number()) throw CommandError(std::string("field '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw CommandError(std::string("field '") + key + "' must be finite");
  return d;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint64_t get_be(std::span<const std::uint8_t> b, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | b[at + i];
  return v;
}

// Möller-Trumbore; returns the ray parameter of a front or back face hit.
std::optional<double> ray_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 p = d.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-14) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = o - a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = d.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv;
  if (t <= 1e-9) return std::nullopt;
  return t;
}

std::optional<double> ray_sphere(const Vec3& o, const Vec3& d, const Vec3& c, double r) {
  const Vec3 oc = o - c;
  const double b = oc.dot(d);
  const double disc = b * b - (oc.squaredNorm() - r * r);
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t = -b - sq > 1e-9 ? -b - sq : -b + sq;
  if (t <= 1e-9) return std::nullopt;
  return t;
}

}  // namespace

std::string_view to_string(CommandKind kind) {
  for (const auto& [k, name] : kCommandNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

PreviewCommand parse_command(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception&) {
    throw CommandError("command is not valid JSON");
  }
  if (!j.is_object()) throw CommandError("command must be a JSON object");
  if (!j.contains("type") || !j["type"].is_string()) throw CommandError("missing string field 'type'");
  const std::string type = j["type"].get<std::string>();
  PreviewCommand cmd;
  bool known = false;
  for (const auto& [k, name] : kCommandNames) {
    if (name == type) {
      cmd.kind = k;
      known = true;
    }
  }
  if (!known) throw CommandError("unknown command type '" + type + "'");

  std::vector<std::string_view> allowed;
  switch (cmd.kind) {
    case CommandKind::apply_point_force: {
      PointForce f{finite_number(j, "x_px"), finite_number(j, "y_px"), finite_number(j, "dir_x"),
                   finite_number(j, "dir_y"), finite_number(j, "strength")};
      if (std::hypot(f.dir_x, f.dir_y) < 1e-12) throw CommandError("direction (dir_x, dir_y) must be non-zero");
      if (f.strength < 0.0) throw CommandError("strength must be >= 0");
      cmd.payload = f;
      allowed = {"x_px", "y_px", "dir_x", "dir_y", "strength"};
      break;
    }
    case CommandKind::toggle_field: {
      if (!j.contains("index") || !j["index"].is_number_integer() || j["index"].get<long long>() < 0 ||
          j["index"].get<long long>() > INT_MAX) {
        throw CommandError("field 'index' must be a non-negative integer");
      }
      cmd.payload = FieldToggle{j["index"].get<int>()};
      allowed = {"index"};
      break;
    }
    case CommandKind::set_camera_mode: {
      if (!j.contains("mode") || !j["mode"].is_string()) throw CommandError("missing string field 'mode'");
      try {
        cmd.payload = CameraModeChange{render::parse_camera_motion(j["mode"].get<std::string>())};
      } catch (const std::exception& e) {
        throw CommandError(e.what());
      }
      allowed = {"mode"};
      break;
    }
    case CommandKind::set_timescale: {
      const double t = finite_number(j, "timescale");
      if (!(t > 0.0) || t > kMaxTimescale) {
        throw CommandError("timescale must be in (0, " + std::to_string(static_cast<int>(kMaxTimescale)) + "]");
      }
      cmd.payload = TimescaleChange{t};
      allowed = {"timescale"};
      break;
    }
    case CommandKind::pause:
    case CommandKind::resume:
    case CommandKind::reset:
      break;
  }
  for (std::string_view field : kPayloadFields) {
    if (j.contains(std::string(field)) && std::find(allowed.begin(), allowed.end(), field) == allowed.end()) {
      throw CommandError("field '" + std::string(field) + "' does not belong to " + type);
    }
  }
  return cmd;
}

std::string command_to_json(const PreviewCommand& cmd) {
  ordered_json j;
  j["type"] = to_string(cmd.kind);
  if (const auto* f = std::get_if<PointForce>(&cmd.payload)) {
    j["x_px"] = f->x_px;
    j["y_px"] = f->y_px;
    j["dir_x"] = f->dir_x;
    j["dir_y"] = f->dir_y;
    j["strength"] = f->strength;
  } else if (const auto* t = std::get_if<FieldToggle>(&cmd.payload)) {
    j["index"] = t->index;
  } else if (const auto* m = std::get_if<CameraModeChange>(&cmd.payload)) {
    j["mode"] = render::to_string(m->mode);
  } else if (const auto* s = std::get_if<TimescaleChange>(&cmd.payload)) {
    j["timescale"] = s->timescale;
  }
  return j.dump();
}

// --- Frame messages ------------------------------------------------------------

std::string summary_to_json(const FrameSummary& s) {
  ordered_json j;
  j["object_count"] = s.object_count;
  j["active_fields"] = s.active_fields;
  j["sim_frame"] = s.sim_frame;
  j["sim_time"] = s.sim_time;
  j["paused"] = s.paused;
  j["camera_mode"] = render::to_string(s.camera_mode);
  j["timescale"] = s.timescale;
  return j.dump();
}

std::vector<std::uint8_t> encode_frame_message(const FrameMessage& f) {
  const std::string summary = summary_to_json(f.summary);
  const std::size_t payload = 8 + 8 + 4 + summary.size() + f.png.size();
  if (payload > UINT32_MAX) throw PreviewError("frame message too large");
  std::vector<std::uint8_t> out;
  out.reserve(6 + payload);
  out.push_back(kProtocolVersion);
  out.push_back(static_cast<std::uint8_t>(MessageType::frame));
  put_u32(out, static_cast<std::uint32_t>(payload));
  put_u64(out, f.index);
  put_u64(out, f.timestamp_us);
  put_u32(out, static_cast<std::uint32_t>(summary.size()));
  out.insert(out.end(), summary.begin(), summary.end());
  out.insert(out.end(), f.png.begin(), f.png.end());
  return out;
}

FrameMessage decode_frame_message(std::span<const std::uint8_t> b) {
  if (b.size() < 6) throw PreviewError("frame message shorter than its header");
  if (b[0] != kProtocolVersion) throw PreviewError("unsupported protocol version " + std::to_string(b[0]));
  if (b[1] != static_cast<std::uint8_t>(MessageType::frame)) throw PreviewError("not a frame message");
  const std::uint64_t len = get_be(b, 2, 4);
  if (len != b.size() - 6) throw PreviewError("frame message length mismatch");
  if (len < 20) throw PreviewError("frame payload too short");
  FrameMessage f;
  f.index = get_be(b, 6, 8);
  f.timestamp_us = get_be(b, 14, 8);
  const std::uint64_t slen = get_be(b, 22, 4);
  if (26 + slen > b.size()) throw PreviewError("summary overruns the message");
  json s;
  try {
    s = json::parse(b.begin() + 26, b.begin() + 26 + static_cast<std::ptrdiff_t>(slen));
    f.summary.object_count = s.at("object_count").get<std::size_t>();
    f.summary.active_fields = s.at("active_fields").get<int>();
    f.summary.sim_frame = s.at("sim_frame").get<int>();
    f.summary.sim_time = s.at("sim_time").get<double>();
    f.summary.paused = s.at("paused").get<bool>();
    f.summary.camera_mode = render::parse_camera_motion(s.at("camera_mode").get<std::string>());
    f.summary.timescale = s.at("timescale").get<double>();
  } catch (const std::exception& e) {
    throw PreviewError(std::string("bad frame summary: ") + e.what());
  }
  f.png.assign(b.begin() + 26 + static_cast<std::ptrdiff_t>(slen), b.end());
  return f;
}

// --- Picking -------------------------------------------------------------------

std::optional<std::pair<int, Vec3>> pick_object(const std::vector<sim::ObjectGeometry>& geometry,
                                                const CameraPose& camera, int width, int height, double x_px,
                                                double y_px) {
  const Projector proj(camera, width, height);
  const Vec3 o = proj.eye;
  const Vec3 d = proj.ray_direction(x_px, y_px).normalized();
  double best = std::numeric_limits<double>::infinity();
  int hit = -1;
  for (const auto& g : geometry) {
    for (const auto& f : g.mesh.faces) {
      const auto t = ray_triangle(o, d, g.mesh.vertices[f[0]], g.mesh.vertices[f[1]], g.mesh.vertices[f[2]]);
      if (t && *t < best) {
        best = *t;
        hit = g.object_index;
      }
    }
    if (g.mesh.empty()) {
      for (const auto& p : g.points) {
        const auto t = ray_sphere(o, d, p, g.point_radius);
        if (t && *t < best) {
          best = *t;
          hit = g.object_index;
        }
      }
    }
  }
  if (hit < 0) return std::nullopt;
  return std::make_pair(hit, Vec3(o + best * d));
}

// --- Session -------------------------------------------------------------------

PreviewSession::PreviewSession(sceneconfig::SceneConfig config, std::vector<TriMesh> meshes, CameraPose base,
                               RgbImage background, SessionOptions options)
    : config_(std::move(config)),
      base_(base),
      background_(std::move(background)),
      options_(options),
      mode_(options.camera_mode) {
  if (options_.resolution <= 0) throw PreviewError("preview resolution must be positive");
  if (options_.output_fps <= 0) throw PreviewError("preview fps must be positive");
  base_.validate();
  if (background_.width != options_.resolution || background_.height != options_.resolution) {
    background_ = background_.width > 0 ? resize_area(background_, options_.resolution, options_.resolution)
                                        : RgbImage(options_.resolution, options_.resolution, {0.5f, 0.5f, 0.5f});
  }
  colors_ = pipeline::object_colors(config_);
  sim::SimParams params;
  params.dt = config_.sim.dt;
  params.substeps = config_.sim.substeps;
  params.seed = options_.seed;
  state_ = sim::build_sim(config_, meshes, params);
  initial_ = state_;
  decimation_ = std::max(
      1, static_cast<int>(std::lround(static_cast<double>(config_.sim.render_fps) / options_.output_fps)));
}

std::unique_ptr<PreviewSession> PreviewSession::from_scene(const fs::path& scene_root, const fs::path& config_override,
                                                           const fs::path& out, const SessionOptions& options) {
  try {
    const pipeline::ScenePaths scene{scene_root, config_override};
    const auto in = pipeline::load_scene_input(scene);
    const fs::path out_dir = out.empty() ? scene.default_out() : out;
    auto meshes = pipeline::load_aligned_meshes(out_dir, in.meshes.size());
    const CameraPose pose = fs::exists(out_dir / "camera.json") ? pipeline::load_camera(out_dir / "camera.json")
                                                                 : camopt::camera_init(meshes);
    RgbImage bg = pipeline::load_background(scene, in.config, options.resolution, options.resolution, nullptr);
    return std::make_unique<PreviewSession>(in.config, std::move(meshes), pose, std::move(bg), options);
  } catch (const PreviewError&) {
    throw;
  } catch (const std::exception& e) {
    throw PreviewError(e.what());
  }
}

void PreviewSession::submit(PreviewCommand cmd, std::uint64_t client) {
  std::lock_guard lock(queue_mutex_);
  queue_.push_back({std::move(cmd), client});
}

CameraPose PreviewSession::camera() const { return render::camera_motion_pose(mode_, state_.frame, base_); }

bool PreviewSession::field_enabled(std::size_t index) const {
  return index < state_.forces.size() && state_.forces[index].start_frame != kFieldDisabled;
}

void PreviewSession::apply_point_force(const PointForce& f, CommandOutcome& out) {
  const auto geometry = sim::scene_geometry(state_);
  const auto hit = pick_object(geometry, camera(), options_.resolution, options_.resolution, f.x_px, f.y_px);
  if (!hit) {
    out.reason = "no object under pixel (" + std::to_string(f.x_px) + ", " + std::to_string(f.y_px) + ")";
    return;
  }
  const int index = hit->first;
  const CameraFrame frame = camera_frame(camera());
  const Vec3 dv = f.strength * (frame.right * f.dir_x - frame.up * f.dir_y).normalized();
  bool moved = false;
  for (auto& b : state_.rigid) {
    if (b.object_index != index) continue;
    if (b.fixed) {
      out.reason = "object " + std::to_string(index) + " is fixed";
      return;
    }
    b.v += dv;
    moved = true;
  }
  for (auto& b : state_.mpm) {
    if (b.object_index != index) continue;
    for (auto& p : b.particles) {
      if (!p.pinned) p.v += dv;
    }
    moved = true;
  }
  for (auto& b : state_.pbd) {
    if (b.object_index != index) continue;
    for (std::size_t i = 0; i < b.v.size(); ++i) {
      if (!b.pinned(i)) b.v[i] += dv;
    }
    moved = true;
  }
  if (!moved) {
    out.reason = "object " + std::to_string(index) + " has no dynamic state";
    return;
  }
  out.accepted = true;
  out.object_index = index;
}

CommandOutcome PreviewSession::apply(const Pending& p) {
  CommandOutcome out;
  out.client = p.client;
  out.kind = p.cmd.kind;
  out.frame = next_index_;
  switch (p.cmd.kind) {
    case CommandKind::apply_point_force:
      if (!error_.empty()) {
        out.reason = "simulation halted: " + error_;
        break;
      }
      apply_point_force(std::get<PointForce>(p.cmd.payload), out);
      break;
    case CommandKind::toggle_field: {
      const auto i = static_cast<std::size_t>(std::get<FieldToggle>(p.cmd.payload).index);
      if (i >= state_.forces.size()) {
        out.reason = "no force field " + std::to_string(i) + " (scene has " + std::to_string(state_.forces.size()) + ")";
        break;
      }
      state_.forces[i].start_frame = field_enabled(i) ? kFieldDisabled : initial_.forces[i].start_frame;
      out.accepted = true;
      break;
    }
    case CommandKind::set_camera_mode:
      mode_ = std::get<CameraModeChange>(p.cmd.payload).mode;
      out.accepted = true;
      break;
    case CommandKind::pause:
      paused_ = true;
      out.accepted = true;
      break;
    case CommandKind::resume:
      if (!error_.empty()) {
        out.reason = "simulation halted: " + error_ + "; reset first";
        break;
      }
      paused_ = false;
      out.accepted = true;
      break;
    case CommandKind::reset:
      state_ = initial_;
      step_budget_ = 0.0;
      error_.clear();
      out.accepted = true;
      break;
    case CommandKind::set_timescale:
      timescale_ = std::get<TimescaleChange>(p.cmd.payload).timescale;
      out.accepted = true;
      break;
  }
  return out;
}

FrameMessage PreviewSession::next_frame() {
  std::deque<Pending> batch;
  {
    std::lock_guard lock(queue_mutex_);
    batch.swap(queue_);
  }
  bool hold = next_index_ == 0;  // frame 0 shows the initial state
  for (const auto& p : batch) {
    outcomes_.push_back(apply(p));
    if (p.cmd.kind == CommandKind::reset) hold = true;
  }

  if (!hold && !paused_ && error_.empty()) {
    step_budget_ += decimation_ * timescale_;
    const int steps = static_cast<int>(std::floor(step_budget_ + 1e-9));
    step_budget_ -= steps;
    try {
      for (int i = 0; i < steps; ++i) sim::sim_step(state_);
    } catch (const sim::SimulationDiverged& e) {
      error_ = "diverged in the " + e.solver() + " solver at frame " + std::to_string(e.frame());
      paused_ = true;
    }
  }

  pipeline::RenderSettings settings;
  settings.width = settings.height = options_.resolution;
  settings.background = background_;
  const auto rendered = pipeline::render_scene(sim::scene_geometry(state_), colors_, camera(), settings);

  FrameMessage msg;
  msg.index = next_index_++;
  msg.timestamp_us = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start_).count());
  msg.png = encode_png(rendered.frame.rgb);
  msg.summary.object_count = config_.objects.size();
  for (const auto& f : state_.forces) msg.summary.active_fields += f.active_at(state_.frame);
  msg.summary.sim_frame = state_.frame;
  msg.summary.sim_time = state_.time;
  msg.summary.paused = paused_;
  msg.summary.camera_mode = mode_;
  msg.summary.timescale = timescale_;
  return msg;
}

std::vector<CommandOutcome> PreviewSession::take_outcomes() {
  std::vector<CommandOutcome> out;
  out.swap(outcomes_);
  return out;
}

}  // namespace physweave::preview
