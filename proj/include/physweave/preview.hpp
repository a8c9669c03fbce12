#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "physweave/camera.hpp"
#include "physweave/render.hpp"
#include "physweave/sceneconfig.hpp"
#include "physweave/simcore.hpp"
#include "physweave/ws.hpp"

namespace physweave::preview {

namespace fs = std::filesystem;

inline constexpr int kDefaultPort = 8787;
inline constexpr int kPreviewResolution = 256;
inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr double kMaxTimescale = 8.0;

class PreviewError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inapplicable command; the session is unaffected.
class CommandError : public PreviewError {
 public:
  using PreviewError::PreviewError;
};

// --- Commands ------------------------------------------------------------------

enum class CommandKind { apply_point_force, toggle_field, set_camera_mode, pause, resume, reset, set_timescale };

std::string_view to_string(CommandKind kind);

/// Pixel position in the preview image, image-space direction (x right, y
/// down) and strength as a velocity change in m/s.
struct PointForce {
  double x_px = 0.0, y_px = 0.0;
  double dir_x = 0.0, dir_y = 0.0;
  double strength = 0.0;
};
struct FieldToggle {
  int index = 0;
};
struct CameraModeChange {
  render::CameraMotion mode = render::CameraMotion::none;
};
struct TimescaleChange {
  double timescale = 1.0;
};

struct PreviewCommand {
  CommandKind kind = CommandKind::pause;
  std::variant<std::monostate, PointForce, FieldToggle, CameraModeChange, TimescaleChange> payload;
};

/// Parses one JSON command: {"type": ..., plus x_px, y_px, dir_x, dir_y,
/// strength | index | mode | timescale}. Throws CommandError with the reason.
PreviewCommand parse_command(std::string_view text);
std::string command_to_json(const PreviewCommand& cmd);

// --- Frames --------------------------------------------------------------------

struct FrameSummary {
  std::size_t object_count = 0;
  int active_fields = 0;
  int sim_frame = 0;
  double sim_time = 0.0;
  bool paused = false;
  render::CameraMotion camera_mode = render::CameraMotion::none;
  double timescale = 1.0;
};

struct FrameMessage {
  std::uint64_t index = 0;
  std::uint64_t timestamp_us = 0;  // since session start
  std::vector<std::uint8_t> png;
  FrameSummary summary;
};

enum class MessageType : std::uint8_t { frame = 1 };

/// [u8 version][u8 type][u32 payload length, big endian][payload]
/// Frame payload: [u64 index][u64 timestamp_us][u32 summary length]
///                [summary JSON][PNG bytes to the end], integers big endian.
std::vector<std::uint8_t> encode_frame_message(const FrameMessage& frame);
/// Throws PreviewError on a malformed buffer.
FrameMessage decode_frame_message(std::span<const std::uint8_t> bytes);

std::string summary_to_json(const FrameSummary& s);

// --- Session -------------------------------------------------------------------

struct SessionOptions {
  int resolution = kPreviewResolution;
  int output_fps = 15;
  std::uint64_t seed = 0;
  render::CameraMotion camera_mode = render::CameraMotion::none;
};

/// Result of one command, reported to the client that sent it.
struct CommandOutcome {
  std::uint64_t client = 0;
  CommandKind kind = CommandKind::pause;
  bool accepted = false;
  std::string reason;
  std::uint64_t frame = 0;  // first frame that reflects the command
  int object_index = -1;    // apply_point_force target
};

/// A live simulation with a command queue. next_frame() is called by exactly
/// one thread; submit() is safe from any thread.
class PreviewSession {
 public:
  PreviewSession(sceneconfig::SceneConfig config, std::vector<TriMesh> meshes, CameraPose base, RgbImage background,
                 SessionOptions options);

  /// Aligned meshes from out/aligned, the pose from out/camera.json (or the
  /// initial heuristic) and the scene background.
  static std::unique_ptr<PreviewSession> from_scene(const fs::path& scene_root, const fs::path& config_override,
                                                    const fs::path& out, const SessionOptions& options);

  void submit(PreviewCommand cmd, std::uint64_t client = 0);

  /// Applies queued commands, advances the simulation (unless paused) and
  /// renders. Frame k of an undisturbed session shows simulation frame
  /// k * decimation, like the exported video.
  FrameMessage next_frame();
  /// Outcomes of the commands applied since the previous call.
  std::vector<CommandOutcome> take_outcomes();

  const sim::SimState& state() const { return state_; }
  const sim::SimState& initial_state() const { return initial_; }
  CameraPose camera() const;
  int decimation() const { return decimation_; }
  const SessionOptions& options() const { return options_; }
  std::uint64_t frames_emitted() const { return next_index_; }
  const std::string& error() const { return error_; }
  const std::vector<sceneconfig::ForceFieldSpec>& configured_fields() const { return initial_.forces; }
  bool field_enabled(std::size_t index) const;

 private:
  struct Pending {
    PreviewCommand cmd;
    std::uint64_t client;
  };

  CommandOutcome apply(const Pending& p);
  void apply_point_force(const PointForce& f, CommandOutcome& out);

  sceneconfig::SceneConfig config_;
  std::vector<Rgb> colors_;
  CameraPose base_;
  RgbImage background_;
  SessionOptions options_;
  int decimation_ = 4;

  sim::SimState initial_;
  sim::SimState state_;
  bool paused_ = false;
  double timescale_ = 1.0;
  double step_budget_ = 0.0;
  render::CameraMotion mode_;
  std::string error_;

  std::uint64_t next_index_ = 0;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();

  std::mutex queue_mutex_;
  std::deque<Pending> queue_;
  std::vector<CommandOutcome> outcomes_;
};

/// Object hit by the ray through pixel (x, y): nearest triangle or particle
/// along the ray. Returns the object index and the world hit point.
std::optional<std::pair<int, Vec3>> pick_object(const std::vector<sim::ObjectGeometry>& geometry,
                                                const CameraPose& camera, int width, int height, double x_px,
                                                double y_px);

// --- Server --------------------------------------------------------------------

struct ServerOptions {
  std::string host = "0.0.0.0";
  int port = kDefaultPort;  // 0 picks a free port
  double fps = 15.0;        // pacing target
  fs::path ui_dir;          // static bundle for GET /scene; built-in viewer when empty
};

/// HTTP + WebSocket front end on one port: GET /scene (UI bundle),
/// GET /status (JSON), GET /ws (frames out, commands in).
class PreviewServer {
 public:
  PreviewServer(std::unique_ptr<PreviewSession> session, ServerOptions options);
  ~PreviewServer();
  PreviewServer(const PreviewServer&) = delete;
  PreviewServer& operator=(const PreviewServer&) = delete;

  /// Binds (PreviewError when the port is in use) and starts the loops.
  void start();
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();
  int port() const { return port_; }
  std::string status_json() const;

 private:
  struct Client;

  void accept_loop();
  void sim_loop();
  void handle_connection(ws::Socket sock);
  void serve_websocket(const std::shared_ptr<Client>& client, const std::string& leftover);
  void broadcast(const std::shared_ptr<const std::vector<std::uint8_t>>& frame);
  void send_text(std::uint64_t client_id, const std::string& text);
  void drop_client(std::uint64_t id);

  std::unique_ptr<PreviewSession> session_;
  ServerOptions options_;
  int port_ = 0;
  ws::Socket listener_;
  std::atomic<bool> running_{false};
  std::thread accept_thread_, sim_thread_;

  mutable std::mutex clients_mutex_;
  std::vector<std::shared_ptr<Client>> clients_;
  std::uint64_t next_client_ = 1;
  std::vector<std::thread> connection_threads_;

  mutable std::mutex status_mutex_;
  FrameSummary last_summary_;
  std::vector<bool> fields_enabled_;
  std::uint64_t last_index_ = 0;
  bool have_frame_ = false;
  double measured_fps_ = 0.0;
  std::uint64_t dropped_frames_ = 0;
  std::string error_;

  std::mutex stop_mutex_;
  std::condition_variable stop_cv_;
};

}  // namespace physweave::preview
