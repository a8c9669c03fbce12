#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <poll.h>
#include <sys/socket.h>

#include "json.hpp"
#include "physweave/pipeline.hpp"
#include "physweave/preview.hpp"

namespace physweave::preview {

using nlohmann::ordered_json;

namespace {

constexpr std::size_t kMaxRequestHead = 16 * 1024;

// Fallback page for GET /scene when no UI bundle is configured.
constexpr std::string_view kViewerHtml = R"html(<!doctype html>
<html><head><meta charset="utf-8"><title>physweave preview</title>
<style>body{font:14px sans-serif;margin:1em}canvas{border:1px solid #888;cursor:crosshair}</style></head>
<body>
<canvas id="view" width="256" height="256"></canvas>
<div><button data-cmd="pause">pause</button><button data-cmd="resume">resume</button>
<button data-cmd="reset">reset</button>
<select id="mode"><option>none</option><option>orbit_xy_cw</option><option>orbit_xy_ccw</option>
<option>orbit_yz_cw</option><option>orbit_yz_ccw</option><option>lateral</option><option>descent</option></select>
<span id="info">connecting</span></div>
<script>
const view = document.getElementById('view'), ctx = view.getContext('2d'), info = document.getElementById('info');
const ws = new WebSocket((location.protocol === 'https:' ? 'wss://' : 'ws://') + location.host + '/ws');
ws.binaryType = 'arraybuffer';
const send = (o) => ws.readyState === 1 && ws.send(JSON.stringify(o));
ws.onmessage = async (ev) => {
  if (typeof ev.data === 'string') { info.textContent = ev.data; return; }
  const dv = new DataView(ev.data);
  if (dv.getUint8(0) !== 1 || dv.getUint8(1) !== 1) return;
  const slen = dv.getUint32(22);
  const summary = JSON.parse(new TextDecoder().decode(new Uint8Array(ev.data, 26, slen)));
  const bmp = await createImageBitmap(new Blob([new Uint8Array(ev.data, 26 + slen)], {type: 'image/png'}));
  view.width = bmp.width; view.height = bmp.height; ctx.drawImage(bmp, 0, 0);
  info.textContent = 'frame ' + Number(dv.getBigUint64(6)) + ' t=' + summary.sim_time.toFixed(2) + 's' +
                     (summary.paused ? ' (paused)' : '');
};
ws.onclose = () => { info.textContent = 'disconnected'; };
let press = null;
view.onmousedown = (e) => { press = [e.offsetX, e.offsetY]; };
view.onmouseup = (e) => {
  if (!press) return;
  const dx = e.offsetX - press[0], dy = e.offsetY - press[1], len = Math.hypot(dx, dy);
  if (len > 0) send({type: 'apply_point_force', x_px: press[0], y_px: press[1], dir_x: dx / len, dir_y: dy / len,
                     strength: Math.min(len / 50, 5)});
  press = null;
};
document.querySelectorAll('button').forEach((b) => { b.onclick = () => send({type: b.dataset.cmd}); });
document.getElementById('mode').onchange = (e) => send({type: 'set_camera_mode', mode: e.target.value});
</script></body></html>
)html";

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

struct Request {
  std::string method, path;
  std::vector<std::pair<std::string, std::string>> headers;  // lower-case names

  std::string header(const std::string& name) const {
    for (const auto& [k, v] : headers) {
      if (k == name) return v;
    }
    return "";
  }
};

Request parse_request(const std::string& head) {
  std::istringstream in(head);
  std::string line;
  Request r;
  std::getline(in, line);
  std::istringstream first(line);
  std::string version;
  first >> r.method >> r.path >> version;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    r.headers.emplace_back(lower(trim(line.substr(0, colon))), trim(line.substr(colon + 1)));
  }
  if (const auto q = r.path.find('?'); q != std::string::npos) r.path.resize(q);
  return r;
}

std::string http_response(int code, std::string_view reason, std::string_view type, std::string_view body) {
  std::ostringstream out;
  out << "HTTP/1.1 " << code << ' ' << reason << "\r\nContent-Type: " << type << "\r\nContent-Length: " << body.size()
      << "\r\nCache-Control: no-store\r\nConnection: close\r\n\r\n"
      << body;
  return out.str();
}

std::string content_type(const fs::path& p) {
  const std::string ext = lower(p.extension().string());
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".png") return "image/png";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

}  // namespace

// Per-connection state. The writer thread owns all sends so a slow client
// only ever delays itself.
struct PreviewServer::Client {
  std::uint64_t id = 0;
  ws::Socket sock;
  std::mutex m;
  std::condition_variable cv;
  std::shared_ptr<const std::vector<std::uint8_t>> pending_frame;  // latest only
  std::deque<std::vector<std::uint8_t>> control;                   // acks, pongs, close
  bool closed = false;
  std::uint64_t dropped = 0;
  std::thread writer;
};

PreviewServer::PreviewServer(std::unique_ptr<PreviewSession> session, ServerOptions options)
    : session_(std::move(session)), options_(std::move(options)) {
  if (!session_) throw PreviewError("preview server needs a session");
  if (!(options_.fps > 0.0)) throw PreviewError("preview fps must be positive");
}

PreviewServer::~PreviewServer() { stop(); }

void PreviewServer::start() {
  if (running_) return;
  try {
    listener_ = ws::Socket::listen(options_.host, options_.port);
  } catch (const ws::WsError& e) {
    throw PreviewError(e.what());
  }
  port_ = listener_.local_port();
  running_ = true;
  sim_thread_ = std::thread([this] { sim_loop(); });
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void PreviewServer::stop() {
  if (!running_.exchange(false)) return;
  listener_.shutdown();
  if (accept_thread_.joinable()) accept_thread_.join();
  if (sim_thread_.joinable()) sim_thread_.join();
  {
    std::lock_guard lock(clients_mutex_);
    for (const auto& c : clients_) {
      std::lock_guard cl(c->m);
      c->closed = true;
      c->sock.shutdown();
      c->cv.notify_all();
    }
  }
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(clients_mutex_);
    threads.swap(connection_threads_);
  }
  for (auto& t : threads) t.join();
  listener_.close();
  std::lock_guard lock(stop_mutex_);
  stop_cv_.notify_all();
}

void PreviewServer::wait() {
  std::unique_lock lock(stop_mutex_);
  stop_cv_.wait(lock, [this] { return !running_; });
}

std::string PreviewServer::status_json() const {
  ordered_json j;
  j["version"] = pipeline::kVersion;
  j["protocol_version"] = kProtocolVersion;
  j["port"] = port_;
  {
    std::lock_guard lock(status_mutex_);
    j["running"] = running_.load();
    j["frame_index"] = have_frame_ ? ordered_json(last_index_) : ordered_json(nullptr);
    j["sim_frame"] = last_summary_.sim_frame;
    j["sim_time"] = last_summary_.sim_time;
    j["paused"] = last_summary_.paused;
    j["camera_mode"] = render::to_string(last_summary_.camera_mode);
    j["timescale"] = last_summary_.timescale;
    j["objects"] = last_summary_.object_count;
    j["active_fields"] = last_summary_.active_fields;
    j["fields_enabled"] = fields_enabled_;
    j["fps"] = measured_fps_;
    j["target_fps"] = options_.fps;
    j["dropped_frames"] = dropped_frames_;
    j["error"] = error_.empty() ? ordered_json(nullptr) : ordered_json(error_);
  }
  j["resolution"] = session_->options().resolution;
  {
    std::lock_guard lock(clients_mutex_);
    j["clients"] = clients_.size();
  }
  return j.dump();
}

void PreviewServer::accept_loop() {
  while (running_) {
    pollfd pfd{listener_.fd(), POLLIN, 0};
    const int rc = ::poll(&pfd, 1, 100);
    if (rc <= 0 || !running_) continue;
    const int fd = ::accept(listener_.fd(), nullptr, nullptr);
    if (fd < 0) continue;
    std::lock_guard lock(clients_mutex_);
    connection_threads_.emplace_back([this, fd] { handle_connection(ws::Socket(fd)); });
  }
}

void PreviewServer::sim_loop() {
  const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / options_.fps));
  auto next = std::chrono::steady_clock::now();
  auto last = next;
  bool first = true;
  while (running_) {
    try {
      FrameMessage frame = session_->next_frame();
      for (const auto& o : session_->take_outcomes()) {
        ordered_json ack;
        ack["type"] = o.accepted ? "ack" : "rejected";
        ack["command"] = to_string(o.kind);
        ack["frame"] = o.frame;
        if (o.object_index >= 0) ack["object"] = o.object_index;
        if (!o.accepted) ack["reason"] = o.reason;
        send_text(o.client, ack.dump());
      }
      const auto now = std::chrono::steady_clock::now();
      {
        std::lock_guard lock(status_mutex_);
        last_summary_ = frame.summary;
        last_index_ = frame.index;
        have_frame_ = true;
        error_ = session_->error();
        fields_enabled_.clear();
        for (std::size_t i = 0; i < session_->configured_fields().size(); ++i) {
          fields_enabled_.push_back(session_->field_enabled(i));
        }
        const double dt = std::chrono::duration<double>(now - last).count();
        if (!first && dt > 0.0) measured_fps_ = measured_fps_ == 0.0 ? 1.0 / dt : 0.9 * measured_fps_ + 0.1 / dt;
      }
      last = now;
      first = false;
      broadcast(std::make_shared<const std::vector<std::uint8_t>>(encode_frame_message(frame)));
    } catch (const std::exception& e) {
      std::lock_guard lock(status_mutex_);
      error_ = e.what();
    }
    next += period;
    const auto now = std::chrono::steady_clock::now();
    if (next < now) next = now;  // running behind: do not try to catch up
    std::this_thread::sleep_until(next);
  }
}

void PreviewServer::broadcast(const std::shared_ptr<const std::vector<std::uint8_t>>& frame) {
  std::lock_guard lock(clients_mutex_);
  for (const auto& c : clients_) {
    std::lock_guard cl(c->m);
    if (c->closed) continue;
    if (c->pending_frame) {
      ++c->dropped;
      std::lock_guard sl(status_mutex_);
      ++dropped_frames_;
    }
    c->pending_frame = frame;
    c->cv.notify_one();
  }
}

void PreviewServer::send_text(std::uint64_t client_id, const std::string& text) {
  std::lock_guard lock(clients_mutex_);
  for (const auto& c : clients_) {
    if (c->id != client_id) continue;
    std::lock_guard cl(c->m);
    c->control.push_back(ws::encode_frame(
        ws::Opcode::text, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size())));
    c->cv.notify_one();
  }
}

void PreviewServer::drop_client(std::uint64_t id) {
  std::shared_ptr<Client> gone;
  {
    std::lock_guard lock(clients_mutex_);
    const auto it = std::find_if(clients_.begin(), clients_.end(), [&](const auto& c) { return c->id == id; });
    if (it == clients_.end()) return;
    gone = *it;
    clients_.erase(it);
  }
  {
    std::lock_guard cl(gone->m);
    gone->closed = true;
    gone->cv.notify_all();
  }
  if (gone->writer.joinable()) gone->writer.join();
}

void PreviewServer::handle_connection(ws::Socket sock) {
  std::string head;
  std::uint8_t buf[4096];
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  std::size_t end;
  try {
    while ((end = head.find("\r\n\r\n")) == std::string::npos) {
      if (!running_ || std::chrono::steady_clock::now() > deadline || head.size() > kMaxRequestHead) return;
      const auto n = sock.recv_some(buf, std::chrono::milliseconds(100));
      if (!n) continue;
      if (*n == 0) return;
      head.append(reinterpret_cast<const char*>(buf), *n);
    }
    const Request req = parse_request(head.substr(0, end + 2));
    if (req.method != "GET") {
      sock.send_all(http_response(405, "Method Not Allowed", "text/plain", "only GET is supported\n"));
      return;
    }
    if (req.path == "/ws") {
      const std::string key = req.header("sec-websocket-key");
      if (lower(req.header("upgrade")) != "websocket" || key.empty()) {
        sock.send_all(http_response(400, "Bad Request", "text/plain", "expected a WebSocket upgrade\n"));
        return;
      }
      sock.send_all("HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                    "Sec-WebSocket-Accept: " +
                    ws::accept_key(key) + "\r\n\r\n");
      // Keep kernel buffering to a few frames so a stalled client hits the
      // per-client drop path instead of queueing seconds of video.
      const int sndbuf = 64 * 1024;
      setsockopt(sock.fd(), SOL_SOCKET, SO_SNDBUF, &sndbuf, sizeof(sndbuf));
      auto client = std::make_shared<Client>();
      client->sock = std::move(sock);
      {
        std::lock_guard lock(clients_mutex_);
        client->id = next_client_++;
        clients_.push_back(client);
      }
      serve_websocket(client, head.substr(end + 4));
      return;
    }
    if (req.path == "/status") {
      sock.send_all(http_response(200, "OK", "application/json", status_json()));
      return;
    }
    if (req.path == "/") {
      sock.send_all("HTTP/1.1 302 Found\r\nLocation: /scene\r\nContent-Length: 0\r\nConnection: close\r\n\r\n");
      return;
    }
    if (req.path == "/scene" || req.path.rfind("/scene/", 0) == 0) {
      std::string rel = req.path.size() > 7 ? req.path.substr(7) : "";
      if (rel.empty()) rel = "index.html";
      if (options_.ui_dir.empty()) {
        if (rel == "index.html") sock.send_all(http_response(200, "OK", "text/html; charset=utf-8", kViewerHtml));
        else sock.send_all(http_response(404, "Not Found", "text/plain", "no UI bundle configured\n"));
        return;
      }
      const fs::path file = (options_.ui_dir / rel).lexically_normal();
      const auto root = options_.ui_dir.lexically_normal().string();
      if (rel.find("..") != std::string::npos || file.string().rfind(root, 0) != 0 || !fs::is_regular_file(file)) {
        sock.send_all(http_response(404, "Not Found", "text/plain", "not found\n"));
        return;
      }
      std::ifstream f(file, std::ios::binary);
      std::ostringstream body;
      body << f.rdbuf();
      sock.send_all(http_response(200, "OK", content_type(file), body.str()));
      return;
    }
    sock.send_all(http_response(404, "Not Found", "text/plain", "not found\n"));
  } catch (const ws::WsError&) {
    // Peer went away mid-request.
  }
}

void PreviewServer::serve_websocket(const std::shared_ptr<Client>& client, const std::string& leftover) {
  client->writer = std::thread([client] {
    for (;;) {
      std::vector<std::vector<std::uint8_t>> control;
      std::shared_ptr<const std::vector<std::uint8_t>> frame;
      {
        std::unique_lock lock(client->m);
        client->cv.wait(lock, [&] { return client->closed || client->pending_frame || !client->control.empty(); });
        if (client->closed) return;
        control.assign(client->control.begin(), client->control.end());
        client->control.clear();
        frame.swap(client->pending_frame);
      }
      try {
        for (const auto& c : control) client->sock.send_all(c);
        if (frame) client->sock.send_all(ws::encode_frame(ws::Opcode::binary, *frame));
      } catch (const ws::WsError&) {
        std::lock_guard lock(client->m);
        client->closed = true;
        return;
      }
    }
  });

  const auto queue_control = [&](std::vector<std::uint8_t> bytes) {
    std::lock_guard lock(client->m);
    client->control.push_back(std::move(bytes));
    client->cv.notify_one();
  };
  const auto reject = [&](const std::string& reason) {
    ordered_json j;
    j["type"] = "rejected";
    j["command"] = nullptr;
    j["reason"] = reason;
    const std::string text = j.dump();
    queue_control(ws::encode_frame(
        ws::Opcode::text, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size())));
  };

  ws::Decoder decoder(true, 1u << 20);
  decoder.feed(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(leftover.data()), leftover.size()));
  std::uint8_t buf[8192];
  try {
    while (running_) {
      {
        std::lock_guard lock(client->m);
        if (client->closed) break;
      }
      bool done = false;
      while (auto m = decoder.next()) {
        if (m->op == ws::Opcode::close) {
          queue_control(ws::encode_frame(ws::Opcode::close, {}));
          done = true;
          break;
        }
        if (m->op == ws::Opcode::ping) {
          queue_control(ws::encode_frame(ws::Opcode::pong, m->data));
        } else if (m->op == ws::Opcode::text) {
          try {
            session_->submit(parse_command(m->text()), client->id);
          } catch (const CommandError& e) {
            reject(e.what());
          }
        } else if (m->op == ws::Opcode::binary) {
          reject("commands are JSON text messages");
        }
      }
      if (done) {
        // Let the writer flush the close reply.
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        break;
      }
      const auto n = client->sock.recv_some(buf, std::chrono::milliseconds(100));
      if (!n) continue;
      if (*n == 0) break;
      decoder.feed(std::span<const std::uint8_t>(buf, *n));
    }
  } catch (const ws::WsError&) {
    // Protocol violation or reset: drop this client only.
  }
  drop_client(client->id);
  client->sock.shutdown();
}

}  // namespace physweave::preview
