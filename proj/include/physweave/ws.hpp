#pragma once

// Minimal RFC 6455 WebSocket framing plus blocking socket helpers.

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace physweave::ws {

class WsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Opcode : std::uint8_t { continuation = 0x0, text = 0x1, binary = 0x2, close = 0x8, ping = 0x9, pong = 0xA };

/// Sec-WebSocket-Accept for a client's Sec-WebSocket-Key.
std::string accept_key(std::string_view client_key);
std::string base64_encode(std::span<const std::uint8_t> bytes);

/// One frame. Client-to-server frames must be masked.
std::vector<std::uint8_t> encode_frame(Opcode op, std::span<const std::uint8_t> payload, bool fin = true,
                                       std::optional<std::uint32_t> mask = std::nullopt);

struct Frame {
  bool fin = true;
  Opcode op = Opcode::text;
  std::vector<std::uint8_t> payload;  // unmasked
};

struct Message {
  Opcode op = Opcode::text;  // text, binary, close, ping or pong
  std::vector<std::uint8_t> data;

  std::string text() const { return {data.begin(), data.end()}; }
};

/// Incremental decoder; reassembles fragmented data messages.
class Decoder {
 public:
  /// require_mask: reject unmasked frames (server side).
  explicit Decoder(bool require_mask, std::size_t max_message = 64u << 20)
      : require_mask_(require_mask), max_message_(max_message) {}

  void feed(std::span<const std::uint8_t> bytes);
  /// Next complete message, if any. Throws WsError on protocol violations.
  std::optional<Message> next();

 private:
  std::optional<Frame> next_frame();

  bool require_mask_;
  std::size_t max_message_;
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::optional<Message> partial_;
};

/// Owning TCP socket.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  static Socket connect(const std::string& host, int port);
  /// Binds and listens; port 0 picks a free port. Throws WsError when the
  /// port is taken.
  static Socket listen(const std::string& host, int port);

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int local_port() const;

  void send_all(std::span<const std::uint8_t> bytes) const;
  void send_all(std::string_view text) const;
  /// Bytes read; 0 on orderly shutdown; nullopt on timeout.
  std::optional<std::size_t> recv_some(std::span<std::uint8_t> buf, std::chrono::milliseconds timeout) const;
  /// Stops blocking reads and writes on every thread.
  void shutdown() const;
  void close();

 private:
  int fd_ = -1;
};

/// Blocking client used by tests and probes.
class Client {
 public:
  /// Performs the opening handshake on `path`.
  static Client connect(const std::string& host, int port, const std::string& path = "/ws");

  void send_text(std::string_view text);
  void send_binary(std::span<const std::uint8_t> bytes);
  /// Next data message (pings are answered); nullopt on timeout or close.
  std::optional<Message> receive(std::chrono::milliseconds timeout);
  void close();

 private:
  Socket sock_;
  Decoder decoder_{false};
  std::uint32_t mask_state_ = 0x9E3779B9u;
  bool closed_ = false;

  std::uint32_t next_mask();
};

}  // namespace physweave::ws
