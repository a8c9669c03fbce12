#include "physweave/ws.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <openssl/evp.h>
#include <openssl/sha.h>

namespace physweave::ws {

namespace {

constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

bool is_control(Opcode op) { return static_cast<std::uint8_t>(op) & 0x8; }

bool valid_opcode(std::uint8_t op) { return op <= 0x2 || (op >= 0x8 && op <= 0xA); }

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string accept_key(std::string_view client_key) {
  const std::string joined = std::string(client_key) + std::string(kGuid);
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(joined.data()), joined.size(), digest);
  return base64_encode(std::span<const std::uint8_t>(digest, SHA_DIGEST_LENGTH));
}

std::vector<std::uint8_t> encode_frame(Opcode op, std::span<const std::uint8_t> payload, bool fin,
                                       std::optional<std::uint32_t> mask) {
  std::vector<std::uint8_t> out;
  out.reserve(payload.size() + 14);
  out.push_back(static_cast<std::uint8_t>((fin ? 0x80 : 0x00) | static_cast<std::uint8_t>(op)));
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  const std::uint64_t n = payload.size();
  if (n < 126) {
    out.push_back(static_cast<std::uint8_t>(mask_bit | n));
  } else if (n <= 0xFFFF) {
    out.push_back(mask_bit | 126);
    out.push_back(static_cast<std::uint8_t>(n >> 8));
    out.push_back(static_cast<std::uint8_t>(n));
  } else {
    out.push_back(mask_bit | 127);
    for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(n >> s));
  }
  if (mask) {
    const std::uint8_t key[4] = {static_cast<std::uint8_t>(*mask >> 24), static_cast<std::uint8_t>(*mask >> 16),
                                 static_cast<std::uint8_t>(*mask >> 8), static_cast<std::uint8_t>(*mask)};
    out.insert(out.end(), key, key + 4);
    for (std::size_t i = 0; i < payload.size(); ++i) out.push_back(payload[i] ^ key[i & 3]);
  } else {
    out.insert(out.end(), payload.begin(), payload.end());
  }
  return out;
}

void Decoder::feed(std::span<const std::uint8_t> bytes) {
  if (pos_ > 0 && pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<Frame> Decoder::next_frame() {
  const std::size_t avail = buf_.size() - pos_;
  if (avail < 2) return std::nullopt;
  const std::uint8_t* p = buf_.data() + pos_;
  if (p[0] & 0x70) throw WsError("reserved bits set");
  const std::uint8_t op = p[0] & 0x0F;
  if (!valid_opcode(op)) throw WsError("unknown opcode " + std::to_string(op));
  const bool masked = p[1] & 0x80;
  if (require_mask_ && !masked) throw WsError("client frame not masked");
  std::uint64_t len = p[1] & 0x7F;
  std::size_t head = 2;
  if (len == 126) {
    if (avail < 4) return std::nullopt;
    len = (std::uint64_t(p[2]) << 8) | p[3];
    head = 4;
  } else if (len == 127) {
    if (avail < 10) return std::nullopt;
    len = 0;
    for (int i = 0; i < 8; ++i) len = (len << 8) | p[2 + i];
    head = 10;
  }
  if (len > max_message_) throw WsError("frame too large");
  const Opcode opcode = static_cast<Opcode>(op);
  const bool fin = p[0] & 0x80;
  if (is_control(opcode) && (len > 125 || !fin)) throw WsError("invalid control frame");
  const std::size_t mask_len = masked ? 4 : 0;
  if (avail < head + mask_len + len) return std::nullopt;
  Frame f;
  f.fin = fin;
  f.op = opcode;
  f.payload.assign(p + head + mask_len, p + head + mask_len + len);
  if (masked) {
    const std::uint8_t* key = p + head;
    for (std::size_t i = 0; i < f.payload.size(); ++i) f.payload[i] ^= key[i & 3];
  }
  pos_ += head + mask_len + static_cast<std::size_t>(len);
  return f;
}

std::optional<Message> Decoder::next() {
  while (auto f = next_frame()) {
    if (is_control(f->op)) return Message{f->op, std::move(f->payload)};
    if (f->op == Opcode::continuation) {
      if (!partial_) throw WsError("continuation without a started message");
      partial_->data.insert(partial_->data.end(), f->payload.begin(), f->payload.end());
    } else {
      if (partial_) throw WsError("new message inside a fragmented one");
      partial_ = Message{f->op, std::move(f->payload)};
    }
    if (partial_->data.size() > max_message_) throw WsError("message too large");
    if (f->fin) {
      Message m = std::move(*partial_);
      partial_.reset();
      return m;
    }
  }
  return std::nullopt;
}

// --- Sockets -----------------------------------------------------------------

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Socket::shutdown() const {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Socket Socket::connect(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw WsError("cannot resolve " + host);
  }
  Socket s(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
  const int rc = s.valid() ? ::connect(s.fd(), res->ai_addr, res->ai_addrlen) : -1;
  freeaddrinfo(res);
  if (rc != 0) throw WsError("cannot connect to " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
  const int one = 1;
  setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return s;
}

Socket Socket::listen(const std::string& host, int port) {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) throw WsError(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw WsError("invalid listen address " + host);
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    const int err = errno;
    throw WsError(err == EADDRINUSE ? "port " + std::to_string(port) + " is already in use"
                                    : "bind to port " + std::to_string(port) + ": " + std::strerror(err));
  }
  if (::listen(s.fd(), 16) != 0) throw WsError(std::string("listen: ") + std::strerror(errno));
  return s;
}

int Socket::local_port() const {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) return -1;
  return ntohs(addr.sin_port);
}

void Socket::send_all(std::span<const std::uint8_t> bytes) const {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw WsError(std::string("send: ") + std::strerror(errno));
    sent += static_cast<std::size_t>(n);
  }
}

void Socket::send_all(std::string_view text) const {
  send_all(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::optional<std::size_t> Socket::recv_some(std::span<std::uint8_t> buf, std::chrono::milliseconds timeout) const {
  pollfd pfd{fd_, POLLIN, 0};
  for (;;) {
    const int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc < 0) throw WsError(std::string("poll: ") + std::strerror(errno));
    if (rc == 0) return std::nullopt;
    break;
  }
  for (;;) {
    const ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) return 0;  // reset counts as closed
    return static_cast<std::size_t>(n);
  }
}

// --- Client ------------------------------------------------------------------

std::uint32_t Client::next_mask() {
  // xorshift32; masking only needs unpredictability against proxies, not secrecy.
  mask_state_ ^= mask_state_ << 13;
  mask_state_ ^= mask_state_ >> 17;
  mask_state_ ^= mask_state_ << 5;
  return mask_state_;
}

Client Client::connect(const std::string& host, int port, const std::string& path) {
  Client c;
  c.sock_ = Socket::connect(host, port);
  const std::string key = "cGh5c3dlYXZlLXByb2JlLQ==";  // base64 of a fixed 16-byte nonce
  c.sock_.send_all("GET " + path + " HTTP/1.1\r\nHost: " + host + ":" + std::to_string(port) +
                   "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Key: " + key +
                   "\r\nSec-WebSocket-Version: 13\r\n\r\n");
  std::string head;
  std::uint8_t buf[4096];
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  std::size_t end = std::string::npos;
  while ((end = head.find("\r\n\r\n")) == std::string::npos) {
    if (std::chrono::steady_clock::now() > deadline) throw WsError("handshake timed out");
    const auto n = c.sock_.recv_some(buf, std::chrono::milliseconds(200));
    if (!n) continue;
    if (*n == 0) throw WsError("connection closed during handshake");
    head.append(reinterpret_cast<const char*>(buf), *n);
  }
  if (head.rfind("HTTP/1.1 101", 0) != 0) throw WsError("handshake rejected: " + head.substr(0, head.find("\r\n")));
  if (head.find(accept_key(key)) == std::string::npos) throw WsError("handshake: bad Sec-WebSocket-Accept");
  const std::string rest = head.substr(end + 4);
  c.decoder_.feed(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(rest.data()), rest.size()));
  return c;
}

void Client::send_text(std::string_view text) {
  sock_.send_all(encode_frame(
      Opcode::text, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()),
      true, next_mask()));
}

void Client::send_binary(std::span<const std::uint8_t> bytes) {
  sock_.send_all(encode_frame(Opcode::binary, bytes, true, next_mask()));
}

std::optional<Message> Client::receive(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::uint8_t buf[65536];
  while (!closed_) {
    while (auto m = decoder_.next()) {
      if (m->op == Opcode::ping) {
        sock_.send_all(encode_frame(Opcode::pong, m->data, true, next_mask()));
        continue;
      }
      if (m->op == Opcode::pong) continue;
      if (m->op == Opcode::close) {
        closed_ = true;
        return std::nullopt;
      }
      return m;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    const auto n = sock_.recv_some(buf, left);
    if (!n) return std::nullopt;
    if (*n == 0) {
      closed_ = true;
      return std::nullopt;
    }
    decoder_.feed(std::span<const std::uint8_t>(buf, *n));
  }
  return std::nullopt;
}

void Client::close() {
  if (!sock_.valid()) return;
  if (!closed_) {
    try {
      sock_.send_all(encode_frame(Opcode::close, {}, true, next_mask()));
    } catch (const WsError&) {
    }
  }
  closed_ = true;
  sock_.close();
}

}  // namespace physweave::ws
