// Copyright 2026 The rsseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Proposal wire protocol v1: out-of-process workers behind ProposalBackend.
//
// Every message is a u32 little-endian byte length followed by a UTF-8 JSON
// body. The engine sends
//
//   {"v":1,"type":"generate","width":W,"height":H,"image_b64":...,
//    "points":[[x,y],...],"tau_iou":f,"tau_stab":f}
//
// and the worker answers each request, in order, with either
//
//   {"v":1,"type":"proposals","masks":[{"rle":[...],"pred_iou":f,"stability":f},...]}
//   {"v":1,"type":"error","message":s}
//
// Workers are reached over a child process's stdio or a TCP connection.

#pragma once

#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rsseg/backend.hpp"
#include "rsseg/core.hpp"
#include "rsseg/rle.hpp"

extern char** environ;

namespace rsseg {

inline constexpr int kWireVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 512u << 20;

// --- base64 ----------------------------------------------------------------

inline std::string base64_encode(std::span<const std::uint8_t> in) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const std::uint32_t v = (std::uint32_t{in[i]} << 16) | (std::uint32_t{in[i + 1]} << 8) | in[i + 2];
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
  }
  if (i < in.size()) {
    std::uint32_t v = std::uint32_t{in[i]} << 16;
    if (i + 1 < in.size()) v |= std::uint32_t{in[i + 1]} << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < in.size() ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string_view in) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (in.size() % 4 != 0) throw FormatError("base64: length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(in.size() / 4 * 3);
  for (std::size_t i = 0; i < in.size(); i += 4) {
    const bool last = i + 4 == in.size();
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = in[i + k];
      if (c == '=' && last && k >= 2) {
        v[k] = 0;
        ++pad;
        continue;
      }
      if (pad > 0 || (v[k] = value(c)) < 0) throw FormatError("base64: invalid character");
    }
    const std::uint32_t word = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>(word >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((word >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(word & 0xff));
  }
  return out;
}

// --- message bodies ----------------------------------------------------------

inline std::string encode_request(const ProposalRequest& request) {
  nlohmann::ordered_json j;
  j["v"] = kWireVersion;
  j["type"] = "generate";
  j["width"] = request.tile.width();
  j["height"] = request.tile.height();
  j["image_b64"] = base64_encode(request.tile.bytes());
  auto points = nlohmann::ordered_json::array();
  for (const Point& p : request.points) points.push_back({p.x, p.y});
  j["points"] = std::move(points);
  j["tau_iou"] = request.tau_iou;
  j["tau_stab"] = request.tau_stab;
  return j.dump();
}

/// Parses a generate request (the worker side of the protocol).
inline ProposalRequest decode_request(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("request is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("v").get<int>() != kWireVersion) throw ProtocolError("unsupported protocol version");
    if (j.at("type").get<std::string>() != "generate") throw ProtocolError("unexpected request type");
    const auto w = j.at("width").get<std::uint32_t>();
    const auto h = j.at("height").get<std::uint32_t>();
    auto pixels = base64_decode(j.at("image_b64").get<std::string>());
    if (pixels.size() != std::size_t{w} * h * 3) throw ProtocolError("image size does not match dims");
    ProposalRequest r;
    r.tile = RgbImage(w, h, std::move(pixels));
    for (const auto& p : j.at("points")) {
      r.points.push_back({p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()});
    }
    r.tau_iou = j.at("tau_iou").get<double>();
    r.tau_stab = j.at("tau_stab").get<double>();
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed request: ") + e.what());
  } catch (const FormatError& e) {
    throw ProtocolError(std::string("malformed request: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(std::string("malformed request: ") + e.what());
  }
}

inline std::string encode_proposals(const std::vector<MaskProposal>& proposals) {
  nlohmann::ordered_json j;
  j["v"] = kWireVersion;
  j["type"] = "proposals";
  auto masks = nlohmann::ordered_json::array();
  for (const MaskProposal& p : proposals) {
    nlohmann::ordered_json m;
    m["rle"] = p.mask.runs();
    m["pred_iou"] = p.pred_iou;
    m["stability"] = p.stability;
    masks.push_back(std::move(m));
  }
  j["masks"] = std::move(masks);
  return j.dump();
}

inline std::string encode_error(std::string_view message) {
  nlohmann::ordered_json j;
  j["v"] = kWireVersion;
  j["type"] = "error";
  j["message"] = message;
  return j.dump();
}

/// Decodes and validates a worker response to `request`. Error frames raise
/// BackendError carrying the worker's message; anything malformed raises
/// ProtocolError.
inline std::vector<MaskProposal> decode_response(std::string_view body,
                                                 const ProposalRequest& request) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("response is not valid JSON: ") + e.what());
  }
  const std::uint32_t w = request.tile.width();
  const std::uint32_t h = request.tile.height();
  std::vector<MaskProposal> out;
  try {
    if (!j.is_object()) throw ProtocolError("response is not a JSON object");
    if (j.at("v") != kWireVersion) throw ProtocolError("unsupported protocol version in response");
    const std::string type = j.at("type").get<std::string>();
    if (type == "error") {
      throw BackendError("worker error: " + j.at("message").get<std::string>());
    }
    if (type != "proposals") throw ProtocolError("unexpected response type '" + type + "'");
    for (const auto& m : j.at("masks")) {
      std::vector<std::uint32_t> runs;
      const auto& rle = m.at("rle");
      if (!rle.is_array()) throw ProtocolError("rle is not an array");
      runs.reserve(rle.size());
      for (const auto& r : rle) {
        if (!r.is_number_unsigned()) throw ProtocolError("rle entry is not a non-negative integer");
        const auto v = r.get<std::uint64_t>();
        if (v > 0xffffffffULL) throw ProtocolError("rle entry out of range");
        runs.push_back(static_cast<std::uint32_t>(v));
      }
      const auto& iou = m.at("pred_iou");
      const auto& stab = m.at("stability");
      if (!iou.is_number() || !stab.is_number()) throw ProtocolError("scores must be numbers");
      MaskProposal p;
      p.pred_iou = iou.get<double>();
      p.stability = stab.get<double>();
      if (!(p.pred_iou >= 0.0 && p.pred_iou <= 1.0) || !(p.stability >= 0.0 && p.stability <= 1.0)) {
        throw ProtocolError("score outside [0, 1]");
      }
      if (p.pred_iou < request.tau_iou || p.stability < request.tau_stab) {
        throw ProtocolError("mask scores below the requested thresholds");
      }
      try {
        p.mask = BinaryMask::from_runs(w, h, std::move(runs));
      } catch (const FormatError& e) {
        throw ProtocolError(std::string("invalid mask: ") + e.what());
      }
      out.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what());
  }
  return out;
}

// --- framing and transports --------------------------------------------------

/// A bidirectional byte stream.
class Stream {
 public:
  virtual ~Stream() = default;
  virtual void write_all(const void* data, std::size_t n) = 0;
  /// Returns false on clean EOF before the first byte; throws on EOF mid-way.
  virtual bool read_exact(void* data, std::size_t n) = 0;
};

/// Stream over a pair of file descriptors (pipes or one socket).
class FdStream : public Stream {
 public:
  FdStream(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}
  FdStream(const FdStream&) = delete;
  FdStream& operator=(const FdStream&) = delete;
  ~FdStream() override { close(); }

  void write_all(const void* data, std::size_t n) override {
    const auto* p = static_cast<const std::uint8_t*>(data);
    while (n > 0) {
      const ssize_t k = send_or_write(write_fd_, p, n);
      if (k < 0 && errno == EINTR) continue;
      if (k <= 0) throw TransportError(std::string("write to worker failed: ") + std::strerror(errno));
      p += k;
      n -= static_cast<std::size_t>(k);
    }
  }

  bool read_exact(void* data, std::size_t n) override {
    auto* p = static_cast<std::uint8_t*>(data);
    std::size_t got = 0;
    while (got < n) {
      const ssize_t k = ::read(read_fd_, p + got, n - got);
      if (k < 0 && errno == EINTR) continue;
      if (k < 0) throw TransportError(std::string("read from worker failed: ") + std::strerror(errno));
      if (k == 0) {
        if (got == 0) return false;
        throw TransportError("worker closed the stream mid-frame");
      }
      got += static_cast<std::size_t>(k);
    }
    return true;
  }

  /// Closes the write side only, signalling EOF to the peer.
  void close_write() {
    if (write_fd_ < 0) return;
    if (write_fd_ == read_fd_) {
      ::shutdown(write_fd_, SHUT_WR);
    } else {
      ::close(write_fd_);
      write_fd_ = -1;
    }
  }

  void close() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    read_fd_ = write_fd_ = -1;
  }

 private:
  static ssize_t send_or_write(int fd, const std::uint8_t* p, std::size_t n) {
    // MSG_NOSIGNAL keeps a dead TCP peer from raising SIGPIPE; pipes fall
    // back to write().
    const ssize_t k = ::send(fd, p, n, MSG_NOSIGNAL);
    if (k < 0 && errno == ENOTSOCK) return ::write(fd, p, n);
    return k;
  }

  int read_fd_;
  int write_fd_;
};

inline void write_frame(Stream& s, std::string_view body) {
  if (body.size() > kMaxFrameBytes) throw ProtocolError("frame exceeds size limit");
  const auto n = static_cast<std::uint32_t>(body.size());
  const std::uint8_t len[4] = {static_cast<std::uint8_t>(n), static_cast<std::uint8_t>(n >> 8),
                               static_cast<std::uint8_t>(n >> 16), static_cast<std::uint8_t>(n >> 24)};
  std::string frame(reinterpret_cast<const char*>(len), 4);
  frame.append(body);
  s.write_all(frame.data(), frame.size());
}

/// Reads one frame body; returns false on clean EOF.
inline bool read_frame(Stream& s, std::string& body) {
  std::uint8_t len[4];
  if (!s.read_exact(len, 4)) return false;
  const std::uint32_t n = std::uint32_t{len[0]} | (std::uint32_t{len[1]} << 8) |
                          (std::uint32_t{len[2]} << 16) | (std::uint32_t{len[3]} << 24);
  if (n > kMaxFrameBytes) throw ProtocolError("frame length " + std::to_string(n) + " exceeds limit");
  body.resize(n);
  if (n > 0 && !s.read_exact(body.data(), n)) throw TransportError("worker closed the stream mid-frame");
  return true;
}

/// Full frame bytes for a request, as written to the stream.
inline std::string request_frame(const ProposalRequest& request) {
  struct Capture : Stream {
    std::string bytes;
    void write_all(const void* d, std::size_t n) override {
      bytes.append(static_cast<const char*>(d), n);
    }
    bool read_exact(void*, std::size_t) override { return false; }
  } capture;
  write_frame(capture, encode_request(request));
  return std::move(capture.bytes);
}

/// A worker launched with `/bin/sh -c command`, spoken to over its stdio.
class ChildProcess : public Stream {
 public:
  explicit ChildProcess(const std::string& command) {
    // A worker dying mid-write must surface as EPIPE, not kill the engine.
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw TransportError("pipe failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw TransportError("pipe failed");
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
    std::string cmd = command;
    char sh[] = "/bin/sh";
    char dash_c[] = "-c";
    char* argv[] = {sh, dash_c, cmd.data(), nullptr};
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      throw TransportError("cannot start worker '" + command + "': " + std::strerror(rc));
    }
    stream_ = std::make_unique<FdStream>(from_child[0], to_child[1]);
  }
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() override {
    stream_->close_write();
    stream_->close();
    if (pid_ > 0) {
      int status = 0;
      while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
      }
    }
  }

  void write_all(const void* data, std::size_t n) override { stream_->write_all(data, n); }
  bool read_exact(void* data, std::size_t n) override { return stream_->read_exact(data, n); }
  pid_t pid() const { return pid_; }

 private:
  pid_t pid_ = -1;
  std::unique_ptr<FdStream> stream_;
};

inline std::unique_ptr<Stream> tcp_connect(const std::string& host, const std::string& port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) throw TransportError("cannot resolve " + host + ":" + port + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (addrinfo* a = res; a != nullptr; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError("cannot connect to " + host + ":" + port);
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<FdStream>(fd, fd);
}

/// Sends one request and reads its response over an established stream.
inline std::vector<MaskProposal> wire_call(Stream& stream, const ProposalRequest& request) {
  request.validate();
  write_frame(stream, encode_request(request));
  std::string body;
  if (!read_frame(stream, body)) throw TransportError("worker closed the stream before responding");
  return decode_response(body, request);
}

// --- backend -----------------------------------------------------------------

/// Backend that forwards each tile to an external worker. Connections are
/// pooled: a session leases one for the lifetime of its tile, so the pool
/// grows to the number of tiles in flight. A connection that saw a transport
/// or protocol failure is discarded instead of being returned.
class WireBackend : public ProposalBackend {
 public:
  using Connector = std::function<std::unique_ptr<Stream>()>;

  explicit WireBackend(Connector connect) : connect_(std::move(connect)) {}

  /// Parses "tcp://host:port" or treats the address as a shell command.
  static std::unique_ptr<WireBackend> from_address(const std::string& address) {
    constexpr std::string_view kTcp = "tcp://";
    if (address.starts_with(kTcp)) {
      const std::string rest = address.substr(kTcp.size());
      const auto colon = rest.rfind(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size()) {
        throw std::invalid_argument("worker address must be tcp://host:port");
      }
      std::string host = rest.substr(0, colon);
      std::string port = rest.substr(colon + 1);
      return std::make_unique<WireBackend>([host, port] { return tcp_connect(host, port); });
    }
    if (address.empty()) throw std::invalid_argument("empty worker command");
    return std::make_unique<WireBackend>([address] { return std::make_unique<ChildProcess>(address); });
  }

  std::unique_ptr<ProposalSession> open_session(const Rect&) override {
    return std::make_unique<Session>(*this, lease());
  }

  std::size_t idle_connections() const {
    std::lock_guard lock(mu_);
    return idle_.size();
  }

 private:
  class Session : public ProposalSession {
   public:
    Session(WireBackend& owner, std::unique_ptr<Stream> conn) : owner_(owner), conn_(std::move(conn)) {}
    ~Session() override {
      if (conn_ && healthy_) owner_.release(std::move(conn_));
    }

    std::vector<MaskProposal> generate(const ProposalRequest& request) override {
      if (!conn_) throw TransportError("worker connection is closed");
      try {
        return wire_call(*conn_, request);
      } catch (const ProtocolError&) {
        healthy_ = false;
        throw;
      } catch (const TransportError&) {
        healthy_ = false;
        throw;
      }
    }

   private:
    WireBackend& owner_;
    std::unique_ptr<Stream> conn_;
    bool healthy_ = true;
  };

  std::unique_ptr<Stream> lease() {
    {
      std::lock_guard lock(mu_);
      if (!idle_.empty()) {
        auto c = std::move(idle_.back());
        idle_.pop_back();
        return c;
      }
    }
    return connect_();
  }

  void release(std::unique_ptr<Stream> c) {
    std::lock_guard lock(mu_);
    idle_.push_back(std::move(c));
  }

  Connector connect_;
  mutable std::mutex mu_;
  std::vector<std::unique_ptr<Stream>> idle_;
};

}  // namespace rsseg
