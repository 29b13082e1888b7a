#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include "hybridrt/backchannel/frame.hpp"

namespace hybridrt::backchannel {

struct HostPort {
  std::string host;
  std::uint16_t port = 0;

  /// Accepts "host:port"; throws InvalidArgument on a bad host or a port
  /// outside 1..65535.
  static HostPort parse(const std::string& text);
  std::string to_string() const;

  friend bool operator==(const HostPort&, const HostPort&) = default;
};

/// Owning TCP socket. Reads and writes are blocking; any failure on an
/// established connection is reported as ChannelClosed.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();

  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  void send_all(std::span<const char> bytes);
  void recv_exact(char* out, std::size_t n);

  /// Returns the number of bytes written.
  std::size_t write_frame(const Frame& frame);
  Frame read_frame();

  /// Unblocks readers in other threads without releasing the descriptor.
  void shutdown();
  void close();

  std::string peer_address() const;

 private:
  int fd_ = -1;
};

Socket connect_to(const HostPort& address, std::chrono::milliseconds timeout);

class Listener {
 public:
  /// Throws PortUnavailable when the address cannot be bound.
  static Listener open(const HostPort& address);

  Listener() = default;
  Listener(Listener&&) noexcept = default;
  Listener& operator=(Listener&&) noexcept = default;

  /// Waits up to `wait` for a connection.
  std::optional<Socket> accept(std::chrono::milliseconds wait);
  std::uint16_t port() const { return port_; }
  bool valid() const { return socket_.valid(); }
  void close() { socket_.close(); }

 private:
  Socket socket_;
  std::uint16_t port_ = 0;
};

}  // namespace hybridrt::backchannel
