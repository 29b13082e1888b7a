#include "hybridrt/backchannel/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <fmt/format.h>

#include "hybridrt/error.hpp"

namespace hybridrt::backchannel {

namespace {

sockaddr_in resolve(const HostPort& address) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(address.port);
  if (inet_pton(AF_INET, address.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  if (getaddrinfo(address.host.c_str(), nullptr, &hints, &result) != 0 || result == nullptr) {
    fail(Errc::kInvalidArgument, "cannot resolve host " + address.host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(result->ai_addr)->sin_addr;
  freeaddrinfo(result);
  return addr;
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

HostPort HostPort::parse(const std::string& text) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    fail(Errc::kInvalidArgument, "expected host:port, got '" + text + "'");
  }
  HostPort out;
  out.host = text.substr(0, colon);
  const std::string port_text = text.substr(colon + 1);
  long port = -1;
  try {
    std::size_t used = 0;
    port = std::stol(port_text, &used);
    if (used != port_text.size()) port = -1;
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 1 || port > 65535) fail(Errc::kInvalidArgument, "port out of range in '" + text + "'");
  out.port = static_cast<std::uint16_t>(port);
  return out;
}

std::string HostPort::to_string() const { return fmt::format("{}:{}", host, port); }

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

void Socket::send_all(std::span<const char> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) fail(Errc::kChannelClosed, "send failed: " + errno_text());
    sent += static_cast<std::size_t>(n);
  }
}

void Socket::recv_exact(char* out, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    ssize_t r = ::recv(fd_, out + got, n - got, 0);
    if (r < 0 && errno == EINTR) continue;
    if (r == 0) fail(Errc::kChannelClosed, "peer closed the connection");
    if (r < 0) fail(Errc::kChannelClosed, "recv failed: " + errno_text());
    got += static_cast<std::size_t>(r);
  }
}

std::size_t Socket::write_frame(const Frame& frame) {
  Bytes wire = encode_frame(frame);
  send_all(wire);
  return wire.size();
}

Frame Socket::read_frame() {
  char header[5];
  recv_exact(header, 4);
  const std::uint32_t length = get_u32_be(header);
  if (length < 1 || length > kMaxFrameLength) fail(Errc::kMalformedFrame, "bad frame length");
  recv_exact(header + 4, 1);
  const auto kind = static_cast<std::uint8_t>(header[4]);
  if (!valid_kind(kind)) fail(Errc::kMalformedFrame, "unknown frame kind");
  Frame frame{static_cast<FrameKind>(kind), Bytes(length - 1, '\0')};
  if (length > 1) recv_exact(frame.body.data(), length - 1);
  return frame;
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::string Socket::peer_address() const {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (fd_ < 0 || getpeername(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) return "?";
  char text[INET_ADDRSTRLEN] = {};
  inet_ntop(AF_INET, &addr.sin_addr, text, sizeof(text));
  return fmt::format("{}:{}", text, ntohs(addr.sin_port));
}

Socket connect_to(const HostPort& address, std::chrono::milliseconds timeout) {
  sockaddr_in addr = resolve(address);
  Socket socket(::socket(AF_INET, SOCK_STREAM, 0));
  if (!socket.valid()) fail(Errc::kConnectionRefused, "socket() failed: " + errno_text());
  int flags = fcntl(socket.fd(), F_GETFL, 0);
  fcntl(socket.fd(), F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(socket.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  if (rc != 0 && errno != EINPROGRESS) {
    fail(Errc::kConnectionRefused, address.to_string() + ": " + errno_text());
  }
  if (rc != 0) {
    pollfd pfd{socket.fd(), POLLOUT, 0};
    int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (ready == 0) fail(Errc::kTimeout, "connecting to " + address.to_string());
    int err = 0;
    socklen_t len = sizeof(err);
    getsockopt(socket.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (ready < 0 || err != 0) {
      fail(Errc::kConnectionRefused, address.to_string() + ": " + std::strerror(err ? err : errno));
    }
  }
  fcntl(socket.fd(), F_SETFL, flags);
  int one = 1;
  setsockopt(socket.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return socket;
}

Listener Listener::open(const HostPort& address) {
  sockaddr_in addr = resolve(address);
  Socket socket(::socket(AF_INET, SOCK_STREAM, 0));
  if (!socket.valid()) fail(Errc::kPortUnavailable, "socket() failed: " + errno_text());
  int one = 1;
  setsockopt(socket.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(socket.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(socket.fd(), 64) != 0) {
    fail(Errc::kPortUnavailable, address.to_string() + ": " + errno_text());
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  getsockname(socket.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
  Listener listener;
  listener.socket_ = std::move(socket);
  listener.port_ = ntohs(bound.sin_port);
  return listener;
}

std::optional<Socket> Listener::accept(std::chrono::milliseconds wait) {
  if (!socket_.valid()) return std::nullopt;
  pollfd pfd{socket_.fd(), POLLIN, 0};
  int ready = ::poll(&pfd, 1, static_cast<int>(wait.count()));
  if (ready <= 0) return std::nullopt;
  int fd = ::accept(socket_.fd(), nullptr, nullptr);
  if (fd < 0) return std::nullopt;
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return Socket(fd);
}

}  // namespace hybridrt::backchannel
