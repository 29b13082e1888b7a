#pragma once

#include <atomic>
#include <chrono>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "hybridrt/backchannel/socket.hpp"
#include "hybridrt/component.hpp"
#include "hybridrt/container.hpp"
#include "hybridrt/port.hpp"

namespace hybridrt::backchannel {

inline constexpr const char* kPullServerType = "TcpPullServer";
inline constexpr const char* kPullClientType = "TcpPullClient";

// Channel status events, dispatched by the adapters themselves so both ends
// learn about a channel without any agent-level message.
namespace channel_events {
inline constexpr const char* kListening = "channel_listening";
inline constexpr const char* kActive = "channel_active";
inline constexpr const char* kClosed = "channel_closed";
}  // namespace channel_events

inline constexpr std::chrono::milliseconds kDefaultConnectTimeout{5000};

/// Exports a local PROVIDED pull interface on a TCP port.
///
/// Properties: payload_type, listen_host (default 127.0.0.1), listen_port.
/// Each accepted connection is served on its own thread; pulls against the
/// local provider go through the bound "source" port.
class PullServerAdapter : public Component {
 public:
  ~PullServerAdapter() override;

  std::uint16_t port() const { return port_.load(); }
  std::uint64_t bytes_transferred() const { return bytes_.load(); }
  std::uint64_t channels_accepted() const { return accepted_.load(); }

 protected:
  std::vector<InterfaceDescriptor> interfaces() override;
  void validate(const std::string& key, const Scalar& value) const override;
  void on_activate() override;
  void on_deactivate() override;

 private:
  struct Session {
    Socket socket;
    std::atomic<bool> done{false};
    std::jthread thread;
  };

  void accept_loop(std::stop_token stop);
  void serve(Session& session);
  void stop_all();

  std::shared_ptr<RequiredPort> source_ = std::make_shared<RequiredPort>();
  Listener listener_;
  std::jthread acceptor_;
  std::mutex sessions_mu_;
  std::list<Session> sessions_;
  std::atomic<std::uint16_t> port_{0};
  std::atomic<std::uint64_t> bytes_{0};
  std::atomic<std::uint64_t> accepted_{0};
};

/// Presents a remote pull server as a local PROVIDED pull interface.
///
/// Properties: payload_type, server_address ("host:port"), timeout_ms.
/// Connects on activation. Not safe for concurrent pulls from several
/// threads beyond the internal serialization.
class PullClientAdapter : public Component {
 public:
  ~PullClientAdapter() override;

  DataEnvelope remote_pull(std::size_t max_items);
  bool connected() const;
  std::uint64_t bytes_transferred() const { return bytes_.load(); }

 protected:
  std::vector<InterfaceDescriptor> interfaces() override;
  void validate(const std::string& key, const Scalar& value) const override;
  void on_activate() override;
  void on_deactivate() override;

 private:
  class Endpoint;
  void mark_closed(std::uint64_t in_flight, const std::string& reason);

  mutable std::mutex mu_;
  Socket socket_;
  std::string remote_;
  bool closed_ = true;
  std::atomic<std::uint64_t> bytes_{0};
};

void register_backchannel_types(Container& container);

/// Loads a pull server adapter, binds it to the provider and starts
/// listening. Returns the adapter id.
std::string start_pull_server(Container& container, const std::string& context,
                              const InterfaceRef& provider, const HostPort& address,
                              std::string adapter_id = {});

/// Loads a pull client adapter, binds the consumer to it, configures the
/// remote address and connects. On failure the consumer is left unbound.
std::string open_pull_client(Container& container, const std::string& context,
                             const InterfaceRef& consumer, const HostPort& address,
                             std::chrono::milliseconds timeout = kDefaultConnectTimeout,
                             std::string adapter_id = {});

DataEnvelope remote_pull(Container& container, const std::string& adapter_id,
                         std::size_t max_items);

}  // namespace hybridrt::backchannel
