#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "hybridrt/event.hpp"
#include "hybridrt/interface.hpp"

namespace hybridrt {

class Component;

enum class SyncMode { kSync, kAsync };
enum class Routing { kUnicast, kMulticast };

/// One wired REQUIRED→PROVIDED edge as seen from the client side.
struct Connection {
  std::string server;
  std::string interface;
  std::shared_ptr<Endpoint> endpoint;
  std::shared_ptr<Component> provider;
};

// Collaboration primitives over a single connection. All of them check that
// the provider is ACTIVE first.
DataEnvelope invoke_service(const Connection& connection, const DataEnvelope& request);
DataEnvelope pull_data(const Connection& connection, std::size_t max_items);
void push_data(const Connection& connection, const DataEnvelope& envelope);

/// Bounded FIFO feeding one (client, server) pair from a dedicated thread.
/// push() blocks while the lane is full.
class AsyncLane {
 public:
  using FailureSink = std::function<void(const std::string& server, const std::string& what)>;

  AsyncLane(Connection connection, std::size_t capacity, FailureSink on_failure);
  ~AsyncLane();

  AsyncLane(const AsyncLane&) = delete;
  AsyncLane& operator=(const AsyncLane&) = delete;

  void push(DataEnvelope envelope);
  /// Blocks until everything enqueued so far has been delivered or failed.
  void flush();

 private:
  void run(std::stop_token stop);

  Connection connection_;
  std::size_t capacity_;
  FailureSink on_failure_;
  std::mutex mu_;
  std::condition_variable_any cv_;
  std::deque<DataEnvelope> queue_;
  std::size_t in_delivery_ = 0;
  std::jthread worker_;
};

/// Client-side endpoint of a REQUIRED interface. The container wires and
/// unwires connections; the owning component calls pull/push/call.
class RequiredPort : public Endpoint {
 public:
  explicit RequiredPort(std::size_t async_capacity = 64) : async_capacity_(async_capacity) {}
  ~RequiredPort() override;

  DataEnvelope pull(std::size_t max_items);
  void push(const DataEnvelope& envelope, SyncMode mode = SyncMode::kSync,
            Routing routing = Routing::kUnicast);
  DataEnvelope call(const DataEnvelope& request);

  bool bound() const;
  std::vector<Connection> connections() const;
  void flush_async();

  // Container-facing.
  void connect(Connection connection);
  void disconnect(const std::string& server, const std::string& interface);
  void set_failure_sink(AsyncLane::FailureSink sink);

 private:
  AsyncLane& lane_for(const Connection& connection);

  std::size_t async_capacity_;
  mutable std::mutex mu_;
  std::vector<Connection> connections_;
  AsyncLane::FailureSink failure_sink_;
  std::mutex lanes_mu_;
  std::map<std::string, std::unique_ptr<AsyncLane>> lanes_;
};

/// Client side of a REQUIRED EVENT interface.
class EventListenerPort : public Endpoint {
 public:
  explicit EventListenerPort(std::function<void(const Event&)> callback)
      : callback_(std::move(callback)) {}

  void deliver(const Event& event) const {
    if (callback_) callback_(event);
  }

 private:
  std::function<void(const Event&)> callback_;
};

}  // namespace hybridrt
