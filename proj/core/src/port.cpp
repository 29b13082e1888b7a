#include "hybridrt/port.hpp"

#include <exception>

#include "hybridrt/component.hpp"
#include "hybridrt/error.hpp"

namespace hybridrt {

namespace {

void require_active(const Connection& connection) {
  if (!connection.provider || !connection.provider->active()) {
    fail(Errc::kProviderInactive, connection.server + " is not active");
  }
}

template <class T>
T& endpoint_as(const Connection& connection) {
  auto* typed = dynamic_cast<T*>(connection.endpoint.get());
  if (typed == nullptr) {
    fail(Errc::kIncompatibleInterfaces,
         connection.server + "." + connection.interface + " does not support this collaboration");
  }
  return *typed;
}

}  // namespace

DataEnvelope invoke_service(const Connection& connection, const DataEnvelope& request) {
  require_active(connection);
  auto& service = endpoint_as<ServiceEndpoint>(connection);
  try {
    return service.call(request);
  } catch (const Error& e) {
    if (e.code() == Errc::kProviderInactive) throw;
    fail(Errc::kProviderFault, e.what());
  } catch (const std::exception& e) {
    fail(Errc::kProviderFault, e.what());
  }
}

DataEnvelope pull_data(const Connection& connection, std::size_t max_items) {
  require_active(connection);
  return endpoint_as<PullEndpoint>(connection).pull(max_items);
}

void push_data(const Connection& connection, const DataEnvelope& envelope) {
  require_active(connection);
  endpoint_as<PushEndpoint>(connection).push(envelope);
}

AsyncLane::AsyncLane(Connection connection, std::size_t capacity, FailureSink on_failure)
    : connection_(std::move(connection)),
      capacity_(capacity == 0 ? 1 : capacity),
      on_failure_(std::move(on_failure)),
      worker_([this](std::stop_token stop) { run(stop); }) {}

AsyncLane::~AsyncLane() {
  worker_.request_stop();
  cv_.notify_all();
}

void AsyncLane::push(DataEnvelope envelope) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return queue_.size() < capacity_; });
  queue_.push_back(std::move(envelope));
  cv_.notify_all();
}

void AsyncLane::flush() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return queue_.empty() && in_delivery_ == 0; });
}

void AsyncLane::run(std::stop_token stop) {
  for (;;) {
    DataEnvelope next;
    {
      std::unique_lock lock(mu_);
      if (!cv_.wait(lock, stop, [&] { return !queue_.empty(); })) return;
      next = std::move(queue_.front());
      queue_.pop_front();
      ++in_delivery_;
      cv_.notify_all();
    }
    try {
      push_data(connection_, next);
    } catch (const std::exception& e) {
      if (on_failure_) on_failure_(connection_.server, e.what());
    }
    {
      std::lock_guard lock(mu_);
      --in_delivery_;
    }
    cv_.notify_all();
  }
}

RequiredPort::~RequiredPort() {
  std::lock_guard lock(lanes_mu_);
  lanes_.clear();
}

DataEnvelope RequiredPort::pull(std::size_t max_items) {
  Connection first;
  {
    std::lock_guard lock(mu_);
    if (connections_.empty()) fail(Errc::kProviderInactive, "pull interface has no provider");
    first = connections_.front();
  }
  return pull_data(first, max_items);
}

void RequiredPort::push(const DataEnvelope& envelope, SyncMode mode, Routing routing) {
  std::vector<Connection> targets;
  {
    std::lock_guard lock(mu_);
    if (connections_.empty()) fail(Errc::kNoBinding, "push interface is not bound");
    if (routing == Routing::kUnicast) {
      targets.push_back(connections_.front());
    } else {
      targets = connections_;
    }
  }
  for (const auto& target : targets) {
    if (mode == SyncMode::kSync) {
      push_data(target, envelope);
    } else {
      lane_for(target).push(envelope);
    }
  }
}

DataEnvelope RequiredPort::call(const DataEnvelope& request) {
  Connection first;
  {
    std::lock_guard lock(mu_);
    if (connections_.empty()) fail(Errc::kNoBinding, "service interface is not bound");
    first = connections_.front();
  }
  return invoke_service(first, request);
}

bool RequiredPort::bound() const {
  std::lock_guard lock(mu_);
  return !connections_.empty();
}

std::vector<Connection> RequiredPort::connections() const {
  std::lock_guard lock(mu_);
  return connections_;
}

void RequiredPort::flush_async() {
  std::lock_guard lock(lanes_mu_);
  for (auto& [key, lane] : lanes_) lane->flush();
}

void RequiredPort::connect(Connection connection) {
  std::lock_guard lock(mu_);
  connections_.push_back(std::move(connection));
}

void RequiredPort::disconnect(const std::string& server, const std::string& interface) {
  std::lock_guard lock(mu_);
  std::erase_if(connections_, [&](const Connection& c) {
    return c.server == server && c.interface == interface;
  });
}

void RequiredPort::set_failure_sink(AsyncLane::FailureSink sink) {
  std::lock_guard lock(lanes_mu_);
  failure_sink_ = std::move(sink);
}

AsyncLane& RequiredPort::lane_for(const Connection& connection) {
  std::lock_guard lock(lanes_mu_);
  auto key = connection.server + "." + connection.interface;
  auto& lane = lanes_[key];
  if (!lane) lane = std::make_unique<AsyncLane>(connection, async_capacity_, failure_sink_);
  return *lane;
}

}  // namespace hybridrt
