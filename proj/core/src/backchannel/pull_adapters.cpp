#include "hybridrt/backchannel/pull_adapters.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hybridrt/error.hpp"

namespace hybridrt::backchannel {

namespace {

constexpr std::string_view kStatusActive = "active";
constexpr std::string_view kStatusError = "error:";

std::atomic<std::uint64_t> next_adapter{1};

std::string status_error(const Error& e) {
  return fmt::format("{}{}:{}", kStatusError, static_cast<int>(e.code()), e.what());
}

[[noreturn]] void rethrow_status(const Bytes& body) {
  // "error:<code>:<text>"
  auto rest = body.substr(kStatusError.size());
  auto colon = rest.find(':');
  int code = std::stoi(rest.substr(0, colon));
  fail(static_cast<Errc>(code), colon == std::string::npos ? rest : rest.substr(colon + 1));
}

const InterfaceDescriptor& find_interface(const std::vector<InterfaceDescriptor>& list,
                                          const InterfaceRef& ref) {
  for (const auto& d : list) {
    if (d.name == ref.interface) return d;
  }
  fail(Errc::kIncompatibleInterfaces, ref.component + "." + ref.interface + " does not exist");
}

}  // namespace

// ---------------------------------------------------------------- server

PullServerAdapter::~PullServerAdapter() { stop_all(); }

std::vector<InterfaceDescriptor> PullServerAdapter::interfaces() {
  return {
      {"source", Style::kData, string_property("payload_type", "DocumentBundle"), Direction::kRequired,
       source_, DataFlow::kPull},
      {"status", Style::kEvent, "ChannelStatus", Direction::kProvided,
       std::make_shared<EventSourceEndpoint>()},
  };
}

void PullServerAdapter::validate(const std::string& key, const Scalar& value) const {
  if (key == "listen_port") {
    auto port = as_int(value);
    if (!port || *port < 1 || *port > 65535) fail(Errc::kRejectedValue, "listen_port out of range");
  }
}

void PullServerAdapter::on_activate() {
  HostPort address{string_property("listen_host", "127.0.0.1"),
                   static_cast<std::uint16_t>(int_property("listen_port", 0))};
  if (address.port == 0) fail(Errc::kRejectedValue, "listen_port is not configured");
  listener_ = Listener::open(address);
  port_ = listener_.port();
  acceptor_ = std::jthread([this](std::stop_token stop) { accept_loop(stop); });
  emit(channel_events::kListening, {{"address", address.to_string()}});
}

void PullServerAdapter::on_deactivate() { stop_all(); }

void PullServerAdapter::stop_all() {
  if (acceptor_.joinable()) {
    acceptor_.request_stop();
    acceptor_.join();
  }
  listener_.close();
  std::list<Session> sessions;
  {
    std::lock_guard lock(sessions_mu_);
    for (auto& s : sessions_) s.socket.shutdown();
    sessions.swap(sessions_);
  }
  for (auto& s : sessions) {
    if (s.thread.joinable()) s.thread.join();
  }
}

void PullServerAdapter::accept_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    auto socket = listener_.accept(std::chrono::milliseconds(50));
    if (!socket) continue;
    std::lock_guard lock(sessions_mu_);
    // Reap sessions whose peer already left.
    sessions_.remove_if([](Session& s) {
      if (!s.done.load()) return false;
      if (s.thread.joinable()) s.thread.join();
      return true;
    });
    auto& session = sessions_.emplace_back();
    session.socket = std::move(*socket);
    ++accepted_;
    session.thread = std::jthread([this, &session] { serve(session); });
  }
}

void PullServerAdapter::serve(Session& session) {
  const std::string remote = session.socket.peer_address();
  std::uint64_t in_flight = 0;
  try {
    for (;;) {
      Frame request = session.socket.read_frame();
      bytes_ += request.body.size() + 5;
      if (request.kind == FrameKind::kStatus) {
        if (request.body == kStatusActive) emit(channel_events::kActive, {{"remote", remote}});
        continue;
      }
      if (request.kind != FrameKind::kPullRequest) {
        fail(Errc::kMalformedFrame, "unexpected frame kind on pull channel");
      }
      const std::uint32_t max_items = decode_pull_request(request.body);
      Frame response;
      try {
        DataEnvelope envelope = source_->pull(max_items == 0 ? 1 : max_items);
        response = Frame{FrameKind::kPullResponse, serialize_items(envelope)};
        in_flight = envelope.item_count();
      } catch (const Error& e) {
        response = Frame{FrameKind::kStatus, status_error(e)};
        in_flight = 0;
      }
      bytes_ += session.socket.write_frame(response);
      in_flight = 0;
    }
  } catch (const Error& e) {
    if (in_flight > 0) spdlog::warn("pull channel to {} lost {} in-flight items", remote, in_flight);
    emit(channel_events::kClosed, {{"remote", remote},
                                   {"in_flight", static_cast<std::int64_t>(in_flight)},
                                   {"reason", std::string(e.what())}});
  }
  session.done = true;
}

// ---------------------------------------------------------------- client

class PullClientAdapter::Endpoint : public PullEndpoint {
 public:
  explicit Endpoint(PullClientAdapter& owner) : owner_(owner) {}
  DataEnvelope pull(std::size_t max_items) override { return owner_.remote_pull(max_items); }

 private:
  PullClientAdapter& owner_;
};

PullClientAdapter::~PullClientAdapter() {
  std::lock_guard lock(mu_);
  socket_.close();
}

std::vector<InterfaceDescriptor> PullClientAdapter::interfaces() {
  return {{"pull", Style::kData, string_property("payload_type", "DocumentBundle"), Direction::kProvided,
           std::make_shared<Endpoint>(*this), DataFlow::kPull}};
}

void PullClientAdapter::validate(const std::string& key, const Scalar& value) const {
  if (key == "server_address") {
    try {
      HostPort::parse(to_string(value));
    } catch (const Error& e) {
      fail(Errc::kRejectedValue, e.what());
    }
  } else if (key == "timeout_ms") {
    auto ms = as_int(value);
    if (!ms || *ms <= 0) fail(Errc::kRejectedValue, "timeout_ms must be positive");
  }
}

void PullClientAdapter::on_activate() {
  const std::string address_text = string_property("server_address");
  if (address_text.empty()) fail(Errc::kRejectedValue, "server_address is not configured");
  HostPort address = HostPort::parse(address_text);
  std::chrono::milliseconds timeout(int_property("timeout_ms", kDefaultConnectTimeout.count()));
  Socket socket = connect_to(address, timeout);
  // Tell the server side the channel is live; this replaces any
  // agent-level "connection successful" exchange.
  std::size_t written = socket.write_frame(Frame{FrameKind::kStatus, Bytes(kStatusActive)});
  {
    std::lock_guard lock(mu_);
    socket_ = std::move(socket);
    remote_ = address.to_string();
    closed_ = false;
  }
  bytes_ += written;
  emit(channel_events::kActive, {{"remote", address.to_string()}});
}

void PullClientAdapter::on_deactivate() {
  std::lock_guard lock(mu_);
  socket_.close();
  closed_ = true;
}

bool PullClientAdapter::connected() const {
  std::lock_guard lock(mu_);
  return !closed_;
}

void PullClientAdapter::mark_closed(std::uint64_t in_flight, const std::string& reason) {
  std::string remote;
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    closed_ = true;
    socket_.close();
    remote = remote_;
  }
  emit(channel_events::kClosed, {{"remote", remote},
                                 {"in_flight", static_cast<std::int64_t>(in_flight)},
                                 {"reason", reason}});
}

DataEnvelope PullClientAdapter::remote_pull(std::size_t max_items) {
  if (max_items == 0) fail(Errc::kInvalidArgument, "max_items must be positive");
  Frame response;
  std::string failure;
  {
    std::lock_guard lock(mu_);
    if (closed_) fail(Errc::kChannelClosed, "channel to " + remote_ + " is closed");
    try {
      bytes_ += socket_.write_frame(
          Frame{FrameKind::kPullRequest, encode_pull_request(static_cast<std::uint32_t>(max_items))});
      response = socket_.read_frame();
      bytes_ += response.body.size() + 5;
    } catch (const Error& e) {
      if (e.code() != Errc::kChannelClosed && e.code() != Errc::kMalformedFrame) throw;
      failure = e.what();
    }
  }
  if (!failure.empty()) {
    mark_closed(0, failure);
    fail(Errc::kChannelClosed, failure);
  }
  if (response.kind == FrameKind::kStatus && response.body.starts_with(kStatusError)) {
    rethrow_status(response.body);
  }
  if (response.kind != FrameKind::kPullResponse) {
    mark_closed(0, "unexpected frame kind");
    fail(Errc::kChannelClosed, "unexpected frame kind from pull server");
  }
  return deserialize_items(response.body, string_property("payload_type", "DocumentBundle"));
}

// ---------------------------------------------------------------- operations

void register_backchannel_types(Container& container) {
  container.register_component_type(kPullServerType, [] { return std::make_shared<PullServerAdapter>(); });
  container.register_component_type(kPullClientType, [] { return std::make_shared<PullClientAdapter>(); });
}

std::string start_pull_server(Container& container, const std::string& context,
                              const InterfaceRef& provider, const HostPort& address,
                              std::string adapter_id) {
  const InterfaceDescriptor descriptor = find_interface(container.describe_interfaces(provider.component), provider);
  if (descriptor.direction != Direction::kProvided || descriptor.style != Style::kData ||
      descriptor.flow != DataFlow::kPull) {
    fail(Errc::kIncompatibleInterfaces,
         provider.component + "." + provider.interface + " is not a PROVIDED DATA pull interface");
  }
  if (adapter_id.empty()) adapter_id = fmt::format("pullserver-{}", next_adapter++);
  auto record = container.load_component(context, adapter_id, kPullServerType,
                                         {{"payload_type", descriptor.payload_type},
                                          {"listen_host", address.host},
                                          {"listen_port", static_cast<std::int64_t>(address.port)}});
  try {
    container.bind({record.id, "source"}, provider);
    container.set_lifecycle(record.id, LifecycleState::kActive);
  } catch (...) {
    container.unload(record.id);
    throw;
  }
  return record.id;
}

std::string open_pull_client(Container& container, const std::string& context,
                             const InterfaceRef& consumer, const HostPort& address,
                             std::chrono::milliseconds timeout, std::string adapter_id) {
  const InterfaceDescriptor descriptor = find_interface(container.describe_interfaces(consumer.component), consumer);
  if (descriptor.direction != Direction::kRequired || descriptor.style != Style::kData ||
      descriptor.flow != DataFlow::kPull) {
    fail(Errc::kIncompatibleInterfaces,
         consumer.component + "." + consumer.interface + " is not a REQUIRED DATA pull interface");
  }
  if (adapter_id.empty()) adapter_id = fmt::format("pullclient-{}", next_adapter++);
  // (i) load the adapter
  auto record = container.load_component(context, adapter_id, kPullClientType,
                                         {{"payload_type", descriptor.payload_type}});
  try {
    // (ii) bind it to the consumer
    container.bind(consumer, {record.id, "pull"});
    // (iii) configure it with the server's address, then connect
    container.configure(record.id, "server_address", address.to_string());
    container.configure(record.id, "timeout_ms", static_cast<std::int64_t>(timeout.count()));
    container.set_lifecycle(record.id, LifecycleState::kActive);
  } catch (...) {
    container.unload(record.id);
    throw;
  }
  return record.id;
}

DataEnvelope remote_pull(Container& container, const std::string& adapter_id, std::size_t max_items) {
  auto adapter = container.component_as<PullClientAdapter>(adapter_id);
  if (!adapter) fail(Errc::kInvalidArgument, adapter_id + " is not a pull client adapter");
  if (!adapter->active()) fail(Errc::kProviderInactive, adapter_id + " is not active");
  return adapter->remote_pull(max_items);
}

}  // namespace hybridrt::backchannel
