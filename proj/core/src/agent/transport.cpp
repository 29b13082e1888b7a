#include "hybridrt/agent/transport.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hybridrt/error.hpp"

namespace hybridrt::agent {

using backchannel::Frame;
using backchannel::FrameKind;

namespace {

constexpr auto kConnectTimeout = std::chrono::milliseconds(2000);

bool names_channel_lifecycle(const AclMessage& m) {
  const Term* t = m.atom();
  if (!t) return false;
  return t->text().find("channel") != std::string::npos ||
         t->text().find("connect") != std::string::npos;
}

}  // namespace

std::string node_of(std::string_view agent_id) {
  auto at = agent_id.rfind('@');
  if (at == std::string_view::npos) return {};
  return std::string(agent_id.substr(at + 1));
}

MessageTransport::MessageTransport(std::string node_id) : node_id_(std::move(node_id)) {}

MessageTransport::~MessageTransport() { shutdown(); }

void MessageTransport::register_agent(const std::string& agent_id, Deliver deliver) {
  std::unique_lock lock(mu_);
  if (!agents_.emplace(agent_id, std::move(deliver)).second) {
    fail(Errc::kDuplicateId, fmt::format("agent '{}' already registered", agent_id));
  }
}

void MessageTransport::unregister_agent(const std::string& agent_id) {
  std::unique_lock lock(mu_);
  agents_.erase(agent_id);
}

bool MessageTransport::has_agent(const std::string& agent_id) const {
  std::shared_lock lock(mu_);
  return agents_.count(agent_id) > 0;
}

std::vector<std::string> MessageTransport::local_agents() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, _] : agents_) out.push_back(id);
  return out;
}

std::uint16_t MessageTransport::listen(const backchannel::HostPort& address) {
  listener_ = backchannel::Listener::open(address);
  acceptor_ = std::thread([this] { accept_loop(); });
  return listener_.port();
}

void MessageTransport::add_peer(const std::string& node_id, const backchannel::HostPort& address,
                                bool broadcasts) {
  auto peer = std::make_shared<Peer>();
  peer->address = address;
  peer->broadcasts = broadcasts;
  std::unique_lock lock(mu_);
  peers_[node_id] = std::move(peer);
}

std::map<std::string, std::uint64_t> MessageTransport::sent_by_agent() const {
  std::lock_guard lock(counts_mu_);
  return per_agent_;
}

void MessageTransport::count(const AclMessage& message, std::size_t bytes) {
  if (message.conversation_id == kControlConversation) return;
  sent_.fetch_add(1);
  bytes_.fetch_add(bytes);
  if (names_channel_lifecycle(message)) lifecycle_.fetch_add(1);
  std::lock_guard lock(counts_mu_);
  ++per_agent_[message.sender];
}

void MessageTransport::send(const AclMessage& message) {
  if (stopping_.load()) fail(Errc::kTransportDown, "transport is shut down");
  Bytes encoded = encode_acl(message);

  std::vector<std::shared_ptr<Peer>> targets;
  bool local = false;
  {
    std::shared_lock lock(mu_);
    if (message.is_broadcast()) {
      local = true;
      for (const auto& [node, peer] : peers_) {
        if (peer->broadcasts) targets.push_back(peer);
      }
    } else if (agents_.count(message.receiver)) {
      local = true;
    } else {
      std::string node = node_of(message.receiver);
      auto it = node.empty() || node == node_id_ ? peers_.end() : peers_.find(node);
      if (it == peers_.end()) {
        fail(Errc::kUnknownReceiver, fmt::format("no route to agent '{}'", message.receiver));
      }
      targets.push_back(it->second);
    }
  }

  count(message, encoded.size());
  for (auto& peer : targets) write_to_peer(*peer, encoded);
  if (local) deliver_local(message, encoded);
}

void MessageTransport::deliver_local(const AclMessage& message, const Bytes& encoded) {
  std::vector<Deliver> sinks;
  {
    std::shared_lock lock(mu_);
    if (message.is_broadcast()) {
      for (const auto& [id, deliver] : agents_) {
        if (id != message.sender) sinks.push_back(deliver);
      }
    } else if (auto it = agents_.find(message.receiver); it != agents_.end()) {
      sinks.push_back(it->second);
    } else {
      spdlog::warn("transport {}: dropping message for unknown agent '{}'", node_id_, message.receiver);
      return;
    }
  }
  for (auto& deliver : sinks) {
    deliver(decode_acl(encoded));
    deliveries_.fetch_add(1);
  }
}

void MessageTransport::write_to_peer(Peer& peer, const Bytes& encoded) {
  Frame frame{FrameKind::kAclMessage, encoded};
  std::lock_guard lock(peer.mu);
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      if (!peer.socket.valid()) peer.socket = backchannel::connect_to(peer.address, kConnectTimeout);
      peer.socket.write_frame(frame);
      return;
    } catch (const Error& e) {
      peer.socket.close();
      if (attempt == 1) {
        fail(Errc::kTransportDown, fmt::format("peer {}: {}", peer.address.to_string(), e.what()));
      }
    }
  }
}

void MessageTransport::accept_loop() {
  while (!stopping_.load()) {
    auto sock = listener_.accept(std::chrono::milliseconds(100));
    {
      std::lock_guard lock(sessions_mu_);
      for (auto it = sessions_.begin(); it != sessions_.end();) {
        if ((*it)->done.load()) {
          (*it)->reader.join();
          it = sessions_.erase(it);
        } else {
          ++it;
        }
      }
      if (!sock) continue;
      auto session = std::make_unique<Session>();
      session->socket = std::move(*sock);
      Session* raw = session.get();
      sessions_.push_back(std::move(session));
      raw->reader = std::thread([this, raw] { read_loop(raw); });
    }
  }
}

void MessageTransport::read_loop(Session* session) {
  try {
    while (!stopping_.load()) {
      Frame frame = session->socket.read_frame();
      if (frame.kind != FrameKind::kAclMessage) {
        spdlog::warn("transport {}: ignoring frame kind {}", node_id_, static_cast<int>(frame.kind));
        continue;
      }
      AclMessage message = decode_acl(frame.body);
      deliver_local(message, frame.body);
    }
  } catch (const Error& e) {
    if (e.code() != Errc::kChannelClosed) spdlog::warn("transport {}: {}", node_id_, e.what());
  }
  session->done.store(true);
}

void MessageTransport::shutdown() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  listener_.close();
  std::list<std::unique_ptr<Session>> sessions;
  {
    std::lock_guard lock(sessions_mu_);
    sessions.swap(sessions_);
  }
  for (auto& s : sessions) s->socket.shutdown();
  for (auto& s : sessions) {
    if (s->reader.joinable()) s->reader.join();
  }
  std::shared_lock lock(mu_);
  for (auto& [_, peer] : peers_) {
    std::lock_guard plock(peer->mu);
    peer->socket.close();
  }
}

}  // namespace hybridrt::agent
