#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "hybridrt/agent/acl.hpp"
#include "hybridrt/backchannel/socket.hpp"

namespace hybridrt::agent {

/// Node part of an agent id "name@node"; empty when there is none.
std::string node_of(std::string_view agent_id);

/// Delivers ACL messages between agents. Agents on this node are reached
/// directly; agents on other nodes through kind 0x04 frames over TCP.
/// Every message is serialized on send, including local ones.
class MessageTransport {
 public:
  using Deliver = std::function<void(AclMessage)>;

  /// Conversation used for orchestration traffic; not counted.
  static constexpr const char* kControlConversation = "control";

  explicit MessageTransport(std::string node_id);
  ~MessageTransport();

  MessageTransport(const MessageTransport&) = delete;
  MessageTransport& operator=(const MessageTransport&) = delete;

  const std::string& node_id() const { return node_id_; }

  void register_agent(const std::string& agent_id, Deliver deliver);
  void unregister_agent(const std::string& agent_id);
  bool has_agent(const std::string& agent_id) const;
  std::vector<std::string> local_agents() const;

  /// Accepts frames from other nodes. Returns the bound port.
  std::uint16_t listen(const backchannel::HostPort& address);
  /// `broadcasts` controls whether BROADCAST messages fan out to that node.
  void add_peer(const std::string& node_id, const backchannel::HostPort& address,
                bool broadcasts = true);

  /// UnknownReceiver when the receiver is neither local nor on a known peer;
  /// TransportDown when a peer cannot be reached.
  void send(const AclMessage& message);

  std::uint64_t messages_sent() const { return sent_.load(); }
  std::map<std::string, std::uint64_t> sent_by_agent() const;
  /// Counted messages whose content names a channel or connection event.
  std::uint64_t lifecycle_messages() const { return lifecycle_.load(); }
  std::uint64_t bytes_sent() const { return bytes_.load(); }
  std::uint64_t deliveries() const { return deliveries_.load(); }

  void shutdown();

 private:
  struct Peer {
    backchannel::HostPort address;
    bool broadcasts = true;
    std::mutex mu;
    backchannel::Socket socket;
  };
  struct Session {
    backchannel::Socket socket;
    std::thread reader;
    std::atomic<bool> done{false};
  };

  void deliver_local(const AclMessage& message, const Bytes& encoded);
  void write_to_peer(Peer& peer, const Bytes& encoded);
  void accept_loop();
  void read_loop(Session* session);
  void count(const AclMessage& message, std::size_t bytes);

  std::string node_id_;

  mutable std::shared_mutex mu_;
  std::map<std::string, Deliver> agents_;
  std::map<std::string, std::shared_ptr<Peer>> peers_;

  std::atomic<bool> stopping_{false};
  backchannel::Listener listener_;
  std::thread acceptor_;
  std::mutex sessions_mu_;
  std::list<std::unique_ptr<Session>> sessions_;

  std::atomic<std::uint64_t> sent_{0};
  std::atomic<std::uint64_t> lifecycle_{0};
  std::atomic<std::uint64_t> bytes_{0};
  std::atomic<std::uint64_t> deliveries_{0};
  mutable std::mutex counts_mu_;
  std::map<std::string, std::uint64_t> per_agent_;
};

}  // namespace hybridrt::agent
