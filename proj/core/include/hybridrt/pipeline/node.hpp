#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hybridrt/agent/agent.hpp"
#include "hybridrt/agent/transport.hpp"
#include "hybridrt/container.hpp"
#include "hybridrt/pipeline/policy.hpp"

namespace hybridrt::pipeline {

enum class Mode { kAclOnly, kHybrid };

std::string_view to_string(Mode mode);
std::optional<Mode> mode_from_string(std::string_view text);

inline constexpr const char* kOrchestratorId = "orchestrator@n0";

/// Everything the nodes of one run share. Node k (1-based) is "nK"; node 0
/// is the orchestrator.
struct RunConfig {
  Mode mode = Mode::kHybrid;
  std::size_t nodes = 1;
  std::string host = "127.0.0.1";
  std::uint16_t base_port = 0;  // 0 picks ephemeral ports (single process only)
  std::filesystem::path corpus_dir;
  std::filesystem::path claims_dir;
  std::filesystem::path index_dir;
  std::size_t batch = 8;
  std::size_t queue_capacity = 64;
  std::int64_t cycle_ms = 10;
  std::int64_t idle_ms = 2;
  std::size_t fetch_bundles = 1;
  std::int64_t fetch_timeout_ms = 2000;
  std::int64_t hotswap_after_docs = 0;  // 0 disables the converter swap
  std::int64_t translate_delay_ms = 0;  // per bundle, for slow-translator scenarios
  std::int64_t gather_delay_ms = 0;     // per bundle
  BalancePolicy policy;
  bool manager = true;
  std::vector<std::string> agents = {"g1", "g2", "t1", "t2", "i1", "i2"};

  static std::string node_name(std::size_t index) { return "n" + std::to_string(index); }
  /// Node hosting the i-th initial agent (round robin over n1..nN).
  std::size_t placement(std::size_t i) const { return i % nodes + 1; }
  std::uint16_t transport_port(std::size_t node) const;
  std::uint16_t pull_port(std::size_t node, std::size_t slot) const;

  /// Applies "key=value" overrides; InvalidArgument on an unknown key.
  void set(const std::string& key, const std::string& value);

  std::string to_json() const;
  static RunConfig from_json(std::string_view text);
};

/// Team of an agent name: g, t and i prefixes.
std::optional<Team> team_of_name(std::string_view name);

struct NodeStats {
  std::string node;
  std::uint64_t acl_messages = 0;
  std::uint64_t lifecycle_messages = 0;
  std::uint64_t acl_bytes = 0;
  std::map<std::string, std::uint64_t> sent_by_agent;
  std::uint64_t backchannel_bytes = 0;
  std::uint64_t channels_opened = 0;
  std::uint64_t channel_active_server = 0;
  std::uint64_t channel_active_client = 0;
  std::uint64_t docs_gathered = 0;
  std::uint64_t docs_translated = 0;
  std::uint64_t docs_indexed = 0;
  std::uint64_t malformed = 0;
  std::uint64_t hot_swaps = 0;
  std::uint64_t agents_created = 0;
  std::uint64_t agents_retired = 0;
  std::vector<std::string> management_log;
  std::map<std::string, std::vector<std::int64_t>> team_traces;

  std::string to_json() const;
  static NodeStats from_json(std::string_view text);
};

/// Sends the action as a REQUEST: CREATE goes to the platform agent of the
/// target node, everything else to the target agent. UnknownAgent when the
/// receiver cannot be reached.
void dispatch_action(agent::Agent& from, const ManagementAction& action);

class PipelineAgent;
class ManagerAgent;

/// One node of a pipeline run: a container, a message transport, a platform
/// agent that creates agents on request, and the pipeline agents placed here.
class Node {
 public:
  Node(RunConfig config, std::size_t index);
  ~Node();
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  /// Listens on this node's transport port and registers the other nodes as
  /// peers (plus the orchestrator, which never receives broadcasts).
  void start_transport(bool with_orchestrator = false);
  std::uint16_t transport_port() const { return transport_port_; }
  void add_peer(std::size_t node, std::uint16_t port);

  /// Starts the initial agents placed on this node, and the manager on n1.
  void start_pipeline();
  /// Creates a fresh agent of the team here. Returns its id.
  std::string spawn(Team team);

  /// Reaps retired agents and applies the converter swap trigger.
  void tick();
  /// Stops every agent, then unloads all components.
  void stop();

  NodeStats stats() const;
  std::vector<std::string> agent_ids() const;
  bool halted(const std::string& agent_id) const;
  std::vector<std::string> management_log() const;

  const RunConfig& config() const { return config_; }
  std::size_t index() const { return index_; }
  const std::string& name() const { return name_; }
  Container& container() { return container_; }
  agent::MessageTransport& transport() { return transport_; }

  /// Orchestration traffic addressed to "platform@nK" in the control
  /// conversation lands here.
  std::optional<agent::AclMessage> next_control(std::chrono::milliseconds wait);

  // Used by the agents of this node.
  std::size_t next_export_slot() { return next_slot_++; }
  std::int64_t load() const;
  void add_backchannel_bytes(std::uint64_t n) { retired_bc_bytes_ += n; }
  void note_channel_opened() { ++channels_opened_; }
  void note_retired_counters(std::uint64_t gathered, std::uint64_t translated, std::uint64_t indexed,
                             std::uint64_t malformed);

 private:
  void start_agent(std::unique_ptr<PipelineAgent> agent);
  bool on_platform_message(const agent::AclMessage& message);

  RunConfig config_;
  std::size_t index_;
  std::string name_;
  Container container_;
  agent::MessageTransport transport_;
  std::uint16_t transport_port_ = 0;
  std::shared_ptr<agent::Agent> platform_;
  std::unique_ptr<agent::AgentRunner> platform_runner_;
  std::unique_ptr<ManagerAgent> manager_;

  mutable std::mutex agents_mu_;
  std::vector<std::unique_ptr<PipelineAgent>> agents_;
  std::atomic<std::size_t> next_slot_{0};
  std::atomic<std::size_t> spawned_{0};
  std::atomic<std::uint64_t> created_{0};
  std::atomic<std::uint64_t> retired_{0};
  bool hot_swapped_ = false;
  bool stopped_ = false;

  std::atomic<std::uint64_t> retired_bc_bytes_{0};
  std::atomic<std::uint64_t> channels_opened_{0};
  std::atomic<std::uint64_t> active_server_{0};
  std::atomic<std::uint64_t> active_client_{0};
  std::atomic<std::uint64_t> retired_gathered_{0};
  std::atomic<std::uint64_t> retired_translated_{0};
  std::atomic<std::uint64_t> retired_indexed_{0};
  std::atomic<std::uint64_t> retired_malformed_{0};
  HandlerId channel_handler_ = 0;

  std::mutex control_mu_;
  std::condition_variable control_cv_;
  std::deque<agent::AclMessage> control_;
};

/// Body of "bench node": runs one node under an orchestrator until told to
/// shut down. Returns the process exit code.
int run_node_process(const RunConfig& config, std::size_t index);

}  // namespace hybridrt::pipeline
