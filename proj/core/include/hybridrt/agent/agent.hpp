#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "hybridrt/agent/acl.hpp"
#include "hybridrt/agent/belief_store.hpp"
#include "hybridrt/agent/plan.hpp"
#include "hybridrt/container.hpp"

namespace hybridrt::agent {

class Agent;
class MessageTransport;

/// Application actions either finish within the call or report kPending to be
/// invoked again on the next cycle. Failures are thrown.
enum class ActionStatus { kDone, kPending };
using ActionFn = std::function<ActionStatus(Agent&, const std::vector<Term>&)>;

enum class PlanStatus { kPending, kSucceeded, kFailed };

using PlanId = std::uint64_t;

struct PlanReport {
  PlanStatus status = PlanStatus::kPending;
  std::string failed_leaf;  // directive text of the leaf that failed
  std::string error;
  std::uint64_t adopted_cycle = 0;
  std::uint64_t finished_cycle = 0;
};

/// Picks the order PAR branches are advanced in on a given cycle; must return
/// a permutation of 0..n-1.
using ParOrder = std::function<std::vector<std::size_t>(std::size_t n, std::uint64_t cycle)>;

/// Belief/plan agent over a component container.
///
/// A cycle runs: perceive, deliver the mailbox, evaluate commitments, advance
/// adopted plans, then the application hook. All agent state is guarded by
/// one recursive lock so actions and handlers may call back into the agent.
class Agent {
 public:
  using MessageHandler = std::function<bool(Agent&, const AclMessage&)>;
  using CycleHook = std::function<void(Agent&)>;

  explicit Agent(std::string id, Container* container = nullptr, MessageTransport* transport = nullptr);
  ~Agent();

  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  const std::string& id() const { return id_; }
  Container* container() const { return container_; }
  MessageTransport* transport() const { return transport_; }

  /// Context where create() loads components; the root by default.
  void set_context(std::string context) { context_ = std::move(context); }
  const std::string& context() const { return context_; }

  // Beliefs.
  bool assert_belief(const Term& atom);
  std::size_t retract_belief(const Term& pattern);
  std::vector<Substitution> query(const Term& pattern) const;
  bool believes(const Term& pattern) const;
  std::vector<Term> beliefs() const;

  /// Converts buffered events of focused components into beliefs.
  std::vector<Term> perceive();

  /// Runs one directive now. Returns the beliefs it asserted. ActionFailed on
  /// any failure, in which case nothing is asserted.
  std::vector<Term> execute(const Directive& directive);
  ActionStatus execute_step(const Directive& directive, std::vector<Term>* asserted = nullptr);

  void register_action(const std::string& name, ActionFn fn);

  PlanId adopt(PlanNode plan, const Substitution& bindings = {});
  /// Adopts the plan, once, on the first cycle in which the trigger holds.
  void commit(Term trigger, PlanNode plan);
  PlanReport plan_report(PlanId id) const;
  std::size_t pending_plans() const;

  void set_par_order(ParOrder order);
  void set_message_handler(MessageHandler handler);
  void set_cycle_hook(CycleHook hook);

  /// Thread-safe mailbox enqueue.
  void receive(AclMessage message);
  std::size_t mailbox_size() const;
  /// Sends through the transport with this agent as sender.
  void send(AclMessage message);
  std::uint64_t messages_sent() const { return sent_; }

  void cycle();
  std::uint64_t cycles() const { return cycles_; }

  std::vector<std::string> focused() const;
  void unfocus(const std::string& component);

  /// Directives executed successfully, in order.
  std::vector<std::string> action_log() const;

 private:
  struct PlanRun {
    PlanNode node;
    PlanStatus status = PlanStatus::kPending;
    std::size_t cursor = 0;
    std::vector<PlanRun> kids;
    bool started = false;
    std::string failed_leaf;
    std::string error;
  };
  struct Plan {
    PlanRun root;
    PlanReport report;
  };
  struct Commitment {
    Term trigger;
    PlanNode plan;
    bool fired = false;
  };

  static PlanRun make_run(PlanNode node);
  PlanStatus step(PlanRun& run);
  void start(PlanRun& run);
  void absorb_failure(PlanRun& parent, const PlanRun& child);
  void apply_event(const Event& event, std::vector<Term>& added);
  void focus_component(const std::string& component);
  std::vector<Term> run_builtin(const Directive& d);

  std::string id_;
  Container* container_;
  MessageTransport* transport_;
  std::string context_;

  mutable std::recursive_mutex mu_;
  BeliefStore beliefs_;
  std::map<std::string, ActionFn> actions_;
  std::map<PlanId, Plan> plans_;
  PlanId next_plan_ = 1;
  std::vector<Commitment> commitments_;
  ParOrder par_order_;
  MessageHandler message_handler_;
  CycleHook cycle_hook_;
  std::uint64_t cycles_ = 0;
  std::uint64_t sent_ = 0;
  std::vector<std::string> log_;
  std::map<std::string, HandlerId> focus_;

  mutable std::mutex inbox_mu_;
  std::deque<AclMessage> mailbox_;
  std::deque<Event> perceived_;
};

/// Adopts the plan and cycles the agent until the plan settles or max_cycles
/// pass. PlanFailed names the failing leaf.
PlanReport run_plan(Agent& agent, const PlanNode& plan, std::size_t max_cycles = 1000);

/// Scalar carried by a constant term: integers, reals and true/false are
/// recognised, everything else stays a string.
Scalar scalar_of(const Term& t);
Term term_of(const Scalar& s);

/// Cycles an agent on its own thread at a fixed period.
class AgentRunner {
 public:
  AgentRunner(std::shared_ptr<Agent> agent, std::chrono::milliseconds period);
  ~AgentRunner();

  void start();
  void stop();
  Agent& agent() { return *agent_; }

 private:
  std::shared_ptr<Agent> agent_;
  std::chrono::milliseconds period_;
  std::jthread thread_;
};

}  // namespace hybridrt::agent
