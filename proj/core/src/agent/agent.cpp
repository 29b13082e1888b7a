#include "hybridrt/agent/agent.hpp"

#include <charconv>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hybridrt/agent/transport.hpp"
#include "hybridrt/error.hpp"

namespace hybridrt::agent {

namespace {

const std::map<std::string, std::vector<std::size_t>>& builtin_arities() {
  static const std::map<std::string, std::vector<std::size_t>> table{
      {"create", {2}},     {"remove", {1}},     {"bind", {4}},  {"configure", {3}},
      {"activate", {1}},   {"deactivate", {1}}, {"focus", {1}}, {"lookup", {1, 2}},
  };
  return table;
}

bool is_builtin(const Directive& d) {
  auto it = builtin_arities().find(d.action);
  if (it == builtin_arities().end()) return false;
  for (auto n : it->second) {
    if (n == d.args.size()) return true;
  }
  return false;
}

const std::string& text_arg(const Directive& d, std::size_t i) {
  const Term& t = d.args.at(i);
  if (!t.is_constant()) {
    fail(Errc::kInvalidArgument, fmt::format("argument {} of {} must be a constant", i + 1, d.action));
  }
  return t.text();
}

}  // namespace

Scalar scalar_of(const Term& t) {
  const std::string& s = t.text();
  if (s == "true") return true;
  if (s == "false") return false;
  std::int64_t i = 0;
  auto [ip, iec] = std::from_chars(s.data(), s.data() + s.size(), i);
  if (iec == std::errc() && ip == s.data() + s.size() && !s.empty()) return i;
  double d = 0;
  auto [dp, dec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (dec == std::errc() && dp == s.data() + s.size() && !s.empty()) return d;
  return s;
}

Term term_of(const Scalar& s) { return Term::constant(hybridrt::to_string(s)); }

Agent::Agent(std::string id, Container* container, MessageTransport* transport)
    : id_(std::move(id)), container_(container), transport_(transport) {
  if (transport_) {
    transport_->register_agent(id_, [this](AclMessage m) { receive(std::move(m)); });
  }
}

Agent::~Agent() {
  if (transport_) transport_->unregister_agent(id_);
  if (container_) {
    for (const auto& [_, handler] : focus_) container_->events().deregister(handler);
  }
}

bool Agent::assert_belief(const Term& atom) {
  std::lock_guard lock(mu_);
  return beliefs_.add(atom);
}

std::size_t Agent::retract_belief(const Term& pattern) {
  std::lock_guard lock(mu_);
  return beliefs_.retract(pattern);
}

std::vector<Substitution> Agent::query(const Term& pattern) const {
  std::lock_guard lock(mu_);
  return beliefs_.query(pattern);
}

bool Agent::believes(const Term& pattern) const {
  std::lock_guard lock(mu_);
  return beliefs_.holds(pattern);
}

std::vector<Term> Agent::beliefs() const {
  std::lock_guard lock(mu_);
  return beliefs_.atoms();
}

void Agent::focus_component(const std::string& component) {
  if (focus_.count(component)) return;
  HandlerRegistration reg;
  reg.source = component;
  reg.name = kWildcard;
  reg.origin = HandlerOrigin::kAgent;
  reg.handler = [this](const Event& e) {
    std::lock_guard lock(inbox_mu_);
    perceived_.push_back(e);
    return Disposition::kContinue;
  };
  focus_[component] = container_->events().register_handler(std::move(reg));
}

void Agent::unfocus(const std::string& component) {
  std::lock_guard lock(mu_);
  auto it = focus_.find(component);
  if (it == focus_.end()) return;
  if (container_) container_->events().deregister(it->second);
  focus_.erase(it);
  beliefs_.retract(atom("focusingOn", component, v("t")));
}

std::vector<std::string> Agent::focused() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [c, _] : focus_) out.push_back(c);
  return out;
}

void Agent::apply_event(const Event& e, std::vector<Term>& added) {
  const Term comp = c(e.source);
  auto add = [&](Term t) {
    if (beliefs_.add(t)) added.push_back(std::move(t));
  };
  if (e.name == events::kActivated) {
    beliefs_.retract(atom("deactivated", comp));
    add(atom("activated", comp));
  } else if (e.name == events::kDeactivated) {
    beliefs_.retract(atom("activated", comp));
    add(atom("deactivated", comp));
  } else if (e.name == events::kCreated) {
    add(atom("created", comp));
    add(atom("component", comp));
  } else if (e.name == events::kRemoved) {
    for (const char* p : {"activated", "deactivated", "created", "component"}) {
      beliefs_.retract(atom(p, comp));
    }
    beliefs_.retract(atom("property", comp, v("k"), v("v")));
    add(atom("removed", comp));
  } else if (e.name == events::kProperty) {
    auto key = e.payload.find("key");
    auto value = e.payload.find("value");
    if (key == e.payload.end() || value == e.payload.end()) return;
    beliefs_.retract(atom("property", comp, term_of(key->second), v("v")));
    add(atom("property", comp, term_of(key->second), term_of(value->second)));
  } else {
    std::vector<Term> details;
    for (const auto& [_, value] : e.payload) details.push_back(term_of(value));
    add(atom("event", comp, Term::compound(e.name, std::move(details))));
  }
}

std::vector<Term> Agent::perceive() {
  std::deque<Event> batch;
  {
    std::lock_guard lock(inbox_mu_);
    batch.swap(perceived_);
  }
  std::lock_guard lock(mu_);
  std::vector<Term> added;
  for (const auto& e : batch) {
    apply_event(e, added);
    if (e.name == events::kRemoved) {
      if (auto it = focus_.find(e.source); it != focus_.end()) {
        container_->events().deregister(it->second);
        focus_.erase(it);
        beliefs_.retract(atom("focusingOn", e.source, v("t")));
      }
    }
  }
  return added;
}

std::vector<Term> Agent::run_builtin(const Directive& d) {
  if (!container_) fail(Errc::kInvalidArgument, "agent has no container");
  std::vector<Term> out;
  const std::string& a = d.action;
  if (a == "create") {
    ComponentRecord rec = container_->load_component(context_, text_arg(d, 0), text_arg(d, 1));
    out = {atom("created", rec.id), atom("component", rec.id)};
  } else if (a == "remove") {
    const std::string& id = text_arg(d, 0);
    container_->unload(id);
    if (auto it = focus_.find(id); it != focus_.end()) {
      container_->events().deregister(it->second);
      focus_.erase(it);
    }
    for (const char* p : {"activated", "deactivated", "created", "component"}) beliefs_.retract(atom(p, id));
    beliefs_.retract(atom("property", id, v("k"), v("v")));
    beliefs_.retract(atom("focusingOn", id, v("t")));
    out = {atom("removed", id)};
  } else if (a == "bind") {
    InterfaceRef client{text_arg(d, 0), text_arg(d, 1)};
    InterfaceRef server{text_arg(d, 2), text_arg(d, 3)};
    container_->bind(client, server);
    out = {atom("bound", atom("interface", client.component, client.interface),
                atom("interface", server.component, server.interface))};
  } else if (a == "configure") {
    const std::string& id = text_arg(d, 0);
    const std::string& key = text_arg(d, 1);
    Scalar value = scalar_of(d.args.at(2));
    container_->configure(id, key, value);
    beliefs_.retract(atom("property", id, key, v("v")));
    out = {atom("property", id, key, term_of(value))};
  } else if (a == "activate" || a == "deactivate") {
    const std::string& id = text_arg(d, 0);
    bool on = a == "activate";
    container_->set_lifecycle(id, on ? LifecycleState::kActive : LifecycleState::kDeactivated);
    beliefs_.retract(atom(on ? "deactivated" : "activated", id));
    out = {atom(on ? "activated" : "deactivated", id)};
  } else if (a == "focus") {
    const std::string& id = text_arg(d, 0);
    ComponentRecord rec = container_->record(id);
    focus_component(id);
    out = {atom("focusingOn", id, rec.type_id)};
  } else if (a == "lookup" && d.args.size() == 1) {
    const std::string& id = text_arg(d, 0);
    auto bindings = container_->bindings_of(id);
    for (const auto& iface : container_->describe_interfaces(id)) {
      std::string style(hybridrt::to_string(iface.style));
      if (iface.direction == Direction::kProvided) {
        out.push_back(atom("serverInterface", id, iface.name, style, iface.payload_type));
      } else {
        bool bound = std::any_of(bindings.begin(), bindings.end(), [&](const BindingRecord& b) {
          return b.client.component == id && b.client.interface == iface.name;
        });
        out.push_back(atom("clientInterface", id, iface.name, style, iface.payload_type,
                           bound ? "true" : "false"));
      }
    }
    beliefs_.retract(atom("clientInterface", id, v("i"), v("s"), v("t"), v("b")));
  } else if (a == "lookup") {
    std::string style(hybridrt::to_string(parse_style(text_arg(d, 0))));
    const std::string& type = text_arg(d, 1);
    for (const auto& ref : container_->broker(context_, parse_style(style), type)) {
      out.push_back(atom("serverInterface", ref.component, ref.interface, style, type));
    }
  }
  for (const auto& t : out) beliefs_.add(t);
  return out;
}

ActionStatus Agent::execute_step(const Directive& d, std::vector<Term>* asserted) {
  std::lock_guard lock(mu_);
  for (const auto& arg : d.args) {
    if (!arg.is_ground()) fail(Errc::kActionFailed, fmt::format("{}: unbound variable", d.to_string()));
  }
  try {
    if (is_builtin(d)) {
      auto out = run_builtin(d);
      if (asserted) *asserted = std::move(out);
      log_.push_back(d.to_string());
      return ActionStatus::kDone;
    }
    auto it = actions_.find(d.action);
    if (it == actions_.end()) fail(Errc::kActionFailed, fmt::format("unknown action {}", d.to_string()));
    ActionStatus st = it->second(*this, d.args);
    if (st == ActionStatus::kDone) log_.push_back(d.to_string());
    return st;
  } catch (const Error& e) {
    if (e.code() == Errc::kActionFailed) throw;
    fail(Errc::kActionFailed, fmt::format("{}: {}", d.to_string(), e.what()));
  } catch (const std::exception& e) {
    fail(Errc::kActionFailed, fmt::format("{}: {}", d.to_string(), e.what()));
  }
}

std::vector<Term> Agent::execute(const Directive& d) {
  std::vector<Term> out;
  execute_step(d, &out);
  return out;
}

void Agent::register_action(const std::string& name, ActionFn fn) {
  std::lock_guard lock(mu_);
  actions_[name] = std::move(fn);
}

PlanId Agent::adopt(PlanNode plan, const Substitution& bindings) {
  std::lock_guard lock(mu_);
  PlanId id = next_plan_++;
  Plan p;
  p.root.node = bindings.empty() ? std::move(plan) : substitute(plan, bindings);
  p.report.adopted_cycle = cycles_;
  plans_.emplace(id, std::move(p));
  return id;
}

void Agent::commit(Term trigger, PlanNode plan) {
  std::lock_guard lock(mu_);
  commitments_.push_back({std::move(trigger), std::move(plan), false});
}

PlanReport Agent::plan_report(PlanId id) const {
  std::lock_guard lock(mu_);
  auto it = plans_.find(id);
  if (it == plans_.end()) fail(Errc::kInvalidArgument, fmt::format("no plan {}", id));
  return it->second.report;
}

std::size_t Agent::pending_plans() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [_, p] : plans_) n += p.report.status == PlanStatus::kPending;
  return n;
}

void Agent::set_par_order(ParOrder order) {
  std::lock_guard lock(mu_);
  par_order_ = std::move(order);
}

void Agent::set_message_handler(MessageHandler handler) {
  std::lock_guard lock(mu_);
  message_handler_ = std::move(handler);
}

void Agent::set_cycle_hook(CycleHook hook) {
  std::lock_guard lock(mu_);
  cycle_hook_ = std::move(hook);
}

void Agent::receive(AclMessage message) {
  std::lock_guard lock(inbox_mu_);
  mailbox_.push_back(std::move(message));
}

std::size_t Agent::mailbox_size() const {
  std::lock_guard lock(inbox_mu_);
  return mailbox_.size();
}

void Agent::send(AclMessage message) {
  if (!transport_) fail(Errc::kTransportDown, fmt::format("agent {} has no transport", id_));
  message.sender = id_;
  transport_->send(message);
  std::lock_guard lock(mu_);
  ++sent_;
}

std::vector<std::string> Agent::action_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

Agent::PlanRun Agent::make_run(PlanNode node) {
  PlanRun run;
  run.node = std::move(node);
  return run;
}

void Agent::start(PlanRun& run) {
  run.started = true;
  if (run.node.op == PlanOp::kSeq || run.node.op == PlanOp::kPar) {
    for (const auto& child : run.node.children) run.kids.push_back(make_run(child));
  }
}

void Agent::absorb_failure(PlanRun& parent, const PlanRun& child) {
  if (parent.failed_leaf.empty()) {
    parent.failed_leaf = child.failed_leaf;
    parent.error = child.error;
  }
}

PlanStatus Agent::step(PlanRun& run) {
  if (run.status != PlanStatus::kPending) return run.status;
  if (!run.started) start(run);
  switch (run.node.op) {
    case PlanOp::kAct:
      try {
        if (execute_step(*run.node.action) == ActionStatus::kDone) run.status = PlanStatus::kSucceeded;
      } catch (const Error& e) {
        run.status = PlanStatus::kFailed;
        run.failed_leaf = run.node.action->to_string();
        run.error = e.what();
      }
      break;
    case PlanOp::kSeq:
      while (run.cursor < run.kids.size()) {
        PlanStatus s = step(run.kids[run.cursor]);
        if (s == PlanStatus::kPending) return s;
        if (s == PlanStatus::kFailed) {
          absorb_failure(run, run.kids[run.cursor]);
          run.status = PlanStatus::kFailed;
          return run.status;
        }
        ++run.cursor;
      }
      run.status = PlanStatus::kSucceeded;
      break;
    case PlanOp::kPar: {
      std::vector<std::size_t> order;
      if (par_order_) {
        order = par_order_(run.kids.size(), cycles_);
      } else {
        order.resize(run.kids.size());
        std::iota(order.begin(), order.end(), 0);
      }
      bool pending = false;
      for (std::size_t i : order) {
        PlanRun& kid = run.kids.at(i);
        bool was_pending = kid.status == PlanStatus::kPending;
        PlanStatus s = step(kid);
        if (s == PlanStatus::kPending) pending = true;
        if (s == PlanStatus::kFailed && was_pending) absorb_failure(run, kid);
      }
      if (pending) return PlanStatus::kPending;
      run.status = run.failed_leaf.empty() ? PlanStatus::kSucceeded : PlanStatus::kFailed;
      break;
    }
    case PlanOp::kDoWhen:
      if (run.kids.empty()) {
        auto matches = beliefs_.query(*run.node.condition);
        if (matches.empty()) return PlanStatus::kPending;
        run.kids.push_back(make_run(substitute(run.node.children.front(), matches.front())));
      }
      run.status = step(run.kids.front());
      if (run.status == PlanStatus::kFailed) absorb_failure(run, run.kids.front());
      break;
  }
  return run.status;
}

void Agent::cycle() {
  std::lock_guard lock(mu_);
  ++cycles_;
  perceive();

  std::deque<AclMessage> inbox;
  {
    std::lock_guard ilock(inbox_mu_);
    inbox.swap(mailbox_);
  }
  for (auto& m : inbox) {
    bool handled = false;
    if (message_handler_) {
      try {
        handled = message_handler_(*this, m);
      } catch (const std::exception& e) {
        spdlog::warn("agent {}: message handler failed: {}", id_, e.what());
        handled = true;
      }
    }
    if (!handled && m.atom()) {
      beliefs_.add(atom("message", std::string(to_string(m.performative)), m.sender, *m.atom()));
    }
  }

  for (auto& commitment : commitments_) {
    if (commitment.fired) continue;
    auto matches = beliefs_.query(commitment.trigger);
    if (matches.empty()) continue;
    commitment.fired = true;
    adopt(commitment.plan, matches.front());
  }

  for (auto& [id, plan] : plans_) {
    if (plan.report.status != PlanStatus::kPending) continue;
    PlanStatus s = step(plan.root);
    if (s == PlanStatus::kPending) continue;
    plan.report.status = s;
    plan.report.failed_leaf = plan.root.failed_leaf;
    plan.report.error = plan.root.error;
    plan.report.finished_cycle = cycles_;
  }

  if (cycle_hook_) cycle_hook_(*this);
}

PlanReport run_plan(Agent& agent, const PlanNode& plan, std::size_t max_cycles) {
  PlanId id = agent.adopt(plan);
  for (std::size_t i = 0; i < max_cycles; ++i) {
    agent.cycle();
    PlanReport report = agent.plan_report(id);
    if (report.status == PlanStatus::kFailed) {
      fail(Errc::kPlanFailed, fmt::format("{}: {}", report.failed_leaf, report.error));
    }
    if (report.status == PlanStatus::kSucceeded) return report;
  }
  return agent.plan_report(id);
}

AgentRunner::AgentRunner(std::shared_ptr<Agent> agent, std::chrono::milliseconds period)
    : agent_(std::move(agent)), period_(period) {}

AgentRunner::~AgentRunner() { stop(); }

void AgentRunner::start() {
  if (thread_.joinable()) return;
  thread_ = std::jthread([this](std::stop_token st) {
    auto next = std::chrono::steady_clock::now();
    while (!st.stop_requested()) {
      try {
        agent_->cycle();
      } catch (const std::exception& e) {
        spdlog::error("agent {}: cycle failed: {}", agent_->id(), e.what());
      }
      next += period_;
      auto now = std::chrono::steady_clock::now();
      if (next < now) next = now;
      std::this_thread::sleep_until(next);
    }
  });
}

void AgentRunner::stop() {
  if (!thread_.joinable()) return;
  thread_.request_stop();
  thread_.join();
}

}  // namespace hybridrt::agent
