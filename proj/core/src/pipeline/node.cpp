#include "hybridrt/pipeline/node.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hybridrt/backchannel/pull_adapters.hpp"
#include "hybridrt/error.hpp"
#include "hybridrt/pipeline/components.hpp"
#include "hybridrt/pipeline/corpus.hpp"
#include "hybridrt/pipeline/document.hpp"
#include "hybridrt/pipeline/index_store.hpp"

namespace hybridrt::pipeline {

using agent::AclMessage;
using agent::Directive;
using agent::Performative;
using agent::PlanNode;
using agent::Term;
using agent::atom;
using agent::c;
using agent::v;
using json = nlohmann::json;
using namespace std::chrono_literals;

namespace {

constexpr const char* kAdvertConversation = "advert";
constexpr const char* kManageConversation = "manage";
constexpr const char* kConverterA = "converter-a";
constexpr const char* kConverterB = "converter-b";

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string platform_id(const std::string& node) { return "platform@" + node; }

// Components come and go under plans running on other threads; a missing one reads as null.
template <typename T>
std::shared_ptr<T> find_as(const Container& c, const std::string& id) {
  try {
    return c.component_as<T>(id);
  } catch (const Error& e) {
    if (e.code() != Errc::kUnknownComponent) throw;
    return nullptr;
  }
}

std::int64_t to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    auto n = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return n;
  } catch (const std::exception&) {
    fail(Errc::kInvalidArgument, fmt::format("{} expects an integer, got '{}'", key, value));
  }
}

std::size_t to_count(const std::string& key, const std::string& value) {
  auto n = to_int(key, value);
  if (n < 0) fail(Errc::kInvalidArgument, key + " must not be negative");
  return static_cast<std::size_t>(n);
}

}  // namespace

std::string_view to_string(Mode mode) { return mode == Mode::kHybrid ? "hybrid" : "acl"; }

std::optional<Mode> mode_from_string(std::string_view text) {
  if (text == "hybrid" || text == "HYBRID") return Mode::kHybrid;
  if (text == "acl" || text == "ACL_ONLY") return Mode::kAclOnly;
  return std::nullopt;
}

std::optional<Team> team_of_name(std::string_view name) {
  if (name.empty()) return std::nullopt;
  switch (name.front()) {
    case 'g': return Team::kGather;
    case 't': return Team::kTranslate;
    case 'i': return Team::kIndex;
    default: return std::nullopt;
  }
}

std::uint16_t RunConfig::transport_port(std::size_t node) const {
  return base_port == 0 ? 0 : static_cast<std::uint16_t>(base_port + node);
}

std::uint16_t RunConfig::pull_port(std::size_t node, std::size_t slot) const {
  return base_port == 0 ? 0 : static_cast<std::uint16_t>(base_port + 100 * node + 10 + slot);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "batch") batch = to_count(key, value);
  else if (key == "queue_capacity") queue_capacity = to_count(key, value);
  else if (key == "cycle_ms") cycle_ms = to_int(key, value);
  else if (key == "idle_ms") idle_ms = to_int(key, value);
  else if (key == "fetch_bundles") fetch_bundles = std::max<std::size_t>(1, to_count(key, value));
  else if (key == "fetch_timeout_ms") fetch_timeout_ms = to_int(key, value);
  else if (key == "hotswap_after_docs") hotswap_after_docs = to_int(key, value);
  else if (key == "translate_delay_ms") translate_delay_ms = to_int(key, value);
  else if (key == "gather_delay_ms") gather_delay_ms = to_int(key, value);
  else if (key == "base_port") base_port = static_cast<std::uint16_t>(to_count(key, value));
  else if (key == "host") host = value;
  else if (key == "manager") manager = value == "true" || value == "1";
  else if (key == "policy.W") policy.window = std::max<std::size_t>(1, to_count(key, value));
  else if (key == "policy.H") policy.halt_ms = to_int(key, value);
  else if (key == "policy.K") policy.patience = std::max<std::size_t>(1, to_count(key, value));
  else if (key == "policy.P") policy.advert_period_ms = to_int(key, value);
  else if (key == "policy.starve_halt_ms") policy.starve_halt_ms = to_int(key, value);
  else if (key == "policy.growth_ratio") {
    try {
      policy.growth_ratio = std::stod(value);
    } catch (const std::exception&) {
      fail(Errc::kInvalidArgument, "policy.growth_ratio expects a number");
    }
  } else if (key == "agents") {
    agents.clear();
    std::size_t start = 0;
    while (start <= value.size()) {
      auto comma = value.find(',', start);
      auto part = value.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!part.empty()) {
        if (!team_of_name(part)) fail(Errc::kInvalidArgument, "agent names start with g, t or i: " + part);
        agents.push_back(part);
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  } else {
    fail(Errc::kInvalidArgument, "unknown setting '" + key + "'");
  }
}

std::string RunConfig::to_json() const {
  json j{
      {"mode", std::string(pipeline::to_string(mode))},
      {"nodes", nodes},
      {"host", host},
      {"base_port", base_port},
      {"corpus_dir", corpus_dir.string()},
      {"claims_dir", claims_dir.string()},
      {"index_dir", index_dir.string()},
      {"batch", batch},
      {"queue_capacity", queue_capacity},
      {"cycle_ms", cycle_ms},
      {"idle_ms", idle_ms},
      {"fetch_bundles", fetch_bundles},
      {"fetch_timeout_ms", fetch_timeout_ms},
      {"hotswap_after_docs", hotswap_after_docs},
      {"translate_delay_ms", translate_delay_ms},
      {"gather_delay_ms", gather_delay_ms},
      {"manager", manager},
      {"agents", agents},
      {"policy",
       {{"W", policy.window},
        {"H", policy.halt_ms},
        {"K", policy.patience},
        {"P", policy.advert_period_ms},
        {"growth_ratio", policy.growth_ratio},
        {"starve_halt_ms", policy.starve_halt_ms}}},
  };
  return j.dump();
}

RunConfig RunConfig::from_json(std::string_view text) {
  RunConfig r;
  try {
    auto j = json::parse(text);
    auto mode = mode_from_string(j.at("mode").get<std::string>());
    if (!mode) fail(Errc::kInvalidArgument, "unknown mode");
    r.mode = *mode;
    r.nodes = j.at("nodes").get<std::size_t>();
    r.host = j.at("host").get<std::string>();
    r.base_port = j.at("base_port").get<std::uint16_t>();
    r.corpus_dir = j.at("corpus_dir").get<std::string>();
    r.claims_dir = j.at("claims_dir").get<std::string>();
    r.index_dir = j.at("index_dir").get<std::string>();
    r.batch = j.at("batch").get<std::size_t>();
    r.queue_capacity = j.at("queue_capacity").get<std::size_t>();
    r.cycle_ms = j.at("cycle_ms").get<std::int64_t>();
    r.idle_ms = j.at("idle_ms").get<std::int64_t>();
    r.fetch_bundles = j.at("fetch_bundles").get<std::size_t>();
    r.fetch_timeout_ms = j.at("fetch_timeout_ms").get<std::int64_t>();
    r.hotswap_after_docs = j.at("hotswap_after_docs").get<std::int64_t>();
    r.translate_delay_ms = j.at("translate_delay_ms").get<std::int64_t>();
    r.gather_delay_ms = j.at("gather_delay_ms").get<std::int64_t>();
    r.manager = j.at("manager").get<bool>();
    r.agents = j.at("agents").get<std::vector<std::string>>();
    const auto& p = j.at("policy");
    r.policy.window = p.at("W").get<std::size_t>();
    r.policy.halt_ms = p.at("H").get<std::int64_t>();
    r.policy.patience = p.at("K").get<std::size_t>();
    r.policy.advert_period_ms = p.at("P").get<std::int64_t>();
    r.policy.growth_ratio = p.at("growth_ratio").get<double>();
    r.policy.starve_halt_ms = p.at("starve_halt_ms").get<std::int64_t>();
  } catch (const json::exception& e) {
    fail(Errc::kInvalidArgument, std::string("bad run config: ") + e.what());
  }
  return r;
}

std::string NodeStats::to_json() const {
  json j{
      {"node", node},
      {"acl_messages", acl_messages},
      {"lifecycle_messages", lifecycle_messages},
      {"acl_bytes", acl_bytes},
      {"sent_by_agent", sent_by_agent},
      {"backchannel_bytes", backchannel_bytes},
      {"channels_opened", channels_opened},
      {"channel_active_server", channel_active_server},
      {"channel_active_client", channel_active_client},
      {"docs_gathered", docs_gathered},
      {"docs_translated", docs_translated},
      {"docs_indexed", docs_indexed},
      {"malformed", malformed},
      {"hot_swaps", hot_swaps},
      {"agents_created", agents_created},
      {"agents_retired", agents_retired},
      {"management_log", management_log},
      {"team_traces", team_traces},
  };
  return j.dump();
}

NodeStats NodeStats::from_json(std::string_view text) {
  NodeStats s;
  try {
    auto j = json::parse(text);
    s.node = j.at("node").get<std::string>();
    s.acl_messages = j.at("acl_messages").get<std::uint64_t>();
    s.lifecycle_messages = j.at("lifecycle_messages").get<std::uint64_t>();
    s.acl_bytes = j.at("acl_bytes").get<std::uint64_t>();
    s.sent_by_agent = j.at("sent_by_agent").get<std::map<std::string, std::uint64_t>>();
    s.backchannel_bytes = j.at("backchannel_bytes").get<std::uint64_t>();
    s.channels_opened = j.at("channels_opened").get<std::uint64_t>();
    s.channel_active_server = j.at("channel_active_server").get<std::uint64_t>();
    s.channel_active_client = j.at("channel_active_client").get<std::uint64_t>();
    s.docs_gathered = j.at("docs_gathered").get<std::uint64_t>();
    s.docs_translated = j.at("docs_translated").get<std::uint64_t>();
    s.docs_indexed = j.at("docs_indexed").get<std::uint64_t>();
    s.malformed = j.at("malformed").get<std::uint64_t>();
    s.hot_swaps = j.at("hot_swaps").get<std::uint64_t>();
    s.agents_created = j.at("agents_created").get<std::uint64_t>();
    s.agents_retired = j.at("agents_retired").get<std::uint64_t>();
    s.management_log = j.at("management_log").get<std::vector<std::string>>();
    s.team_traces = j.at("team_traces").get<std::map<std::string, std::vector<std::int64_t>>>();
  } catch (const json::exception& e) {
    fail(Errc::kInvalidArgument, std::string("bad node stats: ") + e.what());
  }
  return s;
}

void dispatch_action(agent::Agent& from, const ManagementAction& action) {
  AclMessage m;
  m.performative = Performative::kRequest;
  m.conversation_id = kManageConversation;
  m.content = action.to_term();
  m.receiver = action.kind == ManagementAction::Kind::kCreate ? platform_id(action.target) : action.target;
  try {
    from.send(std::move(m));
  } catch (const Error& e) {
    if (e.code() == Errc::kUnknownReceiver || e.code() == Errc::kTransportDown) {
      fail(Errc::kUnknownAgent, fmt::format("{}: {}", action.to_string(), e.what()));
    }
    throw;
  }
}

// ---------------------------------------------------------------------------
// Pipeline agents

class PipelineAgent {
 public:
  struct Counters {
    std::uint64_t gathered = 0;
    std::uint64_t translated = 0;
    std::uint64_t indexed = 0;
    std::uint64_t malformed = 0;
  };

  PipelineAgent(Node& node, std::string name, Team team);
  ~PipelineAgent() { stop(); }

  void begin();
  void stop() {
    if (runner_) runner_->stop();
  }
  bool finished() const { return finished_.load(); }
  bool halted() const { return halted_flag_.load(); }
  const std::string& id() const { return id_; }
  Counters counters() const;
  std::uint64_t backchannel_bytes() const;

 private:
  bool hybrid() const { return cfg_.mode == Mode::kHybrid; }
  bool has_queue() const { return team_ != Team::kIndex; }
  Container& container() { return node_.container(); }

  PlanNode setup_plan() const;
  bool on_message(agent::Agent& a, const AclMessage& m);
  void on_manage(const Term& t);
  void on_cycle(agent::Agent& a);

  void update_halt(agent::Agent& a, std::int64_t now);
  void begin_drain(agent::Agent& a);
  bool drain_step(agent::Agent& a);
  void retire(agent::Agent& a);

  void acl_work(agent::Agent& a, std::int64_t now);
  void serve_fetch(agent::Agent& a, const AclMessage& request);
  void accept_bundles(const AclMessage& reply);

  void hybrid_sources(agent::Agent& a);
  void switch_to(const std::string& source);
  void drop_client(const std::string& source);

  std::int64_t queue_length() const;
  void advertise(agent::Agent& a, std::int64_t now);
  std::vector<Advertisement> upstream_ads() const;
  void capture_worker();

  Node& node_;
  const RunConfig& cfg_;
  std::string name_;
  std::string id_;
  Team team_;
  std::size_t slot_ = 0;
  std::shared_ptr<agent::Agent> agent_;
  std::unique_ptr<agent::AgentRunner> runner_;

  std::map<std::string, Advertisement> upstream_;
  std::optional<std::string> route_;
  std::int64_t last_ad_ = 0;
  std::int64_t last_len_ = 0;
  bool advertised_ = false;
  std::int64_t halted_until_ = 0;
  bool halt_applied_ = false;
  std::atomic<bool> halted_flag_{false};
  bool terminating_ = false;
  std::atomic<bool> finished_{false};
  std::uint64_t conversations_ = 0;

  // HYBRID
  std::optional<agent::PlanId> setup_;
  bool ready_ = false;
  std::string worker_;
  std::string queue_;
  std::string server_;
  std::int64_t export_port_ = 0;
  std::string source_;
  std::map<std::string, std::string> clients_;
  bool worker_gone_ = false;
  std::atomic<std::uint64_t> server_bytes_{0};

  // ACL_ONLY
  std::unique_ptr<CorpusSource> corpus_;
  std::unique_ptr<IndexStore> store_;
  std::deque<DocumentBundle> out_;
  std::deque<DocumentBundle> in_;
  std::atomic<std::size_t> out_len_{0};
  struct Outstanding {
    std::string source;
    std::string conversation;
    std::int64_t sent_at = 0;
  };
  std::optional<Outstanding> outstanding_;

  std::atomic<std::uint64_t> gathered_{0};
  std::atomic<std::uint64_t> translated_{0};
  std::atomic<std::uint64_t> indexed_{0};
  std::atomic<std::uint64_t> malformed_{0};
};

PipelineAgent::PipelineAgent(Node& node, std::string name, Team team)
    : node_(node),
      cfg_(node.config()),
      name_(std::move(name)),
      id_(name_ + "@" + node.name()),
      team_(team),
      worker_(name_ + ".worker"),
      queue_(has_queue() ? name_ + ".queue" : std::string{}) {
  if (has_queue()) slot_ = node.next_export_slot();
  agent_ = std::make_shared<agent::Agent>(id_, hybrid() ? &node.container() : nullptr, &node.transport());
  agent_->set_message_handler([this](agent::Agent& a, const AclMessage& m) { return on_message(a, m); });
  agent_->set_cycle_hook([this](agent::Agent& a) { on_cycle(a); });
  if (hybrid()) {
    agent_->register_action("bind_converter", [this](agent::Agent&, const std::vector<Term>&) {
      container().bind_implicit({worker_, "converter"});
      return agent::ActionStatus::kDone;
    });
    agent_->register_action("export_queue", [this](agent::Agent&, const std::vector<Term>&) {
      server_ = backchannel::start_pull_server(container(), Container::kRootContext, {queue_, "pull"},
                                               {cfg_.host, cfg_.pull_port(node_.index(), slot_)},
                                               name_ + ".export");
      export_port_ = find_as<backchannel::PullServerAdapter>(container(), server_)->port();
      return agent::ActionStatus::kDone;
    });
  }
}

PlanNode PipelineAgent::setup_plan() const {
  auto act = [](std::string action, std::vector<Term> args) {
    return PlanNode::act(Directive{std::move(action), std::move(args)});
  };
  auto num = [](auto n) { return c(std::to_string(n)); };
  std::vector<PlanNode> steps;
  if (has_queue()) {
    steps.push_back(act("create", {c(queue_), c(types::kDataQueue)}));
    steps.push_back(act("configure", {c(queue_), c("capacity"), num(cfg_.queue_capacity)}));
  }
  switch (team_) {
    case Team::kGather:
      steps.push_back(act("create", {c(worker_), c(types::kDataGatherer)}));
      steps.push_back(act("configure", {c(worker_), c("corpus_dir"), c(cfg_.corpus_dir.string())}));
      if (!cfg_.claims_dir.empty()) {
        steps.push_back(act("configure", {c(worker_), c("claims_dir"), c(cfg_.claims_dir.string())}));
      }
      steps.push_back(act("configure", {c(worker_), c("batch"), num(cfg_.batch)}));
      steps.push_back(act("configure", {c(worker_), c("owner"), c(name_)}));
      if (cfg_.gather_delay_ms > 0) {
        steps.push_back(act("configure", {c(worker_), c("delay_ms"), num(cfg_.gather_delay_ms)}));
      }
      break;
    case Team::kTranslate:
      steps.push_back(act("create", {c(worker_), c(types::kTranslatorWorker)}));
      if (cfg_.translate_delay_ms > 0) {
        steps.push_back(act("configure", {c(worker_), c("delay_ms"), num(cfg_.translate_delay_ms)}));
      }
      break;
    case Team::kIndex:
      steps.push_back(act("create", {c(worker_), c(types::kIndexerWorker)}));
      steps.push_back(act("configure", {c(worker_), c("index_dir"), c(cfg_.index_dir.string())}));
      break;
  }
  steps.push_back(act("configure", {c(worker_), c("idle_ms"), num(cfg_.idle_ms)}));
  if (has_queue()) steps.push_back(act("bind", {c(worker_), c("output"), c(queue_), c("input")}));
  if (team_ == Team::kTranslate) steps.push_back(act("bind_converter", {}));
  std::vector<PlanNode> focus{act("focus", {c(worker_)})};
  if (has_queue()) {
    focus.push_back(act("focus", {c(queue_)}));
    steps.push_back(PlanNode::par(std::move(focus)));
    steps.push_back(act("activate", {c(queue_)}));
  } else {
    steps.push_back(std::move(focus.front()));
  }
  steps.push_back(act("activate", {c(worker_)}));
  if (has_queue() && cfg_.nodes > 1) steps.push_back(act("export_queue", {}));
  return PlanNode::seq(std::move(steps));
}

void PipelineAgent::begin() {
  if (hybrid()) {
    setup_ = agent_->adopt(setup_plan());
  } else {
    try {
      if (team_ == Team::kGather) corpus_ = std::make_unique<CorpusSource>(cfg_.corpus_dir, cfg_.claims_dir, name_);
      if (team_ == Team::kIndex) store_ = std::make_unique<IndexStore>(cfg_.index_dir);
    } catch (const Error& e) {
      spdlog::error("{}: cannot start: {}", id_, e.what());
      finished_ = true;
      return;
    }
  }
  runner_ = std::make_unique<agent::AgentRunner>(agent_, std::chrono::milliseconds(cfg_.cycle_ms));
  runner_->start();
}

PipelineAgent::Counters PipelineAgent::counters() const {
  Counters out{gathered_.load(), translated_.load(), indexed_.load(), malformed_.load()};
  if (!hybrid() || worker_gone_) return out;
  auto& c = node_.container();
  if (auto g = find_as<DataGatherer>(c, worker_)) out.gathered = g->docs_gathered();
  if (auto t = find_as<TranslatorWorker>(c, worker_)) {
    out.translated = t->docs_translated();
    out.malformed = t->malformed();
  }
  if (auto i = find_as<IndexerWorker>(c, worker_)) out.indexed = i->docs_indexed();
  return out;
}

std::uint64_t PipelineAgent::backchannel_bytes() const {
  std::uint64_t total = server_bytes_.load();
  if (!server_.empty()) {
    if (auto s = find_as<backchannel::PullServerAdapter>(node_.container(), server_)) {
      total += s->bytes_transferred();
    }
  }
  return total;
}

void PipelineAgent::capture_worker() {
  if (worker_gone_) return;
  auto c = counters();
  gathered_ = c.gathered;
  translated_ = c.translated;
  indexed_ = c.indexed;
  malformed_ = c.malformed;
  worker_gone_ = true;
}

std::vector<Advertisement> PipelineAgent::upstream_ads() const {
  std::vector<Advertisement> out;
  out.reserve(upstream_.size());
  for (const auto& [id, ad] : upstream_) out.push_back(ad);
  return out;
}

bool PipelineAgent::on_message(agent::Agent& a, const AclMessage& m) {
  const Term* t = m.atom();
  if (!t) return false;
  if (m.conversation_id == kAdvertConversation) {
    if (t->text() == "advert") {
      auto ad = Advertisement::from_term(*t);
      if (upstream_of(team_) == ad.team) upstream_[ad.agent] = ad;
    } else if (t->text() == "retired" && t->arity() == 1) {
      const auto& gone = t->arg(0).text();
      upstream_.erase(gone);
      if (route_ == gone) route_.reset();
      if (source_ == gone) source_.clear();
      if (hybrid()) drop_client(gone);
    }
    return true;
  }
  if (m.conversation_id == kManageConversation && m.performative == Performative::kRequest) {
    on_manage(*t);
    return true;
  }
  if (m.performative == Performative::kRequest && t->text() == "fetch") {
    serve_fetch(a, m);
    return true;
  }
  if (m.performative == Performative::kInform && t->text() == "bundles") {
    accept_bundles(m);
    return true;
  }
  return false;
}

void PipelineAgent::on_manage(const Term& t) {
  auto now = now_ms();
  if (t.text() == "halt" && t.arity() == 1) {
    auto ms = agent::scalar_of(t.arg(0));
    halted_until_ = now + as_int(ms).value_or(0);
  } else if (t.text() == "resume") {
    halted_until_ = 0;
  } else if (t.text() == "terminate") {
    if (!terminating_) {
      terminating_ = true;
      halted_until_ = 0;
      begin_drain(*agent_);
    }
  } else if (t.text() == "route" && t.arity() == 1) {
    const auto& target = t.arg(0).text();
    if (target == "none") route_.reset();
    else route_ = target;
  } else {
    spdlog::warn("{}: unknown management request {}", id_, t.to_string());
  }
}

void PipelineAgent::on_cycle(agent::Agent& a) {
  if (finished_) return;
  auto now = now_ms();
  if (hybrid() && !ready_) {
    auto report = a.plan_report(*setup_);
    if (report.status == agent::PlanStatus::kPending) return;
    if (report.status == agent::PlanStatus::kFailed) {
      spdlog::error("{}: setup failed at {}: {}", id_, report.failed_leaf, report.error);
      finished_ = true;
      return;
    }
    ready_ = true;
  }
  update_halt(a, now);
  if (terminating_ && drain_step(a)) {
    retire(a);
    return;
  }
  if (hybrid()) {
    if (team_ != Team::kGather) hybrid_sources(a);
  } else {
    acl_work(a, now);
  }
  advertise(a, now);
}

void PipelineAgent::update_halt(agent::Agent& a, std::int64_t now) {
  bool halt = now < halted_until_;
  halted_flag_ = halt;
  if (halt == halt_applied_) return;
  halt_applied_ = halt;
  if (!hybrid() || terminating_ || worker_gone_) return;
  try {
    a.execute({halt ? "deactivate" : "activate", {c(worker_)}});
  } catch (const Error& e) {
    spdlog::warn("{}: {} failed: {}", id_, halt ? "halt" : "resume", e.what());
  }
}

void PipelineAgent::begin_drain(agent::Agent& a) {
  if (!hybrid()) return;
  try {
    a.execute({"configure", {c(worker_), c("drain"), c("true")}});
    if (halt_applied_) a.execute({"activate", {c(worker_)}});
    halt_applied_ = false;
  } catch (const Error& e) {
    spdlog::warn("{}: drain failed: {}", id_, e.what());
  }
}

bool PipelineAgent::drain_step(agent::Agent& a) {
  if (!hybrid()) return in_.empty() && !outstanding_ && out_.empty();
  if (!worker_gone_) {
    auto w = find_as<WorkerComponent>(container(), worker_);
    if (w && w->holding()) return false;
    capture_worker();
    try {
      a.execute({"remove", {c(worker_)}});
    } catch (const Error& e) {
      spdlog::warn("{}: removing worker: {}", id_, e.what());
    }
  }
  if (has_queue() && queue_length() > 0) return false;
  return true;
}

void PipelineAgent::retire(agent::Agent& a) {
  if (hybrid()) {
    for (auto it = clients_.begin(); it != clients_.end();) drop_client((it++)->first);
    if (!server_.empty()) {
      server_bytes_ += backchannel_bytes();
      try {
        container().unload(server_);
      } catch (const Error&) {
      }
      server_.clear();
    }
    if (has_queue()) {
      try {
        a.execute({"remove", {c(queue_)}});
      } catch (const Error& e) {
        spdlog::warn("{}: removing queue: {}", id_, e.what());
      }
    }
  }
  try {
    a.send({Performative::kInform, {}, agent::kBroadcast, kAdvertConversation, atom("retired", id_)});
  } catch (const Error& e) {
    spdlog::debug("{}: retire broadcast: {}", id_, e.what());
  }
  spdlog::info("{}: retired", id_);
  finished_ = true;
}

// ACL_ONLY: every hop is a REQUEST/INFORM exchange handled in cycles.

void PipelineAgent::acl_work(agent::Agent& a, std::int64_t now) {
  bool may_take = !halted_flag_ && !terminating_;
  switch (team_) {
    case Team::kGather:
      if (may_take && (cfg_.queue_capacity == 0 || out_.size() < cfg_.queue_capacity)) {
        if (cfg_.gather_delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.gather_delay_ms));
        auto b = corpus_->gather(cfg_.batch);
        if (!b.docs.empty()) {
          gathered_ += b.docs.size();
          out_.push_back(std::move(b));
        }
      }
      break;
    case Team::kTranslate:
      while (!in_.empty()) {
        if (cfg_.translate_delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.translate_delay_ms));
        auto r = translate_bundle(in_.front());
        in_.pop_front();
        malformed_ += r.malformed.size();
        translated_ += r.bundle.docs.size();
        out_.push_back(std::move(r.bundle));
      }
      break;
    case Team::kIndex:
      while (!in_.empty()) {
        indexed_ += store_->index(in_.front());
        in_.pop_front();
      }
      break;
  }
  out_len_ = out_.size();
  if (team_ == Team::kGather) return;

  if (outstanding_ && now - outstanding_->sent_at > cfg_.fetch_timeout_ms) {
    if (auto it = upstream_.find(outstanding_->source); it != upstream_.end()) it->second.queue_len = 0;
    outstanding_.reset();
  }
  if (!may_take || outstanding_ || !in_.empty()) return;
  if (has_queue() && cfg_.queue_capacity > 0 && out_.size() >= cfg_.queue_capacity) return;
  auto source = select_source(upstream_ads(), route_);
  if (!source) return;
  auto conversation = fmt::format("fetch-{}-{}", name_, conversations_++);
  try {
    a.send({Performative::kRequest, {}, *source, conversation, atom("fetch", std::to_string(cfg_.fetch_bundles))});
    outstanding_ = Outstanding{*source, conversation, now};
  } catch (const Error& e) {
    spdlog::debug("{}: fetch from {} failed: {}", id_, *source, e.what());
    upstream_.erase(*source);
  }
}

void PipelineAgent::serve_fetch(agent::Agent& a, const AclMessage& request) {
  std::size_t n = 1;
  if (const Term* t = request.atom(); t && t->arity() == 1) {
    n = static_cast<std::size_t>(std::max<std::int64_t>(1, as_int(agent::scalar_of(t->arg(0))).value_or(1)));
  }
  std::vector<Term> bundles;
  while (!out_.empty() && bundles.size() < n) {
    bundles.push_back(bundle_to_term(out_.front()));
    out_.pop_front();
  }
  out_len_ = out_.size();
  try {
    a.send({Performative::kInform, {}, request.sender, request.conversation_id,
            Term::compound("bundles", std::move(bundles))});
  } catch (const Error& e) {
    // The requester is gone; its bundles would be lost, so keep them.
    spdlog::warn("{}: reply to {} failed: {}", id_, request.sender, e.what());
  }
}

void PipelineAgent::accept_bundles(const AclMessage& reply) {
  const Term* t = reply.atom();
  for (const auto& b : t->args()) in_.push_back(bundle_from_term(b));
  if (t->args().empty()) {
    if (auto it = upstream_.find(reply.sender); it != upstream_.end()) it->second.queue_len = 0;
  }
  if (outstanding_ && outstanding_->conversation == reply.conversation_id) outstanding_.reset();
}

// HYBRID: agents only choose sources; workers move the data.

void PipelineAgent::hybrid_sources(agent::Agent& a) {
  auto pattern = atom("event", worker_, v("e"));
  for (const auto& s : a.query(pattern)) {
    const auto& e = s.at("e");
    if (e.text() == worker_events::kSourceEmpty) {
      if (auto it = upstream_.find(source_); it != upstream_.end()) it->second.queue_len = 0;
    } else if (e.text() == worker_events::kSourceLost && !source_.empty()) {
      upstream_.erase(source_);
      drop_client(source_);
      source_.clear();
    }
  }
  a.retract_belief(pattern);
  if (worker_gone_ || terminating_ || halted_flag_) return;

  auto current = upstream_.find(source_);
  bool keep = current != upstream_.end() && current->second.queue_len > 0 && (!route_ || *route_ == source_);
  if (keep) return;
  auto best = select_source(upstream_ads(), route_);
  if (best && *best != source_) switch_to(*best);
}

void PipelineAgent::switch_to(const std::string& source) {
  const auto ad = upstream_.at(source);
  InterfaceRef input{worker_, "input"};
  try {
    container().unbind(input);
    if (ad.node == node_.name()) {
      container().bind(input, {ad.queue_component, "pull"});
    } else {
      if (ad.pull_port <= 0) fail(Errc::kPortUnavailable, source + " does not export its queue");
      auto it = clients_.find(source);
      if (it != clients_.end() && container().contains(it->second)) {
        container().bind(input, {it->second, "pull"});
      } else {
        auto adapter = backchannel::open_pull_client(
            container(), Container::kRootContext, input,
            {cfg_.host, static_cast<std::uint16_t>(ad.pull_port)}, std::chrono::milliseconds(2000),
            name_ + ".from." + source);
        clients_[source] = adapter;
        node_.note_channel_opened();
      }
    }
    source_ = source;
  } catch (const Error& e) {
    spdlog::debug("{}: cannot use {}: {}", id_, source, e.what());
    upstream_.erase(source);
    source_.clear();
  }
}

void PipelineAgent::drop_client(const std::string& source) {
  auto it = clients_.find(source);
  if (it == clients_.end()) return;
  try {
    if (container().contains(it->second)) container().unload(it->second);
  } catch (const Error& e) {
    spdlog::debug("{}: dropping channel to {}: {}", id_, source, e.what());
  }
  clients_.erase(it);
}

std::int64_t PipelineAgent::queue_length() const {
  if (!has_queue()) return 0;
  if (!hybrid()) return static_cast<std::int64_t>(out_len_.load());
  auto q = find_as<DataQueue>(node_.container(), queue_);
  return q ? static_cast<std::int64_t>(q->length()) : 0;
}

void PipelineAgent::advertise(agent::Agent& a, std::int64_t now) {
  bool grew = false;
  if (hybrid() && has_queue()) {
    auto pattern = atom("event", queue_, v("e"));
    for (const auto& s : a.query(pattern)) grew = grew || s.at("e").text() == worker_events::kQueueGrew;
    a.retract_belief(pattern);
  }
  auto len = queue_length();
  grew = grew || (last_len_ == 0 && len > 0);
  last_len_ = len;
  if (halted_flag_) return;
  if (advertised_ && !grew && now - last_ad_ < cfg_.policy.advert_period_ms) return;
  Advertisement ad{id_, team_, len, node_.name(), now, queue_, export_port_, node_.load()};
  try {
    a.send({Performative::kInform, {}, agent::kBroadcast, kAdvertConversation, ad.to_term()});
  } catch (const Error& e) {
    spdlog::debug("{}: advertisement failed: {}", id_, e.what());
  }
  last_ad_ = now;
  advertised_ = true;
}

// ---------------------------------------------------------------------------
// Manager

class ManagerAgent {
 public:
  explicit ManagerAgent(Node& node)
      : agent_(std::make_shared<agent::Agent>("manager@" + node.name(), nullptr, &node.transport())),
        assessor_(node.config().policy, node_names(node.config().nodes)) {
    agent_->set_message_handler([this](agent::Agent& a, const AclMessage& m) { return on_message(a, m); });
    runner_ = std::make_unique<agent::AgentRunner>(agent_, std::chrono::milliseconds(node.config().cycle_ms));
    runner_->start();
  }
  ~ManagerAgent() { stop(); }

  void stop() { runner_->stop(); }

  std::vector<std::string> log() const {
    std::lock_guard lock(mu_);
    return log_;
  }

  std::map<std::string, std::vector<std::int64_t>> traces() const {
    std::lock_guard lock(mu_);
    std::map<std::string, std::vector<std::int64_t>> out;
    for (auto team : {Team::kGather, Team::kTranslate, Team::kIndex}) {
      out[std::string(to_string(team))] = assessor_.trace(team);
    }
    return out;
  }

 private:
  static std::vector<std::string> node_names(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t k = 1; k <= n; ++k) out.push_back(RunConfig::node_name(k));
    return out;
  }

  bool on_message(agent::Agent& a, const AclMessage& m) {
    const Term* t = m.atom();
    if (!t || m.conversation_id != kAdvertConversation) return false;
    std::lock_guard lock(mu_);
    if (t->text() == "retired" && t->arity() == 1) {
      assessor_.forget(t->arg(0).text());
      return true;
    }
    if (t->text() != "advert") return true;
    for (const auto& action : assessor_.observe(Advertisement::from_term(*t))) {
      auto line = fmt::format("{} {}", now_ms(), action.to_string());
      try {
        dispatch_action(a, action);
      } catch (const Error& e) {
        line += fmt::format(" (failed: {})", e.what());
      }
      spdlog::info("manager: {}", line);
      log_.push_back(std::move(line));
    }
    return true;
  }

  std::shared_ptr<agent::Agent> agent_;
  std::unique_ptr<agent::AgentRunner> runner_;
  mutable std::mutex mu_;
  BalanceAssessor assessor_;
  std::vector<std::string> log_;
};

// ---------------------------------------------------------------------------
// Node

Node::Node(RunConfig config, std::size_t index)
    : config_(std::move(config)),
      index_(index),
      name_(RunConfig::node_name(index)),
      transport_(name_) {
  register_pipeline_types(container_);
  backchannel::register_backchannel_types(container_);
  if (config_.mode == Mode::kHybrid) {
    for (const char* id : {kConverterA, kConverterB}) {
      container_.load_component(Container::kRootContext, id, types::kFormatConverter);
      container_.set_lifecycle(id, LifecycleState::kActive);
    }
  }
  HandlerRegistration reg;
  reg.name = backchannel::channel_events::kActive;
  reg.handler = [this](const Event& e) {
    if (e.source.find(".export") != std::string::npos) ++active_server_;
    else ++active_client_;
    return Disposition::kContinue;
  };
  channel_handler_ = container_.events().register_handler(std::move(reg));

  platform_ = std::make_shared<agent::Agent>(platform_id(name_), nullptr, &transport_);
  platform_->set_message_handler([this](agent::Agent&, const AclMessage& m) { return on_platform_message(m); });
  platform_runner_ = std::make_unique<agent::AgentRunner>(platform_, std::chrono::milliseconds(config_.cycle_ms));
  platform_runner_->start();
}

Node::~Node() {
  stop();
  platform_runner_.reset();
  platform_.reset();
  container_.events().deregister(channel_handler_);
  transport_.shutdown();
}

void Node::start_transport(bool with_orchestrator) {
  transport_port_ = transport_.listen({config_.host, config_.transport_port(index_)});
  if (config_.base_port != 0) {
    for (std::size_t k = 1; k <= config_.nodes; ++k) {
      if (k != index_) add_peer(k, config_.transport_port(k));
    }
  }
  if (with_orchestrator) transport_.add_peer("n0", {config_.host, config_.base_port}, /*broadcasts=*/false);
}

void Node::add_peer(std::size_t node, std::uint16_t port) {
  transport_.add_peer(RunConfig::node_name(node), {config_.host, port});
}

void Node::start_pipeline() {
  for (std::size_t i = 0; i < config_.agents.size(); ++i) {
    if (config_.placement(i) != index_) continue;
    const auto& name = config_.agents[i];
    auto team = team_of_name(name);
    if (!team) fail(Errc::kInvalidArgument, "cannot tell the team of agent " + name);
    start_agent(std::make_unique<PipelineAgent>(*this, name, *team));
  }
  if (index_ == 1 && config_.manager && !manager_) manager_ = std::make_unique<ManagerAgent>(*this);
}

std::string Node::spawn(Team team) {
  static constexpr char kPrefix[] = {'g', 't', 'i'};
  auto name = fmt::format("{}{}", kPrefix[static_cast<int>(team)], index_ * 100 + ++spawned_);
  auto agent = std::make_unique<PipelineAgent>(*this, name, team);
  auto id = agent->id();
  start_agent(std::move(agent));
  ++created_;
  return id;
}

void Node::start_agent(std::unique_ptr<PipelineAgent> agent) {
  agent->begin();
  std::lock_guard lock(agents_mu_);
  agents_.push_back(std::move(agent));
}

bool Node::on_platform_message(const AclMessage& m) {
  if (m.conversation_id == agent::MessageTransport::kControlConversation) {
    {
      std::lock_guard lock(control_mu_);
      control_.push_back(m);
    }
    control_cv_.notify_all();
    return true;
  }
  const Term* t = m.atom();
  if (m.performative == Performative::kRequest && t && t->text() == "create" && t->arity() == 1) {
    auto team = team_from_string(t->arg(0).text());
    if (!team) {
      spdlog::warn("{}: cannot create team {}", name_, t->arg(0).text());
      return true;
    }
    if (stopped_) return true;
    auto id = spawn(*team);
    spdlog::info("{}: created {}", name_, id);
    return true;
  }
  // Advertisements and retirements are not for the platform.
  return m.conversation_id == kAdvertConversation;
}

std::optional<AclMessage> Node::next_control(std::chrono::milliseconds wait) {
  std::unique_lock lock(control_mu_);
  if (!control_cv_.wait_for(lock, wait, [&] { return !control_.empty(); })) return std::nullopt;
  auto m = std::move(control_.front());
  control_.pop_front();
  return m;
}

std::int64_t Node::load() const {
  if (config_.mode == Mode::kHybrid) return static_cast<std::int64_t>(container_.active_count());
  std::lock_guard lock(agents_mu_);
  return static_cast<std::int64_t>(agents_.size());
}

void Node::note_retired_counters(std::uint64_t gathered, std::uint64_t translated, std::uint64_t indexed,
                                 std::uint64_t malformed) {
  retired_gathered_ += gathered;
  retired_translated_ += translated;
  retired_indexed_ += indexed;
  retired_malformed_ += malformed;
}

void Node::tick() {
  std::vector<std::unique_ptr<PipelineAgent>> done;
  {
    std::lock_guard lock(agents_mu_);
    for (auto it = agents_.begin(); it != agents_.end();) {
      if ((*it)->finished()) {
        done.push_back(std::move(*it));
        it = agents_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& a : done) {
    a->stop();
    auto c = a->counters();
    note_retired_counters(c.gathered, c.translated, c.indexed, c.malformed);
    retired_bc_bytes_ += a->backchannel_bytes();
    ++retired_;
  }
  done.clear();

  if (config_.mode == Mode::kHybrid && config_.hotswap_after_docs > 0 && !hot_swapped_ &&
      stats().docs_translated >= static_cast<std::uint64_t>(config_.hotswap_after_docs)) {
    hot_swapped_ = true;
    if (container_.contains(kConverterA)) {
      spdlog::info("{}: unloading {} after {} translated docs", name_, kConverterA, config_.hotswap_after_docs);
      container_.unload(kConverterA);
    }
  }
}

void Node::stop() {
  if (stopped_) return;
  stopped_ = true;
  if (manager_) manager_->stop();
  std::vector<std::unique_ptr<PipelineAgent>> all;
  {
    std::lock_guard lock(agents_mu_);
    all.swap(agents_);
  }
  for (auto& a : all) a->stop();
  for (auto& a : all) {
    auto c = a->counters();
    note_retired_counters(c.gathered, c.translated, c.indexed, c.malformed);
    retired_bc_bytes_ += a->backchannel_bytes();
  }
  all.clear();
  container_.shutdown();
}

NodeStats Node::stats() const {
  NodeStats s;
  s.node = name_;
  s.acl_messages = transport_.messages_sent();
  s.lifecycle_messages = transport_.lifecycle_messages();
  s.acl_bytes = transport_.bytes_sent();
  s.sent_by_agent = transport_.sent_by_agent();
  s.backchannel_bytes = retired_bc_bytes_.load();
  s.channels_opened = channels_opened_.load();
  s.channel_active_server = active_server_.load();
  s.channel_active_client = active_client_.load();
  s.docs_gathered = retired_gathered_.load();
  s.docs_translated = retired_translated_.load();
  s.docs_indexed = retired_indexed_.load();
  s.malformed = retired_malformed_.load();
  {
    std::lock_guard lock(agents_mu_);
    for (const auto& a : agents_) {
      auto c = a->counters();
      s.docs_gathered += c.gathered;
      s.docs_translated += c.translated;
      s.docs_indexed += c.indexed;
      s.malformed += c.malformed;
      s.backchannel_bytes += a->backchannel_bytes();
    }
  }
  s.hot_swaps = container_.hot_swaps();
  s.agents_created = created_.load();
  s.agents_retired = retired_.load();
  if (manager_) {
    s.management_log = manager_->log();
    s.team_traces = manager_->traces();
  }
  return s;
}

std::vector<std::string> Node::agent_ids() const {
  std::lock_guard lock(agents_mu_);
  std::vector<std::string> out;
  for (const auto& a : agents_) out.push_back(a->id());
  return out;
}

bool Node::halted(const std::string& agent_id) const {
  std::lock_guard lock(agents_mu_);
  for (const auto& a : agents_) {
    if (a->id() == agent_id) return a->halted();
  }
  return false;
}

std::vector<std::string> Node::management_log() const {
  return manager_ ? manager_->log() : std::vector<std::string>{};
}

// ---------------------------------------------------------------------------

int run_node_process(const RunConfig& config, std::size_t index) {
  Node node(config, index);
  node.start_transport(/*with_orchestrator=*/true);
  auto control = [&](std::variant<Term, agent::Opaque> content) {
    AclMessage m{Performative::kInform, platform_id(node.name()), kOrchestratorId,
                 agent::MessageTransport::kControlConversation, std::move(content)};
    for (int attempt = 0;; ++attempt) {
      try {
        node.transport().send(m);
        return;
      } catch (const Error&) {
        if (attempt >= 50) throw;
        std::this_thread::sleep_for(100ms);
      }
    }
  };
  control(atom("ready", node.name()));

  auto last_contact = std::chrono::steady_clock::now();
  for (;;) {
    auto m = node.next_control(20ms);
    node.tick();
    if (!m) {
      if (std::chrono::steady_clock::now() - last_contact > 30min) {
        spdlog::error("{}: no word from the orchestrator, exiting", node.name());
        return 2;
      }
      continue;
    }
    last_contact = std::chrono::steady_clock::now();
    const Term* t = m->atom();
    if (!t) continue;
    if (t->text() == "start") {
      node.start_pipeline();
    } else if (t->text() == "shutdown") {
      node.stop();
      control(agent::Opaque{node.stats().to_json()});
      return 0;
    }
  }
}

}  // namespace hybridrt::pipeline
