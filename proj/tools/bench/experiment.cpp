#include "bench/experiment.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "bench/corpus_gen.hpp"
#include "hybridrt/agent/transport.hpp"
#include "hybridrt/backchannel/socket.hpp"
#include "hybridrt/error.hpp"
#include "hybridrt/pipeline/corpus.hpp"
#include "hybridrt/pipeline/index_store.hpp"

extern char** environ;

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace std::chrono_literals;

namespace hybridrt::bench {

using agent::AclMessage;
using agent::MessageTransport;
using agent::Performative;
using agent::Term;
using pipeline::NodeStats;
using pipeline::RunConfig;

double RunMetrics::mean_wall_time_s() const {
  if (repeats.empty()) return 0;
  double sum = 0;
  for (const auto& r : repeats) sum += r.wall_time_s;
  return sum / static_cast<double>(repeats.size());
}

std::string RunMetrics::to_json() const {
  json reps = json::array();
  for (const auto& r : repeats) {
    reps.push_back({
        {"repeat", r.repeat},
        {"wall_time_s", r.wall_time_s},
        {"docs_indexed", r.docs_indexed},
        {"acl_msgs", r.acl_msgs},
        {"acl_msgs_by_agent", r.acl_msgs_by_agent},
        {"lifecycle_msgs", r.lifecycle_msgs},
        {"backchannel_bytes", r.backchannel_bytes},
        {"channels_opened", r.channels_opened},
        {"channel_active_server", r.channel_active_server},
        {"channel_active_client", r.channel_active_client},
        {"hot_swaps", r.hot_swaps},
        {"agents_created", r.agents_created},
        {"agents_retired", r.agents_retired},
        {"docs_translated", r.docs_translated},
        {"malformed", r.malformed},
        {"duplicates", r.duplicates},
        {"missing", r.missing},
        {"exactly_once", r.exactly_once},
        {"management_log", r.management_log},
        {"team_traces", r.team_traces},
    });
  }
  json j{{"mode", mode},         {"nodes", nodes}, {"docs", docs}, {"seed", seed},
         {"mean_wall_time_s", mean_wall_time_s()}, {"repeats", reps}};
  return j.dump(2);
}

RunMetrics RunMetrics::from_json(const std::string& text) {
  RunMetrics m;
  try {
    auto j = json::parse(text);
    m.mode = j.at("mode").get<std::string>();
    m.nodes = j.at("nodes").get<std::size_t>();
    m.docs = j.at("docs").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& r : j.at("repeats")) {
      RepeatMetrics x;
      x.repeat = r.at("repeat").get<std::size_t>();
      x.wall_time_s = r.at("wall_time_s").get<double>();
      x.docs_indexed = r.at("docs_indexed").get<std::uint64_t>();
      x.acl_msgs = r.at("acl_msgs").get<std::uint64_t>();
      x.acl_msgs_by_agent = r.at("acl_msgs_by_agent").get<std::uint64_t>();
      x.lifecycle_msgs = r.at("lifecycle_msgs").get<std::uint64_t>();
      x.backchannel_bytes = r.at("backchannel_bytes").get<std::uint64_t>();
      x.channels_opened = r.at("channels_opened").get<std::uint64_t>();
      x.channel_active_server = r.at("channel_active_server").get<std::uint64_t>();
      x.channel_active_client = r.at("channel_active_client").get<std::uint64_t>();
      x.hot_swaps = r.at("hot_swaps").get<std::uint64_t>();
      x.agents_created = r.at("agents_created").get<std::uint64_t>();
      x.agents_retired = r.at("agents_retired").get<std::uint64_t>();
      x.docs_translated = r.at("docs_translated").get<std::uint64_t>();
      x.malformed = r.at("malformed").get<std::uint64_t>();
      x.duplicates = r.at("duplicates").get<std::uint64_t>();
      x.missing = r.at("missing").get<std::uint64_t>();
      x.exactly_once = r.at("exactly_once").get<bool>();
      x.management_log = r.at("management_log").get<std::vector<std::string>>();
      x.team_traces = r.at("team_traces").get<std::map<std::string, std::vector<std::int64_t>>>();
      m.repeats.push_back(std::move(x));
    }
  } catch (const json::exception& e) {
    fail(Errc::kInvalidArgument, std::string("bad metrics file: ") + e.what());
  }
  return m;
}

namespace {

// Blocks of 400 ports between 20000 and 32000, below the usual ephemeral range.
constexpr std::uint16_t kFirstBlock = 20000;
constexpr std::uint16_t kBlockSize = 400;
constexpr int kBlocks = 30;

bool port_free(const std::string& host, std::uint16_t port) {
  try {
    backchannel::Listener::open({host, port});
    return true;
  } catch (const Error&) {
    return false;
  }
}

bool block_free(const std::string& host, std::uint16_t base, std::size_t nodes) {
  RunConfig probe;
  probe.base_port = base;
  for (std::size_t k = 0; k <= nodes; ++k) {
    if (!port_free(host, probe.transport_port(k))) return false;
  }
  for (std::size_t k = 1; k <= nodes; ++k) {
    for (std::size_t slot = 0; slot < 16; ++slot) {
      if (!port_free(host, probe.pull_port(k, slot))) return false;
    }
  }
  return true;
}

}  // namespace

std::uint16_t default_base_port(const std::string& host, std::size_t nodes) {
  for (int attempt = 0; attempt < kBlocks; ++attempt) {
    auto block = (static_cast<int>(::getpid()) + attempt) % kBlocks;
    auto base = static_cast<std::uint16_t>(kFirstBlock + block * kBlockSize);
    if (block_free(host, base, nodes)) return base;
  }
  fail(Errc::kPortUnavailable, "no free port block for the run");
}

fs::path ensure_corpus(const fs::path& out, std::size_t docs, std::uint64_t seed) {
  auto dir = out / "corpus";
  auto stamp = dir / ".generated";
  auto expected = fmt::format("{} {}", docs, seed);
  {
    std::ifstream in(stamp);
    std::string line;
    if (in && std::getline(in, line) && line == expected) return dir;
  }
  spdlog::info("generating {} documents (seed {}) in {}", docs, seed, dir.string());
  generate_corpus(docs, seed, dir);
  std::ofstream(stamp) << expected << "\n";
  return dir;
}

namespace {

class ChildProcess {
 public:
  ChildProcess(const fs::path& exe, std::vector<std::string> args, const fs::path& log) {
    std::vector<char*> argv;
    args.insert(args.begin(), exe.string());
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);
    int rc = posix_spawn(&pid_, exe.c_str(), &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) fail(Errc::kIncompleteIndex, fmt::format("cannot start {}: {}", exe.string(), std::strerror(rc)));
  }
  ~ChildProcess() { kill(); }
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  bool running() {
    if (pid_ <= 0) return false;
    int status = 0;
    if (::waitpid(pid_, &status, WNOHANG) == pid_) {
      pid_ = -1;
      exit_status_ = status;
      return false;
    }
    return true;
  }

  bool wait_for(std::chrono::milliseconds timeout) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    while (running()) {
      if (std::chrono::steady_clock::now() > deadline) return false;
      std::this_thread::sleep_for(10ms);
    }
    return true;
  }

  void kill() {
    if (!running()) return;
    ::kill(pid_, SIGTERM);
    if (!wait_for(2s)) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
      pid_ = -1;
    }
  }

  int exit_status() const { return exit_status_; }

 private:
  pid_t pid_ = -1;
  int exit_status_ = 0;
};

class ControlInbox {
 public:
  void push(AclMessage m) {
    {
      std::lock_guard lock(mu_);
      messages_.push_back(std::move(m));
    }
    cv_.notify_all();
  }
  std::optional<AclMessage> pop(std::chrono::milliseconds wait) {
    std::unique_lock lock(mu_);
    if (!cv_.wait_for(lock, wait, [&] { return !messages_.empty(); })) return std::nullopt;
    auto m = std::move(messages_.front());
    messages_.pop_front();
    return m;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<AclMessage> messages_;
};

void send_control(MessageTransport& transport, std::size_t node, Term content) {
  transport.send({Performative::kInform, pipeline::kOrchestratorId, "platform@" + RunConfig::node_name(node),
                  MessageTransport::kControlConversation, std::move(content)});
}

RepeatMetrics run_once(const ExperimentConfig& config, const fs::path& corpus, std::size_t repeat) {
  auto run_dir = config.out / "runs" /
                 fmt::format("{}-n{}-r{}", pipeline::to_string(config.run.mode), config.run.nodes, repeat);
  std::error_code ec;
  fs::remove_all(run_dir, ec);
  fs::create_directories(run_dir, ec);
  if (ec) fail(Errc::kDirectoryNotWritable, "cannot create " + run_dir.string());

  RunConfig rc = config.run;
  rc.corpus_dir = fs::absolute(corpus);
  rc.claims_dir = fs::absolute(run_dir / "claims");
  rc.index_dir = fs::absolute(run_dir / "index");
  if (rc.base_port == 0) rc.base_port = default_base_port(rc.host, rc.nodes);
  auto config_path = run_dir / "node.json";
  std::ofstream(config_path) << rc.to_json();

  MessageTransport transport("n0");
  ControlInbox inbox;
  transport.register_agent(pipeline::kOrchestratorId, [&](AclMessage m) { inbox.push(std::move(m)); });
  transport.listen({rc.host, rc.base_port});
  for (std::size_t k = 1; k <= rc.nodes; ++k) {
    transport.add_peer(RunConfig::node_name(k), {rc.host, rc.transport_port(k)}, /*broadcasts=*/false);
  }

  std::vector<std::unique_ptr<ChildProcess>> children;
  for (std::size_t k = 1; k <= rc.nodes; ++k) {
    children.push_back(std::make_unique<ChildProcess>(
        config.node_executable,
        std::vector<std::string>{"node", "--config", config_path.string(), "--index", std::to_string(k)},
        run_dir / fmt::format("node-{}.log", k)));
  }
  auto check_children = [&] {
    for (std::size_t k = 0; k < children.size(); ++k) {
      if (!children[k]->running()) {
        fail(Errc::kIncompleteIndex,
             fmt::format("node n{} exited early (status {}), see {}", k + 1, children[k]->exit_status(),
                         (run_dir / fmt::format("node-{}.log", k + 1)).string()));
      }
    }
  };

  std::size_t ready = 0;
  auto ready_deadline = std::chrono::steady_clock::now() + 30s;
  while (ready < rc.nodes) {
    if (std::chrono::steady_clock::now() > ready_deadline) fail(Errc::kTimeout, "nodes did not report ready");
    check_children();
    auto m = inbox.pop(50ms);
    if (m && m->atom() && m->atom()->text() == "ready") ++ready;
  }

  auto t0 = std::chrono::steady_clock::now();
  for (std::size_t k = 1; k <= rc.nodes; ++k) send_control(transport, k, Term::constant("start"));
  for (;;) {
    if (pipeline::manifest_size(rc.index_dir) >= config.docs) break;
    check_children();
    if (std::chrono::steady_clock::now() - t0 > config.ceiling) {
      fail(Errc::kTimeout, fmt::format("run exceeded {} s with {} of {} docs indexed", config.ceiling.count(),
                                       pipeline::manifest_size(rc.index_dir), config.docs));
    }
    std::this_thread::sleep_for(5ms);
  }
  auto wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  for (std::size_t k = 1; k <= rc.nodes; ++k) send_control(transport, k, Term::constant("shutdown"));
  std::vector<NodeStats> stats;
  auto report_deadline = std::chrono::steady_clock::now() + 60s;
  while (stats.size() < rc.nodes && std::chrono::steady_clock::now() < report_deadline) {
    auto m = inbox.pop(50ms);
    if (!m) continue;
    if (auto* opaque = std::get_if<agent::Opaque>(&m->content)) stats.push_back(NodeStats::from_json(opaque->bytes));
  }
  for (auto& c : children) {
    if (!c->wait_for(10s)) c->kill();
  }
  transport.shutdown();
  if (stats.size() < rc.nodes) fail(Errc::kIncompleteIndex, "missing node reports");

  RepeatMetrics r;
  r.repeat = repeat;
  r.wall_time_s = wall;
  for (const auto& s : stats) {
    r.acl_msgs += s.acl_messages;
    for (const auto& [agent, n] : s.sent_by_agent) r.acl_msgs_by_agent += n;
    r.lifecycle_msgs += s.lifecycle_messages;
    r.backchannel_bytes += s.backchannel_bytes;
    r.channels_opened += s.channels_opened;
    r.channel_active_server += s.channel_active_server;
    r.channel_active_client += s.channel_active_client;
    r.hot_swaps += s.hot_swaps;
    r.agents_created += s.agents_created;
    r.agents_retired += s.agents_retired;
    r.docs_translated += s.docs_translated;
    r.malformed += s.malformed;
    if (!s.management_log.empty()) r.management_log = s.management_log;
    if (!s.team_traces.empty()) r.team_traces = s.team_traces;
  }

  auto manifest = pipeline::read_manifest(rc.index_dir);
  std::vector<std::string> expected;
  for (const auto& e : pipeline::list_corpus(corpus)) expected.push_back(e.doc_id);
  std::sort(manifest.begin(), manifest.end());
  r.docs_indexed = manifest.size();
  auto last = std::unique(manifest.begin(), manifest.end());
  r.duplicates = static_cast<std::uint64_t>(manifest.end() - last);
  manifest.erase(last, manifest.end());
  std::vector<std::string> missing;
  std::set_difference(expected.begin(), expected.end(), manifest.begin(), manifest.end(), std::back_inserter(missing));
  r.missing = missing.size();
  r.exactly_once = r.duplicates == 0 && missing.empty() && manifest.size() == expected.size();

  std::ofstream(run_dir / "metrics.json") << RunMetrics{std::string(pipeline::to_string(rc.mode)), rc.nodes,
                                                         config.docs, config.seed, {r}}.to_json();
  spdlog::info("{} nodes={} repeat={}: {:.2f} s, {} docs, {} acl msgs, {} backchannel bytes{}",
               pipeline::to_string(rc.mode), rc.nodes, repeat, wall, r.docs_indexed, r.acl_msgs,
               r.backchannel_bytes, r.exactly_once ? "" : " (manifest mismatch)");
  return r;
}

}  // namespace

RunMetrics run_experiment(const ExperimentConfig& config) {
  if (config.repeats == 0) fail(Errc::kInvalidArgument, "repeats must be at least 1");
  if (config.docs == 0) fail(Errc::kInvalidArgument, "docs must be positive");
  if (config.run.nodes == 0) fail(Errc::kInvalidArgument, "nodes must be at least 1");
  auto corpus = ensure_corpus(config.out, config.docs, config.seed);
  RunMetrics m;
  m.mode = std::string(pipeline::to_string(config.run.mode));
  m.nodes = config.run.nodes;
  m.docs = config.docs;
  m.seed = config.seed;
  for (std::size_t r = 1; r <= config.repeats; ++r) m.repeats.push_back(run_once(config, corpus, r));
  return m;
}

void record_results(const fs::path& out, const RunMetrics& metrics) {
  auto csv = out / "results.csv";
  std::vector<std::string> kept;
  {
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    auto prefix = fmt::format("{},{},", metrics.mode, metrics.nodes);
    while (std::getline(in, line)) {
      if (!line.empty() && line.rfind(prefix, 0) != 0) kept.push_back(line);
    }
  }
  std::ofstream outcsv(csv, std::ios::trunc);
  if (!outcsv) fail(Errc::kDirectoryNotWritable, "cannot write " + csv.string());
  outcsv << "mode,nodes,repeat,wall_time_s,acl_msgs,backchannel_bytes\n";
  for (const auto& line : kept) outcsv << line << "\n";
  for (const auto& r : metrics.repeats) {
    outcsv << fmt::format("{},{},{},{:.3f},{},{}\n", metrics.mode, metrics.nodes, r.repeat, r.wall_time_s, r.acl_msgs,
                          r.backchannel_bytes);
  }
  std::ofstream(out / fmt::format("metrics-{}-n{}.json", metrics.mode, metrics.nodes)) << metrics.to_json();
}

}  // namespace hybridrt::bench
