#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hybridrt/pipeline/node.hpp"

namespace hybridrt::bench {

struct ExperimentConfig {
  pipeline::RunConfig run;  // mode, nodes, policy, ports and team sizes
  std::size_t docs = 3000;  // doc target, also the generated corpus size
  std::uint64_t seed = 1;
  std::size_t repeats = 3;
  std::filesystem::path out;
  std::chrono::seconds ceiling{600};
  std::filesystem::path node_executable;  // binary providing "node --config F --index K"
};

struct RepeatMetrics {
  std::size_t repeat = 0;
  double wall_time_s = 0;
  std::uint64_t docs_indexed = 0;
  std::uint64_t acl_msgs = 0;
  std::uint64_t acl_msgs_by_agent = 0;
  std::uint64_t lifecycle_msgs = 0;
  std::uint64_t backchannel_bytes = 0;
  std::uint64_t channels_opened = 0;
  std::uint64_t channel_active_server = 0;
  std::uint64_t channel_active_client = 0;
  std::uint64_t hot_swaps = 0;
  std::uint64_t agents_created = 0;
  std::uint64_t agents_retired = 0;
  std::uint64_t docs_translated = 0;
  std::uint64_t malformed = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t missing = 0;
  bool exactly_once = false;
  std::vector<std::string> management_log;
  std::map<std::string, std::vector<std::int64_t>> team_traces;
};

struct RunMetrics {
  std::string mode;
  std::size_t nodes = 0;
  std::size_t docs = 0;
  std::uint64_t seed = 0;
  std::vector<RepeatMetrics> repeats;

  double mean_wall_time_s() const;
  std::string to_json() const;
  static RunMetrics from_json(const std::string& text);
};

/// Generates the corpus under out/corpus unless one for (docs, seed) is
/// already there. Returns its path.
std::filesystem::path ensure_corpus(const std::filesystem::path& out, std::size_t docs, std::uint64_t seed);

/// Runs `repeats` pipeline runs with `nodes` node processes each, stopping
/// every run once the manifest holds `docs` entries. Throws Timeout when a
/// run exceeds the ceiling and IncompleteIndex when a node process dies.
RunMetrics run_experiment(const ExperimentConfig& config);

/// Replaces the rows of (mode, nodes) in out/results.csv and writes
/// out/metrics-<mode>-n<nodes>.json.
void record_results(const std::filesystem::path& out, const RunMetrics& metrics);

/// Base port used when none is configured: the first block, starting from
/// one derived from the pid, whose transport and pull ports are all free.
/// PortUnavailable when every block is taken.
std::uint16_t default_base_port(const std::string& host, std::size_t nodes);

}  // namespace hybridrt::bench
