#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hybridrt/agent/term.hpp"

namespace hybridrt::pipeline {

enum class Team { kGather, kTranslate, kIndex };

std::string_view to_string(Team team);
std::optional<Team> team_from_string(std::string_view text);
std::optional<Team> downstream_of(Team team);
std::optional<Team> upstream_of(Team team);

/// Periodic queue status broadcast by every pipeline agent.
struct Advertisement {
  std::string agent;
  Team team = Team::kGather;
  std::int64_t queue_len = 0;
  std::string node;
  std::int64_t timestamp = 0;  // milliseconds, monotonic per run
  std::string queue_component;
  std::int64_t pull_port = 0;  // 0 when the queue is not exported
  std::int64_t node_load = 0;

  agent::Term to_term() const;
  /// Throws InvalidArgument on a term of the wrong shape.
  static Advertisement from_term(const agent::Term& term);

  friend bool operator==(const Advertisement&, const Advertisement&) = default;
};

/// Picks the upstream agent to fetch from: the routed agent when a route is
/// set and known, otherwise the longest non-empty queue with ties going to
/// the newer advertisement and then to the smaller agent id. nullopt means
/// there is nothing to fetch.
std::optional<std::string> select_source(const std::vector<Advertisement>& ads,
                                         const std::optional<std::string>& route = std::nullopt);

struct BalancePolicy {
  std::size_t window = 10;             // W advertisements per team
  std::int64_t halt_ms = 5000;         // H
  std::size_t patience = 3;            // K growth windows before reassigning
  std::int64_t advert_period_ms = 1000;  // P
  double growth_ratio = 0.2;
  std::int64_t starve_halt_ms = 1000;
};

struct ManagementAction {
  enum class Kind { kHalt, kResume, kTerminate, kCreate, kRoute };

  Kind kind = Kind::kHalt;
  std::string target;  // agent id, or the node for kCreate
  Team team = Team::kGather;
  std::int64_t duration_ms = 0;
  std::string source;  // kRoute only; empty clears the route

  /// Content of the REQUEST carrying this action.
  agent::Term to_term() const;
  std::string to_string() const;

  friend bool operator==(const ManagementAction&, const ManagementAction&) = default;
};

std::string_view to_string(ManagementAction::Kind kind);

/// True when the samples never decrease and the last exceeds the first by at
/// least the given ratio.
bool is_growth(const std::vector<std::int64_t>& samples, double ratio);
bool is_starved(const std::vector<std::int64_t>& samples);

/// Manager-side bookkeeping: per-team windows over advertised queue totals,
/// turned into management actions.
///
/// Every advertisement from a team appends that team's current total to its
/// window. A full window is assessed and then discarded. Growth halts the
/// team, and after `patience` consecutive growth windows one member is
/// terminated and a downstream agent is created on the least-loaded node
/// (create only, when the team has a single member). A window that is all
/// zeros halts the downstream team briefly. Windows overlapping a halt of
/// either team, or the window-length settling period after it, are skipped
/// without resetting the growth streak.
class BalanceAssessor {
 public:
  BalanceAssessor(BalancePolicy policy, std::vector<std::string> nodes);

  std::vector<ManagementAction> observe(const Advertisement& ad);
  void forget(const std::string& agent);

  std::size_t team_size(Team team) const;
  std::vector<std::string> members(Team team) const;
  std::int64_t team_total(Team team) const;
  std::string least_loaded_node() const;
  std::size_t growth_streak(Team team) const;
  /// Team totals in arrival order, kept for reporting.
  const std::vector<std::int64_t>& trace(Team team) const;
  const BalancePolicy& policy() const { return policy_; }

 private:
  struct Sample {
    std::int64_t time;
    std::int64_t total;
  };
  struct TeamState {
    std::vector<Sample> window;
    std::vector<std::int64_t> trace;
    std::size_t streak = 0;
    std::vector<std::pair<std::int64_t, std::int64_t>> halts;
  };

  std::vector<ManagementAction> assess(Team team, const std::vector<Sample>& window);
  bool overlaps_halt(Team team, std::int64_t from, std::int64_t to) const;
  std::vector<ManagementAction> halt_team(Team team, std::int64_t now, std::int64_t duration, std::int64_t settle);

  BalancePolicy policy_;
  std::vector<std::string> nodes_;
  std::map<std::string, Advertisement> latest_;
  std::set<std::string> retiring_;
  std::map<Team, TeamState> teams_;
};

}  // namespace hybridrt::pipeline
