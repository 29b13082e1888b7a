#include "hybridrt/pipeline/policy.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "hybridrt/error.hpp"

namespace hybridrt::pipeline {

std::string_view to_string(Team team) {
  switch (team) {
    case Team::kGather: return "GATHER";
    case Team::kTranslate: return "TRANSLATE";
    case Team::kIndex: return "INDEX";
  }
  return "?";
}

std::optional<Team> team_from_string(std::string_view text) {
  if (text == "GATHER") return Team::kGather;
  if (text == "TRANSLATE") return Team::kTranslate;
  if (text == "INDEX") return Team::kIndex;
  return std::nullopt;
}

std::optional<Team> downstream_of(Team team) {
  if (team == Team::kGather) return Team::kTranslate;
  if (team == Team::kTranslate) return Team::kIndex;
  return std::nullopt;
}

std::optional<Team> upstream_of(Team team) {
  if (team == Team::kTranslate) return Team::kGather;
  if (team == Team::kIndex) return Team::kTranslate;
  return std::nullopt;
}

agent::Term Advertisement::to_term() const {
  return agent::atom("advert", agent, std::string(pipeline::to_string(team)), std::to_string(queue_len), node,
                     std::to_string(timestamp), queue_component, std::to_string(pull_port),
                     std::to_string(node_load));
}

Advertisement Advertisement::from_term(const agent::Term& t) {
  if (!t.is_compound() || t.text() != "advert" || t.arity() != 8) {
    fail(Errc::kInvalidArgument, "not an advertisement: " + t.to_string());
  }
  auto team = team_from_string(t.arg(1).text());
  if (!team) fail(Errc::kInvalidArgument, "unknown team " + t.arg(1).text());
  auto num = [&](std::size_t i) {
    try {
      return static_cast<std::int64_t>(std::stoll(t.arg(i).text()));
    } catch (const std::exception&) {
      fail(Errc::kInvalidArgument, "bad number in advertisement: " + t.arg(i).text());
    }
  };
  return {t.arg(0).text(), *team, num(2), t.arg(3).text(), num(4), t.arg(5).text(), num(6), num(7)};
}

std::optional<std::string> select_source(const std::vector<Advertisement>& ads,
                                         const std::optional<std::string>& route) {
  if (route) {
    for (const auto& ad : ads) {
      if (ad.agent == *route) return ad.agent;
    }
  }
  const Advertisement* best = nullptr;
  for (const auto& ad : ads) {
    if (ad.queue_len <= 0) continue;
    if (!best || ad.queue_len > best->queue_len ||
        (ad.queue_len == best->queue_len &&
         (ad.timestamp > best->timestamp || (ad.timestamp == best->timestamp && ad.agent < best->agent)))) {
      best = &ad;
    }
  }
  if (!best) return std::nullopt;
  return best->agent;
}

std::string_view to_string(ManagementAction::Kind kind) {
  using K = ManagementAction::Kind;
  switch (kind) {
    case K::kHalt: return "HALT";
    case K::kResume: return "RESUME";
    case K::kTerminate: return "TERMINATE";
    case K::kCreate: return "CREATE";
    case K::kRoute: return "ROUTE";
  }
  return "?";
}

agent::Term ManagementAction::to_term() const {
  using K = ManagementAction::Kind;
  switch (kind) {
    case K::kHalt: return agent::atom("halt", std::to_string(duration_ms));
    case K::kResume: return agent::Term::constant("resume");
    case K::kTerminate: return agent::Term::constant("terminate");
    case K::kCreate: return agent::atom("create", std::string(pipeline::to_string(team)));
    case K::kRoute: return agent::atom("route", source.empty() ? std::string("none") : source);
  }
  return agent::Term::constant("noop");
}

std::string ManagementAction::to_string() const {
  return fmt::format("{} {} {}", pipeline::to_string(kind), target, to_term().to_string());
}

bool is_growth(const std::vector<std::int64_t>& samples, double ratio) {
  if (samples.size() < 2) return false;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i] < samples[i - 1]) return false;
  }
  auto first = samples.front();
  auto last = samples.back();
  return last > first && static_cast<double>(last) >= static_cast<double>(first) * (1.0 + ratio);
}

bool is_starved(const std::vector<std::int64_t>& samples) {
  return !samples.empty() && std::all_of(samples.begin(), samples.end(), [](auto v) { return v == 0; });
}

BalanceAssessor::BalanceAssessor(BalancePolicy policy, std::vector<std::string> nodes)
    : policy_(policy), nodes_(std::move(nodes)) {
  if (policy_.window == 0) fail(Errc::kInvalidArgument, "window must be positive");
}

void BalanceAssessor::forget(const std::string& agent) {
  latest_.erase(agent);
  retiring_.erase(agent);
}

std::vector<std::string> BalanceAssessor::members(Team team) const {
  std::vector<std::string> out;
  for (const auto& [id, ad] : latest_) {
    if (ad.team == team && !retiring_.count(id)) out.push_back(id);
  }
  return out;
}

std::size_t BalanceAssessor::team_size(Team team) const { return members(team).size(); }

std::int64_t BalanceAssessor::team_total(Team team) const {
  std::int64_t total = 0;
  for (const auto& [id, ad] : latest_) {
    if (ad.team == team) total += ad.queue_len;
  }
  return total;
}

std::size_t BalanceAssessor::growth_streak(Team team) const {
  auto it = teams_.find(team);
  return it == teams_.end() ? 0 : it->second.streak;
}

const std::vector<std::int64_t>& BalanceAssessor::trace(Team team) const {
  static const std::vector<std::int64_t> empty;
  auto it = teams_.find(team);
  return it == teams_.end() ? empty : it->second.trace;
}

std::string BalanceAssessor::least_loaded_node() const {
  std::map<std::string, std::int64_t> load;
  for (const auto& n : nodes_) load[n] = 0;
  for (const auto& [id, ad] : latest_) load[ad.node] = std::max(load[ad.node], ad.node_load);
  std::string best;
  std::int64_t best_load = 0;
  for (const auto& n : nodes_) {
    if (best.empty() || load[n] < best_load) {
      best = n;
      best_load = load[n];
    }
  }
  return best;
}

std::vector<ManagementAction> BalanceAssessor::observe(const Advertisement& ad) {
  latest_[ad.agent] = ad;
  auto& state = teams_[ad.team];
  auto total = team_total(ad.team);
  state.trace.push_back(total);
  state.window.push_back({ad.timestamp, total});
  if (state.window.size() < policy_.window) return {};
  auto window = std::move(state.window);
  state.window.clear();
  return assess(ad.team, window);
}

bool BalanceAssessor::overlaps_halt(Team team, std::int64_t from, std::int64_t to) const {
  auto it = teams_.find(team);
  if (it == teams_.end()) return false;
  for (auto [start, end] : it->second.halts) {
    if (from <= end && start <= to) return true;
  }
  return false;
}

std::vector<ManagementAction> BalanceAssessor::halt_team(Team team, std::int64_t now, std::int64_t duration,
                                                         std::int64_t settle) {
  std::vector<ManagementAction> out;
  for (const auto& id : members(team)) {
    out.push_back({ManagementAction::Kind::kHalt, id, team, duration, {}});
  }
  // Members stop late and restart late, so the masked span runs one sampling window past the halt.
  if (!out.empty()) teams_[team].halts.emplace_back(now, now + duration + settle);
  return out;
}

std::vector<ManagementAction> BalanceAssessor::assess(Team team, const std::vector<Sample>& window) {
  auto down = downstream_of(team);
  if (!down) return {};
  auto from = window.front().time;
  auto to = window.back().time;
  if (overlaps_halt(team, from, to) || overlaps_halt(*down, from, to)) return {};

  std::vector<std::int64_t> totals;
  totals.reserve(window.size());
  for (const auto& s : window) totals.push_back(s.total);
  auto& state = teams_[team];

  if (is_growth(totals, policy_.growth_ratio)) {
    ++state.streak;
    if (state.streak < policy_.patience) return halt_team(team, to, policy_.halt_ms, to - from);
    state.streak = 0;
    std::vector<ManagementAction> out;
    auto team_members = members(team);
    if (team_members.size() > 1) {
      // Retire the member with the least to drain; ties go to the larger id.
      std::string victim;
      std::int64_t victim_len = 0;
      for (const auto& id : team_members) {
        auto len = latest_.at(id).queue_len;
        if (victim.empty() || len < victim_len || (len == victim_len && id > victim)) {
          victim = id;
          victim_len = len;
        }
      }
      retiring_.insert(victim);
      out.push_back({ManagementAction::Kind::kTerminate, victim, team, 0, {}});
    }
    out.push_back({ManagementAction::Kind::kCreate, least_loaded_node(), *down, 0, {}});
    return out;
  }
  state.streak = 0;
  if (is_starved(totals)) return halt_team(*down, to, policy_.starve_halt_ms, to - from);
  return {};
}

}  // namespace hybridrt::pipeline
