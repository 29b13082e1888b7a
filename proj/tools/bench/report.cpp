#include "bench/report.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "bench/experiment.hpp"
#include "hybridrt/error.hpp"

namespace fs = std::filesystem;

namespace hybridrt::bench {

std::vector<ResultRow> parse_results(const std::string& csv) {
  std::vector<ResultRow> rows;
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line.rfind("mode,nodes,repeat,wall_time_s,acl_msgs,backchannel_bytes", 0) != 0) {
    fail(Errc::kInvalidArgument, "results.csv has an unexpected header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (cells.size() != 6) fail(Errc::kInvalidArgument, "malformed results row: " + line);
    try {
      rows.push_back({cells[0], std::stoul(cells[1]), std::stoul(cells[2]), std::stod(cells[3]),
                      std::stoull(cells[4]), std::stoull(cells[5])});
    } catch (const std::exception&) {
      fail(Errc::kInvalidArgument, "malformed results row: " + line);
    }
  }
  return rows;
}

std::vector<ResultRow> read_results(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) fail(Errc::kInvalidArgument, "cannot read " + csv.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_results(ss.str());
}

Report build_report(const std::vector<ResultRow>& rows) {
  struct Acc {
    std::size_t n = 0;
    double wall = 0;
    double acl = 0;
    double bc = 0;
  };
  std::map<std::pair<std::size_t, std::string>, Acc> groups;
  for (const auto& r : rows) {
    auto& a = groups[{r.nodes, r.mode}];
    ++a.n;
    a.wall += r.wall_time_s;
    a.acl += static_cast<double>(r.acl_msgs);
    a.bc += static_cast<double>(r.backchannel_bytes);
  }
  if (groups.size() < 2) fail(Errc::kMismatchedConfigs, "a comparison needs at least two result sets");

  Report report;
  std::map<std::size_t, std::pair<std::optional<double>, std::optional<double>>> by_nodes;
  for (const auto& [key, a] : groups) {
    const auto& [nodes, mode] = key;
    auto n = static_cast<double>(a.n);
    report.summaries.push_back({mode, nodes, a.n, a.wall / n, a.acl / n, a.bc / n});
    if (mode == "acl") by_nodes[nodes].first = a.wall / n;
    if (mode == "hybrid") by_nodes[nodes].second = a.wall / n;
  }
  for (const auto& [nodes, means] : by_nodes) {
    if (!means.first || !means.second || *means.first <= 0) continue;
    report.comparisons.push_back({nodes, *means.first, *means.second, 100.0 * *means.second / *means.first});
  }
  return report;
}

std::string Report::text() const {
  std::string out = fmt::format("{:<8} {:>5} {:>7} {:>12} {:>12} {:>18}\n", "mode", "nodes", "repeats",
                                "mean_time_s", "mean_acl", "mean_backchannel_B");
  for (const auto& s : summaries) {
    out += fmt::format("{:<8} {:>5} {:>7} {:>12.3f} {:>12.1f} {:>18.1f}\n", s.mode, s.nodes, s.repeats,
                       s.mean_wall_time_s, s.mean_acl_msgs, s.mean_backchannel_bytes);
  }
  out += "\n";
  for (const auto& c : comparisons) {
    out += fmt::format("nodes={}: hybrid/acl time ratio {:.2f}% ({:.3f} s / {:.3f} s)\n", c.nodes, c.ratio_percent,
                       c.hybrid_mean_s, c.acl_mean_s);
  }
  out += fmt::format("reference: 1 node {:.2f}%, 2 nodes {:.2f}%\n", kReferenceRatioOneNode,
                     kReferenceRatioTwoNodes);
  return out;
}

std::string Report::csv() const {
  std::string out = "nodes,acl_mean_s,hybrid_mean_s,ratio_percent,reference_percent\n";
  for (const auto& c : comparisons) {
    std::string reference = c.nodes == 1   ? fmt::format("{:.2f}", kReferenceRatioOneNode)
                            : c.nodes == 2 ? fmt::format("{:.2f}", kReferenceRatioTwoNodes)
                                           : std::string{};
    out += fmt::format("{},{:.3f},{:.3f},{:.2f},{}\n", c.nodes, c.acl_mean_s, c.hybrid_mean_s, c.ratio_percent,
                       reference);
  }
  return out;
}

Report load_report(const fs::path& dir) {
  std::optional<std::pair<std::size_t, std::uint64_t>> shared;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    auto name = entry.path().filename().string();
    if (name.rfind("metrics-", 0) != 0 || entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    std::stringstream ss;
    ss << in.rdbuf();
    auto m = RunMetrics::from_json(ss.str());
    std::pair<std::size_t, std::uint64_t> key{m.docs, m.seed};
    if (shared && *shared != key) {
      fail(Errc::kMismatchedConfigs,
           fmt::format("{} used docs={} seed={}, other runs used docs={} seed={}", name, m.docs, m.seed,
                       shared->first, shared->second));
    }
    shared = key;
  }
  if (ec) fail(Errc::kInvalidArgument, "cannot read " + dir.string());
  return build_report(read_results(dir / "results.csv"));
}

}  // namespace hybridrt::bench
