#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hybridrt::bench {

/// Time ratios (HYBRID / ACL_ONLY, percent) reported for the original
/// system, printed alongside measured ratios.
inline constexpr double kReferenceRatioOneNode = 44.48;
inline constexpr double kReferenceRatioTwoNodes = 54.15;

struct ResultRow {
  std::string mode;
  std::size_t nodes = 0;
  std::size_t repeat = 0;
  double wall_time_s = 0;
  std::uint64_t acl_msgs = 0;
  std::uint64_t backchannel_bytes = 0;
};

std::vector<ResultRow> parse_results(const std::string& csv);
std::vector<ResultRow> read_results(const std::filesystem::path& csv);

struct ModeSummary {
  std::string mode;
  std::size_t nodes = 0;
  std::size_t repeats = 0;
  double mean_wall_time_s = 0;
  double mean_acl_msgs = 0;
  double mean_backchannel_bytes = 0;
};

struct Comparison {
  std::size_t nodes = 0;
  double acl_mean_s = 0;
  double hybrid_mean_s = 0;
  double ratio_percent = 0;  // hybrid / acl
};

struct Report {
  std::vector<ModeSummary> summaries;
  std::vector<Comparison> comparisons;

  std::string text() const;
  std::string csv() const;
};

/// Needs at least two (mode, nodes) groups; MismatchedConfigs otherwise.
Report build_report(const std::vector<ResultRow>& rows);

/// Reads results.csv and checks that every metrics-*.json in the directory
/// shares one doc target and seed (MismatchedConfigs otherwise).
Report load_report(const std::filesystem::path& dir);

}  // namespace hybridrt::bench
