#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "bench/corpus_gen.hpp"
#include "bench/experiment.hpp"
#include "bench/report.hpp"
#include "hybridrt/error.hpp"
#include "hybridrt/pipeline/node.hpp"

namespace fs = std::filesystem;
using namespace hybridrt;

namespace {

void apply_overrides(pipeline::RunConfig& rc, const std::vector<std::string>& settings) {
  for (const auto& s : settings) {
    auto eq = s.find('=');
    if (eq == std::string::npos) fail(Errc::kInvalidArgument, "--set expects key=value, got " + s);
    rc.set(s.substr(0, eq), s.substr(eq + 1));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybridrt pipeline benchmark"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error");

  auto* corpus = app.add_subcommand("corpus", "generate a synthetic corpus");
  std::size_t corpus_n = 3000;
  std::uint64_t corpus_seed = 1;
  std::string corpus_out;
  corpus->add_option("--n", corpus_n, "number of documents")->check(CLI::PositiveNumber);
  corpus->add_option("--seed", corpus_seed, "generator seed");
  corpus->add_option("--out", corpus_out, "output directory")->required();

  auto* run = app.add_subcommand("run", "run one mode at one node count");
  std::string mode = "hybrid";
  bench::ExperimentConfig exp;
  std::string run_out;
  std::vector<std::string> settings;
  std::int64_t ceiling_s = 600;
  run->add_option("--mode", mode, "acl or hybrid")->check(CLI::IsMember({"acl", "hybrid"}));
  run->add_option("--nodes", exp.run.nodes, "node processes")->check(CLI::PositiveNumber);
  run->add_option("--docs", exp.docs, "documents to index")->check(CLI::PositiveNumber);
  run->add_option("--seed", exp.seed, "corpus seed");
  run->add_option("--repeats", exp.repeats, "repeats")->check(CLI::PositiveNumber);
  run->add_option("--out", run_out, "output directory")->required();
  run->add_option("--ceiling", ceiling_s, "per-repeat time limit in seconds")->check(CLI::PositiveNumber);
  run->add_option("--set", settings, "override a run setting, key=value");

  auto* report = app.add_subcommand("report", "summarise results.csv");
  std::string report_in;
  report->add_option("--in", report_in, "directory holding results.csv")->required();

  auto* node = app.add_subcommand("node", "");
  node->group("");
  std::string node_config;
  std::size_t node_index = 1;
  node->add_option("--config", node_config)->required();
  node->add_option("--index", node_index)->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (corpus->parsed()) {
      bench::generate_corpus(corpus_n, corpus_seed, corpus_out);
      std::cout << fmt::format("wrote {} documents to {}\n", corpus_n, corpus_out);
      return 0;
    }
    if (run->parsed()) {
      exp.run.mode = *pipeline::mode_from_string(mode);
      apply_overrides(exp.run, settings);
      exp.out = run_out;
      exp.ceiling = std::chrono::seconds(ceiling_s);
      exp.node_executable = fs::read_symlink("/proc/self/exe");
      fs::create_directories(exp.out);
      auto metrics = bench::run_experiment(exp);
      bench::record_results(exp.out, metrics);
      bool clean = true;
      for (const auto& r : metrics.repeats) {
        std::cout << fmt::format("{} nodes={} repeat={} wall_time_s={:.3f} docs={} acl_msgs={} backchannel_bytes={}{}\n",
                                 metrics.mode, metrics.nodes, r.repeat, r.wall_time_s, r.docs_indexed, r.acl_msgs,
                                 r.backchannel_bytes, r.exactly_once ? "" : " MANIFEST-MISMATCH");
        clean = clean && r.exactly_once;
      }
      std::cout << fmt::format("mean wall_time_s={:.3f}\n", metrics.mean_wall_time_s());
      return clean ? 0 : 3;
    }
    if (report->parsed()) {
      auto r = bench::load_report(report_in);
      std::cout << r.text();
      std::ofstream(fs::path(report_in) / "report.csv") << r.csv();
      return 0;
    }
    if (node->parsed()) {
      std::ifstream in(node_config);
      std::stringstream ss;
      ss << in.rdbuf();
      return pipeline::run_node_process(pipeline::RunConfig::from_json(ss.str()), node_index);
    }
  } catch (const Error& e) {
    std::cerr << fmt::format("error ({}): {}\n", to_string(e.code()), e.what());
    return 1;
  }
  return 0;
}
