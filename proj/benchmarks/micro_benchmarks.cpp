#include <random>
#include <string>

#include <benchmark/benchmark.h>

#include "hybridrt/agent/term.hpp"
#include "hybridrt/backchannel/frame.hpp"
#include "hybridrt/event.hpp"
#include "hybridrt/pipeline/document.hpp"

using namespace hybridrt;

namespace {

void BM_EventDispatch(benchmark::State& state) {
  EventBus bus;
  auto handlers = state.range(0);
  for (std::int64_t i = 0; i < handlers; ++i) {
    bus.register_handler({kWildcard, kWildcard, i % 7, i % 2 ? HandlerOrigin::kAgent : HandlerOrigin::kFramework,
                          [](const Event&) { return Disposition::kContinue; }});
  }
  Event e;
  e.source = "q1";
  e.name = "queue_grew";
  e.consumable = true;
  for (auto _ : state) benchmark::DoNotOptimize(bus.emit(e));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EventDispatch)->Arg(1)->Arg(8)->Arg(64);

void BM_FrameEncodeDecode(benchmark::State& state) {
  backchannel::Frame frame{backchannel::FrameKind::kPullResponse, std::string(static_cast<std::size_t>(state.range(0)), 'x')};
  for (auto _ : state) {
    auto wire = backchannel::encode_frame(frame);
    std::size_t consumed = 0;
    benchmark::DoNotOptimize(backchannel::decode_frame(wire, consumed));
  }
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FrameEncodeDecode)->Arg(64)->Arg(4096)->Arg(1 << 20);

void BM_TermMatch(benchmark::State& state) {
  auto pattern = agent::parse_term("advert(?agent, GATHER, ?len, n1, ?ts, ?q, ?port, ?load)");
  auto ground = agent::parse_term("advert(g1@n1, GATHER, 12, n1, 123456, g1@n1.queue, 20110, 3)");
  for (auto _ : state) {
    agent::Substitution bindings;
    benchmark::DoNotOptimize(agent::match(pattern, ground, bindings));
  }
}
BENCHMARK(BM_TermMatch);

std::string markup_doc(std::size_t bytes) {
  std::mt19937 rng(1);
  std::string out = "<html><head><title>bench page</title></head><body>";
  while (out.size() < bytes) {
    out += "<p class=\"x\">";
    for (int w = 0; w < 12; ++w) out += "word" + std::to_string(rng() % 500) + " ";
    out += "&amp; more</p>\n";
  }
  return out + "</body></html>";
}

void BM_TranslateMarkup(benchmark::State& state) {
  pipeline::BundleDoc doc{"doc000001", pipeline::DocFormat::kMarkup, markup_doc(static_cast<std::size_t>(state.range(0)))};
  for (auto _ : state) benchmark::DoNotOptimize(pipeline::translate_doc(doc));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(doc.bytes.size()));
}
BENCHMARK(BM_TranslateMarkup)->Arg(512)->Arg(8192);

void BM_TranslateBinary(benchmark::State& state) {
  std::mt19937 rng(2);
  std::string bytes(8192, '\0');
  for (auto& ch : bytes) ch = static_cast<char>(rng() % 4 ? 'a' + rng() % 26 : rng() % 256);
  pipeline::BundleDoc doc{"doc000002", pipeline::DocFormat::kBinary, bytes};
  for (auto _ : state) benchmark::DoNotOptimize(pipeline::translate_doc(doc));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_TranslateBinary);

}  // namespace

BENCHMARK_MAIN();
