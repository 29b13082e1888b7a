#include "hybridrt/pipeline/components.hpp"

#include <chrono>

#include <spdlog/spdlog.h>

#include "hybridrt/error.hpp"

namespace hybridrt::pipeline {

using namespace std::chrono_literals;

namespace {

bool transient(Errc code) {
  switch (code) {
    case Errc::kProviderInactive:
    case Errc::kProviderFault:
    case Errc::kNoBinding:
    case Errc::kChannelClosed:
    case Errc::kTimeout:
    case Errc::kConnectionRefused:
    case Errc::kUnknownComponent:
      return true;
    default:
      return false;
  }
}

void check_non_negative(const std::string& key, const Scalar& value) {
  auto n = as_int(value);
  if (!n || *n < 0) fail(Errc::kRejectedValue, key + " must be a non-negative integer");
}

std::string current_server(const RequiredPort& port) {
  auto c = port.connections();
  return c.empty() ? std::string{} : c.front().server;
}

}  // namespace

// DataQueue

class DataQueue::In : public PushEndpoint {
 public:
  explicit In(DataQueue* q) : q_(q) {}
  void push(const DataEnvelope& envelope) override { q_->push_items(envelope); }

 private:
  DataQueue* q_;
};

class DataQueue::Out : public PullEndpoint {
 public:
  explicit Out(DataQueue* q) : q_(q) {}
  DataEnvelope pull(std::size_t max_items) override { return q_->pull_items(max_items); }

 private:
  DataQueue* q_;
};

std::vector<InterfaceDescriptor> DataQueue::interfaces() {
  return {
      {"input", Style::kData, kBundleType, Direction::kProvided, std::make_shared<In>(this), DataFlow::kPush},
      {"pull", Style::kData, kBundleType, Direction::kProvided, std::make_shared<Out>(this), DataFlow::kPull},
  };
}

void DataQueue::validate(const std::string& key, const Scalar& value) const {
  if (key == "capacity" || key == "push_timeout_ms") check_non_negative(key, value);
}

void DataQueue::on_deactivate() { space_.notify_all(); }

std::size_t DataQueue::length() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

void DataQueue::push_items(const DataEnvelope& envelope) {
  if (envelope.empty()) return;
  auto capacity = static_cast<std::size_t>(int_property("capacity", 0));
  auto timeout = std::chrono::milliseconds(int_property("push_timeout_ms", 100));
  bool grew = false;
  std::size_t length = 0;
  {
    std::unique_lock lock(mu_);
    if (capacity > 0) {
      bool room = space_.wait_for(lock, timeout, [&] {
        return items_.size() < capacity || !active();
      });
      if (!active()) fail(Errc::kProviderInactive, id() + " is not active");
      if (!room) fail(Errc::kTimeout, id() + " is full");
    }
    grew = items_.empty();
    items_.insert(items_.end(), envelope.items.begin(), envelope.items.end());
    length = items_.size();
  }
  pushed_ += envelope.items.size();
  if (grew) emit(worker_events::kQueueGrew, {{"length", static_cast<std::int64_t>(length)}});
}

DataEnvelope DataQueue::pull_items(std::size_t max_items) {
  DataEnvelope out{kBundleType, {}};
  bool drained = false;
  {
    std::lock_guard lock(mu_);
    while (!items_.empty() && out.items.size() < max_items) {
      out.items.push_back(std::move(items_.front()));
      items_.pop_front();
    }
    drained = !out.items.empty() && items_.empty();
  }
  if (!out.items.empty()) space_.notify_all();
  if (drained) emit(worker_events::kQueueDrained);
  return out;
}

// WorkerComponent

namespace {

// Marks the worker as holding before it takes input so a concurrent drain never sees a gap.
class TakeGuard {
 public:
  explicit TakeGuard(std::atomic<bool>& holding) : holding_(holding) { holding_ = true; }
  ~TakeGuard() {
    if (!kept_) holding_ = false;
  }
  TakeGuard(const TakeGuard&) = delete;
  TakeGuard& operator=(const TakeGuard&) = delete;
  void keep() { kept_ = true; }

 private:
  std::atomic<bool>& holding_;
  bool kept_ = false;
};

}  // namespace


WorkerComponent::~WorkerComponent() = default;

void WorkerComponent::validate(const std::string& key, const Scalar& value) const {
  if (key == "idle_ms" || key == "delay_ms" || key == "batch") check_non_negative(key, value);
  if (key == "drain" && !std::holds_alternative<bool>(value)) fail(Errc::kRejectedValue, "drain must be a boolean");
}

void WorkerComponent::on_activate() {
  std::lock_guard lock(run_mu_);
  if (thread_.joinable()) return;
  thread_ = std::jthread([this](std::stop_token stop) { run(stop); });
}

void WorkerComponent::on_deactivate() { stop_worker(); }
void WorkerComponent::on_unload() { stop_worker(); }

void WorkerComponent::stop_worker() {
  std::lock_guard lock(run_mu_);
  if (!thread_.joinable()) return;
  thread_.request_stop();
  thread_.join();
  thread_ = {};
}


bool WorkerComponent::draining() const {
  auto d = property("drain");
  return d && as_bool(*d).value_or(false);
}

void WorkerComponent::run(std::stop_token stop) {
  std::mutex m;
  std::condition_variable_any cv;
  while (!stop.stop_requested()) {
    bool progressed = false;
    try {
      progressed = step();
    } catch (const std::exception& e) {
      spdlog::warn("{}: worker step failed: {}", id(), e.what());
    }
    if (progressed) continue;
    auto idle = std::chrono::milliseconds(int_property("idle_ms", 2));
    std::unique_lock lock(m);
    cv.wait_for(lock, stop, idle, [] { return false; });
  }
}

void WorkerComponent::emit_once(const char* name, PropertyMap payload) {
  {
    std::lock_guard lock(flags_mu_);
    for (const auto& f : raised_) {
      if (f == name) return;
    }
    raised_.emplace_back(name);
  }
  emit(name, std::move(payload));
}

void WorkerComponent::clear_flag(const char* name) {
  std::lock_guard lock(flags_mu_);
  std::erase(raised_, std::string(name));
}

void WorkerComponent::clear_flags() {
  std::lock_guard lock(flags_mu_);
  raised_.clear();
}

// DataGatherer

DataGatherer::~DataGatherer() { stop_worker(); }

std::vector<InterfaceDescriptor> DataGatherer::interfaces() {
  return {{"output", Style::kData, kBundleType, Direction::kRequired, output_, DataFlow::kPush}};
}

bool DataGatherer::step() {
  if (!pending_) {
    TakeGuard take(holding_);
    if (draining()) return false;
    if (!source_) {
      try {
        source_ = std::make_unique<CorpusSource>(string_property("corpus_dir"), string_property("claims_dir"),
                                                 string_property("owner", id()));
      } catch (const Error& e) {
        emit_once("source_error", {{"error", std::string(e.what())}});
        return false;
      }
    }
    auto bundle = source_->gather(static_cast<std::size_t>(int_property("batch", 8)));
    if (bundle.docs.empty()) {
      emit_once(worker_events::kSourceExhausted);
      return false;
    }
    if (auto delay = int_property("delay_ms", 0); delay > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    pending_ = std::move(bundle);
    take.keep();
  }
  try {
    output_->push({kBundleType, {serialize_bundle(*pending_)}});
  } catch (const Error& e) {
    if (!transient(e.code())) throw;
    return false;
  }
  gathered_ += pending_->docs.size();
  pending_.reset();
  holding_ = false;
  return true;
}

// TranslatorWorker

TranslatorWorker::~TranslatorWorker() { stop_worker(); }

std::vector<InterfaceDescriptor> TranslatorWorker::interfaces() {
  return {
      {"input", Style::kData, kBundleType, Direction::kRequired, input_, DataFlow::kPull},
      {"converter", Style::kService, kConversionType, Direction::kRequired, converter_},
      {"output", Style::kData, kBundleType, Direction::kRequired, output_, DataFlow::kPush},
  };
}

bool TranslatorWorker::step() {
  if (!done_) {
    if (!raw_) {
      TakeGuard take(holding_);
      if (draining()) return false;
      auto server = current_server(*input_);
      if (server != last_source_) {
        last_source_ = server;
        clear_flags();
      }
      DataEnvelope env;
      try {
        env = input_->pull(1);
      } catch (const Error& e) {
        if (!transient(e.code())) throw;
        if (!server.empty()) emit_once(worker_events::kSourceLost, {{"source", server}});
        return false;
      }
      if (env.empty()) {
        emit_once(worker_events::kSourceEmpty, {{"source", server}});
        return false;
      }
      clear_flag(worker_events::kSourceEmpty);
      raw_ = deserialize_bundle(env.items.front());
      take.keep();
    }
    if (auto delay = int_property("delay_ms", 0); delay > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    DataEnvelope request{kConversionType, {}};
    request.items.reserve(raw_->docs.size());
    for (const auto& d : raw_->docs) request.items.push_back(serialize_doc(d));
    DataEnvelope response;
    try {
      response = converter_->call(request);
    } catch (const Error& e) {
      if (!transient(e.code())) throw;
      return false;
    }
    if (response.items.size() != raw_->docs.size()) {
      fail(Errc::kProviderFault, "converter returned a short response");
    }
    DocumentBundle out{raw_->bundle_id, Stage::kTranslated, {}};
    for (std::size_t i = 0; i < raw_->docs.size(); ++i) {
      const auto& d = raw_->docs[i];
      if (response.items[i].empty()) {
        ++malformed_;
        emit(worker_events::kMalformedDoc, {{"doc_id", d.doc_id}});
        continue;
      }
      out.docs.push_back({d.doc_id, d.format, std::move(response.items[i])});
    }
    done_ = std::move(out);
    raw_.reset();
  }
  try {
    output_->push({kBundleType, {serialize_bundle(*done_)}});
  } catch (const Error& e) {
    if (!transient(e.code())) throw;
    return false;
  }
  translated_ += done_->docs.size();
  done_.reset();
  holding_ = false;
  return true;
}

// IndexerWorker

IndexerWorker::~IndexerWorker() { stop_worker(); }

std::vector<InterfaceDescriptor> IndexerWorker::interfaces() {
  return {{"input", Style::kData, kBundleType, Direction::kRequired, input_, DataFlow::kPull}};
}

bool IndexerWorker::step() {
  if (!store_) {
    try {
      store_ = std::make_unique<IndexStore>(string_property("index_dir"));
    } catch (const Error& e) {
      emit_once("store_error", {{"error", std::string(e.what())}});
      return false;
    }
  }
  if (!pending_) {
    TakeGuard take(holding_);
    if (draining()) return false;
    auto server = current_server(*input_);
    if (server != last_source_) {
      last_source_ = server;
      clear_flags();
    }
    DataEnvelope env;
    try {
      env = input_->pull(1);
    } catch (const Error& e) {
      if (!transient(e.code())) throw;
      if (!server.empty()) emit_once(worker_events::kSourceLost, {{"source", server}});
      return false;
    }
    if (env.empty()) {
      emit_once(worker_events::kSourceEmpty, {{"source", server}});
      return false;
    }
    clear_flag(worker_events::kSourceEmpty);
    pending_ = deserialize_bundle(env.items.front());
    take.keep();
  }
  indexed_ += store_->index(*pending_);
  pending_.reset();
  holding_ = false;
  return true;
}

// FormatConverter

class FormatConverter::Impl : public ServiceEndpoint {
 public:
  explicit Impl(FormatConverter* owner) : owner_(owner) {}
  DataEnvelope call(const DataEnvelope& request) override {
    ++owner_->calls_;
    DataEnvelope out{kConversionType, {}};
    out.items.reserve(request.items.size());
    for (const auto& item : request.items) {
      try {
        out.items.push_back(render_canonical(translate_doc(deserialize_doc(item))));
      } catch (const Error& e) {
        if (e.code() != Errc::kMalformedDoc) throw;
        out.items.emplace_back();
      }
    }
    return out;
  }

 private:
  FormatConverter* owner_;
};

std::vector<InterfaceDescriptor> FormatConverter::interfaces() {
  return {{"convert", Style::kService, kConversionType, Direction::kProvided, std::make_shared<Impl>(this)}};
}

void register_pipeline_types(Container& container) {
  container.register_component_type(types::kDataQueue, [] { return std::make_shared<DataQueue>(); });
  container.register_component_type(types::kDataGatherer, [] { return std::make_shared<DataGatherer>(); });
  container.register_component_type(types::kTranslatorWorker,
                                    [] { return std::make_shared<TranslatorWorker>(); });
  container.register_component_type(types::kIndexerWorker, [] { return std::make_shared<IndexerWorker>(); });
  container.register_component_type(types::kFormatConverter, [] { return std::make_shared<FormatConverter>(); },
                                    /*stateless=*/true);
}

}  // namespace hybridrt::pipeline
