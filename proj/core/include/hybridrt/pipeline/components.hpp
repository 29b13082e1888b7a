#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include "hybridrt/component.hpp"
#include "hybridrt/container.hpp"
#include "hybridrt/pipeline/corpus.hpp"
#include "hybridrt/pipeline/document.hpp"
#include "hybridrt/pipeline/index_store.hpp"
#include "hybridrt/port.hpp"

namespace hybridrt::pipeline {

namespace types {
inline constexpr const char* kDataQueue = "DataQueue";
inline constexpr const char* kDataGatherer = "DataGatherer";
inline constexpr const char* kTranslatorWorker = "TranslatorWorker";
inline constexpr const char* kIndexerWorker = "IndexerWorker";
inline constexpr const char* kFormatConverter = "FormatConverter";
}  // namespace types

namespace worker_events {
inline constexpr const char* kQueueGrew = "queue_grew";
inline constexpr const char* kQueueDrained = "queue_drained";
inline constexpr const char* kSourceEmpty = "source_empty";
inline constexpr const char* kSourceLost = "source_lost";
inline constexpr const char* kSourceExhausted = "source_exhausted";
inline constexpr const char* kMalformedDoc = "malformed_doc";
}  // namespace worker_events

/// FIFO of serialized bundles. PROVIDED DATA push "input" and pull "pull".
///
/// Property "capacity" bounds the number of bundles (0 means unbounded). A
/// push into a full queue waits up to "push_timeout_ms" and then fails with
/// Timeout. Emits queue_grew when it becomes non-empty and queue_drained
/// when it empties.
class DataQueue : public Component {
 public:
  std::size_t length() const;
  std::uint64_t total_pushed() const { return pushed_.load(); }

 protected:
  std::vector<InterfaceDescriptor> interfaces() override;
  void validate(const std::string& key, const Scalar& value) const override;
  void on_deactivate() override;

 private:
  class In;
  class Out;
  void push_items(const DataEnvelope& envelope);
  DataEnvelope pull_items(std::size_t max_items);

  mutable std::mutex mu_;
  std::condition_variable space_;
  std::deque<Bytes> items_;
  std::atomic<std::uint64_t> pushed_{0};
};

/// Common shape of the active pipeline components: a worker thread running
/// step() while the component is ACTIVE, sleeping "idle_ms" whenever a step
/// finds nothing to do. With property "drain" set a worker finishes what it
/// holds and takes no new input.
class WorkerComponent : public Component {
 public:
  ~WorkerComponent() override;

  /// True while the worker holds items it has taken but not yet passed on.
  bool holding() const { return holding_.load(); }

 protected:
  /// Returns true when progress was made.
  virtual bool step() = 0;

  void on_activate() override;
  void on_deactivate() override;
  void on_unload() override;
  void validate(const std::string& key, const Scalar& value) const override;

  /// Emits name once until clear_flag(name) is called.
  void emit_once(const char* name, PropertyMap payload = {});
  void clear_flag(const char* name);
  void clear_flags();

  /// Subclasses call this from their destructor so step() never runs on a
  /// partially destroyed object.
  void stop_worker();

  bool draining() const;

  std::atomic<bool> holding_{false};

 private:
  void run(std::stop_token stop);

  std::mutex run_mu_;
  std::jthread thread_;
  std::mutex flags_mu_;
  std::vector<std::string> raised_;
};

/// Claims documents from a corpus and pushes RAW bundles through REQUIRED
/// DATA push "output". Properties: corpus_dir, claims_dir, batch, owner,
/// delay_ms.
class DataGatherer : public WorkerComponent {
 public:
  ~DataGatherer() override;
  std::uint64_t docs_gathered() const { return gathered_.load(); }

 protected:
  std::vector<InterfaceDescriptor> interfaces() override;
  bool step() override;

 private:
  std::shared_ptr<RequiredPort> output_ = std::make_shared<RequiredPort>();
  std::unique_ptr<CorpusSource> source_;
  std::optional<DocumentBundle> pending_;
  std::atomic<std::uint64_t> gathered_{0};
};

/// Pulls RAW bundles from REQUIRED DATA pull "input", converts every document
/// through REQUIRED SERVICE "converter" and pushes the TRANSLATED bundle to
/// REQUIRED DATA push "output".
class TranslatorWorker : public WorkerComponent {
 public:
  ~TranslatorWorker() override;
  std::uint64_t docs_translated() const { return translated_.load(); }
  std::uint64_t malformed() const { return malformed_.load(); }

 protected:
  std::vector<InterfaceDescriptor> interfaces() override;
  bool step() override;

 private:
  std::shared_ptr<RequiredPort> input_ = std::make_shared<RequiredPort>();
  std::shared_ptr<RequiredPort> converter_ = std::make_shared<RequiredPort>();
  std::shared_ptr<RequiredPort> output_ = std::make_shared<RequiredPort>();
  std::optional<DocumentBundle> raw_;
  std::optional<DocumentBundle> done_;
  std::string last_source_;
  std::atomic<std::uint64_t> translated_{0};
  std::atomic<std::uint64_t> malformed_{0};
};

/// Pulls TRANSLATED bundles from REQUIRED DATA pull "input" into the index
/// at property "index_dir".
class IndexerWorker : public WorkerComponent {
 public:
  ~IndexerWorker() override;
  std::uint64_t docs_indexed() const { return indexed_.load(); }

 protected:
  std::vector<InterfaceDescriptor> interfaces() override;
  bool step() override;

 private:
  std::shared_ptr<RequiredPort> input_ = std::make_shared<RequiredPort>();
  std::unique_ptr<IndexStore> store_;
  std::string last_source_;
  std::optional<DocumentBundle> pending_;
  std::atomic<std::uint64_t> indexed_{0};
};

/// Stateless PROVIDED SERVICE "convert": each request item is a serialized
/// raw document, each response item its canonical record, or an empty item
/// when the document is malformed.
class FormatConverter : public Component {
 public:
  std::uint64_t calls() const { return calls_.load(); }

 protected:
  std::vector<InterfaceDescriptor> interfaces() override;

 private:
  class Impl;
  std::atomic<std::uint64_t> calls_{0};
};

void register_pipeline_types(Container& container);

}  // namespace hybridrt::pipeline
