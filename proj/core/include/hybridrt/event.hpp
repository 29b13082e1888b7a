#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "hybridrt/scalar.hpp"

namespace hybridrt {

inline constexpr const char* kWildcard = "*";

struct Event {
  std::string source;
  std::string name;
  PropertyMap payload;
  bool consumable = false;
  std::uint64_t sequence = 0;  // assigned by the bus, per source
};

enum class HandlerOrigin { kFramework, kAgent };
enum class Disposition { kContinue, kConsume };

using HandlerId = std::uint64_t;
using EventHandler = std::function<Disposition(const Event&)>;

struct HandlerRegistration {
  std::string source = kWildcard;
  std::string name = kWildcard;
  std::int64_t priority = 0;
  HandlerOrigin origin = HandlerOrigin::kFramework;
  EventHandler handler;
};

struct DispatchReport {
  std::uint64_t sequence = 0;
  std::vector<HandlerId> invoked;
  std::vector<std::int64_t> priorities;  // effective priority of each invoked handler
  std::optional<HandlerId> consumed_by;
};

/// Requested priorities are clamped to this band; agent handlers are lifted
/// above it so they always precede every framework handler.
inline constexpr std::int64_t kPriorityBand = std::int64_t{1} << 40;

std::int64_t effective_priority(std::int64_t requested, HandlerOrigin origin);

/// Prioritised dispatcher for consumable events.
///
/// Handlers matching (source, name) run one at a time in non-increasing
/// effective priority, ties in registration order. A handler returning
/// kConsume on a consumable event stops the dispatch. Handler exceptions are
/// logged and skipped. Events from one source dispatch sequentially; events
/// from different sources may dispatch concurrently.
class EventBus {
 public:
  HandlerId register_handler(HandlerRegistration registration);
  bool deregister(HandlerId id);

  DispatchReport emit(Event event);

  std::size_t handler_count() const;
  std::uint64_t last_sequence(const std::string& source) const;

 private:
  struct Entry {
    HandlerId id;
    std::uint64_t order;
    std::int64_t effective;
    HandlerRegistration reg;
  };
  struct SourceState {
    std::mutex dispatch;
    std::atomic<std::uint64_t> sequence{0};
  };

  SourceState& source_state(const std::string& source);

  mutable std::shared_mutex mu_;
  std::vector<std::shared_ptr<const Entry>> handlers_;  // kept sorted
  std::uint64_t next_id_ = 1;
  std::uint64_t next_order_ = 0;

  mutable std::mutex sources_mu_;
  std::unordered_map<std::string, std::unique_ptr<SourceState>> sources_;
};

}  // namespace hybridrt
