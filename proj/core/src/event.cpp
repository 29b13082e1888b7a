#include "hybridrt/event.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

namespace hybridrt {

std::int64_t effective_priority(std::int64_t requested, HandlerOrigin origin) {
  const std::int64_t clamped = std::clamp(requested, -kPriorityBand + 1, kPriorityBand - 1);
  return origin == HandlerOrigin::kAgent ? clamped + 2 * kPriorityBand : clamped;
}

namespace {

bool matches(const HandlerRegistration& reg, const Event& event) {
  return (reg.source == kWildcard || reg.source == event.source) &&
         (reg.name == kWildcard || reg.name == event.name);
}

}  // namespace

HandlerId EventBus::register_handler(HandlerRegistration registration) {
  std::unique_lock lock(mu_);
  auto entry = std::make_shared<Entry>();
  entry->id = next_id_++;
  entry->order = next_order_++;
  entry->effective = effective_priority(registration.priority, registration.origin);
  entry->reg = std::move(registration);
  auto pos = std::upper_bound(handlers_.begin(), handlers_.end(), entry,
                              [](const auto& a, const auto& b) {
                                if (a->effective != b->effective) return a->effective > b->effective;
                                return a->order < b->order;
                              });
  const HandlerId id = entry->id;
  handlers_.insert(pos, std::move(entry));
  return id;
}

bool EventBus::deregister(HandlerId id) {
  std::unique_lock lock(mu_);
  auto it = std::find_if(handlers_.begin(), handlers_.end(),
                         [id](const auto& e) { return e->id == id; });
  if (it == handlers_.end()) return false;
  handlers_.erase(it);
  return true;
}

EventBus::SourceState& EventBus::source_state(const std::string& source) {
  std::lock_guard lock(sources_mu_);
  auto& slot = sources_[source];
  if (!slot) slot = std::make_unique<SourceState>();
  return *slot;
}

DispatchReport EventBus::emit(Event event) {
  SourceState& state = source_state(event.source);
  std::lock_guard dispatch_lock(state.dispatch);
  event.sequence = ++state.sequence;

  std::vector<std::shared_ptr<const Entry>> snapshot;
  {
    std::shared_lock lock(mu_);
    snapshot.reserve(handlers_.size());
    for (const auto& entry : handlers_) {
      if (matches(entry->reg, event)) snapshot.push_back(entry);
    }
  }

  DispatchReport report;
  report.sequence = event.sequence;
  const Event& frozen = event;
  for (const auto& entry : snapshot) {
    report.invoked.push_back(entry->id);
    report.priorities.push_back(entry->effective);
    Disposition disposition = Disposition::kContinue;
    try {
      if (entry->reg.handler) disposition = entry->reg.handler(frozen);
    } catch (const std::exception& e) {
      spdlog::warn("handler {} failed on {}/{}: {}", entry->id, frozen.source, frozen.name, e.what());
    } catch (...) {
      spdlog::warn("handler {} failed on {}/{}", entry->id, frozen.source, frozen.name);
    }
    if (frozen.consumable && disposition == Disposition::kConsume) {
      report.consumed_by = entry->id;
      break;
    }
  }
  return report;
}

std::size_t EventBus::handler_count() const {
  std::shared_lock lock(mu_);
  return handlers_.size();
}

std::uint64_t EventBus::last_sequence(const std::string& source) const {
  std::lock_guard lock(sources_mu_);
  auto it = sources_.find(source);
  return it == sources_.end() ? 0 : it->second->sequence.load();
}

}  // namespace hybridrt
