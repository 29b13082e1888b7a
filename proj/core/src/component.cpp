#include "hybridrt/component.hpp"

#include "hybridrt/container.hpp"
#include "hybridrt/error.hpp"

namespace hybridrt {

std::string_view to_string(LifecycleState state) {
  switch (state) {
    case LifecycleState::kLoaded: return "LOADED";
    case LifecycleState::kActive: return "ACTIVE";
    case LifecycleState::kDeactivated: return "DEACTIVATED";
    case LifecycleState::kUnloaded: return "UNLOADED";
  }
  return "?";
}

std::optional<Scalar> Component::property(const std::string& key) const {
  std::lock_guard lock(props_mu_);
  auto it = props_.find(key);
  if (it == props_.end()) return std::nullopt;
  return it->second;
}

PropertyMap Component::properties() const {
  std::lock_guard lock(props_mu_);
  return props_;
}

void Component::validate(const std::string&, const Scalar&) const {}

bool Component::emit(std::string name, PropertyMap payload, bool consumable) {
  if (container_ == nullptr || state() == LifecycleState::kUnloaded) return false;
  Event event;
  event.source = id_;
  event.name = std::move(name);
  event.payload = std::move(payload);
  event.consumable = consumable;
  try {
    container_->emit_event(id_, std::move(event));
  } catch (const Error&) {
    return false;
  }
  return true;
}

std::string Component::string_property(const std::string& key, std::string fallback) const {
  auto value = property(key);
  if (!value) return fallback;
  return to_string(*value);
}

std::int64_t Component::int_property(const std::string& key, std::int64_t fallback) const {
  auto value = property(key);
  if (!value) return fallback;
  return as_int(*value).value_or(fallback);
}

}  // namespace hybridrt
