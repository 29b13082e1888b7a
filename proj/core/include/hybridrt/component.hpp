#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hybridrt/interface.hpp"
#include "hybridrt/scalar.hpp"

namespace hybridrt {

class Container;

enum class LifecycleState { kLoaded, kActive, kDeactivated, kUnloaded };

std::string_view to_string(LifecycleState state);

/// Base class for every component type hosted by a Container.
///
/// Subclasses declare their interfaces once (interfaces() is called at load
/// time and the result is frozen) and react to lifecycle hooks. Hooks are
/// invoked without any container lock held, so they may call back into the
/// container.
class Component {
 public:
  virtual ~Component() = default;

  const std::string& id() const { return id_; }
  const std::string& type_id() const { return type_id_; }
  LifecycleState state() const { return state_.load(std::memory_order_acquire); }
  bool active() const { return state() == LifecycleState::kActive; }

  std::optional<Scalar> property(const std::string& key) const;
  PropertyMap properties() const;

 protected:
  virtual std::vector<InterfaceDescriptor> interfaces() = 0;

  /// Throw Error(kRejectedValue) to refuse a configuration value.
  virtual void validate(const std::string& key, const Scalar& value) const;

  virtual void on_activate() {}
  virtual void on_deactivate() {}
  virtual void on_unload() {}
  virtual void on_configured(const std::string& /*key*/, const Scalar& /*value*/) {}

  /// Emits an event with this component as source. Returns false when the
  /// component is no longer hosted.
  bool emit(std::string name, PropertyMap payload = {}, bool consumable = false);

  Container* container() const { return container_; }

  std::string string_property(const std::string& key, std::string fallback = {}) const;
  std::int64_t int_property(const std::string& key, std::int64_t fallback = 0) const;

 private:
  friend class Container;

  std::string id_;
  std::string type_id_;
  std::atomic<LifecycleState> state_{LifecycleState::kLoaded};
  Container* container_ = nullptr;
  std::mutex lifecycle_mu_;
  mutable std::mutex props_mu_;
  PropertyMap props_;
};

}  // namespace hybridrt
