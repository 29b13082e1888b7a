#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "hybridrt/component.hpp"
#include "hybridrt/event.hpp"
#include "hybridrt/port.hpp"

namespace hybridrt {

enum class BindingMode { kExplicit, kImplicit };

struct InterfaceRef {
  std::string component;
  std::string interface;

  friend bool operator==(const InterfaceRef&, const InterfaceRef&) = default;
};

struct BindingRecord {
  std::uint64_t id = 0;
  InterfaceRef client;
  InterfaceRef server;
  BindingMode mode = BindingMode::kExplicit;
};

struct ComponentRecord {
  std::string id;  // qualified: "<context>/<local id>", or the local id in the root
  std::string type_id;
  LifecycleState state = LifecycleState::kLoaded;
  std::vector<InterfaceDescriptor> interfaces;
  std::string context;
  PropertyMap properties;
};

using ComponentFactory = std::function<std::shared_ptr<Component>()>;

struct ComponentTypeInfo {
  ComponentFactory factory;
  /// Only stateless providers may stand in for an unloaded one.
  bool stateless = false;
};

// Container lifecycle and binding events, emitted with the affected component
// as source.
namespace events {
inline constexpr const char* kCreated = "created";
inline constexpr const char* kActivated = "activated";
inline constexpr const char* kDeactivated = "deactivated";
inline constexpr const char* kRemoved = "removed";
inline constexpr const char* kBound = "bound";
inline constexpr const char* kUnbound = "unbound";
inline constexpr const char* kProperty = "property";
inline constexpr const char* kHotSwapped = "hot_swapped";
}  // namespace events

/// Dynamic component container with recursive contexts.
///
/// The root context has the empty id. A composite component may own one inner
/// context whose id is the composite's qualified id; components inside it get
/// qualified ids "<context>/<local id>". All mutations are serialized by one
/// writer lock; component hooks and event handlers run after it is released.
class Container {
 public:
  static inline const std::string kRootContext{};

  Container();
  ~Container();

  Container(const Container&) = delete;
  Container& operator=(const Container&) = delete;

  EventBus& events() { return bus_; }

  void register_component_type(const std::string& type_id, ComponentFactory factory,
                               bool stateless = false);
  bool has_type(const std::string& type_id) const;

  ComponentRecord load_component(const std::string& context, const std::string& id,
                                 const std::string& type_id, const PropertyMap& config = {});
  ComponentRecord set_lifecycle(const std::string& id, LifecycleState target);
  ComponentRecord unload(const std::string& id) { return set_lifecycle(id, LifecycleState::kUnloaded); }

  std::vector<InterfaceDescriptor> describe_interfaces(const std::string& id) const;

  /// PROVIDED interfaces matching (style, payload type), searched in the given
  /// context first and then in each ancestor until something matches.
  std::vector<InterfaceRef> broker(const std::string& context, Style style,
                                   const std::string& payload_type) const;

  BindingRecord bind(const InterfaceRef& client, const InterfaceRef& server,
                     BindingMode mode = BindingMode::kExplicit);
  /// Binds the client to the first compatible provider in broker order.
  BindingRecord bind_implicit(const InterfaceRef& client);
  std::size_t unbind(const InterfaceRef& client);

  void configure(const std::string& id, const std::string& key, const Scalar& value);

  std::string create_inner_context(const std::string& composite);

  ComponentRecord record(const std::string& id) const;
  bool contains(const std::string& id) const;
  std::vector<ComponentRecord> list_components(const std::string& context,
                                               bool recursive = false) const;
  std::vector<std::string> contexts() const;
  std::optional<std::string> parent_context(const std::string& context) const;
  std::vector<BindingRecord> bindings() const;
  std::vector<BindingRecord> bindings_of(const std::string& component) const;
  std::shared_ptr<Component> component(const std::string& id) const;

  template <class T>
  std::shared_ptr<T> component_as(const std::string& id) const {
    return std::dynamic_pointer_cast<T>(component(id));
  }

  // Collaboration over recorded bindings.
  DataEnvelope invoke_service(const BindingRecord& binding, const DataEnvelope& request);
  DataEnvelope pull_data(const BindingRecord& binding, std::size_t max_items);
  void push_data(const InterfaceRef& client, const DataEnvelope& envelope, SyncMode mode,
                 Routing routing);

  /// Emits on behalf of a hosted component; UnknownComponent once unloaded.
  DispatchReport emit_event(const std::string& source, Event event);

  std::uint64_t hot_swaps() const { return hot_swaps_.load(); }
  std::size_t active_count() const;

  /// Unloads everything, children before parents.
  void shutdown();

 private:
  struct Slot {
    std::shared_ptr<Component> component;
    std::string context;
    std::string type_id;
    bool stateless = false;
    std::uint64_t order = 0;
    std::vector<InterfaceDescriptor> interfaces;
  };
  struct Context {
    std::string id;
    std::optional<std::string> parent;
    std::vector<std::string> children;  // component ids in load order
    std::vector<BindingRecord> bindings;
  };
  using PendingEvents = std::vector<Event>;

  static std::string qualify(const std::string& context, const std::string& id);

  const Slot& slot_locked(const std::string& id) const;
  const InterfaceDescriptor& descriptor_locked(const InterfaceRef& ref) const;
  ComponentRecord record_locked(const std::string& id) const;
  std::vector<InterfaceRef> broker_locked(const std::string& context, Style style,
                                          const std::string& payload_type) const;
  BindingRecord bind_locked(const InterfaceRef& client, const InterfaceRef& server,
                            BindingMode mode, PendingEvents& pending);
  void remove_binding_locked(Context& ctx, std::size_t index, PendingEvents& pending);
  void detach_bindings_locked(const std::string& id, PendingEvents& pending);
  std::optional<InterfaceRef> substitute_locked(const BindingRecord& lost,
                                                const std::string& excluded) const;
  const BindingRecord& find_binding_locked(const BindingRecord& binding) const;
  Connection connection_locked(const BindingRecord& binding) const;
  void dispatch(PendingEvents& pending);

  EventBus bus_;
  mutable std::shared_mutex mu_;
  std::map<std::string, ComponentTypeInfo> types_;
  std::map<std::string, Slot> slots_;
  std::map<std::string, Context> contexts_;
  std::map<std::uint64_t, HandlerId> event_bindings_;
  std::uint64_t next_order_ = 0;
  std::uint64_t next_binding_ = 1;
  std::atomic<std::uint64_t> hot_swaps_{0};
};

}  // namespace hybridrt
