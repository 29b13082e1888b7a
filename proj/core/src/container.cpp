#include "hybridrt/container.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hybridrt/error.hpp"

namespace hybridrt {

namespace {

bool legal_transition(LifecycleState from, LifecycleState to) {
  using S = LifecycleState;
  switch (to) {
    case S::kActive: return from == S::kLoaded || from == S::kDeactivated || from == S::kActive;
    case S::kDeactivated: return from == S::kActive;
    case S::kUnloaded: return from != S::kUnloaded;
    case S::kLoaded: return false;
  }
  return false;
}

Event make_event(const std::string& source, const char* name, PropertyMap payload = {}) {
  Event event;
  event.source = source;
  event.name = name;
  event.payload = std::move(payload);
  return event;
}

std::string_view mode_name(BindingMode mode) {
  return mode == BindingMode::kExplicit ? "EXPLICIT" : "IMPLICIT";
}

}  // namespace

Container::Container() { contexts_[kRootContext] = Context{kRootContext, std::nullopt, {}, {}}; }

Container::~Container() { shutdown(); }

std::string Container::qualify(const std::string& context, const std::string& id) {
  return context.empty() ? id : context + "/" + id;
}

void Container::register_component_type(const std::string& type_id, ComponentFactory factory,
                                        bool stateless) {
  if (type_id.empty() || !factory) fail(Errc::kInvalidArgument, "component type needs an id and a factory");
  std::unique_lock lock(mu_);
  if (types_.contains(type_id)) fail(Errc::kDuplicateType, type_id);
  types_.emplace(type_id, ComponentTypeInfo{std::move(factory), stateless});
}

bool Container::has_type(const std::string& type_id) const {
  std::shared_lock lock(mu_);
  return types_.contains(type_id);
}

ComponentRecord Container::load_component(const std::string& context, const std::string& id,
                                          const std::string& type_id, const PropertyMap& config) {
  if (id.empty() || id.find('/') != std::string::npos) {
    fail(Errc::kInvalidArgument, "component id must be non-empty and must not contain '/'");
  }
  const std::string qualified = qualify(context, id);
  ComponentTypeInfo info;
  {
    std::shared_lock lock(mu_);
    if (!contexts_.contains(context)) fail(Errc::kInvalidArgument, "unknown context '" + context + "'");
    auto it = types_.find(type_id);
    if (it == types_.end()) fail(Errc::kUnknownType, type_id);
    if (slots_.contains(qualified)) fail(Errc::kDuplicateId, qualified);
    info = it->second;
  }

  // Component code runs before the container is locked.
  std::shared_ptr<Component> component = info.factory();
  if (!component) fail(Errc::kInvalidArgument, "factory for " + type_id + " returned null");
  for (const auto& [key, value] : config) component->validate(key, value);
  component->props_ = config;
  std::vector<InterfaceDescriptor> interfaces = component->interfaces();

  std::set<std::pair<std::string, Direction>> seen;
  for (const auto& descriptor : interfaces) {
    if (!descriptor.endpoint) {
      fail(Errc::kInvalidArgument, type_id + "." + descriptor.name + " has no endpoint");
    }
    if (!seen.emplace(descriptor.name, descriptor.direction).second) {
      fail(Errc::kInvalidArgument, type_id + " declares " + descriptor.name + " twice");
    }
  }

  component->id_ = qualified;
  component->type_id_ = type_id;
  component->container_ = this;
  for (const auto& descriptor : interfaces) {
    if (auto port = std::dynamic_pointer_cast<RequiredPort>(descriptor.endpoint)) {
      port->set_failure_sink([this, qualified, name = descriptor.name](const std::string& server,
                                                                      const std::string& what) {
        Event event = make_event(qualified, "push_failed",
                                 {{"interface", name}, {"server", server}, {"error", what}});
        try {
          emit_event(qualified, std::move(event));
        } catch (const Error&) {
        }
      });
    }
  }

  PendingEvents pending;
  ComponentRecord snapshot;
  {
    std::unique_lock lock(mu_);
    if (slots_.contains(qualified)) fail(Errc::kDuplicateId, qualified);
    auto ctx = contexts_.find(context);
    if (ctx == contexts_.end()) fail(Errc::kInvalidArgument, "unknown context '" + context + "'");
    Slot slot;
    slot.component = component;
    slot.context = context;
    slot.type_id = type_id;
    slot.stateless = info.stateless;
    slot.order = next_order_++;
    slot.interfaces = std::move(interfaces);
    slots_.emplace(qualified, std::move(slot));
    ctx->second.children.push_back(qualified);
    snapshot = record_locked(qualified);
  }
  pending.push_back(make_event(qualified, events::kCreated, {{"type", type_id}}));
  dispatch(pending);
  return snapshot;
}

ComponentRecord Container::set_lifecycle(const std::string& id, LifecycleState target) {
  std::shared_ptr<Component> component;
  {
    std::shared_lock lock(mu_);
    component = slot_locked(id).component;
  }
  std::unique_lock hook_lock(component->lifecycle_mu_);

  if (target == LifecycleState::kUnloaded) {
    // Children of a composite go first.
    std::vector<std::string> children;
    {
      std::shared_lock lock(mu_);
      if (auto inner = contexts_.find(id); inner != contexts_.end()) children = inner->second.children;
    }
    for (auto it = children.rbegin(); it != children.rend(); ++it) {
      try {
        set_lifecycle(*it, LifecycleState::kUnloaded);
      } catch (const Error& e) {
        if (e.code() != Errc::kUnknownComponent) throw;
      }
    }
  }

  PendingEvents pending;
  ComponentRecord snapshot;
  LifecycleState previous;
  {
    std::unique_lock lock(mu_);
    const Slot& slot = slot_locked(id);
    previous = slot.component->state();
    if (!legal_transition(previous, target)) {
      fail(Errc::kIllegalTransition, fmt::format("{}: {} -> {}", id, to_string(previous), to_string(target)));
    }
    if (previous == target) return record_locked(id);
    slot.component->state_.store(target, std::memory_order_release);
    snapshot = record_locked(id);
    if (target == LifecycleState::kUnloaded) {
      detach_bindings_locked(id, pending);
      auto& ctx = contexts_.at(slot.context);
      std::erase(ctx.children, id);
      contexts_.erase(id);
      slots_.erase(id);
    }
  }

  try {
    if (target == LifecycleState::kActive) {
      component->on_activate();
    } else if (target == LifecycleState::kDeactivated) {
      component->on_deactivate();
    } else {
      if (previous == LifecycleState::kActive) component->on_deactivate();
      component->on_unload();
    }
  } catch (...) {
    if (target != LifecycleState::kUnloaded) {
      component->state_.store(previous, std::memory_order_release);
      throw;
    }
    spdlog::warn("unload hook of {} failed", id);
  }

  const char* name = target == LifecycleState::kActive        ? events::kActivated
                     : target == LifecycleState::kDeactivated ? events::kDeactivated
                                                              : events::kRemoved;
  pending.insert(pending.begin(), make_event(id, name));
  dispatch(pending);
  return snapshot;
}

std::vector<InterfaceDescriptor> Container::describe_interfaces(const std::string& id) const {
  std::shared_lock lock(mu_);
  return slot_locked(id).interfaces;
}

std::vector<InterfaceRef> Container::broker(const std::string& context, Style style,
                                            const std::string& payload_type) const {
  std::shared_lock lock(mu_);
  return broker_locked(context, style, payload_type);
}

std::vector<InterfaceRef> Container::broker_locked(const std::string& context, Style style,
                                                   const std::string& payload_type) const {
  std::vector<InterfaceRef> found;
  auto ctx = contexts_.find(context);
  while (ctx != contexts_.end()) {
    for (const auto& child : ctx->second.children) {
      const Slot& slot = slots_.at(child);
      if (slot.component->state() == LifecycleState::kUnloaded) continue;
      for (const auto& descriptor : slot.interfaces) {
        if (descriptor.direction == Direction::kProvided && descriptor.style == style &&
            descriptor.payload_type == payload_type) {
          found.push_back({child, descriptor.name});
        }
      }
    }
    if (!found.empty() || !ctx->second.parent) break;
    ctx = contexts_.find(*ctx->second.parent);
  }
  return found;
}

BindingRecord Container::bind(const InterfaceRef& client, const InterfaceRef& server,
                              BindingMode mode) {
  PendingEvents pending;
  BindingRecord record;
  {
    std::unique_lock lock(mu_);
    record = bind_locked(client, server, mode, pending);
  }
  dispatch(pending);
  return record;
}

BindingRecord Container::bind_implicit(const InterfaceRef& client) {
  PendingEvents pending;
  BindingRecord record;
  {
    std::unique_lock lock(mu_);
    const Slot& slot = slot_locked(client.component);
    const InterfaceDescriptor& wanted = descriptor_locked(client);
    if (wanted.direction != Direction::kRequired) {
      fail(Errc::kIncompatibleInterfaces, client.component + "." + client.interface + " is not REQUIRED");
    }
    std::optional<InterfaceRef> pick;
    auto ctx = contexts_.find(slot.context);
    while (ctx != contexts_.end() && !pick) {
      for (const auto& child : ctx->second.children) {
        if (child == client.component) continue;
        const Slot& candidate = slots_.at(child);
        for (const auto& descriptor : candidate.interfaces) {
          if (compatible(wanted, descriptor)) {
            pick = InterfaceRef{child, descriptor.name};
            break;
          }
        }
        if (pick) break;
      }
      if (pick || !ctx->second.parent) break;
      ctx = contexts_.find(*ctx->second.parent);
    }
    if (!pick) {
      fail(Errc::kNoBinding, "no compatible provider for " + client.component + "." + client.interface);
    }
    record = bind_locked(client, *pick, BindingMode::kImplicit, pending);
  }
  dispatch(pending);
  return record;
}

BindingRecord Container::bind_locked(const InterfaceRef& client, const InterfaceRef& server,
                                     BindingMode mode, PendingEvents& pending) {
  const Slot& client_slot = slot_locked(client.component);
  const Slot& server_slot = slot_locked(server.component);
  auto find = [](const Slot& slot, const std::string& name, Direction direction)
      -> const InterfaceDescriptor* {
    for (const auto& d : slot.interfaces) {
      if (d.name == name && d.direction == direction) return &d;
    }
    return nullptr;
  };
  const InterfaceDescriptor* client_d = find(client_slot, client.interface, Direction::kRequired);
  const InterfaceDescriptor* server_d = find(server_slot, server.interface, Direction::kProvided);
  if (client_d == nullptr || server_d == nullptr || !compatible(*client_d, *server_d)) {
    fail(Errc::kIncompatibleInterfaces, fmt::format("{}.{} -> {}.{}", client.component,
                                                    client.interface, server.component, server.interface));
  }

  Context& ctx = contexts_.at(client_slot.context);
  for (const auto& [cid, c] : contexts_) {
    for (const auto& existing : c.bindings) {
      if (existing.client != client) continue;
      if (!client_d->multicast || existing.server == server) {
        fail(Errc::kAlreadyBound, client.component + "." + client.interface);
      }
    }
  }

  BindingRecord record{next_binding_++, client, server, mode};
  if (client_d->style == Style::kEvent) {
    auto listener = std::dynamic_pointer_cast<EventListenerPort>(client_d->endpoint);
    if (!listener) fail(Errc::kIncompatibleInterfaces, client.component + "." + client.interface + " cannot listen");
    HandlerRegistration reg;
    reg.source = server.component;
    reg.origin = HandlerOrigin::kFramework;
    reg.handler = [listener](const Event& event) {
      listener->deliver(event);
      return Disposition::kContinue;
    };
    event_bindings_[record.id] = bus_.register_handler(std::move(reg));
  } else {
    auto port = std::dynamic_pointer_cast<RequiredPort>(client_d->endpoint);
    if (!port) fail(Errc::kIncompatibleInterfaces, client.component + "." + client.interface + " has no port");
    port->connect(Connection{server.component, server.interface, server_d->endpoint, server_slot.component});
  }
  ctx.bindings.push_back(record);
  pending.push_back(make_event(client.component, events::kBound,
                               {{"interface", client.interface},
                                {"server", server.component},
                                {"server_interface", server.interface},
                                {"mode", std::string(mode_name(mode))}}));
  return record;
}

void Container::remove_binding_locked(Context& ctx, std::size_t index, PendingEvents& pending) {
  BindingRecord record = ctx.bindings[index];
  ctx.bindings.erase(ctx.bindings.begin() + static_cast<std::ptrdiff_t>(index));
  if (auto it = event_bindings_.find(record.id); it != event_bindings_.end()) {
    bus_.deregister(it->second);
    event_bindings_.erase(it);
  } else if (auto slot = slots_.find(record.client.component); slot != slots_.end()) {
    for (const auto& d : slot->second.interfaces) {
      if (d.name == record.client.interface && d.direction == Direction::kRequired) {
        if (auto port = std::dynamic_pointer_cast<RequiredPort>(d.endpoint)) {
          port->disconnect(record.server.component, record.server.interface);
        }
      }
    }
  }
  pending.push_back(make_event(record.client.component, events::kUnbound,
                               {{"interface", record.client.interface},
                                {"server", record.server.component},
                                {"server_interface", record.server.interface}}));
}

void Container::detach_bindings_locked(const std::string& id, PendingEvents& pending) {
  std::vector<BindingRecord> lost;
  for (auto& [cid, ctx] : contexts_) {
    for (std::size_t i = 0; i < ctx.bindings.size();) {
      const BindingRecord& b = ctx.bindings[i];
      if (b.client.component == id || b.server.component == id) {
        if (b.server.component == id && b.client.component != id && b.mode == BindingMode::kImplicit) {
          lost.push_back(b);
        }
        remove_binding_locked(ctx, i, pending);
      } else {
        ++i;
      }
    }
  }
  // Eager hot-swap of implicit bindings whose provider is going away.
  for (const auto& binding : lost) {
    auto substitute = substitute_locked(binding, id);
    if (!substitute) {
      spdlog::info("no substitute for {}.{} after unloading {}", binding.client.component,
                   binding.client.interface, id);
      continue;
    }
    bind_locked(binding.client, *substitute, BindingMode::kImplicit, pending);
    hot_swaps_.fetch_add(1);
    pending.push_back(make_event(binding.client.component, events::kHotSwapped,
                                 {{"interface", binding.client.interface},
                                  {"from", id},
                                  {"to", substitute->component}}));
  }
}

std::optional<InterfaceRef> Container::substitute_locked(const BindingRecord& lost,
                                                         const std::string& excluded) const {
  auto client_slot = slots_.find(lost.client.component);
  if (client_slot == slots_.end()) return std::nullopt;
  const InterfaceDescriptor& wanted = descriptor_locked(lost.client);
  auto ctx = contexts_.find(client_slot->second.context);
  while (ctx != contexts_.end()) {
    for (const auto& child : ctx->second.children) {
      if (child == excluded || child == lost.client.component) continue;
      const Slot& slot = slots_.at(child);
      if (!slot.stateless || slot.component->state() == LifecycleState::kUnloaded) continue;
      for (const auto& descriptor : slot.interfaces) {
        if (compatible(wanted, descriptor)) return InterfaceRef{child, descriptor.name};
      }
    }
    if (!ctx->second.parent) break;
    ctx = contexts_.find(*ctx->second.parent);
  }
  return std::nullopt;
}

std::size_t Container::unbind(const InterfaceRef& client) {
  PendingEvents pending;
  std::size_t removed = 0;
  {
    std::unique_lock lock(mu_);
    for (auto& [cid, ctx] : contexts_) {
      for (std::size_t i = 0; i < ctx.bindings.size();) {
        if (ctx.bindings[i].client == client) {
          remove_binding_locked(ctx, i, pending);
          ++removed;
        } else {
          ++i;
        }
      }
    }
  }
  dispatch(pending);
  return removed;
}

void Container::configure(const std::string& id, const std::string& key, const Scalar& value) {
  std::shared_ptr<Component> component;
  {
    std::shared_lock lock(mu_);
    component = slot_locked(id).component;
  }
  component->validate(key, value);
  {
    std::lock_guard lock(component->props_mu_);
    component->props_[key] = value;
  }
  component->on_configured(key, value);
  PendingEvents pending{make_event(id, events::kProperty, {{"key", key}, {"value", value}})};
  dispatch(pending);
}

std::string Container::create_inner_context(const std::string& composite) {
  std::unique_lock lock(mu_);
  const Slot& slot = slot_locked(composite);
  if (contexts_.contains(composite)) {
    fail(Errc::kInvalidArgument, composite + " already owns an inner context");
  }
  contexts_[composite] = Context{composite, slot.context, {}, {}};
  return composite;
}

ComponentRecord Container::record(const std::string& id) const {
  std::shared_lock lock(mu_);
  return record_locked(id);
}

bool Container::contains(const std::string& id) const {
  std::shared_lock lock(mu_);
  return slots_.contains(id);
}

std::vector<ComponentRecord> Container::list_components(const std::string& context,
                                                        bool recursive) const {
  std::shared_lock lock(mu_);
  std::vector<ComponentRecord> out;
  auto visit = [&](auto&& self, const std::string& ctx_id) -> void {
    auto ctx = contexts_.find(ctx_id);
    if (ctx == contexts_.end()) return;
    for (const auto& child : ctx->second.children) {
      out.push_back(record_locked(child));
      if (recursive && contexts_.contains(child)) self(self, child);
    }
  };
  if (!contexts_.contains(context)) fail(Errc::kInvalidArgument, "unknown context '" + context + "'");
  visit(visit, context);
  return out;
}

std::vector<std::string> Container::contexts() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, ctx] : contexts_) out.push_back(id);
  return out;
}

std::optional<std::string> Container::parent_context(const std::string& context) const {
  std::shared_lock lock(mu_);
  auto it = contexts_.find(context);
  if (it == contexts_.end()) fail(Errc::kInvalidArgument, "unknown context '" + context + "'");
  return it->second.parent;
}

std::vector<BindingRecord> Container::bindings() const {
  std::shared_lock lock(mu_);
  std::vector<BindingRecord> out;
  for (const auto& [id, ctx] : contexts_) out.insert(out.end(), ctx.bindings.begin(), ctx.bindings.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::vector<BindingRecord> Container::bindings_of(const std::string& component) const {
  auto all = bindings();
  std::erase_if(all, [&](const BindingRecord& b) {
    return b.client.component != component && b.server.component != component;
  });
  return all;
}

std::shared_ptr<Component> Container::component(const std::string& id) const {
  std::shared_lock lock(mu_);
  return slot_locked(id).component;
}

const BindingRecord& Container::find_binding_locked(const BindingRecord& binding) const {
  for (const auto& [id, ctx] : contexts_) {
    for (const auto& b : ctx.bindings) {
      if (b.id == binding.id) return b;
    }
  }
  fail(Errc::kProviderInactive, "binding " + std::to_string(binding.id) + " no longer exists");
}

Connection Container::connection_locked(const BindingRecord& binding) const {
  const BindingRecord& live = find_binding_locked(binding);
  const Slot& server = slot_locked(live.server.component);
  const InterfaceDescriptor& descriptor = descriptor_locked(live.server);
  return Connection{live.server.component, live.server.interface, descriptor.endpoint, server.component};
}

DataEnvelope Container::invoke_service(const BindingRecord& binding, const DataEnvelope& request) {
  Connection connection;
  {
    std::shared_lock lock(mu_);
    connection = connection_locked(binding);
  }
  return hybridrt::invoke_service(connection, request);
}

DataEnvelope Container::pull_data(const BindingRecord& binding, std::size_t max_items) {
  if (max_items == 0) fail(Errc::kInvalidArgument, "max_items must be positive");
  Connection connection;
  {
    std::shared_lock lock(mu_);
    connection = connection_locked(binding);
  }
  return hybridrt::pull_data(connection, max_items);
}

void Container::push_data(const InterfaceRef& client, const DataEnvelope& envelope, SyncMode mode,
                          Routing routing) {
  std::shared_ptr<RequiredPort> port;
  {
    std::shared_lock lock(mu_);
    port = std::dynamic_pointer_cast<RequiredPort>(descriptor_locked(client).endpoint);
  }
  if (!port) fail(Errc::kIncompatibleInterfaces, client.component + "." + client.interface + " cannot push");
  port->push(envelope, mode, routing);
}

DispatchReport Container::emit_event(const std::string& source, Event event) {
  {
    std::shared_lock lock(mu_);
    const Slot& slot = slot_locked(source);
    if (slot.component->state() == LifecycleState::kUnloaded) fail(Errc::kUnknownComponent, source);
  }
  event.source = source;
  return bus_.emit(std::move(event));
}

std::size_t Container::active_count() const {
  std::shared_lock lock(mu_);
  return static_cast<std::size_t>(std::count_if(slots_.begin(), slots_.end(), [](const auto& kv) {
    return kv.second.component->state() == LifecycleState::kActive;
  }));
}

void Container::shutdown() {
  for (;;) {
    std::string victim;
    {
      std::shared_lock lock(mu_);
      const auto& root = contexts_.at(kRootContext).children;
      if (root.empty()) break;
      victim = root.back();
    }
    try {
      set_lifecycle(victim, LifecycleState::kUnloaded);
    } catch (const Error& e) {
      if (e.code() != Errc::kUnknownComponent) spdlog::warn("shutdown of {}: {}", victim, e.what());
    }
  }
}

const Container::Slot& Container::slot_locked(const std::string& id) const {
  auto it = slots_.find(id);
  if (it == slots_.end() || it->second.component->state() == LifecycleState::kUnloaded) {
    fail(Errc::kUnknownComponent, id);
  }
  return it->second;
}

const InterfaceDescriptor& Container::descriptor_locked(const InterfaceRef& ref) const {
  auto it = slots_.find(ref.component);
  if (it == slots_.end()) fail(Errc::kUnknownComponent, ref.component);
  for (const auto& d : it->second.interfaces) {
    if (d.name == ref.interface) return d;
  }
  fail(Errc::kUnknownInterface, ref.component + "." + ref.interface);
}

ComponentRecord Container::record_locked(const std::string& id) const {
  auto it = slots_.find(id);
  if (it == slots_.end()) fail(Errc::kUnknownComponent, id);
  const Slot& slot = it->second;
  return ComponentRecord{id,
                         slot.type_id,
                         slot.component->state(),
                         slot.interfaces,
                         slot.context,
                         slot.component->properties()};
}

void Container::dispatch(PendingEvents& pending) {
  for (auto& event : pending) bus_.emit(std::move(event));
  pending.clear();
}

}  // namespace hybridrt
