#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "hybridrt/envelope.hpp"

namespace hybridrt {

enum class Style { kService, kData, kEvent };
enum class Direction { kRequired, kProvided };
/// Only meaningful for DATA interfaces: which way items move.
enum class DataFlow { kNone, kPull, kPush };

std::string_view to_string(Style style);
std::string_view to_string(Direction direction);
Style parse_style(std::string_view text);

/// Base of every collaboration endpoint handed out by a component.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
};

class PullEndpoint : public Endpoint {
 public:
  /// Non-blocking. Returns up to max_items items, possibly none.
  virtual DataEnvelope pull(std::size_t max_items) = 0;
};

class PushEndpoint : public Endpoint {
 public:
  virtual void push(const DataEnvelope& envelope) = 0;
};

class ServiceEndpoint : public Endpoint {
 public:
  virtual DataEnvelope call(const DataEnvelope& request) = 0;
};

/// Marker for a PROVIDED EVENT interface; events flow through the bus.
class EventSourceEndpoint : public Endpoint {};

struct InterfaceDescriptor {
  std::string name;
  Style style = Style::kData;
  std::string payload_type;
  Direction direction = Direction::kProvided;
  std::shared_ptr<Endpoint> endpoint;
  DataFlow flow = DataFlow::kNone;
  bool multicast = false;  // REQUIRED only: accept several bindings
};

/// Compatibility predicate used by bind and broker.
bool compatible(const InterfaceDescriptor& client, const InterfaceDescriptor& server);

}  // namespace hybridrt
