#include "hybridrt/interface.hpp"

#include "hybridrt/error.hpp"

namespace hybridrt {

std::string_view to_string(Style style) {
  switch (style) {
    case Style::kService: return "SERVICE";
    case Style::kData: return "DATA";
    case Style::kEvent: return "EVENT";
  }
  return "?";
}

std::string_view to_string(Direction direction) {
  return direction == Direction::kRequired ? "REQUIRED" : "PROVIDED";
}

Style parse_style(std::string_view text) {
  if (text == "SERVICE") return Style::kService;
  if (text == "DATA") return Style::kData;
  if (text == "EVENT") return Style::kEvent;
  fail(Errc::kInvalidArgument, "unknown collaboration style " + std::string(text));
}

bool compatible(const InterfaceDescriptor& client, const InterfaceDescriptor& server) {
  if (client.direction != Direction::kRequired || server.direction != Direction::kProvided) {
    return false;
  }
  if (client.style != server.style) return false;
  // Payload compatibility is exact type-id equality.
  if (client.payload_type != server.payload_type) return false;
  if (client.style == Style::kData && client.flow != server.flow) return false;
  return true;
}

}  // namespace hybridrt
