#include "hybridrt/agent/acl.hpp"

#include <fmt/format.h>

#include "hybridrt/error.hpp"

namespace hybridrt::agent {

std::string_view to_string(Performative p) {
  switch (p) {
    case Performative::kInform: return "INFORM";
    case Performative::kRequest: return "REQUEST";
    case Performative::kAgree: return "AGREE";
    case Performative::kRefuse: return "REFUSE";
  }
  return "?";
}

namespace {

void put_field(Bytes& out, std::string_view field) {
  put_u32_be(out, static_cast<std::uint32_t>(field.size()));
  out.append(field);
}

std::string_view take_field(std::span<const char> bytes, std::size_t& pos) {
  if (bytes.size() - pos < 4) fail(Errc::kMalformedFrame, "truncated ACL field length");
  std::uint32_t n = get_u32_be(bytes.data() + pos);
  pos += 4;
  if (bytes.size() - pos < n) fail(Errc::kMalformedFrame, "truncated ACL field");
  std::string_view field(bytes.data() + pos, n);
  pos += n;
  return field;
}

}  // namespace

Bytes encode_acl(const AclMessage& message) {
  Bytes out;
  out.push_back(static_cast<char>(message.performative));
  put_field(out, message.sender);
  put_field(out, message.receiver);
  put_field(out, message.conversation_id);
  if (const Term* t = message.atom()) {
    put_field(out, "A" + t->to_string());
  } else {
    put_field(out, "O" + std::get<Opaque>(message.content).bytes);
  }
  return out;
}

AclMessage decode_acl(std::span<const char> bytes) {
  if (bytes.empty()) fail(Errc::kMalformedFrame, "empty ACL message");
  auto perf = static_cast<std::uint8_t>(bytes[0]);
  if (perf < 1 || perf > 4) fail(Errc::kMalformedFrame, fmt::format("bad performative {}", perf));
  AclMessage m;
  m.performative = static_cast<Performative>(perf);
  std::size_t pos = 1;
  m.sender = std::string(take_field(bytes, pos));
  m.receiver = std::string(take_field(bytes, pos));
  m.conversation_id = std::string(take_field(bytes, pos));
  std::string_view content = take_field(bytes, pos);
  if (pos != bytes.size()) fail(Errc::kMalformedFrame, "trailing bytes after ACL message");
  if (content.empty()) fail(Errc::kMalformedFrame, "missing content tag");
  if (content[0] == 'A') {
    try {
      m.content = parse_term(content.substr(1));
    } catch (const Error& e) {
      fail(Errc::kMalformedFrame, fmt::format("bad atom content: {}", e.what()));
    }
  } else if (content[0] == 'O') {
    m.content = Opaque{std::string(content.substr(1))};
  } else {
    fail(Errc::kMalformedFrame, "unknown content tag");
  }
  return m;
}

}  // namespace hybridrt::agent
