#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>

#include "hybridrt/agent/term.hpp"
#include "hybridrt/envelope.hpp"

namespace hybridrt::agent {

enum class Performative : std::uint8_t { kInform = 1, kRequest = 2, kAgree = 3, kRefuse = 4 };

std::string_view to_string(Performative p);

inline constexpr const char* kBroadcast = "BROADCAST";

/// Opaque payload carried instead of a belief atom.
struct Opaque {
  Bytes bytes;
  friend bool operator==(const Opaque&, const Opaque&) = default;
};

struct AclMessage {
  Performative performative = Performative::kInform;
  std::string sender;
  std::string receiver;
  std::string conversation_id;
  std::variant<Term, Opaque> content;

  bool is_broadcast() const { return receiver == kBroadcast; }
  const Term* atom() const { return std::get_if<Term>(&content); }

  friend bool operator==(const AclMessage&, const AclMessage&) = default;
};

/// Performative byte, then u32 BE length-prefixed sender, receiver,
/// conversation id and content. Content starts with a tag byte: 'A' followed
/// by the atom's text form, or 'O' followed by raw bytes.
Bytes encode_acl(const AclMessage& message);
/// Throws MalformedFrame.
AclMessage decode_acl(std::span<const char> bytes);

}  // namespace hybridrt::agent
