#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include "hybridrt/envelope.hpp"

namespace hybridrt::backchannel {

enum class FrameKind : std::uint8_t {
  kPullRequest = 0x01,
  kPullResponse = 0x02,
  kStatus = 0x03,
  kAclMessage = 0x04,
};

/// Wire layout: u32 BE length (kind byte + body), one kind byte, body.
struct Frame {
  FrameKind kind = FrameKind::kStatus;
  Bytes body;

  friend bool operator==(const Frame&, const Frame&) = default;
};

inline constexpr std::uint32_t kMaxFrameLength = 256u << 20;

Bytes encode_frame(const Frame& frame);

/// Decodes one frame from the front of buffer. Returns nullopt while the
/// buffer holds only part of a frame; throws MalformedFrame on bad input.
std::optional<Frame> decode_frame(std::span<const char> buffer, std::size_t& consumed);

bool valid_kind(std::uint8_t kind);

Bytes encode_pull_request(std::uint32_t max_items);
std::uint32_t decode_pull_request(const Bytes& body);

}  // namespace hybridrt::backchannel
