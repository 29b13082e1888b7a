#include "hybridrt/backchannel/frame.hpp"

#include "hybridrt/error.hpp"

namespace hybridrt::backchannel {

bool valid_kind(std::uint8_t kind) { return kind >= 0x01 && kind <= 0x04; }

Bytes encode_frame(const Frame& frame) {
  if (frame.body.size() + 1 > kMaxFrameLength) fail(Errc::kMalformedFrame, "frame body too large");
  Bytes out;
  out.reserve(5 + frame.body.size());
  put_u32_be(out, static_cast<std::uint32_t>(frame.body.size() + 1));
  out.push_back(static_cast<char>(frame.kind));
  out.append(frame.body);
  return out;
}

std::optional<Frame> decode_frame(std::span<const char> buffer, std::size_t& consumed) {
  consumed = 0;
  if (buffer.size() < 4) return std::nullopt;
  const std::uint32_t length = get_u32_be(buffer.data());
  if (length < 1) fail(Errc::kMalformedFrame, "zero-length frame");
  if (length > kMaxFrameLength) fail(Errc::kMalformedFrame, "frame length exceeds limit");
  if (buffer.size() - 4 < length) return std::nullopt;
  const auto kind = static_cast<std::uint8_t>(buffer[4]);
  if (!valid_kind(kind)) fail(Errc::kMalformedFrame, "unknown frame kind " + std::to_string(kind));
  Frame frame{static_cast<FrameKind>(kind), Bytes(buffer.data() + 5, length - 1)};
  consumed = 4 + length;
  return frame;
}

Bytes encode_pull_request(std::uint32_t max_items) {
  Bytes body;
  put_u32_be(body, max_items);
  return body;
}

std::uint32_t decode_pull_request(const Bytes& body) {
  if (body.size() != 4) fail(Errc::kMalformedFrame, "pull request body must be 4 bytes");
  return get_u32_be(body.data());
}

}  // namespace hybridrt::backchannel
