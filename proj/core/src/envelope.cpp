#include "hybridrt/envelope.hpp"

#include "hybridrt/error.hpp"

namespace hybridrt {

std::size_t DataEnvelope::byte_size() const {
  std::size_t total = 0;
  for (const auto& item : items) total += item.size();
  return total;
}

void put_u32_be(Bytes& out, std::uint32_t value) {
  out.push_back(static_cast<char>((value >> 24) & 0xff));
  out.push_back(static_cast<char>((value >> 16) & 0xff));
  out.push_back(static_cast<char>((value >> 8) & 0xff));
  out.push_back(static_cast<char>(value & 0xff));
}

std::uint32_t get_u32_be(const char* p) {
  const auto* u = reinterpret_cast<const unsigned char*>(p);
  return (std::uint32_t{u[0]} << 24) | (std::uint32_t{u[1]} << 16) | (std::uint32_t{u[2]} << 8) |
         std::uint32_t{u[3]};
}

Bytes serialize_items(const DataEnvelope& envelope) {
  Bytes out;
  out.reserve(4 + envelope.byte_size() + 4 * envelope.items.size());
  put_u32_be(out, static_cast<std::uint32_t>(envelope.items.size()));
  for (const auto& item : envelope.items) {
    put_u32_be(out, static_cast<std::uint32_t>(item.size()));
    out.append(item);
  }
  return out;
}

DataEnvelope deserialize_items(std::span<const char> bytes, std::string payload_type) {
  DataEnvelope envelope;
  envelope.payload_type = std::move(payload_type);
  if (bytes.size() < 4) fail(Errc::kMalformedFrame, "envelope shorter than its item count");
  const std::uint32_t count = get_u32_be(bytes.data());
  std::size_t pos = 4;
  // Each item needs at least its 4-byte length.
  if (count > (bytes.size() - 4) / 4) fail(Errc::kMalformedFrame, "item count exceeds payload");
  envelope.items.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (bytes.size() - pos < 4) fail(Errc::kMalformedFrame, "truncated item length");
    const std::uint32_t len = get_u32_be(bytes.data() + pos);
    pos += 4;
    if (bytes.size() - pos < len) fail(Errc::kMalformedFrame, "truncated item body");
    envelope.items.emplace_back(bytes.data() + pos, len);
    pos += len;
  }
  if (pos != bytes.size()) fail(Errc::kMalformedFrame, "trailing bytes after envelope");
  return envelope;
}

}  // namespace hybridrt
