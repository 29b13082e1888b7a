#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hybridrt {

using Bytes = std::string;

/// A batch of opaque items travelling over a DATA or SERVICE collaboration.
struct DataEnvelope {
  std::string payload_type;
  std::vector<Bytes> items;

  std::size_t item_count() const { return items.size(); }
  bool empty() const { return items.empty(); }
  std::size_t byte_size() const;

  friend bool operator==(const DataEnvelope&, const DataEnvelope&) = default;
};

// Wire form: item_count (u32 BE), then per item a u32 BE length and the raw
// bytes. The payload type is not part of the wire form.
Bytes serialize_items(const DataEnvelope& envelope);
DataEnvelope deserialize_items(std::span<const char> bytes, std::string payload_type = {});

void put_u32_be(Bytes& out, std::uint32_t value);
std::uint32_t get_u32_be(const char* p);

}  // namespace hybridrt
