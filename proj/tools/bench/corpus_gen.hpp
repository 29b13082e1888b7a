#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

namespace hybridrt::bench {

/// Writes n synthetic documents named "<doc_id>.<txt|htm|bin>" into dir,
/// replacing any corpus files already there. Roughly 60% plain text, 30%
/// markup and 10% binary, each between 0.5 and 8 KiB. Output is a pure
/// function of (n, seed). Throws DirectoryNotWritable.
void generate_corpus(std::size_t n, std::uint64_t seed, const std::filesystem::path& dir);

}  // namespace hybridrt::bench
