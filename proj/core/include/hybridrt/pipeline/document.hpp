#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hybridrt/agent/term.hpp"
#include "hybridrt/envelope.hpp"

namespace hybridrt::pipeline {

inline constexpr const char* kBundleType = "DocumentBundle";
inline constexpr const char* kConversionType = "FormatConversion";

enum class DocFormat : std::uint8_t { kTxt = 0, kMarkup = 1, kBinary = 2 };
enum class Stage : std::uint8_t { kRaw = 0, kTranslated = 1 };

std::string_view to_string(DocFormat f);
std::string_view extension_of(DocFormat f);
std::optional<DocFormat> format_from_extension(std::string_view ext);

struct BundleDoc {
  std::string doc_id;
  DocFormat format = DocFormat::kTxt;
  Bytes bytes;  // raw content, or the canonical record once translated

  friend bool operator==(const BundleDoc&, const BundleDoc&) = default;
};

struct DocumentBundle {
  std::string bundle_id;
  Stage stage = Stage::kRaw;
  std::vector<BundleDoc> docs;

  friend bool operator==(const DocumentBundle&, const DocumentBundle&) = default;
};

// Binary item form used on DATA interfaces.
Bytes serialize_bundle(const DocumentBundle& bundle);
DocumentBundle deserialize_bundle(std::string_view bytes);

Bytes serialize_doc(const BundleDoc& doc);
BundleDoc deserialize_doc(std::string_view bytes);

// Term form carried inside ACL messages.
agent::Term bundle_to_term(const DocumentBundle& bundle);
DocumentBundle bundle_from_term(const agent::Term& term);

struct CanonicalDoc {
  std::string doc_id;
  std::string source_uri;
  std::string title;
  std::string body;
  std::size_t token_count = 0;

  friend bool operator==(const CanonicalDoc&, const CanonicalDoc&) = default;
};

/// Tagged record: "#DOC id", "#SRC uri", "#TITLE title", "#BODY", then the
/// body verbatim up to the end of the record.
std::string render_canonical(const CanonicalDoc& doc);
CanonicalDoc parse_canonical(std::string_view record);

std::size_t count_tokens(std::string_view text);

/// Converts one raw document. MalformedDoc on markup with an unterminated tag.
CanonicalDoc translate_doc(const BundleDoc& doc);

struct TranslateResult {
  DocumentBundle bundle;  // TRANSLATED
  std::vector<std::string> malformed;
};
TranslateResult translate_bundle(const DocumentBundle& raw);

// Markup and binary extraction, exposed for testing.
std::string strip_markup(std::string_view markup);
std::string printable_runs(std::string_view bytes, std::size_t min_run = 4);

/// Lower-cased alphanumeric terms with their frequencies.
std::map<std::string, std::size_t> term_frequencies(std::string_view body);

}  // namespace hybridrt::pipeline
