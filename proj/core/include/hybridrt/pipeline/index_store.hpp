#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "hybridrt/pipeline/document.hpp"

namespace hybridrt::pipeline {

struct IndexRecord {
  std::string term;
  std::string doc_id;
  std::size_t tf = 0;

  friend bool operator==(const IndexRecord&, const IndexRecord&) = default;
};

/// Postings of one canonical document, ordered by term.
std::vector<IndexRecord> postings_of(const CanonicalDoc& doc);

/// Append-only inverted index shared by every indexer of a run.
///
/// Layout: "postings.tsv" (term, doc_id, tf) and "manifest.txt" (one doc id
/// per line). Appends happen under an exclusive flock on the manifest, and a
/// doc id already present in the manifest is skipped, which keeps the index
/// exactly-once across threads and processes.
class IndexStore {
 public:
  /// Throws StoreUnavailable if the directory cannot be created or opened.
  explicit IndexStore(std::filesystem::path dir);
  ~IndexStore();
  IndexStore(const IndexStore&) = delete;
  IndexStore& operator=(const IndexStore&) = delete;

  /// Indexes every document of a TRANSLATED bundle. Returns how many were new.
  std::size_t index(const DocumentBundle& translated);
  std::size_t index(const std::vector<CanonicalDoc>& docs);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  int manifest_fd_ = -1;
  int postings_fd_ = -1;
};

std::vector<std::string> read_manifest(const std::filesystem::path& index_dir);
std::size_t manifest_size(const std::filesystem::path& index_dir);
std::vector<IndexRecord> read_postings(const std::filesystem::path& index_dir);

}  // namespace hybridrt::pipeline
