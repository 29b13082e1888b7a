#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "hybridrt/pipeline/document.hpp"

namespace hybridrt::pipeline {

struct CorpusEntry {
  std::string doc_id;
  DocFormat format = DocFormat::kTxt;
  std::filesystem::path path;
};

/// Recognised documents in a corpus directory, sorted by doc id.
std::vector<CorpusEntry> list_corpus(const std::filesystem::path& dir);

/// Hands out unclaimed documents of a shared corpus.
///
/// A document is claimed by creating "<claims_dir>/<doc_id>" exclusively, so
/// any number of sources (threads or processes) sharing the claims directory
/// see disjoint sets.
class CorpusSource {
 public:
  /// Throws SourceUnavailable if the corpus cannot be listed or the claims
  /// directory cannot be created.
  explicit CorpusSource(std::filesystem::path corpus_dir, std::filesystem::path claims_dir = {},
                        std::string owner = "source");

  /// Claims up to batch documents. An empty bundle means the corpus is
  /// exhausted for this source.
  DocumentBundle gather(std::size_t batch);

  bool exhausted() const;
  std::size_t claimed() const;
  const std::filesystem::path& claims_dir() const { return claims_dir_; }

 private:
  std::filesystem::path corpus_dir_;
  std::filesystem::path claims_dir_;
  std::string owner_;
  mutable std::mutex mu_;
  std::vector<CorpusEntry> entries_;
  std::size_t cursor_ = 0;
  std::size_t claimed_ = 0;
  std::size_t bundles_ = 0;
};

}  // namespace hybridrt::pipeline
