#include "hybridrt/pipeline/corpus.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "hybridrt/error.hpp"

namespace fs = std::filesystem;

namespace hybridrt::pipeline {

std::vector<CorpusEntry> list_corpus(const fs::path& dir) {
  std::vector<CorpusEntry> out;
  std::error_code ec;
  fs::directory_iterator it(dir, ec);
  if (ec) fail(Errc::kSourceUnavailable, fmt::format("cannot list {}: {}", dir.string(), ec.message()));
  for (const auto& entry : it) {
    if (!entry.is_regular_file()) continue;
    auto format = format_from_extension(entry.path().extension().string());
    if (!format) continue;
    out.push_back({entry.path().stem().string(), *format, entry.path()});
  }
  std::sort(out.begin(), out.end(),
            [](const CorpusEntry& a, const CorpusEntry& b) { return a.doc_id < b.doc_id; });
  return out;
}

CorpusSource::CorpusSource(fs::path corpus_dir, fs::path claims_dir, std::string owner)
    : corpus_dir_(std::move(corpus_dir)),
      claims_dir_(claims_dir.empty() ? corpus_dir_ / ".claims" : std::move(claims_dir)),
      owner_(std::move(owner)) {
  entries_ = list_corpus(corpus_dir_);
  std::error_code ec;
  fs::create_directories(claims_dir_, ec);
  if (ec) {
    fail(Errc::kSourceUnavailable,
         fmt::format("cannot create claims dir {}: {}", claims_dir_.string(), ec.message()));
  }
}

namespace {

// True when this caller created the claim file.
bool try_claim(const fs::path& claim) {
  int fd = ::open(claim.c_str(), O_CREAT | O_EXCL | O_WRONLY | O_CLOEXEC, 0644);
  if (fd >= 0) {
    ::close(fd);
    return true;
  }
  if (errno == EEXIST) return false;
  fail(Errc::kSourceUnavailable, fmt::format("claim {} failed: {}", claim.string(), std::strerror(errno)));
}

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::kSourceUnavailable, "cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

DocumentBundle CorpusSource::gather(std::size_t batch) {
  std::lock_guard lock(mu_);
  DocumentBundle bundle;
  bundle.stage = Stage::kRaw;
  while (cursor_ < entries_.size() && bundle.docs.size() < batch) {
    const auto& e = entries_[cursor_++];
    if (!try_claim(claims_dir_ / e.doc_id)) continue;
    bundle.docs.push_back({e.doc_id, e.format, read_file(e.path)});
  }
  claimed_ += bundle.docs.size();
  if (!bundle.docs.empty()) bundle.bundle_id = fmt::format("{}-{}", owner_, bundles_++);
  return bundle;
}

bool CorpusSource::exhausted() const {
  std::lock_guard lock(mu_);
  return cursor_ >= entries_.size();
}

std::size_t CorpusSource::claimed() const {
  std::lock_guard lock(mu_);
  return claimed_;
}

}  // namespace hybridrt::pipeline
