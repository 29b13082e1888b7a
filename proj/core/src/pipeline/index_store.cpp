#include "hybridrt/pipeline/index_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "hybridrt/error.hpp"

namespace fs = std::filesystem;

namespace hybridrt::pipeline {

std::vector<IndexRecord> postings_of(const CanonicalDoc& doc) {
  std::vector<IndexRecord> out;
  for (auto& [term, tf] : term_frequencies(doc.body)) out.push_back({term, doc.doc_id, tf});
  return out;
}

namespace {

int open_append(const fs::path& p) {
  int fd = ::open(p.c_str(), O_CREAT | O_RDWR | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) fail(Errc::kStoreUnavailable, fmt::format("open {}: {}", p.string(), std::strerror(errno)));
  return fd;
}

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    auto n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(Errc::kStoreUnavailable, fmt::format("index write failed: {}", std::strerror(errno)));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::set<std::string> manifest_ids(int fd) {
  std::set<std::string> ids;
  std::string content;
  char buf[1 << 16];
  off_t off = 0;
  for (;;) {
    auto n = ::pread(fd, buf, sizeof buf, off);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(Errc::kStoreUnavailable, fmt::format("manifest read failed: {}", std::strerror(errno)));
    }
    if (n == 0) break;
    content.append(buf, static_cast<std::size_t>(n));
    off += n;
  }
  std::istringstream in(content);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) ids.insert(line);
  }
  return ids;
}

class FileLock {
 public:
  explicit FileLock(int fd) : fd_(fd) {
    while (::flock(fd_, LOCK_EX) != 0) {
      if (errno != EINTR) fail(Errc::kStoreUnavailable, fmt::format("flock: {}", std::strerror(errno)));
    }
  }
  ~FileLock() { ::flock(fd_, LOCK_UN); }

 private:
  int fd_;
};

}  // namespace

IndexStore::IndexStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) fail(Errc::kStoreUnavailable, fmt::format("cannot create {}: {}", dir_.string(), ec.message()));
  manifest_fd_ = open_append(dir_ / "manifest.txt");
  try {
    postings_fd_ = open_append(dir_ / "postings.tsv");
  } catch (...) {
    ::close(manifest_fd_);
    throw;
  }
}

IndexStore::~IndexStore() {
  if (postings_fd_ >= 0) ::close(postings_fd_);
  if (manifest_fd_ >= 0) ::close(manifest_fd_);
}

std::size_t IndexStore::index(const DocumentBundle& translated) {
  std::vector<CanonicalDoc> docs;
  docs.reserve(translated.docs.size());
  for (const auto& d : translated.docs) docs.push_back(parse_canonical(d.bytes));
  return index(docs);
}

std::size_t IndexStore::index(const std::vector<CanonicalDoc>& docs) {
  // Postings are rendered before taking the lock.
  std::vector<std::pair<std::string, std::string>> rendered;
  rendered.reserve(docs.size());
  for (const auto& doc : docs) {
    std::string lines;
    for (const auto& r : postings_of(doc)) fmt::format_to(std::back_inserter(lines), "{}\t{}\t{}\n", r.term, r.doc_id, r.tf);
    rendered.emplace_back(doc.doc_id, std::move(lines));
  }

  FileLock lock(manifest_fd_);
  auto seen = manifest_ids(manifest_fd_);
  std::string postings;
  std::string manifest;
  std::size_t fresh = 0;
  for (auto& [id, lines] : rendered) {
    if (!seen.insert(id).second) continue;
    postings += lines;
    manifest += id;
    manifest += '\n';
    ++fresh;
  }
  // Postings first: a manifest line always implies its postings are on disk.
  write_all(postings_fd_, postings);
  write_all(manifest_fd_, manifest);
  return fresh;
}

std::vector<std::string> read_manifest(const fs::path& index_dir) {
  std::vector<std::string> ids;
  std::ifstream in(index_dir / "manifest.txt");
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

std::size_t manifest_size(const fs::path& index_dir) {
  std::ifstream in(index_dir / "manifest.txt", std::ios::binary);
  std::size_t n = 0;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) n += buf[i] == '\n';
  }
  return n;
}

std::vector<IndexRecord> read_postings(const fs::path& index_dir) {
  std::vector<IndexRecord> out;
  std::ifstream in(index_dir / "postings.tsv");
  for (std::string line; std::getline(in, line);) {
    auto a = line.find('\t');
    auto b = line.find('\t', a + 1);
    if (a == std::string::npos || b == std::string::npos) continue;
    out.push_back({line.substr(0, a), line.substr(a + 1, b - a - 1), std::stoul(line.substr(b + 1))});
  }
  return out;
}

}  // namespace hybridrt::pipeline
