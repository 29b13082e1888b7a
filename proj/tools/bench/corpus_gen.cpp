#include "bench/corpus_gen.hpp"

#include <array>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "hybridrt/error.hpp"
#include "hybridrt/pipeline/document.hpp"

namespace fs = std::filesystem;

namespace hybridrt::bench {

namespace {

using pipeline::DocFormat;

std::vector<std::string> make_vocabulary(std::mt19937_64& rng, std::size_t size) {
  static constexpr std::array<const char*, 24> kSyllables = {
      "ka", "lo", "mi", "ne", "ru", "ta", "vo", "si", "pe", "do", "gra", "bel",
      "chi", "mon", "dra", "lex", "qui", "zen", "tor", "fa", "wy", "sul", "ix", "or"};
  std::uniform_int_distribution<std::size_t> pick(0, kSyllables.size() - 1);
  std::uniform_int_distribution<int> length(1, 4);
  std::vector<std::string> words;
  words.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    std::string w;
    for (int s = length(rng); s > 0; --s) w += kSyllables[pick(rng)];
    words.push_back(std::move(w));
  }
  return words;
}

class TextSource {
 public:
  TextSource(std::mt19937_64& rng, const std::vector<std::string>& vocab) : rng_(rng), vocab_(vocab) {}

  // Skewed towards the head of the vocabulary, like natural text.
  const std::string& word() {
    double u = unit_(rng_);
    return vocab_[static_cast<std::size_t>(u * u * static_cast<double>(vocab_.size()))];
  }

  std::string sentence() {
    std::uniform_int_distribution<int> len(4, 14);
    std::string s;
    for (int i = len(rng_); i > 0; --i) {
      if (!s.empty()) s += ' ';
      s += word();
    }
    s += '.';
    return s;
  }

 private:
  std::mt19937_64& rng_;
  const std::vector<std::string>& vocab_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

std::string text_doc(TextSource& text, std::size_t target) {
  std::string out = text.sentence() + "\n\n";
  while (out.size() < target) {
    out += text.sentence();
    out += out.size() % 5 == 0 ? "\n" : " ";
  }
  return out;
}

std::string markup_doc(TextSource& text, std::mt19937_64& rng, std::size_t target) {
  static constexpr std::array<const char*, 4> kInline = {"b", "i", "em", "code"};
  std::uniform_int_distribution<std::size_t> tag(0, kInline.size() - 1);
  std::uniform_int_distribution<int> roll(0, 9);
  std::string out = "<html><head><title>" + text.sentence() + "</title></head>\n<body>\n";
  while (out.size() + 16 < target) {
    out += "<p>";
    for (int s = 0; s < 3; ++s) {
      int r = roll(rng);
      if (r == 0) {
        const char* t = kInline[tag(rng)];
        out += fmt::format("<{0}>{1}</{0}> ", t, text.word());
      } else if (r == 1) {
        out += text.word() + " &amp; " + text.word() + " ";
      } else if (r == 2) {
        out += "<!-- " + text.word() + " --> ";
      }
      out += text.sentence() + " ";
    }
    out += "</p>\n";
  }
  out += "</body></html>\n";
  return out;
}

std::string binary_doc(TextSource& text, std::mt19937_64& rng, std::size_t target) {
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<int> gap(4, 40);
  std::string out;
  while (out.size() < target) {
    for (int i = gap(rng); i > 0; --i) {
      // Non-printable filler keeps the embedded words separated.
      int b = byte(rng) % 32;
      out.push_back(static_cast<char>(b == 0 ? 1 : b));
    }
    out += text.word();
    out += text.word();
  }
  return out;
}

}  // namespace

void generate_corpus(std::size_t n, std::uint64_t seed, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    fail(Errc::kDirectoryNotWritable, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  }
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && pipeline::format_from_extension(entry.path().extension().string())) {
      fs::remove(entry.path(), ec);
    }
  }
  fs::remove_all(dir / ".claims", ec);

  std::mt19937_64 rng(seed);
  auto vocab = make_vocabulary(rng, 2000);
  TextSource text(rng, vocab);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> size(512, 8192);

  for (std::size_t i = 0; i < n; ++i) {
    double f = unit(rng);
    auto format = f < 0.6 ? DocFormat::kTxt : f < 0.9 ? DocFormat::kMarkup : DocFormat::kBinary;
    auto target = size(rng);
    std::string body;
    switch (format) {
      case DocFormat::kTxt: body = text_doc(text, target); break;
      case DocFormat::kMarkup: body = markup_doc(text, rng, target); break;
      case DocFormat::kBinary: body = binary_doc(text, rng, target); break;
    }
    if (body.size() > 8192) body.resize(8192);
    if (format == DocFormat::kMarkup && body.rfind('<') != std::string::npos &&
        body.find('>', body.rfind('<')) == std::string::npos) {
      // Never cut a tag in half; an unterminated tag is a malformed document.
      body.resize(body.rfind('<'));
    }
    auto path = dir / fmt::format("doc{:06d}.{}", i, pipeline::extension_of(format));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) fail(Errc::kDirectoryNotWritable, "cannot write " + path.string());
  }
}

}  // namespace hybridrt::bench
