#include "hybridrt/pipeline/document.hpp"

#include <cctype>

#include <fmt/format.h>

#include "hybridrt/error.hpp"

namespace hybridrt::pipeline {

std::string_view to_string(DocFormat f) {
  switch (f) {
    case DocFormat::kTxt: return "TXT";
    case DocFormat::kMarkup: return "MARKUP";
    case DocFormat::kBinary: return "BINARY";
  }
  return "?";
}

std::string_view extension_of(DocFormat f) {
  switch (f) {
    case DocFormat::kTxt: return "txt";
    case DocFormat::kMarkup: return "htm";
    case DocFormat::kBinary: return "bin";
  }
  return "";
}

std::optional<DocFormat> format_from_extension(std::string_view ext) {
  if (!ext.empty() && ext.front() == '.') ext.remove_prefix(1);
  if (ext == "txt") return DocFormat::kTxt;
  if (ext == "htm" || ext == "html") return DocFormat::kMarkup;
  if (ext == "bin") return DocFormat::kBinary;
  return std::nullopt;
}

namespace {

std::optional<DocFormat> format_from_name(std::string_view name) {
  if (name == "TXT") return DocFormat::kTxt;
  if (name == "MARKUP") return DocFormat::kMarkup;
  if (name == "BINARY") return DocFormat::kBinary;
  return std::nullopt;
}

void put_str(Bytes& out, std::string_view s) {
  put_u32_be(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::uint8_t byte() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    auto v = get_u32_be(in_.data() + pos_);
    pos_ += 4;
    return v;
  }
  std::string str() {
    auto n = u32();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) fail(Errc::kMalformedDoc, "truncated bundle");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

DocFormat checked_format(std::uint8_t raw) {
  if (raw > 2) fail(Errc::kMalformedDoc, fmt::format("unknown doc format {}", raw));
  return static_cast<DocFormat>(raw);
}

}  // namespace

Bytes serialize_doc(const BundleDoc& doc) {
  Bytes out;
  put_str(out, doc.doc_id);
  out.push_back(static_cast<char>(doc.format));
  put_str(out, doc.bytes);
  return out;
}

BundleDoc deserialize_doc(std::string_view bytes) {
  Reader r(bytes);
  BundleDoc d;
  d.doc_id = r.str();
  d.format = checked_format(r.byte());
  d.bytes = r.str();
  if (!r.done()) fail(Errc::kMalformedDoc, "trailing bytes after doc");
  return d;
}

Bytes serialize_bundle(const DocumentBundle& bundle) {
  Bytes out;
  put_str(out, bundle.bundle_id);
  out.push_back(static_cast<char>(bundle.stage));
  put_u32_be(out, static_cast<std::uint32_t>(bundle.docs.size()));
  for (const auto& d : bundle.docs) {
    put_str(out, d.doc_id);
    out.push_back(static_cast<char>(d.format));
    put_str(out, d.bytes);
  }
  return out;
}

DocumentBundle deserialize_bundle(std::string_view bytes) {
  Reader r(bytes);
  DocumentBundle b;
  b.bundle_id = r.str();
  auto stage = r.byte();
  if (stage > 1) fail(Errc::kMalformedDoc, "unknown bundle stage");
  b.stage = static_cast<Stage>(stage);
  auto n = r.u32();
  b.docs.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    BundleDoc d;
    d.doc_id = r.str();
    d.format = checked_format(r.byte());
    d.bytes = r.str();
    b.docs.push_back(std::move(d));
  }
  if (!r.done()) fail(Errc::kMalformedDoc, "trailing bytes after bundle");
  return b;
}

agent::Term bundle_to_term(const DocumentBundle& bundle) {
  using agent::Term;
  std::vector<Term> docs;
  docs.reserve(bundle.docs.size());
  for (const auto& d : bundle.docs) {
    docs.push_back(agent::atom("doc", d.doc_id, std::string(to_string(d.format)), d.bytes));
  }
  return agent::atom("bundle", bundle.bundle_id, bundle.stage == Stage::kRaw ? "RAW" : "TRANSLATED",
                     Term::compound("docs", std::move(docs)));
}

DocumentBundle bundle_from_term(const agent::Term& t) {
  if (!t.is_compound() || t.text() != "bundle" || t.arity() != 3) {
    fail(Errc::kMalformedDoc, "not a bundle term: " + t.to_string().substr(0, 40));
  }
  DocumentBundle b;
  b.bundle_id = t.arg(0).text();
  b.stage = t.arg(1).text() == "RAW" ? Stage::kRaw : Stage::kTranslated;
  const auto& docs = t.arg(2);
  // "docs" with no arguments collapses to a constant.
  for (const auto& d : docs.args()) {
    if (d.arity() != 3) fail(Errc::kMalformedDoc, "bad doc term");
    auto f = format_from_name(d.arg(1).text());
    if (!f) fail(Errc::kMalformedDoc, "bad doc format " + d.arg(1).text());
    b.docs.push_back({d.arg(0).text(), *f, d.arg(2).text()});
  }
  return b;
}

std::size_t count_tokens(std::string_view text) {
  std::size_t n = 0;
  bool in = false;
  for (char ch : text) {
    bool space = std::isspace(static_cast<unsigned char>(ch));
    if (!space && !in) ++n;
    in = !space;
  }
  return n;
}

std::string render_canonical(const CanonicalDoc& doc) {
  std::string out;
  out.reserve(doc.body.size() + doc.doc_id.size() + doc.title.size() + 48);
  out += "#DOC ";
  out += doc.doc_id;
  out += "\n#SRC ";
  out += doc.source_uri;
  out += "\n#TITLE ";
  out += doc.title;
  out += "\n#BODY\n";
  out += doc.body;
  return out;
}

CanonicalDoc parse_canonical(std::string_view record) {
  CanonicalDoc doc;
  auto take_line = [&](std::string_view tag) -> std::string {
    if (record.substr(0, tag.size()) != tag) {
      fail(Errc::kMalformedDoc, fmt::format("expected {}", tag));
    }
    record.remove_prefix(tag.size());
    auto nl = record.find('\n');
    if (nl == std::string_view::npos) fail(Errc::kMalformedDoc, "truncated canonical record");
    std::string line(record.substr(0, nl));
    record.remove_prefix(nl + 1);
    return line;
  };
  doc.doc_id = take_line("#DOC ");
  doc.source_uri = take_line("#SRC ");
  doc.title = take_line("#TITLE ");
  take_line("#BODY");
  doc.body = std::string(record);
  doc.token_count = count_tokens(doc.body);
  return doc;
}

namespace {

void collapse_space(std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(ch);
  }
  s.swap(out);
}

std::string one_line(std::string_view text, std::size_t limit = 80) {
  std::string out;
  for (char ch : text) {
    if (ch == '\n') {
      if (!out.empty()) break;
      continue;
    }
    if (ch == '\r') continue;
    out.push_back(ch);
    if (out.size() >= limit) break;
  }
  return out;
}

void decode_entity(std::string_view name, std::string& out) {
  if (name == "amp") out += '&';
  else if (name == "lt") out += '<';
  else if (name == "gt") out += '>';
  else if (name == "quot") out += '"';
  else if (name == "apos" || name == "#39") out += '\'';
  else if (name == "nbsp") out += ' ';
  else {
    out += '&';
    out.append(name);
    out += ';';
  }
}

}  // namespace

std::string strip_markup(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  std::size_t i = 0;
  while (i < in.size()) {
    char ch = in[i];
    if (ch == '<') {
      std::size_t end;
      if (in.substr(i, 4) == "<!--") {
        end = in.find("-->", i + 4);
        if (end == std::string_view::npos) fail(Errc::kMalformedDoc, "unterminated comment");
        end += 2;
      } else {
        end = in.find('>', i + 1);
        if (end == std::string_view::npos) fail(Errc::kMalformedDoc, fmt::format("unterminated tag at {}", i));
      }
      out.push_back(' ');
      i = end + 1;
    } else if (ch == '&') {
      auto semi = in.find(';', i + 1);
      if (semi != std::string_view::npos && semi - i <= 8) {
        decode_entity(in.substr(i + 1, semi - i - 1), out);
        i = semi + 1;
      } else {
        out.push_back('&');
        ++i;
      }
    } else {
      out.push_back(ch);
      ++i;
    }
  }
  collapse_space(out);
  return out;
}

std::string printable_runs(std::string_view bytes, std::size_t min_run) {
  std::string out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    if (end - start >= min_run) {
      if (!out.empty()) out.push_back(' ');
      out.append(bytes.substr(start, end - start));
    }
  };
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    auto u = static_cast<unsigned char>(bytes[i]);
    if (u < 0x20 || u > 0x7e) {
      flush(i);
      start = i + 1;
    }
  }
  flush(bytes.size());
  return out;
}

CanonicalDoc translate_doc(const BundleDoc& doc) {
  CanonicalDoc out;
  out.doc_id = doc.doc_id;
  out.source_uri = fmt::format("corpus:{}.{}", doc.doc_id, extension_of(doc.format));
  switch (doc.format) {
    case DocFormat::kTxt:
      out.body = doc.bytes;
      out.title = one_line(doc.bytes);
      break;
    case DocFormat::kMarkup: {
      out.body = strip_markup(doc.bytes);
      auto open = doc.bytes.find("<title>");
      auto close = doc.bytes.find("</title>");
      if (open != std::string::npos && close != std::string::npos && close > open) {
        out.title = one_line(strip_markup(std::string_view(doc.bytes).substr(open + 7, close - open - 7)));
      } else {
        out.title = one_line(out.body);
      }
      break;
    }
    case DocFormat::kBinary:
      out.body = printable_runs(doc.bytes);
      out.title = one_line(out.body, 40);
      break;
  }
  out.token_count = count_tokens(out.body);
  return out;
}

TranslateResult translate_bundle(const DocumentBundle& raw) {
  TranslateResult r;
  r.bundle.bundle_id = raw.bundle_id;
  r.bundle.stage = Stage::kTranslated;
  for (const auto& d : raw.docs) {
    try {
      r.bundle.docs.push_back({d.doc_id, d.format, render_canonical(translate_doc(d))});
    } catch (const Error& e) {
      if (e.code() != Errc::kMalformedDoc) throw;
      r.malformed.push_back(d.doc_id);
    }
  }
  return r;
}

std::map<std::string, std::size_t> term_frequencies(std::string_view body) {
  std::map<std::string, std::size_t> tf;
  std::string term;
  auto flush = [&] {
    if (!term.empty()) {
      ++tf[term];
      term.clear();
    }
  };
  for (char ch : body) {
    auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      term.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
  return tf;
}

}  // namespace hybridrt::pipeline
