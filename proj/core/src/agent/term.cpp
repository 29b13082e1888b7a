#include "hybridrt/agent/term.hpp"

#include <cctype>

#include <fmt/format.h>

#include "hybridrt/error.hpp"

namespace hybridrt::agent {

Term Term::constant(std::string text) {
  Term t;
  t.kind_ = Kind::kConstant;
  t.text_ = std::move(text);
  return t;
}

Term Term::variable(std::string name) {
  if (!name.empty() && name.front() == '?') name.erase(0, 1);
  if (name.empty()) fail(Errc::kInvalidArgument, "variable needs a name");
  Term t;
  t.kind_ = Kind::kVariable;
  t.text_ = std::move(name);
  return t;
}

Term Term::compound(std::string functor, std::vector<Term> args) {
  if (args.empty()) return constant(std::move(functor));
  Term t;
  t.kind_ = Kind::kCompound;
  t.text_ = std::move(functor);
  t.args_ = std::move(args);
  return t;
}

bool Term::is_ground() const {
  if (kind_ == Kind::kVariable) return false;
  for (const auto& a : args_) {
    if (!a.is_ground()) return false;
  }
  return true;
}

bool operator<(const Term& a, const Term& b) {
  if (a.kind_ != b.kind_) return a.kind_ < b.kind_;
  if (a.text_ != b.text_) return a.text_ < b.text_;
  return a.args_ < b.args_;
}

namespace {

bool bare_char(char ch) {
  return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.' || ch == '@' ||
         ch == '-' || ch == ':' || ch == '/' || ch == '+';
}

void render(const Term& t, std::string& out) {
  switch (t.kind()) {
    case Term::Kind::kVariable:
      out += '?';
      out += t.text();
      return;
    case Term::Kind::kConstant:
      if (is_bare_token(t.text())) {
        out += t.text();
      } else {
        out += quote(t.text());
      }
      return;
    case Term::Kind::kCompound:
      out += is_bare_token(t.text()) ? t.text() : quote(t.text());
      out += '(';
      for (std::size_t i = 0; i < t.args().size(); ++i) {
        if (i > 0) out += ", ";
        render(t.args()[i], out);
      }
      out += ')';
      return;
  }
}

int hex_value(char ch) {
  if (ch >= '0' && ch <= '9') return ch - '0';
  if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
  if (ch >= 'A' && ch <= 'F') return ch - 'A' + 10;
  return -1;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Term parse_all() {
    Term t = parse();
    skip_space();
    if (pos_ != text_.size()) error("trailing input");
    return t;
  }

 private:
  Term parse() {
    skip_space();
    if (pos_ >= text_.size()) error("unexpected end of input");
    if (text_[pos_] == '?') {
      ++pos_;
      std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
      if (start == pos_) error("empty variable name");
      return Term::variable(std::string(text_.substr(start, pos_ - start)));
    }
    std::string head;
    if (text_[pos_] == '"') {
      head = parse_quoted();
    } else {
      std::size_t start = pos_;
      while (pos_ < text_.size() && bare_char(text_[pos_])) ++pos_;
      if (start == pos_) error(fmt::format("unexpected character '{}'", text_[pos_]));
      head = std::string(text_.substr(start, pos_ - start));
    }
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      ++pos_;
      std::vector<Term> args;
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == ')') {
        ++pos_;
        return Term::constant(std::move(head));
      }
      for (;;) {
        args.push_back(parse());
        skip_space();
        if (pos_ >= text_.size()) error("unterminated argument list");
        if (text_[pos_] == ',') {
          ++pos_;
          continue;
        }
        if (text_[pos_] == ')') {
          ++pos_;
          break;
        }
        error("expected ',' or ')'");
      }
      return Term::compound(std::move(head), std::move(args));
    }
    return Term::constant(std::move(head));
  }

  std::string parse_quoted() {
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < text_.size()) {
      char ch = text_[pos_++];
      if (ch == '"') return out;
      if (ch != '\\') {
        out += ch;
        continue;
      }
      if (pos_ >= text_.size()) break;
      char esc = text_[pos_++];
      switch (esc) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'x': {
          if (pos_ + 2 > text_.size()) error("truncated \\x escape");
          int hi = hex_value(text_[pos_]);
          int lo = hex_value(text_[pos_ + 1]);
          if (hi < 0 || lo < 0) error("bad \\x escape");
          out += static_cast<char>(hi * 16 + lo);
          pos_ += 2;
          break;
        }
        default: error("unknown escape");
      }
    }
    error("unterminated string");
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void error(const std::string& what) const {
    fail(Errc::kParseError, fmt::format("{} at offset {}", what, pos_));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

bool is_bare_token(std::string_view text) {
  if (text.empty()) return false;
  for (char ch : text) {
    if (!bare_char(ch)) return false;
  }
  return true;
}

std::string quote(std::string_view text) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(text.size() + 2);
  out += '"';
  for (char ch : text) {
    auto u = static_cast<unsigned char>(ch);
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (u < 0x20 || u >= 0x7f) {
          out += "\\x";
          out += kHex[u >> 4];
          out += kHex[u & 0xf];
        } else {
          out += ch;
        }
    }
  }
  out += '"';
  return out;
}

std::string Term::to_string() const {
  std::string out;
  render(*this, out);
  return out;
}

bool match(const Term& pattern, const Term& ground, Substitution& bindings) {
  switch (pattern.kind()) {
    case Term::Kind::kVariable: {
      auto it = bindings.find(pattern.text());
      if (it != bindings.end()) return it->second == ground;
      bindings.emplace(pattern.text(), ground);
      return true;
    }
    case Term::Kind::kConstant:
      return ground.is_constant() && ground.text() == pattern.text();
    case Term::Kind::kCompound:
      if (!ground.is_compound() || ground.text() != pattern.text() || ground.arity() != pattern.arity()) {
        return false;
      }
      for (std::size_t i = 0; i < pattern.arity(); ++i) {
        if (!match(pattern.arg(i), ground.arg(i), bindings)) return false;
      }
      return true;
  }
  return false;
}

Term substitute(const Term& term, const Substitution& bindings) {
  switch (term.kind()) {
    case Term::Kind::kVariable: {
      auto it = bindings.find(term.text());
      return it == bindings.end() ? term : it->second;
    }
    case Term::Kind::kConstant:
      return term;
    case Term::Kind::kCompound: {
      std::vector<Term> args;
      args.reserve(term.arity());
      for (const auto& a : term.args()) args.push_back(substitute(a, bindings));
      return Term::compound(term.text(), std::move(args));
    }
  }
  return term;
}

Term parse_term(std::string_view text) { return Parser(text).parse_all(); }

}  // namespace hybridrt::agent
