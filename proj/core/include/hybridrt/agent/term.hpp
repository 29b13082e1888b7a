#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hybridrt::agent {

/// A first-order term: constant, variable (`?name`) or compound
/// `functor(arg, ...)`. Belief atoms are terms whose functor is the
/// predicate; a compound with no arguments is normalized to a constant.
class Term {
 public:
  enum class Kind { kConstant, kVariable, kCompound };

  Term() = default;

  static Term constant(std::string text);
  static Term variable(std::string name);
  static Term compound(std::string functor, std::vector<Term> args);

  Kind kind() const { return kind_; }
  bool is_constant() const { return kind_ == Kind::kConstant; }
  bool is_variable() const { return kind_ == Kind::kVariable; }
  bool is_compound() const { return kind_ == Kind::kCompound; }

  /// Constant value, variable name (without '?'), or functor.
  const std::string& text() const { return text_; }
  const std::vector<Term>& args() const { return args_; }
  std::size_t arity() const { return args_.size(); }
  const Term& arg(std::size_t i) const { return args_.at(i); }

  bool is_ground() const;
  std::string to_string() const;

  friend bool operator==(const Term&, const Term&) = default;
  friend bool operator<(const Term& a, const Term& b);

 private:
  Kind kind_ = Kind::kConstant;
  std::string text_;
  std::vector<Term> args_;
};

using Substitution = std::map<std::string, Term>;

/// One-way matching of a pattern against a ground term, extending bindings.
bool match(const Term& pattern, const Term& ground, Substitution& bindings);

Term substitute(const Term& term, const Substitution& bindings);

/// Parses `pred(a, ?x, "quoted text", f(b))`. Throws ParseError.
Term parse_term(std::string_view text);

/// Constants rendered without quotes when they are plain tokens.
bool is_bare_token(std::string_view text);
std::string quote(std::string_view text);

// Convenience builders.
inline Term c(std::string text) { return Term::constant(std::move(text)); }
inline Term v(std::string name) { return Term::variable(std::move(name)); }
inline Term to_term(Term t) { return t; }
inline Term to_term(std::string text) { return Term::constant(std::move(text)); }
inline Term to_term(const char* text) { return Term::constant(text); }

template <class... Args>
Term atom(std::string functor, Args&&... args) {
  return Term::compound(std::move(functor), std::vector<Term>{to_term(std::forward<Args>(args))...});
}

}  // namespace hybridrt::agent
