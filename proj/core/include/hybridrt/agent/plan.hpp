#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hybridrt/agent/term.hpp"

namespace hybridrt::agent {

/// An action request: a builtin container operation or a registered
/// application action.
struct Directive {
  std::string action;
  std::vector<Term> args;

  Term as_term() const { return Term::compound(action, args); }
  std::string to_string() const { return as_term().to_string(); }

  static Directive from_term(const Term& t);
  static Directive parse(std::string_view text) { return from_term(parse_term(text)); }

  friend bool operator==(const Directive&, const Directive&) = default;
};

enum class PlanOp { kAct, kSeq, kPar, kDoWhen };

/// Plan tree built from ACT leaves and SEQ, PAR and DO_WHEN operators.
struct PlanNode {
  PlanOp op = PlanOp::kAct;
  std::optional<Directive> action;  // kAct
  std::optional<Term> condition;    // kDoWhen
  std::vector<PlanNode> children;

  static PlanNode act(Directive d);
  static PlanNode act(std::string_view directive) { return act(Directive::parse(directive)); }
  static PlanNode seq(std::vector<PlanNode> steps);
  static PlanNode par(std::vector<PlanNode> branches);
  static PlanNode do_when(Term condition, PlanNode body);

  std::string to_string() const;
};

PlanNode substitute(const PlanNode& plan, const Substitution& bindings);

}  // namespace hybridrt::agent
