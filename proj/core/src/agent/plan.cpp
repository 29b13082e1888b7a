#include "hybridrt/agent/plan.hpp"

#include "hybridrt/error.hpp"

namespace hybridrt::agent {

Directive Directive::from_term(const Term& t) {
  if (t.is_variable()) fail(Errc::kInvalidArgument, "directive cannot be a variable");
  return Directive{t.text(), t.args()};
}

PlanNode PlanNode::act(Directive d) {
  PlanNode n;
  n.op = PlanOp::kAct;
  n.action = std::move(d);
  return n;
}

PlanNode PlanNode::seq(std::vector<PlanNode> steps) {
  PlanNode n;
  n.op = PlanOp::kSeq;
  n.children = std::move(steps);
  return n;
}

PlanNode PlanNode::par(std::vector<PlanNode> branches) {
  PlanNode n;
  n.op = PlanOp::kPar;
  n.children = std::move(branches);
  return n;
}

PlanNode PlanNode::do_when(Term condition, PlanNode body) {
  PlanNode n;
  n.op = PlanOp::kDoWhen;
  n.condition = std::move(condition);
  n.children.push_back(std::move(body));
  return n;
}

std::string PlanNode::to_string() const {
  auto join = [this](const char* name) {
    std::string out = name;
    out += '(';
    for (std::size_t i = 0; i < children.size(); ++i) {
      if (i) out += ", ";
      out += children[i].to_string();
    }
    return out + ')';
  };
  switch (op) {
    case PlanOp::kAct: return action->to_string();
    case PlanOp::kSeq: return join("SEQ");
    case PlanOp::kPar: return join("PAR");
    case PlanOp::kDoWhen:
      return "DO(" + children.front().to_string() + ") WHEN " + condition->to_string();
  }
  return {};
}

PlanNode substitute(const PlanNode& plan, const Substitution& bindings) {
  PlanNode out = plan;
  if (out.action) {
    for (auto& a : out.action->args) a = substitute(a, bindings);
  }
  if (out.condition) out.condition = substitute(*out.condition, bindings);
  for (auto& c : out.children) c = substitute(c, bindings);
  return out;
}

}  // namespace hybridrt::agent
