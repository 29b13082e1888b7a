#pragma once

#include <set>
#include <vector>

#include "hybridrt/agent/term.hpp"

namespace hybridrt::agent {

/// Set of ground atoms. Query results come back in insertion order.
class BeliefStore {
 public:
  /// Returns false if the atom was already believed. NonGroundAssert for
  /// atoms containing variables.
  bool add(const Term& atom);
  /// Removes every atom matching the pattern; returns how many.
  std::size_t retract(const Term& pattern);

  std::vector<Substitution> query(const Term& pattern) const;
  bool holds(const Term& pattern) const;
  bool contains(const Term& atom) const { return index_.count(atom) > 0; }

  std::size_t size() const { return atoms_.size(); }
  const std::vector<Term>& atoms() const { return atoms_; }
  void clear();

 private:
  std::vector<Term> atoms_;
  std::set<Term> index_;
};

}  // namespace hybridrt::agent
