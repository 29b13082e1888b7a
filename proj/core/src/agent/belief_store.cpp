#include "hybridrt/agent/belief_store.hpp"

#include <algorithm>

#include "hybridrt/error.hpp"

namespace hybridrt::agent {

namespace {
bool is_true(const Term& t) { return t.is_constant() && t.text() == "true"; }
}  // namespace

bool BeliefStore::add(const Term& atom) {
  if (!atom.is_ground()) fail(Errc::kNonGroundAssert, atom.to_string());
  if (!index_.insert(atom).second) return false;
  atoms_.push_back(atom);
  return true;
}

std::size_t BeliefStore::retract(const Term& pattern) {
  std::size_t removed = 0;
  auto it = std::remove_if(atoms_.begin(), atoms_.end(), [&](const Term& a) {
    Substitution s;
    if (!match(pattern, a, s)) return false;
    index_.erase(a);
    ++removed;
    return true;
  });
  atoms_.erase(it, atoms_.end());
  return removed;
}

std::vector<Substitution> BeliefStore::query(const Term& pattern) const {
  if (is_true(pattern)) return {Substitution{}};
  std::vector<Substitution> out;
  if (pattern.is_ground()) {
    if (index_.count(pattern)) out.emplace_back();
    return out;
  }
  for (const auto& a : atoms_) {
    Substitution s;
    if (match(pattern, a, s)) out.push_back(std::move(s));
  }
  return out;
}

bool BeliefStore::holds(const Term& pattern) const {
  if (is_true(pattern)) return true;
  if (pattern.is_ground()) return index_.count(pattern) > 0;
  for (const auto& a : atoms_) {
    Substitution s;
    if (match(pattern, a, s)) return true;
  }
  return false;
}

void BeliefStore::clear() {
  atoms_.clear();
  index_.clear();
}

}  // namespace hybridrt::agent
