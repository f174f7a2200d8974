#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "bossl/ast.hpp"

// First-order matching of a pattern symbolic heap (carrying existentials,
// including borrow variables) against a target heap. Value-side unification
// is matching only: existentials bind to target terms, never the reverse.

namespace bossl {

struct UnifTask {
  std::vector<Heaplet> target;   // from the precondition
  std::vector<Heaplet> pattern;  // from the postcondition or a callee pre
  VarSet existentials;
};

// Candidate-pair ordering strategies (id 0-5). ReadOnlyFirst is the default:
// borrow/imm-annotated target heaplets first, then by kind cost
// block < points-to < predicate.
enum class UnifOrder {
  ReadOnlyFirst = 0,
  SmallestFirst = 1,
  LargestFirst = 2,
  PredNameAsc = 3,
  PredNameDesc = 4,
  KindCost = 5,
};

constexpr int kNumUnifOrders = 6;

UnifOrder unifOrderFromId(int id);  // throws on ids outside 0-5

// Permission compatibility for one (target, pattern) annotation pair.
// Returns the binding to extend with, or nullopt when the pair cannot match
// (notably a literal Mut pattern against a borrow target).
std::optional<Substitution> permCompatible(const Permission& target,
                                           const Permission& pattern,
                                           const VarSet& existentials,
                                           const Substitution& sofar);

// Matches a single pattern heaplet against a single target heaplet,
// extending `sofar`. Kinds, offsets, sizes and predicate names must agree.
std::optional<Substitution> matchHeaplet(const Heaplet& target,
                                         const Heaplet& pattern,
                                         const VarSet& existentials,
                                         const Substitution& sofar);

// Matching for pure atoms of identical shape (used for binding existentials
// from pure equalities).
std::optional<Substitution> matchExpr(const ExprP& target, const ExprP& pattern,
                                      const VarSet& existentials,
                                      const Substitution& sofar);

// Deterministic ordering of candidate (target, pattern) pairs under a
// strategy; ties broken by canonical heaplet order.
struct CandidatePair {
  size_t targetIdx;
  size_t patternIdx;
};

std::vector<CandidatePair> rankCandidates(const std::vector<Heaplet>& target,
                                          const std::vector<Heaplet>& pattern,
                                          const std::vector<CandidatePair>& pairs,
                                          UnifOrder strategy);

// Lazy, duplicate-free, deterministically ordered stream of substitutions
// embedding the whole pattern into the target (injective heaplet pairing).
class UnifStream {
 public:
  UnifStream(UnifTask task, UnifOrder order);

  std::optional<Substitution> next();
  std::vector<Substitution> drain(size_t limit = SIZE_MAX);

 private:
  void search(size_t patIdx, std::vector<bool>& used, const Substitution& sofar);

  UnifTask task_;
  UnifOrder order_;
  std::vector<Substitution> results_;  // deduped, in discovery order
  size_t cursor_ = 0;
  bool exhausted_ = false;
};

std::vector<Substitution> unify(const UnifTask& task,
                                UnifOrder order = UnifOrder::ReadOnlyFirst);

}  // namespace bossl
