#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bossl/ast.hpp"

// Validity of pure implications over booleans, linear integer arithmetic
// (unit coefficients), finite sets, locations and permission equalities.
// Refutation-based: H => C is checked by deciding H && !C. Unsat answers are
// proof-backed; Sat answers are backed by an explicit verified model, so a
// Valid/Invalid verdict is never a guess. Everything else is Unknown, which
// the synthesis engine treats as Invalid.

namespace bossl {

enum class Validity { Valid, Invalid, Unknown };

struct EntailmentQuery {
  ExprP hypothesis;
  ExprP conclusion;
};

// Concrete value for model evaluation.
struct PValue {
  Sort sort = Sort::Int;
  long num = 0;
  bool b = false;
  std::set<long> elems;
  Permission perm = Permission::mut();

  static PValue ofInt(long v, Sort s = Sort::Int) {
    PValue x; x.sort = s; x.num = v; return x;
  }
  static PValue ofBool(bool v) { PValue x; x.sort = Sort::Bool; x.b = v; return x; }
  static PValue ofSet(std::set<long> v) {
    PValue x; x.sort = Sort::Set; x.elems = std::move(v); return x;
  }
  static PValue ofPerm(Permission p) {
    PValue x; x.sort = Sort::Perm; x.perm = std::move(p); return x;
  }

  bool operator==(const PValue& o) const;
};

using Valuation = std::map<std::string, PValue>;

// Evaluates a closed-under-valuation expression; throws on unbound variables.
PValue evalExpr(const Valuation& env, const ExprP& e);

class Solver {
 public:
  Solver();

  Validity valid(const EntailmentQuery& q);
  Validity valid(const ExprP& hypothesis, const ExprP& conclusion) {
    return valid(EntailmentQuery{hypothesis, conclusion});
  }

  // True iff the formula admits no model (per the built-in procedure).
  bool unsatisfiable(const ExprP& formula);

  // Per-query counters for the stats surface.
  struct Counters {
    long queries = 0;
    long unknowns = 0;
    long externalCalls = 0;
    long totalMicros = 0;
  };
  const Counters& counters() const { return counters_; }

 private:
  Validity decideByExternal(const ExprP& f);
  Counters counters_;
  bool externalEnabled_ = false;
  std::string externalCmd_;
};

// Logically equivalent simplification: constant folding, unit/duplicate
// conjunct removal, contradiction detection (returns literal false).
ExprP simplify(const ExprP& e);

// Oriented equalities var = term (var not free in term) extracted from the
// conjuncts of a formula; drives SubstLeft-style normalization.
std::vector<std::pair<std::string, ExprP>> extractEqualities(const ExprP& e);

}  // namespace bossl
