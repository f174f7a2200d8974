#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

// Core term language: pure expressions, permissions, symbolic heaps,
// assertions, predicate definitions, function specs and synthesis goals.
// All values here are immutable after construction and freely shared.

namespace bossl {

enum class Sort { Loc, Int, Bool, Set, Perm };

std::string sortName(Sort s);

// ---------------------------------------------------------------------------
// Permissions

struct Permission {
  enum class Kind { Mut, Imm, Var };
  Kind kind = Kind::Mut;
  std::string name;  // borrow variable name when kind == Var

  static Permission mut() { return {Kind::Mut, {}}; }
  static Permission imm() { return {Kind::Imm, {}}; }
  static Permission var(std::string n) { return {Kind::Var, std::move(n)}; }

  bool isMut() const { return kind == Kind::Mut; }
  bool isImm() const { return kind == Kind::Imm; }
  bool isVar() const { return kind == Kind::Var; }

  bool operator==(const Permission& o) const {
    return kind == o.kind && name == o.name;
  }
  bool operator!=(const Permission& o) const { return !(*this == o); }
};

std::string show(const Permission& p);

// ---------------------------------------------------------------------------
// Pure expressions

enum class Op { Add, Sub, Eq, Le, Lt, And, Or, Union };

std::string opSymbol(Op op);

class Expr;
using ExprP = std::shared_ptr<const Expr>;

class Expr {
 public:
  enum class Tag { IntConst, BoolConst, Var, PermConst, SetLit, BinOp, Not };

  Tag tag;
  Sort sort;
  long num = 0;            // IntConst
  bool bval = false;       // BoolConst
  std::string name;        // Var
  Permission perm;         // PermConst (Mut or Imm)
  Op op = Op::Add;         // BinOp
  std::vector<ExprP> kids; // SetLit elements, BinOp operands, Not operand

  static ExprP intConst(long v);
  static ExprP boolConst(bool b);
  static ExprP var(std::string n, Sort s);
  static ExprP permConst(Permission p);
  static ExprP setLit(std::vector<ExprP> elems);
  static ExprP binOp(Op op, ExprP l, ExprP r);
  static ExprP negation(ExprP e);

  bool isVar() const { return tag == Tag::Var; }
  bool isConst() const {
    return tag == Tag::IntConst || tag == Tag::BoolConst || tag == Tag::PermConst;
  }
};

ExprP exprTrue();
ExprP exprFalse();

bool exprEq(const ExprP& a, const ExprP& b);
int exprCmp(const ExprP& a, const ExprP& b);  // total order for canonical sorting
std::string show(const ExprP& e);

// Permission <-> expression embedding (permission-sorted terms).
ExprP permToExpr(const Permission& p);
std::optional<Permission> exprToPerm(const ExprP& e);

// ---------------------------------------------------------------------------
// Symbolic heaps

struct PointsTo {
  ExprP base;       // loc-sorted
  int offset = 0;   // non-negative
  ExprP value;
  Permission perm;
};

struct Block {
  ExprP base;
  int size = 1;     // positive
  Permission perm;
};

struct PredApp {
  std::string name;
  std::vector<ExprP> args;
  std::vector<Permission> permArgs;
  // Unfold counter used by the search to bound Open/Close and gate recursive
  // calls; not part of structural identity.
  int tag = 0;
};

using Heaplet = std::variant<PointsTo, Block, PredApp>;

bool heapletEq(const Heaplet& a, const Heaplet& b);   // ignores PredApp tags
int heapletCmp(const Heaplet& a, const Heaplet& b);   // canonical order
std::string show(const Heaplet& h);

struct Assertion {
  ExprP pure;                    // bool-sorted
  std::vector<Heaplet> spatial;  // kept canonically sorted

  void normalizeOrder();
};

std::string show(const Assertion& a);

// Conjunction helpers.
std::vector<ExprP> conjuncts(const ExprP& e);
ExprP mkConj(std::vector<ExprP> cs);

// ---------------------------------------------------------------------------
// Context entries

struct Clause {
  ExprP selector;
  ExprP pure;
  std::vector<Heaplet> spatial;
};

struct PredicateDef {
  std::string name;
  std::vector<std::pair<std::string, Sort>> params;
  std::vector<std::string> permParams;
  std::vector<Clause> clauses;
};

struct FunctionSpec {
  std::string name;
  std::vector<std::pair<std::string, Sort>> formals;
  Assertion pre, post;
};

struct SynthGoal {
  std::string name;
  std::vector<std::pair<std::string, Sort>> formals;
  Assertion pre, post;
};

struct SpecFile {
  std::vector<PredicateDef> predicates;
  std::vector<FunctionSpec> functions;
  SynthGoal goal;

  const PredicateDef* findPred(const std::string& n) const;
};

// ---------------------------------------------------------------------------
// Variables and substitution

using VarSet = std::set<std::string>;

void collectVars(const ExprP& e, std::map<std::string, Sort>& out);
void collectVars(const Heaplet& h, std::map<std::string, Sort>& out);
void collectVars(const Assertion& a, std::map<std::string, Sort>& out);

VarSet freeVars(const ExprP& e);
VarSet freeVars(const Heaplet& h);
VarSet freeVars(const Assertion& a);

// Existential variables of a goal: vars(post) \ (formals u vars(pre)).
VarSet existentials(const SynthGoal& g);

class Substitution {
 public:
  Substitution() = default;

  // image must be sort-correct for the variable; domain may not contain
  // Mut/Imm constants (only variables).
  void bind(const std::string& var, ExprP image);
  void bindPerm(const std::string& var, const Permission& p);

  bool contains(const std::string& var) const { return map_.count(var) != 0; }
  ExprP lookup(const std::string& var) const;
  bool empty() const { return map_.empty(); }
  size_t size() const { return map_.size(); }
  const std::map<std::string, ExprP>& entries() const { return map_; }

  // Right-composition: (this then later). Ranges of the result contain no
  // domain variables of `later`, keeping application single-pass.
  Substitution composeWith(const Substitution& later) const;

  std::string show() const;
  bool operator==(const Substitution& o) const;

 private:
  std::map<std::string, ExprP> map_;
};

ExprP applySubst(const Substitution& s, const ExprP& e);
Permission applySubst(const Substitution& s, const Permission& p);
Heaplet applySubst(const Substitution& s, const Heaplet& h);
Assertion applySubst(const Substitution& s, const Assertion& a);

// ---------------------------------------------------------------------------
// Well-formedness

struct WfViolation {
  std::string where;
  std::string message;
};

using WfReport = std::vector<WfViolation>;

// Every permission variable in every clause must be bound by the predicate's
// permission parameters.
WfReport checkPredWellFormed(const PredicateDef& d);

// No existential permission variables: every borrow variable in the post
// must also occur in the pre (or among formals).
WfReport checkSpecWellFormed(const std::string& name,
                             const std::vector<std::pair<std::string, Sort>>& formals,
                             const Assertion& pre, const Assertion& post);
WfReport checkSpecWellFormed(const FunctionSpec& f);
WfReport checkSpecWellFormed(const SynthGoal& g);

}  // namespace bossl
