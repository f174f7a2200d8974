#pragma once

#include <memory>
#include <string>
#include <vector>

#include "bossl/ast.hpp"

// Imperative C-like AST produced by synthesis, its concrete-syntax printer
// and the AST-size metric used by the benchmark harness.

namespace bossl {

class Statement;
using StmtP = std::shared_ptr<const Statement>;

class Statement {
 public:
  enum class Tag { Load, Store, Malloc, Free, Call, If, Seq, Skip, Error };

  Tag tag = Tag::Skip;
  std::string dst;           // Load, Malloc binder
  std::string base;          // Load, Store base variable; Free operand
  int offset = 0;            // Load, Store
  int size = 0;              // Malloc
  ExprP expr;                // Store value, If condition
  std::string callee;        // Call
  std::vector<ExprP> args;   // Call
  std::vector<StmtP> kids;   // If branches (then, else), Seq children

  static StmtP load(std::string dst, std::string base, int offset);
  static StmtP store(std::string base, int offset, ExprP value);
  static StmtP mallocStmt(std::string dst, int n);
  static StmtP freeStmt(std::string var);
  static StmtP call(std::string callee, std::vector<ExprP> args);
  static StmtP ifStmt(ExprP cond, StmtP thenB, StmtP elseB);
  static StmtP seq(std::vector<StmtP> stmts);  // flattens, drops skips
  static StmtP skip();
  static StmtP error();
};

struct Procedure {
  std::string name;
  std::vector<std::pair<std::string, Sort>> formals;
  StmtP body;
};

// Fig.-1 style concrete syntax; offset 0 prints without "+ 0".
std::string printProgram(const Procedure& p);
std::string printStatement(const StmtP& s, int indent = 0);
std::string printCExpr(const ExprP& e);

// Node count: every statement node 1 (Seq itself 0, Skip 0), every expression
// node 1 (a load/malloc binder counts as one node), one per formal.
int astSize(const StmtP& s);
int astSize(const Procedure& p);

// Structural comparison, used to detect AST fluctuation across perturbations.
bool stmtEq(const StmtP& a, const StmtP& b);

}  // namespace bossl
