#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bossl/solver.hpp"

// External prover escape hatch. When BOSSL_SMT names a command, formulas the
// built-in procedure cannot decide are shipped to it as SMT-LIB2 text on
// stdin (logic QF_LIA; permissions as 0/1 integers). Set-typed queries are
// not delegated: their bounded emulation would weaken unsat answers.

namespace bossl {
namespace {

bool translateExpr(const ExprP& e, std::ostringstream& os) {
  switch (e->tag) {
    case Expr::Tag::IntConst:
      if (e->num < 0)
        os << "(- " << -e->num << ")";
      else
        os << e->num;
      return true;
    case Expr::Tag::BoolConst:
      os << (e->bval ? "true" : "false");
      return true;
    case Expr::Tag::Var:
      os << "v_" << e->name;
      return true;
    case Expr::Tag::PermConst:
      os << (e->perm.isMut() ? 0 : 1);
      return true;
    case Expr::Tag::SetLit:
      return false;
    case Expr::Tag::Not: {
      os << "(not ";
      if (!translateExpr(e->kids[0], os)) return false;
      os << ")";
      return true;
    }
    case Expr::Tag::BinOp: {
      const char* op = nullptr;
      switch (e->op) {
        case Op::Add: op = "+"; break;
        case Op::Sub: op = "-"; break;
        case Op::Eq: op = "="; break;
        case Op::Le: op = "<="; break;
        case Op::Lt: op = "<"; break;
        case Op::And: op = "and"; break;
        case Op::Or: op = "or"; break;
        case Op::Union: return false;
      }
      os << "(" << op << " ";
      if (!translateExpr(e->kids[0], os)) return false;
      os << " ";
      if (!translateExpr(e->kids[1], os)) return false;
      os << ")";
      return true;
    }
  }
  return false;
}

}  // namespace

Validity Solver::decideByExternal(const ExprP& f) {
  std::map<std::string, Sort> vars;
  collectVars(f, vars);
  for (const auto& [v, s] : vars)
    if (s == Sort::Set) return Validity::Unknown;

  std::ostringstream body;
  if (!translateExpr(f, body)) return Validity::Unknown;

  std::ostringstream q;
  q << "(set-logic QF_LIA)\n";
  for (const auto& [v, s] : vars) {
    if (s == Sort::Bool)
      q << "(declare-const v_" << v << " Bool)\n";
    else
      q << "(declare-const v_" << v << " Int)\n";
    if (s == Sort::Perm)
      q << "(assert (and (<= 0 v_" << v << ") (<= v_" << v << " 1)))\n";
  }
  q << "(assert " << body.str() << ")\n(check-sat)\n";

  std::string tmp = "/tmp/bossl_smt_query.smt2";
  {
    std::ofstream out(tmp);
    if (!out) return Validity::Unknown;
    out << q.str();
  }
  ++counters_.externalCalls;
  std::string cmd = externalCmd_ + " < " + tmp + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return Validity::Unknown;
  char buf[256];
  std::string answer;
  while (fgets(buf, sizeof buf, pipe)) answer += buf;
  pclose(pipe);
  if (answer.find("unsat") != std::string::npos) return Validity::Valid;
  if (answer.find("sat") != std::string::npos) return Validity::Invalid;
  return Validity::Unknown;
}

}  // namespace bossl
