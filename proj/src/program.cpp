#include "bossl/program.hpp"

#include <sstream>

namespace bossl {

StmtP Statement::load(std::string dst, std::string base, int offset) {
  auto s = std::make_shared<Statement>();
  s->tag = Tag::Load;
  s->dst = std::move(dst);
  s->base = std::move(base);
  s->offset = offset;
  return s;
}

StmtP Statement::store(std::string base, int offset, ExprP value) {
  auto s = std::make_shared<Statement>();
  s->tag = Tag::Store;
  s->base = std::move(base);
  s->offset = offset;
  s->expr = std::move(value);
  return s;
}

StmtP Statement::mallocStmt(std::string dst, int n) {
  auto s = std::make_shared<Statement>();
  s->tag = Tag::Malloc;
  s->dst = std::move(dst);
  s->size = n;
  return s;
}

StmtP Statement::freeStmt(std::string var) {
  auto s = std::make_shared<Statement>();
  s->tag = Tag::Free;
  s->base = std::move(var);
  return s;
}

StmtP Statement::call(std::string callee, std::vector<ExprP> args) {
  auto s = std::make_shared<Statement>();
  s->tag = Tag::Call;
  s->callee = std::move(callee);
  s->args = std::move(args);
  return s;
}

StmtP Statement::ifStmt(ExprP cond, StmtP thenB, StmtP elseB) {
  auto s = std::make_shared<Statement>();
  s->tag = Tag::If;
  s->expr = std::move(cond);
  s->kids = {std::move(thenB), std::move(elseB)};
  return s;
}

StmtP Statement::seq(std::vector<StmtP> stmts) {
  std::vector<StmtP> flat;
  for (auto& st : stmts) {
    if (!st || st->tag == Tag::Skip) continue;
    if (st->tag == Tag::Seq) {
      for (auto& k : st->kids) flat.push_back(k);
    } else {
      flat.push_back(st);
    }
  }
  if (flat.empty()) return skip();
  if (flat.size() == 1) return flat[0];
  auto s = std::make_shared<Statement>();
  s->tag = Tag::Seq;
  s->kids = std::move(flat);
  return s;
}

StmtP Statement::skip() {
  static const StmtP s = [] {
    auto p = std::make_shared<Statement>();
    p->tag = Tag::Skip;
    return StmtP(p);
  }();
  return s;
}

StmtP Statement::error() {
  auto s = std::make_shared<Statement>();
  s->tag = Tag::Error;
  return s;
}

// ---------------------------------------------------------------------------
// Printing

std::string printCExpr(const ExprP& e) {
  switch (e->tag) {
    case Expr::Tag::IntConst: return std::to_string(e->num);
    case Expr::Tag::BoolConst: return e->bval ? "true" : "false";
    case Expr::Tag::Var: return e->name;
    case Expr::Tag::Not: return "!(" + printCExpr(e->kids[0]) + ")";
    case Expr::Tag::BinOp: {
      std::string op;
      switch (e->op) {
        case Op::Add: op = "+"; break;
        case Op::Sub: op = "-"; break;
        case Op::Eq: op = "=="; break;
        case Op::Le: op = "<="; break;
        case Op::Lt: op = "<"; break;
        case Op::And: op = "&&"; break;
        case Op::Or: op = "||"; break;
        case Op::Union: op = "++"; break;
      }
      return "(" + printCExpr(e->kids[0]) + " " + op + " " +
             printCExpr(e->kids[1]) + ")";
    }
    default: return "0";
  }
}

static std::string deref(const std::string& base, int offset) {
  if (offset == 0) return "*" + base;
  return "*(" + base + " + " + std::to_string(offset) + ")";
}

static void printInto(std::ostringstream& os, const StmtP& s, int indent) {
  std::string pad(static_cast<size_t>(indent) * 2, ' ');
  switch (s->tag) {
    case Statement::Tag::Skip:
      break;
    case Statement::Tag::Error:
      os << pad << "err;\n";
      break;
    case Statement::Tag::Load:
      os << pad << "let " << s->dst << " = " << deref(s->base, s->offset)
         << ";\n";
      break;
    case Statement::Tag::Store:
      os << pad << deref(s->base, s->offset) << " = " << printCExpr(s->expr)
         << ";\n";
      break;
    case Statement::Tag::Malloc:
      os << pad << "let " << s->dst << " = malloc(" << s->size << ");\n";
      break;
    case Statement::Tag::Free:
      os << pad << "free(" << s->base << ");\n";
      break;
    case Statement::Tag::Call: {
      os << pad << s->callee << "(";
      for (size_t i = 0; i < s->args.size(); ++i) {
        if (i) os << ", ";
        os << printCExpr(s->args[i]);
      }
      os << ");\n";
      break;
    }
    case Statement::Tag::If: {
      // strip the outer parentheses printCExpr puts on binops
      std::string cond = printCExpr(s->expr);
      if (cond.size() >= 2 && cond.front() == '(' && cond.back() == ')')
        cond = cond.substr(1, cond.size() - 2);
      os << pad << "if (" << cond << ") {\n";
      printInto(os, s->kids[0], indent + 1);
      os << pad << "} else {\n";
      printInto(os, s->kids[1], indent + 1);
      os << pad << "}\n";
      break;
    }
    case Statement::Tag::Seq:
      for (const auto& k : s->kids) printInto(os, k, indent);
      break;
  }
}

std::string printStatement(const StmtP& s, int indent) {
  std::ostringstream os;
  printInto(os, s, indent);
  return os.str();
}

std::string printProgram(const Procedure& p) {
  std::ostringstream os;
  os << "void " << p.name << " (";
  for (size_t i = 0; i < p.formals.size(); ++i) {
    if (i) os << ", ";
    os << sortName(p.formals[i].second) << " " << p.formals[i].first;
  }
  os << ") {\n";
  printInto(os, p.body, 1);
  os << "}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// AST size

static int exprSize(const ExprP& e) {
  int n = 1;
  for (const auto& k : e->kids) n += exprSize(k);
  return n;
}

int astSize(const StmtP& s) {
  switch (s->tag) {
    case Statement::Tag::Skip: return 0;
    case Statement::Tag::Error: return 1;
    case Statement::Tag::Load:
      // statement + binder + base (+ offset literal when present)
      return 1 + 1 + 1 + (s->offset != 0 ? 1 : 0);
    case Statement::Tag::Store:
      return 1 + 1 + (s->offset != 0 ? 1 : 0) + exprSize(s->expr);
    case Statement::Tag::Malloc: return 1 + 1 + 1;
    case Statement::Tag::Free: return 1 + 1;
    case Statement::Tag::Call: {
      int n = 1;
      for (const auto& a : s->args) n += exprSize(a);
      return n;
    }
    case Statement::Tag::If:
      return 1 + exprSize(s->expr) + astSize(s->kids[0]) + astSize(s->kids[1]);
    case Statement::Tag::Seq: {
      int n = 0;
      for (const auto& k : s->kids) n += astSize(k);
      return n;
    }
  }
  return 0;
}

int astSize(const Procedure& p) {
  return static_cast<int>(p.formals.size()) + astSize(p.body);
}

bool stmtEq(const StmtP& a, const StmtP& b) {
  if (a->tag != b->tag) return false;
  switch (a->tag) {
    case Statement::Tag::Skip:
    case Statement::Tag::Error:
      return true;
    case Statement::Tag::Load:
      return a->dst == b->dst && a->base == b->base && a->offset == b->offset;
    case Statement::Tag::Store:
      return a->base == b->base && a->offset == b->offset &&
             exprEq(a->expr, b->expr);
    case Statement::Tag::Malloc:
      return a->dst == b->dst && a->size == b->size;
    case Statement::Tag::Free:
      return a->base == b->base;
    case Statement::Tag::Call: {
      if (a->callee != b->callee || a->args.size() != b->args.size())
        return false;
      for (size_t i = 0; i < a->args.size(); ++i)
        if (!exprEq(a->args[i], b->args[i])) return false;
      return true;
    }
    case Statement::Tag::If:
      if (!exprEq(a->expr, b->expr)) return false;
      return stmtEq(a->kids[0], b->kids[0]) && stmtEq(a->kids[1], b->kids[1]);
    case Statement::Tag::Seq: {
      if (a->kids.size() != b->kids.size()) return false;
      for (size_t i = 0; i < a->kids.size(); ++i)
        if (!stmtEq(a->kids[i], b->kids[i])) return false;
      return true;
    }
  }
  return false;
}

}  // namespace bossl
