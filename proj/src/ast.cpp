#include "bossl/ast.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>
#include <stdexcept>

namespace bossl {

std::string sortName(Sort s) {
  switch (s) {
    case Sort::Loc: return "loc";
    case Sort::Int: return "int";
    case Sort::Bool: return "bool";
    case Sort::Set: return "set";
    case Sort::Perm: return "perm";
  }
  return "?";
}

std::string show(const Permission& p) {
  switch (p.kind) {
    case Permission::Kind::Mut: return "mut";
    case Permission::Kind::Imm: return "imm";
    case Permission::Kind::Var: return p.name;
  }
  return "?";
}

std::string opSymbol(Op op) {
  switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Eq: return "==";
    case Op::Le: return "<=";
    case Op::Lt: return "<";
    case Op::And: return "and";
    case Op::Or: return "or";
    case Op::Union: return "++";
  }
  return "?";
}

static Sort opResultSort(Op op, const ExprP& l) {
  switch (op) {
    case Op::Add:
    case Op::Sub: return l->sort;
    case Op::Union: return Sort::Set;
    default: return Sort::Bool;
  }
}

ExprP Expr::intConst(long v) {
  auto e = std::make_shared<Expr>();
  e->tag = Tag::IntConst;
  e->sort = Sort::Int;
  e->num = v;
  return e;
}

ExprP Expr::boolConst(bool b) {
  auto e = std::make_shared<Expr>();
  e->tag = Tag::BoolConst;
  e->sort = Sort::Bool;
  e->bval = b;
  return e;
}

ExprP Expr::var(std::string n, Sort s) {
  auto e = std::make_shared<Expr>();
  e->tag = Tag::Var;
  e->sort = s;
  e->name = std::move(n);
  return e;
}

ExprP Expr::permConst(Permission p) {
  assert(!p.isVar());
  auto e = std::make_shared<Expr>();
  e->tag = Tag::PermConst;
  e->sort = Sort::Perm;
  e->perm = std::move(p);
  return e;
}

ExprP Expr::setLit(std::vector<ExprP> elems) {
  auto e = std::make_shared<Expr>();
  e->tag = Tag::SetLit;
  e->sort = Sort::Set;
  e->kids = std::move(elems);
  return e;
}

ExprP Expr::binOp(Op op, ExprP l, ExprP r) {
  auto e = std::make_shared<Expr>();
  e->tag = Tag::BinOp;
  e->sort = opResultSort(op, l);
  e->op = op;
  e->kids = {std::move(l), std::move(r)};
  return e;
}

ExprP Expr::negation(ExprP x) {
  auto e = std::make_shared<Expr>();
  e->tag = Tag::Not;
  e->sort = Sort::Bool;
  e->kids = {std::move(x)};
  return e;
}

ExprP exprTrue() {
  static const ExprP t = Expr::boolConst(true);
  return t;
}

ExprP exprFalse() {
  static const ExprP f = Expr::boolConst(false);
  return f;
}

ExprP permToExpr(const Permission& p) {
  if (p.isVar()) return Expr::var(p.name, Sort::Perm);
  return Expr::permConst(p);
}

std::optional<Permission> exprToPerm(const ExprP& e) {
  if (e->tag == Expr::Tag::PermConst) return e->perm;
  if (e->tag == Expr::Tag::Var && e->sort == Sort::Perm)
    return Permission::var(e->name);
  return std::nullopt;
}

int exprCmp(const ExprP& a, const ExprP& b) {
  if (a.get() == b.get()) return 0;
  if (a->tag != b->tag) return a->tag < b->tag ? -1 : 1;
  switch (a->tag) {
    case Expr::Tag::IntConst:
      return a->num == b->num ? 0 : (a->num < b->num ? -1 : 1);
    case Expr::Tag::BoolConst:
      return a->bval == b->bval ? 0 : (a->bval < b->bval ? -1 : 1);
    case Expr::Tag::Var:
      return a->name.compare(b->name);
    case Expr::Tag::PermConst: {
      auto ka = static_cast<int>(a->perm.kind), kb = static_cast<int>(b->perm.kind);
      return ka == kb ? 0 : (ka < kb ? -1 : 1);
    }
    case Expr::Tag::BinOp:
      if (a->op != b->op) return a->op < b->op ? -1 : 1;
      [[fallthrough]];
    case Expr::Tag::SetLit:
    case Expr::Tag::Not: {
      if (a->kids.size() != b->kids.size())
        return a->kids.size() < b->kids.size() ? -1 : 1;
      for (size_t i = 0; i < a->kids.size(); ++i)
        if (int c = exprCmp(a->kids[i], b->kids[i])) return c;
      return 0;
    }
  }
  return 0;
}

bool exprEq(const ExprP& a, const ExprP& b) { return exprCmp(a, b) == 0; }

std::string show(const ExprP& e) {
  switch (e->tag) {
    case Expr::Tag::IntConst: return std::to_string(e->num);
    case Expr::Tag::BoolConst: return e->bval ? "true" : "false";
    case Expr::Tag::Var: return e->name;
    case Expr::Tag::PermConst: return show(e->perm);
    case Expr::Tag::SetLit: {
      std::string s = "{";
      for (size_t i = 0; i < e->kids.size(); ++i) {
        if (i) s += ", ";
        s += show(e->kids[i]);
      }
      return s + "}";
    }
    case Expr::Tag::BinOp:
      return "(" + show(e->kids[0]) + " " + opSymbol(e->op) + " " +
             show(e->kids[1]) + ")";
    case Expr::Tag::Not:
      return "not " + show(e->kids[0]);
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Heaplets

static int kindRank(const Heaplet& h) {
  if (std::holds_alternative<Block>(h)) return 0;
  if (std::holds_alternative<PointsTo>(h)) return 1;
  return 2;
}

bool heapletEq(const Heaplet& a, const Heaplet& b) {
  return heapletCmp(a, b) == 0;
}

static int permCmp(const Permission& a, const Permission& b) {
  if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
  return a.name.compare(b.name);
}

int heapletCmp(const Heaplet& a, const Heaplet& b) {
  int ra = kindRank(a), rb = kindRank(b);
  if (ra != rb) return ra < rb ? -1 : 1;
  if (const auto* pa = std::get_if<PointsTo>(&a)) {
    const auto& pb = std::get<PointsTo>(b);
    if (int c = exprCmp(pa->base, pb.base)) return c;
    if (pa->offset != pb.offset) return pa->offset < pb.offset ? -1 : 1;
    if (int c = exprCmp(pa->value, pb.value)) return c;
    return permCmp(pa->perm, pb.perm);
  }
  if (const auto* ba = std::get_if<Block>(&a)) {
    const auto& bb = std::get<Block>(b);
    if (int c = exprCmp(ba->base, bb.base)) return c;
    if (ba->size != bb.size) return ba->size < bb.size ? -1 : 1;
    return permCmp(ba->perm, bb.perm);
  }
  const auto& qa = std::get<PredApp>(a);
  const auto& qb = std::get<PredApp>(b);
  if (int c = qa.name.compare(qb.name)) return c;
  if (qa.args.size() != qb.args.size())
    return qa.args.size() < qb.args.size() ? -1 : 1;
  for (size_t i = 0; i < qa.args.size(); ++i)
    if (int c = exprCmp(qa.args[i], qb.args[i])) return c;
  if (qa.permArgs.size() != qb.permArgs.size())
    return qa.permArgs.size() < qb.permArgs.size() ? -1 : 1;
  for (size_t i = 0; i < qa.permArgs.size(); ++i)
    if (int c = permCmp(qa.permArgs[i], qb.permArgs[i])) return c;
  return 0;
}

std::string show(const Heaplet& h) {
  std::ostringstream os;
  if (const auto* p = std::get_if<PointsTo>(&h)) {
    if (p->offset == 0)
      os << show(p->base);
    else
      os << "(" << show(p->base) << "+" << p->offset << ")";
    os << " :-> " << show(p->value);
    if (!p->perm.isMut()) os << " <" << show(p->perm) << ">";
  } else if (const auto* b = std::get_if<Block>(&h)) {
    os << "[" << show(b->base) << "," << b->size << "]";
    if (!b->perm.isMut()) os << "<" << show(b->perm) << ">";
  } else {
    const auto& q = std::get<PredApp>(h);
    os << q.name << "(";
    for (size_t i = 0; i < q.args.size(); ++i) {
      if (i) os << ", ";
      os << show(q.args[i]);
    }
    os << ")";
    if (!q.permArgs.empty()) {
      os << "<";
      for (size_t i = 0; i < q.permArgs.size(); ++i) {
        if (i) os << ", ";
        os << show(q.permArgs[i]);
      }
      os << ">";
    }
  }
  return os.str();
}

void Assertion::normalizeOrder() {
  std::stable_sort(spatial.begin(), spatial.end(),
                   [](const Heaplet& a, const Heaplet& b) {
                     return heapletCmp(a, b) < 0;
                   });
}

std::string show(const Assertion& a) {
  std::string s = "{" + show(a.pure) + " ; ";
  if (a.spatial.empty()) {
    s += "emp";
  } else {
    for (size_t i = 0; i < a.spatial.size(); ++i) {
      if (i) s += " ** ";
      s += show(a.spatial[i]);
    }
  }
  return s + "}";
}

std::vector<ExprP> conjuncts(const ExprP& e) {
  std::vector<ExprP> out;
  std::vector<ExprP> work{e};
  while (!work.empty()) {
    ExprP cur = work.back();
    work.pop_back();
    if (cur->tag == Expr::Tag::BinOp && cur->op == Op::And) {
      work.push_back(cur->kids[1]);
      work.push_back(cur->kids[0]);
    } else if (cur->tag == Expr::Tag::BoolConst && cur->bval) {
      // drop
    } else {
      out.push_back(cur);
    }
  }
  // conjuncts() reverses work-stack handling: restore source order
  std::reverse(out.begin(), out.end());
  return out;
}

ExprP mkConj(std::vector<ExprP> cs) {
  std::vector<ExprP> kept;
  for (auto& c : cs) {
    if (c->tag == Expr::Tag::BoolConst && c->bval) continue;
    bool dup = false;
    for (auto& k : kept)
      if (exprEq(k, c)) { dup = true; break; }
    if (!dup) kept.push_back(c);
  }
  if (kept.empty()) return exprTrue();
  ExprP acc = kept[0];
  for (size_t i = 1; i < kept.size(); ++i)
    acc = Expr::binOp(Op::And, acc, kept[i]);
  return acc;
}

const PredicateDef* SpecFile::findPred(const std::string& n) const {
  for (const auto& p : predicates)
    if (p.name == n) return &p;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Free variables

void collectVars(const ExprP& e, std::map<std::string, Sort>& out) {
  if (e->tag == Expr::Tag::Var) {
    out.emplace(e->name, e->sort);
    return;
  }
  for (const auto& k : e->kids) collectVars(k, out);
}

static void collectVars(const Permission& p, std::map<std::string, Sort>& out) {
  if (p.isVar()) out.emplace(p.name, Sort::Perm);
}

void collectVars(const Heaplet& h, std::map<std::string, Sort>& out) {
  if (const auto* p = std::get_if<PointsTo>(&h)) {
    collectVars(p->base, out);
    collectVars(p->value, out);
    collectVars(p->perm, out);
  } else if (const auto* b = std::get_if<Block>(&h)) {
    collectVars(b->base, out);
    collectVars(b->perm, out);
  } else {
    const auto& q = std::get<PredApp>(h);
    for (const auto& a : q.args) collectVars(a, out);
    for (const auto& pa : q.permArgs) collectVars(pa, out);
  }
}

void collectVars(const Assertion& a, std::map<std::string, Sort>& out) {
  collectVars(a.pure, out);
  for (const auto& h : a.spatial) collectVars(h, out);
}

template <typename T>
static VarSet varSetOf(const T& t) {
  std::map<std::string, Sort> m;
  collectVars(t, m);
  VarSet s;
  for (auto& [k, v] : m) s.insert(k);
  return s;
}

VarSet freeVars(const ExprP& e) { return varSetOf(e); }
VarSet freeVars(const Heaplet& h) { return varSetOf(h); }
VarSet freeVars(const Assertion& a) { return varSetOf(a); }

VarSet existentials(const SynthGoal& g) {
  VarSet post = freeVars(g.post);
  VarSet pre = freeVars(g.pre);
  for (const auto& [n, s] : g.formals) post.erase(n);
  for (const auto& v : pre) post.erase(v);
  return post;
}

// ---------------------------------------------------------------------------
// Substitution

void Substitution::bind(const std::string& var, ExprP image) {
  map_[var] = std::move(image);
}

void Substitution::bindPerm(const std::string& var, const Permission& p) {
  map_[var] = permToExpr(p);
}

ExprP Substitution::lookup(const std::string& var) const {
  auto it = map_.find(var);
  return it == map_.end() ? nullptr : it->second;
}

Substitution Substitution::composeWith(const Substitution& later) const {
  Substitution out;
  for (const auto& [v, img] : map_) out.map_[v] = applySubst(later, img);
  for (const auto& [v, img] : later.map_)
    if (!out.map_.count(v)) out.map_[v] = img;
  return out;
}

std::string Substitution::show() const {
  std::string s = "[";
  bool first = true;
  for (const auto& [v, img] : map_) {
    if (!first) s += ", ";
    first = false;
    s += bossl::show(img) + "/" + v;
  }
  return s + "]";
}

bool Substitution::operator==(const Substitution& o) const {
  if (map_.size() != o.map_.size()) return false;
  for (const auto& [v, img] : map_) {
    auto other = o.lookup(v);
    if (!other || !exprEq(img, other)) return false;
  }
  return true;
}

ExprP applySubst(const Substitution& s, const ExprP& e) {
  switch (e->tag) {
    case Expr::Tag::Var: {
      if (auto img = s.lookup(e->name)) {
        bool numeric = (e->sort == Sort::Loc || e->sort == Sort::Int) &&
                       (img->sort == Sort::Loc || img->sort == Sort::Int);
        if (img->sort != e->sort && !numeric)
          throw std::runtime_error("substitution sort mismatch on " + e->name +
                                   ": " + sortName(e->sort) + " vs " +
                                   sortName(img->sort));
        return img;
      }
      return e;
    }
    case Expr::Tag::SetLit: {
      std::vector<ExprP> kids;
      kids.reserve(e->kids.size());
      for (const auto& k : e->kids) kids.push_back(applySubst(s, k));
      return Expr::setLit(std::move(kids));
    }
    case Expr::Tag::BinOp:
      return Expr::binOp(e->op, applySubst(s, e->kids[0]),
                         applySubst(s, e->kids[1]));
    case Expr::Tag::Not:
      return Expr::negation(applySubst(s, e->kids[0]));
    default:
      return e;
  }
}

Permission applySubst(const Substitution& s, const Permission& p) {
  if (!p.isVar()) return p;
  auto img = s.lookup(p.name);
  if (!img) return p;
  auto q = exprToPerm(img);
  if (!q)
    throw std::runtime_error("substitution sort mismatch on permission " +
                             p.name);
  return *q;
}

Heaplet applySubst(const Substitution& s, const Heaplet& h) {
  if (const auto* p = std::get_if<PointsTo>(&h)) {
    return PointsTo{applySubst(s, p->base), p->offset, applySubst(s, p->value),
                    applySubst(s, p->perm)};
  }
  if (const auto* b = std::get_if<Block>(&h)) {
    return Block{applySubst(s, b->base), b->size, applySubst(s, b->perm)};
  }
  const auto& q = std::get<PredApp>(h);
  PredApp out;
  out.name = q.name;
  out.tag = q.tag;
  for (const auto& a : q.args) out.args.push_back(applySubst(s, a));
  for (const auto& pa : q.permArgs) out.permArgs.push_back(applySubst(s, pa));
  return out;
}

Assertion applySubst(const Substitution& s, const Assertion& a) {
  Assertion out;
  out.pure = applySubst(s, a.pure);
  out.spatial.reserve(a.spatial.size());
  for (const auto& h : a.spatial) out.spatial.push_back(applySubst(s, h));
  out.normalizeOrder();
  return out;
}

// ---------------------------------------------------------------------------
// Well-formedness

WfReport checkPredWellFormed(const PredicateDef& d) {
  WfReport report;
  std::set<std::string> bound(d.permParams.begin(), d.permParams.end());
  for (size_t k = 0; k < d.clauses.size(); ++k) {
    std::map<std::string, Sort> vars;
    collectVars(d.clauses[k].selector, vars);
    collectVars(d.clauses[k].pure, vars);
    for (const auto& h : d.clauses[k].spatial) collectVars(h, vars);
    for (const auto& [v, s] : vars) {
      if (s == Sort::Perm && !bound.count(v))
        report.push_back({d.name + " clause " + std::to_string(k + 1),
                          "permission variable " + v +
                              " is not bound by the predicate's parameters"});
    }
  }
  return report;
}

WfReport checkSpecWellFormed(
    const std::string& name,
    const std::vector<std::pair<std::string, Sort>>& formals,
    const Assertion& pre, const Assertion& post) {
  WfReport report;
  std::map<std::string, Sort> postVars;
  collectVars(post, postVars);
  VarSet preVars = freeVars(pre);
  std::set<std::string> formalNames;
  for (const auto& [n, s] : formals) formalNames.insert(n);
  for (const auto& [v, s] : postVars) {
    if (s != Sort::Perm) continue;
    if (!preVars.count(v) && !formalNames.count(v))
      report.push_back({name, "existential permission variable " + v +
                                  " occurs only in the postcondition"});
  }
  return report;
}

WfReport checkSpecWellFormed(const FunctionSpec& f) {
  return checkSpecWellFormed(f.name, f.formals, f.pre, f.post);
}

WfReport checkSpecWellFormed(const SynthGoal& g) {
  return checkSpecWellFormed(g.name, g.formals, g.pre, g.post);
}

}  // namespace bossl
