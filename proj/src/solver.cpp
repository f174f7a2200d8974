#include "bossl/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace bossl {

bool PValue::operator==(const PValue& o) const {
  if (sort == Sort::Bool && o.sort == Sort::Bool) return b == o.b;
  if (sort == Sort::Set && o.sort == Sort::Set) return elems == o.elems;
  if (sort == Sort::Perm && o.sort == Sort::Perm) return perm == o.perm;
  // loc and int values live in the same carrier
  return num == o.num;
}

PValue evalExpr(const Valuation& env, const ExprP& e) {
  switch (e->tag) {
    case Expr::Tag::IntConst: return PValue::ofInt(e->num, e->sort);
    case Expr::Tag::BoolConst: return PValue::ofBool(e->bval);
    case Expr::Tag::PermConst: return PValue::ofPerm(e->perm);
    case Expr::Tag::Var: {
      auto it = env.find(e->name);
      if (it == env.end())
        throw std::runtime_error("unbound variable in evaluation: " + e->name);
      return it->second;
    }
    case Expr::Tag::SetLit: {
      std::set<long> s;
      for (const auto& k : e->kids) s.insert(evalExpr(env, k).num);
      return PValue::ofSet(std::move(s));
    }
    case Expr::Tag::Not:
      return PValue::ofBool(!evalExpr(env, e->kids[0]).b);
    case Expr::Tag::BinOp: {
      PValue l = evalExpr(env, e->kids[0]);
      PValue r = evalExpr(env, e->kids[1]);
      switch (e->op) {
        case Op::Add: return PValue::ofInt(l.num + r.num, l.sort);
        case Op::Sub: return PValue::ofInt(l.num - r.num, l.sort);
        case Op::Eq: return PValue::ofBool(l == r);
        case Op::Le: return PValue::ofBool(l.num <= r.num);
        case Op::Lt: return PValue::ofBool(l.num < r.num);
        case Op::And: return PValue::ofBool(l.b && r.b);
        case Op::Or: return PValue::ofBool(l.b || r.b);
        case Op::Union: {
          std::set<long> s = l.elems;
          s.insert(r.elems.begin(), r.elems.end());
          return PValue::ofSet(std::move(s));
        }
      }
      break;
    }
  }
  throw std::runtime_error("evaluation failure");
}

// ---------------------------------------------------------------------------
// Simplification

namespace {

bool isBoolConst(const ExprP& e, bool v) {
  return e->tag == Expr::Tag::BoolConst && e->bval == v;
}

std::optional<long> constInt(const ExprP& e) {
  if (e->tag == Expr::Tag::IntConst) return e->num;
  return std::nullopt;
}

ExprP negate(const ExprP& e) {
  if (e->tag == Expr::Tag::Not) return e->kids[0];
  if (e->tag == Expr::Tag::BoolConst) return Expr::boolConst(!e->bval);
  return Expr::negation(e);
}

}  // namespace

ExprP simplify(const ExprP& e) {
  switch (e->tag) {
    case Expr::Tag::Not: {
      ExprP k = simplify(e->kids[0]);
      if (k->tag == Expr::Tag::BoolConst) return Expr::boolConst(!k->bval);
      if (k->tag == Expr::Tag::Not) return k->kids[0];
      return Expr::negation(k);
    }
    case Expr::Tag::SetLit: {
      std::vector<ExprP> kids;
      for (const auto& k : e->kids) {
        ExprP sk = simplify(k);
        bool dup = false;
        for (const auto& prev : kids)
          if (exprEq(prev, sk)) { dup = true; break; }
        if (!dup) kids.push_back(sk);
      }
      std::sort(kids.begin(), kids.end(),
                [](const ExprP& a, const ExprP& b) { return exprCmp(a, b) < 0; });
      return Expr::setLit(std::move(kids));
    }
    case Expr::Tag::BinOp: {
      ExprP l = simplify(e->kids[0]);
      ExprP r = simplify(e->kids[1]);
      switch (e->op) {
        case Op::And: {
          if (isBoolConst(l, false) || isBoolConst(r, false)) return exprFalse();
          auto cs = conjuncts(Expr::binOp(Op::And, l, r));
          // complementary literals => false
          for (size_t i = 0; i < cs.size(); ++i)
            for (size_t j = i + 1; j < cs.size(); ++j)
              if (exprEq(cs[i], negate(cs[j])) || exprEq(negate(cs[i]), cs[j]))
                return exprFalse();
          return mkConj(cs);
        }
        case Op::Or:
          if (isBoolConst(l, true) || isBoolConst(r, true)) return exprTrue();
          if (isBoolConst(l, false)) return r;
          if (isBoolConst(r, false)) return l;
          return Expr::binOp(Op::Or, l, r);
        case Op::Eq: {
          if (exprEq(l, r)) return exprTrue();
          if (l->isConst() && r->isConst()) {
            if (l->tag == Expr::Tag::PermConst && r->tag == Expr::Tag::PermConst)
              return Expr::boolConst(l->perm == r->perm);
            if (l->tag == Expr::Tag::IntConst && r->tag == Expr::Tag::IntConst)
              return Expr::boolConst(l->num == r->num);
            if (l->tag == Expr::Tag::BoolConst && r->tag == Expr::Tag::BoolConst)
              return Expr::boolConst(l->bval == r->bval);
          }
          if (l->tag == Expr::Tag::SetLit && r->tag == Expr::Tag::SetLit) {
            // ground literal sets compare directly
            bool groundL = true, groundR = true;
            for (auto& k : l->kids) groundL &= k->isConst();
            for (auto& k : r->kids) groundR &= k->isConst();
            if (groundL && groundR) {
              std::set<long> a, b;
              for (auto& k : l->kids) a.insert(k->num);
              for (auto& k : r->kids) b.insert(k->num);
              return Expr::boolConst(a == b);
            }
          }
          return Expr::binOp(Op::Eq, l, r);
        }
        case Op::Le:
        case Op::Lt: {
          auto cl = constInt(l), cr = constInt(r);
          if (cl && cr)
            return Expr::boolConst(e->op == Op::Le ? *cl <= *cr : *cl < *cr);
          return Expr::binOp(e->op, l, r);
        }
        case Op::Add:
        case Op::Sub: {
          auto cl = constInt(l), cr = constInt(r);
          if (cl && cr) return Expr::intConst(e->op == Op::Add ? *cl + *cr : *cl - *cr);
          if (cr && *cr == 0) return l;
          if (e->op == Op::Add && cl && *cl == 0) return r;
          return Expr::binOp(e->op, l, r);
        }
        case Op::Union: {
          if (l->tag == Expr::Tag::SetLit && l->kids.empty()) return r;
          if (r->tag == Expr::Tag::SetLit && r->kids.empty()) return l;
          if (l->tag == Expr::Tag::SetLit && r->tag == Expr::Tag::SetLit) {
            std::vector<ExprP> kids = l->kids;
            kids.insert(kids.end(), r->kids.begin(), r->kids.end());
            return simplify(Expr::setLit(std::move(kids)));
          }
          return Expr::binOp(Op::Union, l, r);
        }
      }
      break;
    }
    default:
      return e;
  }
  return e;
}

std::vector<std::pair<std::string, ExprP>> extractEqualities(const ExprP& e) {
  std::vector<std::pair<std::string, ExprP>> out;
  for (const auto& c : conjuncts(e)) {
    if (c->tag != Expr::Tag::BinOp || c->op != Op::Eq) continue;
    const ExprP& l = c->kids[0];
    const ExprP& r = c->kids[1];
    auto tryOrient = [&](const ExprP& v, const ExprP& t) {
      if (!v->isVar()) return false;
      if (freeVars(t).count(v->name)) return false;
      out.emplace_back(v->name, t);
      return true;
    };
    if (!tryOrient(l, r)) tryOrient(r, l);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Literals, NNF, DNF

namespace {

struct Lit {
  bool pos = true;
  ExprP atom;  // Eq/Le/Lt binop, bool var, or bool const
};

using Branch = std::vector<Lit>;

constexpr size_t kMaxBranches = 512;

void dnf(const ExprP& e, bool pos, std::vector<Branch>& out, bool& overflow) {
  if (overflow) return;
  if (e->tag == Expr::Tag::Not) {
    dnf(e->kids[0], !pos, out, overflow);
    return;
  }
  if (e->tag == Expr::Tag::BinOp && (e->op == Op::And || e->op == Op::Or)) {
    bool conj = (e->op == Op::And) == pos;
    if (conj) {
      std::vector<Branch> left, right;
      dnf(e->kids[0], pos, left, overflow);
      dnf(e->kids[1], pos, right, overflow);
      if (overflow) return;
      if (left.size() * right.size() > kMaxBranches) {
        overflow = true;
        return;
      }
      for (const auto& a : left)
        for (const auto& b : right) {
          Branch m = a;
          m.insert(m.end(), b.begin(), b.end());
          out.push_back(std::move(m));
        }
    } else {
      dnf(e->kids[0], pos, out, overflow);
      dnf(e->kids[1], pos, out, overflow);
      if (out.size() > kMaxBranches) overflow = true;
    }
    return;
  }
  out.push_back({Lit{pos, e}});
}

// ---------------------------------------------------------------------------
// Linear part

struct LinTerm {
  std::map<std::string, long> coeff;
  long cst = 0;

  void add(const LinTerm& o, long k) {
    for (const auto& [v, c] : o.coeff) {
      coeff[v] += c * k;
      if (coeff[v] == 0) coeff.erase(v);
    }
    cst += o.cst * k;
  }
};

std::optional<LinTerm> linearize(const ExprP& e) {
  LinTerm t;
  switch (e->tag) {
    case Expr::Tag::IntConst:
      t.cst = e->num;
      return t;
    case Expr::Tag::Var:
      if (e->sort != Sort::Int && e->sort != Sort::Loc) return std::nullopt;
      t.coeff[e->name] = 1;
      return t;
    case Expr::Tag::BinOp: {
      if (e->op != Op::Add && e->op != Op::Sub) return std::nullopt;
      auto l = linearize(e->kids[0]);
      auto r = linearize(e->kids[1]);
      if (!l || !r) return std::nullopt;
      l->add(*r, e->op == Op::Add ? 1 : -1);
      return l;
    }
    default:
      return std::nullopt;
  }
}

// inequality: term <= 0
struct Ineq {
  LinTerm t;
};

class LinearSystem {
 public:
  bool supported = true;

  void addLe(const LinTerm& l, const LinTerm& r, long slack) {
    // l <= r - slack   =>   l - r + slack <= 0
    LinTerm t = l;
    t.add(r, -1);
    t.cst += slack;
    ineqs_.push_back({t});
  }

  void addEq(const LinTerm& l, const LinTerm& r) {
    addLe(l, r, 0);
    addLe(r, l, 0);
  }

  // Fourier-Motzkin refutation; exact for unsatisfiability over the
  // rationals, hence sound for the integers.
  bool refute() const {
    std::vector<Ineq> sys = ineqs_;
    std::set<std::string> vars;
    for (const auto& iq : sys)
      for (const auto& [v, c] : iq.t.coeff) vars.insert(v);
    for (const auto& v : vars) {
      std::vector<Ineq> next, lower, upper;
      for (const auto& iq : sys) {
        auto it = iq.t.coeff.find(v);
        if (it == iq.t.coeff.end()) {
          next.push_back(iq);
        } else if (it->second > 0) {
          upper.push_back(iq);
        } else {
          lower.push_back(iq);
        }
      }
      if (next.size() > 400) return false;  // give up refuting
      for (const auto& up : upper) {
        for (const auto& lo : lower) {
          long cu = up.t.coeff.at(v);
          long cl = -lo.t.coeff.at(v);
          // cl * up + cu * lo eliminates v
          Ineq comb;
          comb.t.add(up.t, cl);
          comb.t.add(lo.t, cu);
          comb.t.coeff.erase(v);
          if (comb.t.coeff.empty()) {
            if (comb.t.cst > 0) return true;
          } else {
            next.push_back(comb);
          }
        }
      }
      sys = std::move(next);
    }
    for (const auto& iq : sys)
      if (iq.t.coeff.empty() && iq.t.cst > 0) return true;
    return false;
  }

  bool entailsEq(const LinTerm& l, const LinTerm& r) const {
    // l == r forced iff both strict sides are refutable
    LinearSystem a = *this;
    a.addLe(r, l, -1);  // r <= l - (-1): r - l - 1 <= 0 means r < l+1... see below
    // want: system && l < r refutable and system && l > r refutable
    LinearSystem lt = *this;
    lt.addLe(l, r, 1);  // l <= r - 1, i.e. l < r
    LinearSystem gt = *this;
    gt.addLe(r, l, 1);  // r < l
    return lt.refute() && gt.refute();
  }

  const std::vector<Ineq>& ineqs() const { return ineqs_; }

 private:
  std::vector<Ineq> ineqs_;
};

// ---------------------------------------------------------------------------
// Set normal forms

struct SetNF {
  std::vector<ExprP> elems;       // element terms (int/loc sorted)
  std::vector<std::string> vars;  // set variables

  void sortParts() {
    std::sort(elems.begin(), elems.end(),
              [](const ExprP& a, const ExprP& b) { return exprCmp(a, b) < 0; });
    elems.erase(std::unique(elems.begin(), elems.end(),
                            [](const ExprP& a, const ExprP& b) {
                              return exprEq(a, b);
                            }),
                elems.end());
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  }

  bool sameAs(const SetNF& o) const {
    if (vars != o.vars || elems.size() != o.elems.size()) return false;
    for (size_t i = 0; i < elems.size(); ++i)
      if (!exprEq(elems[i], o.elems[i])) return false;
    return true;
  }
};

std::optional<SetNF> setNF(const ExprP& e) {
  SetNF nf;
  switch (e->tag) {
    case Expr::Tag::Var:
      if (e->sort != Sort::Set) return std::nullopt;
      nf.vars.push_back(e->name);
      return nf;
    case Expr::Tag::SetLit:
      nf.elems = e->kids;
      nf.sortParts();
      return nf;
    case Expr::Tag::BinOp: {
      if (e->op != Op::Union) return std::nullopt;
      auto l = setNF(e->kids[0]);
      auto r = setNF(e->kids[1]);
      if (!l || !r) return std::nullopt;
      l->elems.insert(l->elems.end(), r->elems.begin(), r->elems.end());
      l->vars.insert(l->vars.end(), r->vars.begin(), r->vars.end());
      l->sortParts();
      return l;
    }
    default:
      return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Branch decision

enum class Decision { Unsat, Sat, Unknown };

struct BranchDecider {
  Branch lits;
  Valuation model;  // populated on Sat

  Decision run() {
    // 1. substitution propagation for oriented positive equalities
    for (int pass = 0; pass < 12; ++pass) {
      bool changed = false;
      for (auto& lit : lits) lit.atom = simplify(lit.atom);
      // drop trivial, detect ground contradictions
      Branch kept;
      for (auto& lit : lits) {
        if (lit.atom->tag == Expr::Tag::BoolConst) {
          if (lit.atom->bval != lit.pos) return Decision::Unsat;
          continue;
        }
        kept.push_back(lit);
      }
      lits = std::move(kept);
      Substitution sub;
      for (const auto& lit : lits) {
        if (!lit.pos || lit.atom->tag != Expr::Tag::BinOp ||
            lit.atom->op != Op::Eq)
          continue;
        const ExprP& l = lit.atom->kids[0];
        const ExprP& r = lit.atom->kids[1];
        auto orient = [&](const ExprP& v, const ExprP& t) {
          if (!v->isVar() || sub.contains(v->name)) return false;
          if (freeVars(t).count(v->name)) return false;
          // avoid substituting a variable by a term that mentions another
          // pending domain variable; one binding per pass is enough
          sub.bind(v->name, t);
          return true;
        };
        if (orient(l, r) || orient(r, l)) {
          changed = true;
          break;  // apply one binding at a time, keeps ranges clean
        }
      }
      if (!changed) break;
      for (auto& lit : lits) lit.atom = applySubst(sub, lit.atom);
    }

    // 2. syntactic complementary pair
    for (size_t i = 0; i < lits.size(); ++i)
      for (size_t j = i + 1; j < lits.size(); ++j)
        if (lits[i].pos != lits[j].pos && exprEq(lits[i].atom, lits[j].atom))
          return Decision::Unsat;

    // 3. sort the literals into theories
    LinearSystem lin;
    std::vector<std::pair<SetNF, SetNF>> setEqs, setDiseqs;
    std::vector<Lit> residual;  // everything model-checked at the end
    bool linComplete = true;    // all int literals captured by lin
    std::vector<std::pair<LinTerm, LinTerm>> intDiseqs;

    for (const auto& lit : lits) {
      const ExprP& a = lit.atom;
      residual.push_back(lit);
      if (a->tag == Expr::Tag::Var && a->sort == Sort::Bool) continue;
      if (a->tag != Expr::Tag::BinOp) continue;
      Sort ls = a->kids[0]->sort, rs = a->kids[1]->sort;
      bool numeric = (ls == Sort::Int || ls == Sort::Loc) &&
                     (rs == Sort::Int || rs == Sort::Loc);
      if (a->op == Op::Eq && ls == Sort::Set) {
        auto l = setNF(a->kids[0]), r = setNF(a->kids[1]);
        if (l && r) {
          if (lit.pos)
            setEqs.emplace_back(*l, *r);
          else
            setDiseqs.emplace_back(*l, *r);
        }
        continue;
      }
      if (a->op == Op::Eq && ls == Sort::Perm) continue;  // handled residually
      if ((a->op == Op::Eq || a->op == Op::Le || a->op == Op::Lt) && numeric) {
        auto l = linearize(a->kids[0]), r = linearize(a->kids[1]);
        if (!l || !r) {
          linComplete = false;
          continue;
        }
        if (lit.pos) {
          if (a->op == Op::Eq)
            lin.addEq(*l, *r);
          else
            lin.addLe(*l, *r, a->op == Op::Lt ? 1 : 0);
        } else {
          if (a->op == Op::Eq)
            intDiseqs.emplace_back(*l, *r);
          else if (a->op == Op::Le)
            lin.addLe(*r, *l, 1);  // !(l <= r)  =>  r < l
          else
            lin.addLe(*r, *l, 0);  // !(l < r)   =>  r <= l
        }
      }
    }

    // 4. set reasoning: derive contradictions and singleton equalities
    for (const auto& [l, r] : setEqs) {
      if (l.vars.empty() && r.vars.empty()) {
        if (l.elems.size() == 1 && r.elems.size() == 1) {
          auto tl = linearize(l.elems[0]), tr = linearize(r.elems[0]);
          if (tl && tr) lin.addEq(*tl, *tr);
        }
        if (l.elems.empty() != r.elems.empty()) return Decision::Unsat;
      } else if (r.vars.empty() && r.elems.empty() && !l.elems.empty()) {
        return Decision::Unsat;  // {e,...} u vars == {}
      } else if (l.vars.empty() && l.elems.empty() && !r.elems.empty()) {
        return Decision::Unsat;
      }
    }
    for (const auto& [l, r] : setDiseqs)
      if (l.sameAs(r)) return Decision::Unsat;

    // 5. linear refutation
    if (lin.refute()) return Decision::Unsat;
    for (const auto& [l, r] : intDiseqs)
      if (lin.entailsEq(l, r)) return Decision::Unsat;

    // 6. model search
    if (buildAndVerifyModel()) return Decision::Sat;
    (void)linComplete;
    return Decision::Unknown;
  }

 private:
  // Assemble candidate assignments and verify all literals by evaluation.
  bool buildAndVerifyModel() {
    std::map<std::string, Sort> vars;
    for (const auto& lit : lits) collectVars(lit.atom, vars);

    std::vector<std::string> intVars, setVars, permVars, boolVars;
    for (const auto& [v, s] : vars) {
      switch (s) {
        case Sort::Int:
        case Sort::Loc: intVars.push_back(v); break;
        case Sort::Set: setVars.push_back(v); break;
        case Sort::Perm: permVars.push_back(v); break;
        case Sort::Bool: boolVars.push_back(v); break;
      }
    }
    if (intVars.size() > 8 || setVars.size() > 5 || permVars.size() > 4 ||
        boolVars.size() > 4)
      return false;

    // candidate integer assignments: FM-guided would be ideal; at this scale
    // a bounded grid plus spread defaults does the job
    std::vector<std::vector<long>> intChoices;
    if (intVars.empty()) {
      intChoices.push_back({});
    } else if (intVars.size() <= 3) {
      static const long grid[] = {-4, -3, -2, -1, 0, 1, 2, 3, 4, 5, 9, 101};
      std::vector<long> idx(intVars.size(), 0);
      for (;;) {
        std::vector<long> pick;
        for (size_t i = 0; i < idx.size(); ++i) pick.push_back(grid[idx[i]]);
        intChoices.push_back(pick);
        size_t k = 0;
        while (k < idx.size() && ++idx[k] == std::size(grid)) idx[k++] = 0;
        if (k == idx.size()) break;
      }
    } else {
      for (long base = 0; base < 6; ++base) {
        std::vector<long> pick;
        for (size_t i = 0; i < intVars.size(); ++i)
          pick.push_back(base + static_cast<long>(i) * 3);
        intChoices.push_back(pick);
      }
    }

    size_t permCombos = static_cast<size_t>(1) << permVars.size();
    size_t boolCombos = static_cast<size_t>(1) << boolVars.size();
    size_t setCombos = static_cast<size_t>(1) << std::min<size_t>(setVars.size(), 4);

    for (const auto& ints : intChoices) {
      for (size_t pc = 0; pc < permCombos; ++pc) {
        for (size_t bc = 0; bc < boolCombos; ++bc) {
          for (size_t scBase = 0; scBase < setCombos * 2; ++scBase) {
            Valuation env;
            for (size_t i = 0; i < intVars.size(); ++i)
              env[intVars[i]] = PValue::ofInt(ints[i], vars[intVars[i]]);
            for (size_t i = 0; i < permVars.size(); ++i)
              env[permVars[i]] = PValue::ofPerm(
                  (pc >> i) & 1 ? Permission::imm() : Permission::mut());
            for (size_t i = 0; i < boolVars.size(); ++i)
              env[boolVars[i]] = PValue::ofBool((bc >> i) & 1);
            for (size_t i = 0; i < setVars.size(); ++i) {
              std::set<long> s;
              if (scBase & 1) {
                // seed with the integer assignments, a common need for
                // literals like S == {v} u S1
                for (long x : ints) s.insert(x);
              }
              if (i < 4 && (scBase >> (i + 1)) & 1) s.insert(900 + (long)i);
              env[setVars[i]] = PValue::ofSet(std::move(s));
            }
            if (verify(env)) {
              model = std::move(env);
              return true;
            }
          }
        }
      }
    }
    return false;
  }

  bool verify(const Valuation& env) {
    try {
      for (const auto& lit : lits) {
        PValue v = evalExpr(env, lit.atom);
        if (v.b != lit.pos) return false;
      }
      return true;
    } catch (const std::exception&) {
      return false;
    }
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Solver

Solver::Solver() {
  if (const char* cmd = std::getenv("BOSSL_SMT")) {
    externalEnabled_ = true;
    externalCmd_ = cmd;
  }
}

bool Solver::unsatisfiable(const ExprP& formula) {
  ExprP f = simplify(formula);
  if (isBoolConst(f, false)) return true;
  if (isBoolConst(f, true)) return false;
  std::vector<Branch> branches;
  bool overflow = false;
  dnf(f, true, branches, overflow);
  if (overflow) return false;
  for (auto& b : branches) {
    BranchDecider d{b, {}};
    if (d.run() != Decision::Unsat) return false;
  }
  return true;
}

Validity Solver::valid(const EntailmentQuery& q) {
  auto start = std::chrono::steady_clock::now();
  ++counters_.queries;
  ExprP f = simplify(
      Expr::binOp(Op::And, q.hypothesis, Expr::negation(q.conclusion)));
  Validity result = Validity::Unknown;
  if (isBoolConst(f, false)) {
    result = Validity::Valid;
  } else {
    std::vector<Branch> branches;
    bool overflow = false;
    dnf(f, true, branches, overflow);
    if (!overflow) {
      bool allUnsat = true, anySat = false;
      for (auto& b : branches) {
        BranchDecider d{b, {}};
        Decision dec = d.run();
        if (dec == Decision::Sat) {
          // re-verify against the original query to rule out theory slips
          try {
            Valuation env = d.model;
            std::map<std::string, Sort> vars;
            collectVars(q.hypothesis, vars);
            collectVars(q.conclusion, vars);
            long fresh = 41;
            for (const auto& [v, s] : vars)
              if (!env.count(v)) {
                switch (s) {
                  case Sort::Set: env[v] = PValue::ofSet({}); break;
                  case Sort::Bool: env[v] = PValue::ofBool(false); break;
                  case Sort::Perm: env[v] = PValue::ofPerm(Permission::mut()); break;
                  default: env[v] = PValue::ofInt(fresh += 7, s); break;
                }
              }
            if (evalExpr(env, q.hypothesis).b && !evalExpr(env, q.conclusion).b) {
              anySat = true;
            }
          } catch (const std::exception&) {
          }
          if (!anySat) allUnsat = false;
        } else if (dec == Decision::Unknown) {
          allUnsat = false;
        }
        if (anySat) break;
      }
      if (anySat)
        result = Validity::Invalid;
      else if (allUnsat)
        result = Validity::Valid;
    }
  }
  if (result == Validity::Unknown && externalEnabled_)
    result = decideByExternal(f);
  if (result == Validity::Unknown) ++counters_.unknowns;
  counters_.totalMicros += std::chrono::duration_cast<std::chrono::microseconds>(
                               std::chrono::steady_clock::now() - start)
                               .count();
  return result;
}

}  // namespace bossl
