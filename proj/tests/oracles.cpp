#include "oracles.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace bossl::oracle {

// ---------------------------------------------------------------------------
// An independent evaluator (deliberately re-implemented here rather than
// reusing the solver's).

namespace {

struct OVal {
  long num = 0;
  bool b = false;
  std::set<long> elems;
  bool isImm = false;
  Sort sort = Sort::Int;
};

OVal oeval(const std::map<std::string, OVal>& env, const ExprP& e) {
  OVal out;
  switch (e->tag) {
    case Expr::Tag::IntConst:
      out.num = e->num;
      return out;
    case Expr::Tag::BoolConst:
      out.sort = Sort::Bool;
      out.b = e->bval;
      return out;
    case Expr::Tag::PermConst:
      out.sort = Sort::Perm;
      out.isImm = e->perm.isImm();
      return out;
    case Expr::Tag::Var:
      return env.at(e->name);
    case Expr::Tag::SetLit:
      out.sort = Sort::Set;
      for (const auto& k : e->kids) out.elems.insert(oeval(env, k).num);
      return out;
    case Expr::Tag::Not:
      out.sort = Sort::Bool;
      out.b = !oeval(env, e->kids[0]).b;
      return out;
    case Expr::Tag::BinOp: {
      OVal l = oeval(env, e->kids[0]);
      OVal r = oeval(env, e->kids[1]);
      switch (e->op) {
        case Op::Add: out.num = l.num + r.num; return out;
        case Op::Sub: out.num = l.num - r.num; return out;
        case Op::Le: out.sort = Sort::Bool; out.b = l.num <= r.num; return out;
        case Op::Lt: out.sort = Sort::Bool; out.b = l.num < r.num; return out;
        case Op::And: out.sort = Sort::Bool; out.b = l.b && r.b; return out;
        case Op::Or: out.sort = Sort::Bool; out.b = l.b || r.b; return out;
        case Op::Union:
          out.sort = Sort::Set;
          out.elems = l.elems;
          out.elems.insert(r.elems.begin(), r.elems.end());
          return out;
        case Op::Eq:
          out.sort = Sort::Bool;
          if (l.sort == Sort::Set || r.sort == Sort::Set)
            out.b = l.elems == r.elems;
          else if (l.sort == Sort::Perm || r.sort == Sort::Perm)
            out.b = l.isImm == r.isImm;
          else if (l.sort == Sort::Bool || r.sort == Sort::Bool)
            out.b = l.b == r.b;
          else
            out.b = l.num == r.num;
          return out;
      }
      return out;
    }
  }
  return out;
}

std::vector<std::set<long>> allSubsets(const std::vector<long>& universe) {
  std::vector<std::set<long>> out;
  for (size_t mask = 0; mask < (size_t(1) << universe.size()); ++mask) {
    std::set<long> s;
    for (size_t i = 0; i < universe.size(); ++i)
      if (mask & (size_t(1) << i)) s.insert(universe[i]);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Verdict enumerationValidity(const ExprP& hypothesis, const ExprP& conclusion) {
  std::map<std::string, Sort> vars;
  collectVars(hypothesis, vars);
  collectVars(conclusion, vars);

  std::vector<std::string> names;
  std::vector<Sort> sorts;
  for (const auto& [v, s] : vars) {
    names.push_back(v);
    sorts.push_back(s);
  }
  size_t intCount = 0, setCount = 0;
  for (Sort s : sorts) {
    if (s == Sort::Int || s == Sort::Loc) ++intCount;
    if (s == Sort::Set) ++setCount;
  }
  if (intCount > 3 || setCount > 2 || names.size() > 7) return Verdict::Skipped;

  static const std::vector<long> intDomain = {-4, -3, -2, -1, 0, 1, 2, 3, 4};
  static const std::vector<std::set<long>> setDomain =
      allSubsets({0, 1, 2, 3});

  std::function<Verdict(size_t, std::map<std::string, OVal>&)> go =
      [&](size_t i, std::map<std::string, OVal>& env) -> Verdict {
    if (i == names.size()) {
      if (oeval(env, hypothesis).b && !oeval(env, conclusion).b)
        return Verdict::Invalid;
      return Verdict::Valid;
    }
    OVal v;
    v.sort = sorts[i];
    switch (sorts[i]) {
      case Sort::Int:
      case Sort::Loc:
        for (long x : intDomain) {
          v.num = x;
          env[names[i]] = v;
          if (go(i + 1, env) == Verdict::Invalid) return Verdict::Invalid;
        }
        break;
      case Sort::Set:
        for (const auto& s : setDomain) {
          v.elems = s;
          env[names[i]] = v;
          if (go(i + 1, env) == Verdict::Invalid) return Verdict::Invalid;
        }
        break;
      case Sort::Perm:
        for (bool imm : {false, true}) {
          v.isImm = imm;
          env[names[i]] = v;
          if (go(i + 1, env) == Verdict::Invalid) return Verdict::Invalid;
        }
        break;
      case Sort::Bool:
        for (bool b : {false, true}) {
          v.b = b;
          env[names[i]] = v;
          if (go(i + 1, env) == Verdict::Invalid) return Verdict::Invalid;
        }
        break;
    }
    env.erase(names[i]);
    return Verdict::Valid;
  };
  std::map<std::string, OVal> env;
  return go(0, env);
}

// ---------------------------------------------------------------------------
// Query generator

namespace {

long pick(std::mt19937& rng, long lo, long hi) {
  return lo + static_cast<long>(rng() % static_cast<unsigned long>(hi - lo + 1));
}

ExprP randIntTerm(std::mt19937& rng, const std::vector<ExprP>& intVars) {
  switch (rng() % 4) {
    case 0: return Expr::intConst(pick(rng, -1, 1));
    case 1: return intVars[rng() % intVars.size()];
    case 2:
      return Expr::binOp(Op::Add, intVars[rng() % intVars.size()],
                         Expr::intConst(pick(rng, -1, 1)));
    default:
      return Expr::binOp(Op::Sub, intVars[rng() % intVars.size()],
                         intVars[rng() % intVars.size()]);
  }
}

ExprP randSetTerm(std::mt19937& rng, const std::vector<ExprP>& setVars,
                  const std::vector<ExprP>& elemVars) {
  switch (rng() % 4) {
    case 0: return setVars[rng() % setVars.size()];
    case 1: return Expr::setLit({});
    case 2: return Expr::setLit({elemVars[rng() % elemVars.size()]});
    default:
      return Expr::binOp(Op::Union,
                         Expr::setLit({elemVars[rng() % elemVars.size()]}),
                         setVars[rng() % setVars.size()]);
  }
}

ExprP randAtom(std::mt19937& rng, const std::vector<ExprP>& intVars,
               const std::vector<ExprP>& setVars,
               const std::vector<ExprP>& elemVars,
               const std::vector<ExprP>& permVars) {
  switch (rng() % 6) {
    case 0:
      return Expr::binOp(Op::Le, randIntTerm(rng, intVars),
                         randIntTerm(rng, intVars));
    case 1:
      return Expr::binOp(Op::Lt, randIntTerm(rng, intVars),
                         randIntTerm(rng, intVars));
    case 2:
      return Expr::binOp(Op::Eq, randIntTerm(rng, intVars),
                         randIntTerm(rng, intVars));
    case 3:
      return Expr::binOp(Op::Eq, randSetTerm(rng, setVars, elemVars),
                         randSetTerm(rng, setVars, elemVars));
    case 4: {
      ExprP rhs = rng() % 2 ? Expr::permConst(Permission::mut())
                            : permVars[rng() % permVars.size()];
      return Expr::binOp(Op::Eq, permVars[rng() % permVars.size()], rhs);
    }
    default:
      return Expr::negation(Expr::binOp(Op::Eq, randIntTerm(rng, intVars),
                                        randIntTerm(rng, intVars)));
  }
}

}  // namespace

EntailmentQuery randomQuery(std::mt19937& rng) {
  std::vector<ExprP> intVars = {Expr::var("x", Sort::Int),
                                Expr::var("y", Sort::Int)};
  // z doubles as a set element, so the hypothesis range-binds it below
  ExprP z = Expr::var("z", Sort::Int);
  std::vector<ExprP> elemVars = {z, Expr::intConst(0), Expr::intConst(1)};
  std::vector<ExprP> setVars = {Expr::var("S", Sort::Set),
                                Expr::var("T", Sort::Set)};
  std::vector<ExprP> permVars = {Expr::var("p", Sort::Perm),
                                 Expr::var("q", Sort::Perm)};
  std::vector<ExprP> all = intVars;
  all.push_back(z);

  std::vector<ExprP> hyps;
  int nh = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < nh; ++i)
    hyps.push_back(randAtom(rng, all, setVars, elemVars, permVars));
  // keep the set-element variable inside the enumerable universe
  hyps.push_back(Expr::binOp(Op::Le, Expr::intConst(0), z));
  hyps.push_back(Expr::binOp(Op::Le, z, Expr::intConst(3)));
  ExprP concl = randAtom(rng, all, setVars, elemVars, permVars);
  if (rng() % 4 == 0)
    concl = Expr::binOp(rng() % 2 ? Op::And : Op::Or, concl,
                        randAtom(rng, all, setVars, elemVars, permVars));
  return {mkConj(hyps), concl};
}

SolverAgreement checkSolverAgreement(int n, unsigned seed) {
  SolverAgreement agg;
  std::mt19937 rng(seed);
  Solver solver;
  while (agg.total < n) {
    EntailmentQuery q = randomQuery(rng);
    Verdict truth = enumerationValidity(q.hypothesis, q.conclusion);
    if (truth == Verdict::Skipped) continue;
    ++agg.total;
    Validity got = solver.valid(q);
    if (got == Validity::Unknown) {
      ++agg.unknowns;
      continue;
    }
    bool agree = (got == Validity::Valid) == (truth == Verdict::Valid);
    if (!agree) {
      ++agg.disagreements;
      if (agg.failures.size() < 5) {
        std::ostringstream os;
        os << "hyp: " << show(q.hypothesis) << "\nconcl: " << show(q.conclusion)
           << "\nsolver: " << (got == Validity::Valid ? "Valid" : "Invalid")
           << " oracle: " << (truth == Verdict::Valid ? "Valid" : "Invalid");
        agg.failures.push_back(os.str());
      }
    } else if (got == Validity::Valid) {
      ++agg.validAgreed;
    } else {
      ++agg.invalidAgreed;
    }
  }
  return agg;
}

// ---------------------------------------------------------------------------
// Unifier oracle

namespace {

// subterm pool: every expression occurring inside the target heaplets
void collectSubterms(const ExprP& e, std::vector<ExprP>& out) {
  for (const auto& prev : out)
    if (exprEq(prev, e)) goto kids;
  out.push_back(e);
kids:
  for (const auto& k : e->kids) collectSubterms(k, out);
}

bool subMultiset(std::vector<Heaplet> part, const std::vector<Heaplet>& whole) {
  std::vector<bool> used(whole.size(), false);
  for (const auto& h : part) {
    bool found = false;
    for (size_t i = 0; i < whole.size(); ++i) {
      if (used[i] || !heapletEq(h, whole[i])) continue;
      used[i] = true;
      found = true;
      break;
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace

std::vector<Substitution> bruteForceUnify(const UnifTask& task) {
  // domain: existential variables occurring in the pattern
  std::map<std::string, Sort> patVars;
  for (const auto& h : task.pattern) collectVars(h, patVars);
  std::vector<std::pair<std::string, Sort>> domain;
  for (const auto& [v, s] : patVars)
    if (task.existentials.count(v)) domain.emplace_back(v, s);

  // image pool from the target
  std::vector<ExprP> terms;
  std::vector<Permission> perms = {Permission::mut()};
  for (const auto& h : task.target) {
    if (const auto* p = std::get_if<PointsTo>(&h)) {
      collectSubterms(p->base, terms);
      collectSubterms(p->value, terms);
      perms.push_back(p->perm);
    } else if (const auto* b = std::get_if<Block>(&h)) {
      collectSubterms(b->base, terms);
      perms.push_back(b->perm);
    } else {
      const auto& q = std::get<PredApp>(h);
      for (const auto& a : q.args) collectSubterms(a, terms);
      for (const auto& pa : q.permArgs) perms.push_back(pa);
    }
  }

  std::vector<Substitution> found;
  std::function<void(size_t, Substitution)> go = [&](size_t i, Substitution s) {
    if (found.size() > 4096) return;
    if (i == domain.size()) {
      std::vector<Heaplet> inst;
      for (const auto& h : task.pattern) inst.push_back(applySubst(s, h));
      if (!subMultiset(inst, task.target)) return;
      for (const auto& prev : found)
        if (prev == s) return;
      found.push_back(std::move(s));
      return;
    }
    const auto& [v, sort] = domain[i];
    if (sort == Sort::Perm) {
      std::vector<Permission> seen;
      for (const auto& p : perms) {
        bool dup = false;
        for (const auto& sp : seen)
          if (sp == p) { dup = true; break; }
        if (dup) continue;
        seen.push_back(p);
        Substitution s2 = s;
        s2.bindPerm(v, p);
        go(i + 1, std::move(s2));
      }
    } else {
      for (const auto& t : terms) {
        bool numeric = (t->sort == Sort::Loc || t->sort == Sort::Int) &&
                       (sort == Sort::Loc || sort == Sort::Int);
        if (t->sort != sort && !numeric) continue;
        Substitution s2 = s;
        s2.bind(v, t);
        go(i + 1, std::move(s2));
      }
    }
  };
  go(0, Substitution{});
  return found;
}

UnifTask randomUnifTask(std::mt19937& rng) {
  UnifTask task;
  std::vector<std::string> locNames = {"x", "y", "z"};
  std::vector<std::string> valNames = {"v", "w"};
  std::vector<std::string> permNames = {"p", "q"};

  auto randPerm = [&]() -> Permission {
    switch (rng() % 3) {
      case 0: return Permission::mut();
      default: return Permission::var(permNames[rng() % permNames.size()]);
    }
  };
  auto randValue = [&]() -> ExprP {
    if (rng() % 2) return Expr::intConst(pick(rng, 0, 3));
    return Expr::var(valNames[rng() % valNames.size()], Sort::Int);
  };
  auto randHeaplet = [&]() -> Heaplet {
    ExprP base = Expr::var(locNames[rng() % locNames.size()], Sort::Loc);
    switch (rng() % 4) {
      case 0: return Block{base, static_cast<int>(1 + rng() % 2), randPerm()};
      case 1:
        return PredApp{"p", {base, randValue()}, {randPerm()}, 0};
      default:
        return PointsTo{base, static_cast<int>(rng() % 2), randValue(),
                        randPerm()};
    }
  };

  int nt = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < nt; ++i) task.target.push_back(randHeaplet());
  int np = 1 + static_cast<int>(rng() % std::min(3, nt + 1));
  for (int i = 0; i < np; ++i) task.pattern.push_back(randHeaplet());
  task.target.push_back({});  // placeholder removed below
  task.target.pop_back();

  // existentials: variables of the pattern, chosen independently
  std::map<std::string, Sort> patVars;
  for (const auto& h : task.pattern) collectVars(h, patVars);
  for (const auto& [v, s] : patVars)
    if (rng() % 2) task.existentials.insert(v);
  return task;
}

UnifierAgreement checkUnifierAgreement(int n, unsigned seed) {
  UnifierAgreement agg;
  std::mt19937 rng(seed);
  for (int i = 0; i < n; ++i) {
    UnifTask task = randomUnifTask(rng);
    ++agg.total;
    std::vector<Substitution> expected = bruteForceUnify(task);
    std::vector<Substitution> got = unify(task);
    auto contains = [](const std::vector<Substitution>& xs,
                       const Substitution& s) {
      for (const auto& x : xs)
        if (x == s) return true;
      return false;
    };
    bool same = expected.size() == got.size();
    if (same)
      for (const auto& s : expected)
        if (!contains(got, s)) { same = false; break; }
    if (!same) {
      ++agg.disagreements;
      if (agg.failures.size() < 5) {
        std::ostringstream os;
        os << "task target:";
        for (const auto& h : task.target) os << " " << show(h);
        os << " pattern:";
        for (const auto& h : task.pattern) os << " " << show(h);
        os << " ev:";
        for (const auto& v : task.existentials) os << " " << v;
        os << "\nexpected " << expected.size() << " got " << got.size();
        for (const auto& s : expected) os << "\n  oracle: " << s.show();
        for (const auto& s : got) os << "\n  unify:  " << s.show();
        agg.failures.push_back(os.str());
      }
    }
  }
  return agg;
}

}  // namespace bossl::oracle
