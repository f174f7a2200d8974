#include "bossl/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace bossl {

// ---------------------------------------------------------------------------
// Mode rewrite

namespace {

Permission mutify(const Permission& p) {
  return p.isVar() ? Permission::mut() : p;
}

ExprP mutifyExpr(const ExprP& e) {
  if (e->tag == Expr::Tag::Var && e->sort == Sort::Perm)
    return Expr::permConst(Permission::mut());
  if (e->kids.empty()) return e;
  switch (e->tag) {
    case Expr::Tag::SetLit: {
      std::vector<ExprP> kids;
      for (const auto& k : e->kids) kids.push_back(mutifyExpr(k));
      return Expr::setLit(std::move(kids));
    }
    case Expr::Tag::Not:
      return Expr::negation(mutifyExpr(e->kids[0]));
    case Expr::Tag::BinOp:
      return Expr::binOp(e->op, mutifyExpr(e->kids[0]), mutifyExpr(e->kids[1]));
    default:
      return e;
  }
}

Heaplet mutifyHeaplet(const Heaplet& h) {
  if (const auto* p = std::get_if<PointsTo>(&h))
    return PointsTo{p->base, p->offset, p->value, mutify(p->perm)};
  if (const auto* b = std::get_if<Block>(&h))
    return Block{b->base, b->size, mutify(b->perm)};
  PredApp q = std::get<PredApp>(h);
  for (auto& pa : q.permArgs) pa = mutify(pa);
  return q;
}

Assertion mutifyAssertion(const Assertion& a) {
  Assertion out;
  out.pure = simplify(mutifyExpr(a.pure));
  for (const auto& h : a.spatial) out.spatial.push_back(mutifyHeaplet(h));
  out.normalizeOrder();
  return out;
}

}  // namespace

SpecFile rewriteAllMut(const SpecFile& f) {
  SpecFile out = f;  // predicate definitions keep their permission parameters
  for (auto& fn : out.functions) {
    fn.pre = mutifyAssertion(fn.pre);
    fn.post = mutifyAssertion(fn.post);
  }
  out.goal.pre = mutifyAssertion(out.goal.pre);
  out.goal.post = mutifyAssertion(out.goal.post);
  return out;
}

SearchConfig configForPerturbation(int id, Mode mode, long timeoutMs,
                                   long ruleBudget) {
  if (id < 0 || id >= kNumPerturbations)
    throw std::invalid_argument("perturbation id out of range: " +
                                std::to_string(id));
  SearchConfig cfg;
  cfg.unifOrder = id / kNumRuleOrders;
  cfg.ruleOrder = id % kNumRuleOrders;
  cfg.mode = mode;
  cfg.timeoutMs = timeoutMs;
  cfg.ruleBudget = ruleBudget;
  return cfg;
}

// ---------------------------------------------------------------------------
// Engine internals

namespace {

struct Goal {
  std::vector<std::string> gamma;  // program variables, declaration order
  VarSet ghosts;  // universally bound logical variables, accumulated: the
                  // classification survives framing away their last pre
                  // occurrence
  Assertion pre, post;
  int callBudget = 8;

  bool inGamma(const std::string& v) const {
    return std::find(gamma.begin(), gamma.end(), v) != gamma.end();
  }
};

VarSet goalExistentials(const Goal& g) {
  VarSet post = freeVars(g.post);
  VarSet pre = freeVars(g.pre);
  for (const auto& v : g.gamma) post.erase(v);
  for (const auto& v : g.ghosts) post.erase(v);
  for (const auto& v : pre) post.erase(v);
  return post;
}

VarSet allGoalVars(const Goal& g) {
  VarSet vs = freeVars(g.pre);
  for (const auto& v : freeVars(g.post)) vs.insert(v);
  for (const auto& v : g.gamma) vs.insert(v);
  return vs;
}

struct Expansion {
  const char* rule;
  std::vector<Goal> subgoals;
  std::function<StmtP(std::vector<StmtP>)> assemble;
};

struct TimeoutSignal {};

// Read is invertible and runs inside normalization; the searched phases
// permute Write and Open/Call priorities around the default order.
enum class Phase { Emp, Frame, OpenClose, Unify, Write, Alloc, Free, Call };

std::vector<Phase> phaseOrder(int ruleOrder) {
  using P = Phase;
  switch (ruleOrder) {
    case 0:  // default
      return {P::Emp, P::Frame, P::OpenClose, P::Unify,
              P::Write, P::Alloc, P::Free, P::Call};
    case 1:  // write high
      return {P::Emp, P::Frame, P::Write, P::OpenClose, P::Unify,
              P::Alloc, P::Free, P::Call};
    case 2:  // write low
      return {P::Emp, P::Frame, P::OpenClose, P::Unify,
              P::Alloc, P::Free, P::Call, P::Write};
    case 3:  // open/call high
      return {P::Emp, P::Frame, P::OpenClose, P::Call, P::Unify,
              P::Write, P::Alloc, P::Free};
    case 4:  // open/call low
      return {P::Emp, P::Frame, P::Unify, P::Write,
              P::Alloc, P::Free, P::OpenClose, P::Call};
    case 5:  // write high, open/call low
      return {P::Emp, P::Frame, P::Write, P::Unify,
              P::Alloc, P::Free, P::OpenClose, P::Call};
    case 6:  // write low, open/call high
      return {P::Emp, P::Frame, P::OpenClose, P::Call, P::Unify,
              P::Alloc, P::Free, P::Write};
    default:
      throw std::invalid_argument("rule order id out of range");
  }
}

class Engine {
 public:
  Engine(const SpecFile& spec, const SearchConfig& cfg)
      : spec_(cfg.mode == Mode::Mut ? rewriteAllMut(spec) : spec),
        cfg_(cfg),
        order_(unifOrderFromId(cfg.unifOrder)),
        phases_(phaseOrder(cfg.ruleOrder)) {
    // the goal's own spec joins the context to enable recursive calls
    selfSpec_ = FunctionSpec{spec_.goal.name, spec_.goal.formals, spec_.goal.pre,
                             spec_.goal.post};
    callableSpecs_ = spec_.functions;
    callableSpecs_.push_back(selfSpec_);
  }

  SynthResult run() {
    SynthResult result;
    auto t0 = std::chrono::steady_clock::now();
    deadline_ = t0 + std::chrono::milliseconds(cfg_.timeoutMs);

    Goal root;
    for (const auto& [n, s] : spec_.goal.formals) root.gamma.push_back(n);
    root.pre = spec_.goal.pre;
    root.post = spec_.goal.post;
    for (const auto& v : freeVars(root.pre))
      if (!root.inGamma(v)) root.ghosts.insert(v);

    try {
      auto body = solve(root, 0);
      if (body) {
        Procedure proc{spec_.goal.name, spec_.goal.formals, *body};
        stats_.outcome = Outcome::Synthesized;
        stats_.resultAstSize = astSize(proc);
        result.procedure = std::move(proc);
      } else {
        stats_.outcome = Outcome::NoSolution;
      }
    } catch (const TimeoutSignal&) {
      stats_.outcome = Outcome::Timeout;
    }
    stats_.wallTimeMs = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    stats_.solverQueries = solver_.counters().queries;
    stats_.solverUnknowns = solver_.counters().unknowns;
    stats_.solverMicros = solver_.counters().totalMicros;
    result.stats = stats_;
    return result;
  }

 private:
  // -------------------------------------------------------------------------
  // Search driver

  void checkBudget() {
    if (stats_.rulesFired > cfg_.ruleBudget) throw TimeoutSignal{};
    if ((++budgetTick_ & 0xFF) == 0 &&
        std::chrono::steady_clock::now() > deadline_)
      throw TimeoutSignal{};
  }

  std::optional<StmtP> solve(Goal g, int depth) {
    if (depth > 160) return std::nullopt;
    checkBudget();

    auto normalized = normalize(std::move(g));
    if (normalized.terminal) {
      ++stats_.rulesFired;  // Inconsistency closes the goal
      return normalized.terminal;
    }
    Goal& goal = normalized.goal;
    std::vector<StmtP>& prefix = normalized.prefix;

    // equivalent goals (modulo ghost renaming) reappear across rule
    // interleavings; failed ones are conclusively failed
    std::string key = canonicalKey(goal);
    if (failedGoals_.count(key)) return std::nullopt;
    auto fail = [&]() -> std::optional<StmtP> {
      failedGoals_.insert(std::move(key));
      return std::nullopt;
    };
    if (infeasible(goal)) return fail();
    if (postObligationDoomed(goal)) return fail();

    static const long traceLimit =
        std::getenv("BOSSL_TRACE") ? std::atol(std::getenv("BOSSL_TRACE")) : 0;

    for (Phase phase : phases_) {
      std::vector<Expansion> expansions = generate(phase, goal);
      for (auto& exp : expansions) {
        ++stats_.rulesFired;
        if (stats_.rulesFired <= traceLimit) {
          std::string pad(static_cast<size_t>(std::min(depth, 40)), ' ');
          std::cerr << pad << "#" << stats_.rulesFired << " " << exp.rule
                    << " @" << depth << "\n"
                    << pad << "  pre  " << show(goal.pre) << "\n"
                    << pad << "  post " << show(goal.post) << "\n";
        }
        checkBudget();
        std::vector<StmtP> children;
        bool ok = true;
        for (auto& sub : exp.subgoals) {
          tracePermStrengthening(goal, sub);
          auto r = solve(sub, depth + 1);
          if (!r) {
            ok = false;
            break;
          }
          children.push_back(*r);
        }
        if (ok) {
          std::vector<StmtP> whole = prefix;
          whole.push_back(exp.assemble(std::move(children)));
          return Statement::seq(std::move(whole));
        }
        ++stats_.backtracks;
      }
    }
    return fail();
  }

  // The post obligations joined with the (ever-growing) pre must stay
  // satisfiable with the existentials read as free variables; otherwise no
  // instantiation can ever discharge them at Emp.
  bool postObligationDoomed(const Goal& g) {
    // separation: two cells at one location (or two blocks at one base)
    // admit no model
    for (size_t i = 0; i < g.post.spatial.size(); ++i) {
      for (size_t j = i + 1; j < g.post.spatial.size(); ++j) {
        const auto* pi = std::get_if<PointsTo>(&g.post.spatial[i]);
        const auto* pj = std::get_if<PointsTo>(&g.post.spatial[j]);
        if (pi && pj && pi->offset == pj->offset &&
            exprEq(pi->base, pj->base))
          return true;
        const auto* bi = std::get_if<Block>(&g.post.spatial[i]);
        const auto* bj = std::get_if<Block>(&g.post.spatial[j]);
        if (bi && bj && exprEq(bi->base, bj->base)) return true;
      }
    }
    // permissions never strengthen: a post demand at an existing ground
    // location must carry the annotation the pre already has there
    VarSet ev = goalExistentials(g);
    auto groundBase = [&](const ExprP& b) {
      return !(b->isVar() && ev.count(b->name));
    };
    for (const auto& hq : g.post.spatial) {
      const auto* q = std::get_if<PointsTo>(&hq);
      const auto* qb = std::get_if<Block>(&hq);
      if (q && groundBase(q->base)) {
        for (const auto& hp : g.pre.spatial) {
          const auto* p = std::get_if<PointsTo>(&hp);
          if (p && p->offset == q->offset && exprEq(p->base, q->base) &&
              p->perm != q->perm && !permFlexible(p->perm, q->perm, ev))
            return true;
        }
      }
      if (qb && groundBase(qb->base)) {
        for (const auto& hp : g.pre.spatial) {
          const auto* p = std::get_if<Block>(&hp);
          if (p && exprEq(p->base, qb->base) && p->perm != qb->perm &&
              !permFlexible(p->perm, qb->perm, ev))
            return true;
        }
      }
    }
    if (g.post.pure->tag == Expr::Tag::BoolConst) return false;
    return solver_.unsatisfiable(
        simplify(Expr::binOp(Op::And, g.pre.pure, g.post.pure)));
  }

  // an annotation pair might still be reconciled when one side is an
  // existential borrow variable (a unification could bind it)
  static bool permFlexible(const Permission& pre, const Permission& post,
                           const VarSet& ev) {
    if (post.isVar() && ev.count(post.name)) return true;
    if (pre.isVar() && ev.count(pre.name)) return true;
    return false;
  }

  // Canonical form: program variables keep their names, logical variables
  // are numbered in order of first appearance in the printed goal, pure
  // conjuncts sorted so accumulation order cannot split states.
  std::string canonicalKey(Goal g) {
    auto sortPure = [](ExprP e) {
      auto cs = conjuncts(e);
      std::sort(cs.begin(), cs.end(), [](const ExprP& a, const ExprP& b) {
        return exprCmp(a, b) < 0;
      });
      return mkConj(cs);
    };
    g.pre.pure = sortPure(g.pre.pure);
    g.post.pure = sortPure(g.post.pure);
    std::string raw = show(g.pre) + "|" + show(g.post);
    std::map<std::string, Sort> vars;
    collectVars(g.pre, vars);
    collectVars(g.post, vars);
    Substitution ren;
    int counter = 0;
    // first-appearance order over the printed text
    std::vector<std::pair<size_t, std::string>> firstPos;
    for (const auto& [v, s] : vars) {
      if (g.inGamma(v)) continue;
      size_t pos = raw.find(v);
      firstPos.emplace_back(pos == std::string::npos ? raw.size() : pos, v);
    }
    std::sort(firstPos.begin(), firstPos.end());
    for (const auto& [pos, v] : firstPos)
      ren.bind(v, Expr::var("$" + std::to_string(counter++), vars.at(v)));
    std::string key = show(applySubst(ren, g.pre)) + "|" +
                      show(applySubst(ren, g.post)) + "|" +
                      std::to_string(g.callBudget) + "|";
    for (const auto& h : g.pre.spatial)
      if (const auto* q = std::get_if<PredApp>(&h))
        key += std::to_string(q->tag);
    key += "|";
    for (const auto& h : g.post.spatial)
      if (const auto* q = std::get_if<PredApp>(&h))
        key += std::to_string(q->tag);
    for (const auto& v : g.gamma) key += "," + v;
    return key;
  }

  // -------------------------------------------------------------------------
  // Normalization: SubstLeft, SubstRight, Inconsistency, StarPartialEq and
  // null-not-lval enrichment, trivially-true conjunct removal.

  struct Normalized {
    Goal goal;
    std::vector<StmtP> prefix;  // loads extracted by the invertible Read rule
    std::optional<StmtP> terminal;
  };

  Normalized normalize(Goal g) {
    Normalized out;
    bool any = false;
    for (int pass = 0; pass < 48; ++pass) {
      bool changed = false;
      g.pre.pure = simplify(g.pre.pure);
      g.post.pure = simplify(g.post.pure);

      if (g.pre.pure->tag == Expr::Tag::BoolConst && !g.pre.pure->bval) {
        out.goal = std::move(g);
        out.terminal = Statement::error();
        return out;
      }

      // SubstLeft: pre equality ghost = term substitutes through the goal
      for (const auto& [v, t] : extractEqualities(g.pre.pure)) {
        if (g.inGamma(v)) continue;
        Substitution s;
        s.bind(v, t);
        g.pre = applySubst(s, g.pre);
        g.post = applySubst(s, g.post);
        changed = true;
        break;
      }
      if (!changed) changed = extractRead(g, out.prefix);
      if (!changed) changed = enrich(g);
      if (!changed) break;
      any = true;
    }
    if (any) ++stats_.rulesFired;  // one normalization application
    out.goal = std::move(g);
    return out;
  }

  // Read: any permission allows loading a connected ghost into a fresh
  // program variable; invertible, so applied as part of normalization.
  bool extractRead(Goal& g, std::vector<StmtP>& prefix) {
    for (size_t i = 0; i < g.pre.spatial.size(); ++i) {
      const auto* p = std::get_if<PointsTo>(&g.pre.spatial[i]);
      if (!p) continue;
      if (!p->base->isVar() || !g.inGamma(p->base->name)) continue;
      if (!p->value->isVar() || g.inGamma(p->value->name)) continue;
      if (p->value->sort != Sort::Loc && p->value->sort != Sort::Int) continue;
      std::string ghost = p->value->name;
      bool connected = freeVars(g.post).count(ghost) ||
                       freeVars(g.pre.pure).count(ghost);
      for (size_t k = 0; !connected && k < g.pre.spatial.size(); ++k)
        if (k != i && freeVars(g.pre.spatial[k]).count(ghost)) connected = true;
      if (!connected) continue;
      std::string y = freshName(ghost, allGoalVars(g));
      Substitution s;
      s.bind(ghost, Expr::var(y, p->value->sort));
      std::string base = p->base->name;
      int off = p->offset;
      g.pre = applySubst(s, g.pre);
      g.post = applySubst(s, g.post);
      g.gamma.push_back(y);
      prefix.push_back(Statement::load(y, base, off));
      ++stats_.rulesFired;
      return true;
    }
    return false;
  }

  // Separation facts: allocated bases are non-null and pairwise distinct at
  // equal offsets.
  bool enrich(Goal& g) {
    auto cs = conjuncts(g.pre.pure);
    auto hasConjunct = [&](const ExprP& e) {
      for (const auto& c : cs)
        if (exprEq(c, e)) return true;
      return false;
    };

    std::vector<const PointsTo*> cells;
    std::vector<ExprP> bases;
    for (const auto& h : g.pre.spatial) {
      if (const auto* p = std::get_if<PointsTo>(&h)) {
        cells.push_back(p);
        if (p->offset == 0) bases.push_back(p->base);
      } else if (const auto* b = std::get_if<Block>(&h)) {
        bases.push_back(b->base);
      }
    }
    std::vector<ExprP> facts;
    auto note = [&](ExprP e) {
      if (hasConjunct(e)) return;
      for (const auto& f : facts)
        if (exprEq(f, e)) return;
      facts.push_back(std::move(e));
    };
    for (const auto& p : cells)
      if (p->base->isVar())
        note(Expr::negation(
            Expr::binOp(Op::Eq, p->base, Expr::intConst(0))));
    for (const auto& b : bases)
      if (b->isVar())
        note(Expr::negation(Expr::binOp(Op::Eq, b, Expr::intConst(0))));
    for (size_t i = 0; i < cells.size(); ++i)
      for (size_t j = i + 1; j < cells.size(); ++j) {
        if (cells[i]->offset != cells[j]->offset) continue;
        if (exprEq(cells[i]->base, cells[j]->base)) continue;
        if (!cells[i]->base->isVar() || !cells[j]->base->isVar()) continue;
        ExprP l = cells[i]->base, r = cells[j]->base;
        if (exprCmp(l, r) > 0) std::swap(l, r);
        note(Expr::negation(Expr::binOp(Op::Eq, l, r)));
      }
    if (facts.empty()) return false;
    cs.insert(cs.end(), facts.begin(), facts.end());
    g.pre.pure = mkConj(cs);
    return true;
  }

  // A postcondition predicate instance whose unfold budget is exhausted can
  // only be discharged by Frame or UnifyHeaps against a pre predicate, or
  // after a Call introduced one. With no predicate in the pre and every
  // callable spec requiring one, such a goal is unsolvable.
  bool infeasible(const Goal& g) {
    for (const auto& h : g.pre.spatial)
      if (std::holds_alternative<PredApp>(h)) return false;
    bool postBlocked = false;
    for (const auto& h : g.post.spatial)
      if (const auto* q = std::get_if<PredApp>(&h))
        if (q->tag >= cfg_.maxUnfoldDepth) postBlocked = true;
    if (!postBlocked) return false;
    for (const auto& f : callableSpecs_) {
      bool needsPred = false;
      for (const auto& h : f.pre.spatial)
        if (std::holds_alternative<PredApp>(h)) needsPred = true;
      if (!needsPred) return false;  // a predicate-free callee could help
    }
    return true;
  }

  // No Permission Strengthening: a pre heaplet annotated with a borrow in
  // the parent goal may not surface as literal Mut at the same location in a
  // subgoal (SubstLeft instantiations are justified by a pure equality and
  // rewrite the annotation before this check sees the subgoal).
  void tracePermStrengthening(const Goal& parent, const Goal& child) {
    for (const auto& hp : parent.pre.spatial) {
      const auto* p = std::get_if<PointsTo>(&hp);
      if (!p || !p->perm.isVar()) continue;
      for (const auto& hc : child.pre.spatial) {
        const auto* c = std::get_if<PointsTo>(&hc);
        if (!c || c->offset != p->offset || !exprEq(c->base, p->base)) continue;
        if (c->perm.isMut()) ++stats_.permStrengtheningViolations;
      }
    }
  }

  // -------------------------------------------------------------------------
  // Phase generators

  std::vector<Expansion> generate(Phase phase, const Goal& g) {
    switch (phase) {
      case Phase::Emp: return genEmp(g);
      case Phase::Frame: return genFrame(g);
      case Phase::OpenClose: return genOpenClose(g);
      case Phase::Unify: return genUnify(g);
      case Phase::Write: return genWrite(g);
      case Phase::Alloc: return genAlloc(g);
      case Phase::Free: return genFree(g);
      case Phase::Call: return genCall(g);
    }
    return {};
  }

  std::vector<Expansion> genEmp(const Goal& g) {
    if (!g.pre.spatial.empty() || !g.post.spatial.empty()) return {};
    VarSet ev = goalExistentials(g);
    for (const auto& v : freeVars(g.post.pure))
      if (ev.count(v)) return {};  // unbound existentials left
    if (solver_.valid(g.pre.pure, g.post.pure) != Validity::Valid) return {};
    Expansion e{"Emp", {}, [](std::vector<StmtP>) { return Statement::skip(); }};
    return {e};
  }

  std::vector<Expansion> genFrame(const Goal& g) {
    VarSet ev = goalExistentials(g);
    for (size_t i = 0; i < g.pre.spatial.size(); ++i) {
      for (size_t j = 0; j < g.post.spatial.size(); ++j) {
        if (!heapletEq(g.pre.spatial[i], g.post.spatial[j])) continue;
        bool evFree = true;
        for (const auto& v : freeVars(g.pre.spatial[i]))
          if (ev.count(v)) { evFree = false; break; }
        if (!evFree) continue;
        Goal sub = g;
        sub.pre.spatial.erase(sub.pre.spatial.begin() + static_cast<long>(i));
        sub.post.spatial.erase(sub.post.spatial.begin() + static_cast<long>(j));
        Expansion e{"Frame",
                    {std::move(sub)},
                    [](std::vector<StmtP> c) { return c[0]; }};
        return {e};
      }
    }
    return {};
  }

  struct InstClause {
    ExprP selector;
    ExprP pure;
    std::vector<Heaplet> spatial;
    VarSet freshLocals;
  };

  // Instantiates a predicate clause: clause-local variables renamed fresh,
  // parameters replaced by the instance arguments, permission parameters by
  // the instance annotations. New predicate instances carry tag+1.
  InstClause instantiate(const PredicateDef& def, const Clause& clause,
                         const PredApp& app, const VarSet& avoid) {
    Substitution sub;
    std::set<std::string> bound;
    for (size_t i = 0; i < def.params.size(); ++i) {
      sub.bind(def.params[i].first, app.args[i]);
      bound.insert(def.params[i].first);
    }
    for (size_t i = 0; i < def.permParams.size(); ++i) {
      sub.bindPerm(def.permParams[i], app.permArgs[i]);
      bound.insert(def.permParams[i]);
    }
    std::map<std::string, Sort> locals;
    collectVars(clause.selector, locals);
    collectVars(clause.pure, locals);
    for (const auto& h : clause.spatial) collectVars(h, locals);
    InstClause out;
    for (const auto& [v, s] : locals) {
      if (bound.count(v)) continue;
      // hash-suffixed so the pretty base name stays available for Read
      std::string fresh = v + "#" + std::to_string(instCounter_);
      while (avoid.count(fresh)) fresh += "'";
      out.freshLocals.insert(fresh);
      sub.bind(v, Expr::var(fresh, s));
    }
    ++instCounter_;
    out.selector = simplify(applySubst(sub, clause.selector));
    out.pure = simplify(applySubst(sub, clause.pure));
    for (const auto& h : clause.spatial) {
      Heaplet ih = applySubst(sub, h);
      if (auto* q = std::get_if<PredApp>(&ih)) q->tag = app.tag + 1;
      out.spatial.push_back(std::move(ih));
    }
    return out;
  }

  std::vector<Expansion> genOpenClose(const Goal& g) {
    std::vector<Expansion> out;
    // Open on precondition predicates
    for (size_t i = 0; i < g.pre.spatial.size(); ++i) {
      const auto* q = std::get_if<PredApp>(&g.pre.spatial[i]);
      if (!q || q->tag < 0 || q->tag >= cfg_.maxUnfoldDepth) continue;
      const PredicateDef* def = spec_.findPred(q->name);
      if (!def) continue;
      VarSet avoid = allGoalVars(g);
      std::vector<InstClause> viable;
      for (const auto& clause : def->clauses) {
        InstClause ic = instantiate(*def, clause, *q, avoid);
        for (const auto& v : freeVars(ic.selector)) avoid.insert(v);
        for (const auto& v : freeVars(ic.pure)) avoid.insert(v);
        for (const auto& h : ic.spatial)
          for (const auto& v : freeVars(h)) avoid.insert(v);
        if (solver_.unsatisfiable(
                Expr::binOp(Op::And, g.pre.pure, ic.selector)))
          continue;  // clause contradicts the pure context
        viable.push_back(std::move(ic));
      }
      if (viable.empty()) continue;
      auto mkSub = [&](const InstClause& ic) {
        Goal sub = g;
        sub.pre.spatial.erase(sub.pre.spatial.begin() + static_cast<long>(i));
        for (const auto& h : ic.spatial) sub.pre.spatial.push_back(h);
        sub.pre.normalizeOrder();
        sub.pre.pure = simplify(mkConj(
            {sub.pre.pure, ic.selector, ic.pure}));
        // clause locals exposed by opening are universally bound
        for (const auto& v : ic.freshLocals) sub.ghosts.insert(v);
        return sub;
      };
      if (viable.size() == 1) {
        Goal sub = mkSub(viable[0]);
        out.push_back({"Open",
                       {std::move(sub)},
                       [](std::vector<StmtP> c) { return c[0]; }});
        continue;
      }
      // several viable clauses: selectors become branch conditions and must
      // be executable over the program variables
      bool executable = true;
      for (const auto& ic : viable)
        for (const auto& v : freeVars(ic.selector))
          if (!g.inGamma(v)) { executable = false; break; }
      if (!executable) continue;
      std::vector<Goal> subs;
      std::vector<ExprP> selectors;
      for (const auto& ic : viable) {
        subs.push_back(mkSub(ic));
        selectors.push_back(ic.selector);
      }
      out.push_back(
          {"Open", std::move(subs), [selectors](std::vector<StmtP> cs) {
             StmtP acc = cs.back();
             for (size_t k = cs.size() - 1; k-- > 0;)
               acc = Statement::ifStmt(selectors[k], cs[k], acc);
             return acc;
           }});
    }
    // Close on postcondition predicates
    for (size_t j = 0; j < g.post.spatial.size(); ++j) {
      const auto* q = std::get_if<PredApp>(&g.post.spatial[j]);
      if (!q || q->tag < 0 || q->tag >= cfg_.maxUnfoldDepth) continue;
      const PredicateDef* def = spec_.findPred(q->name);
      if (!def) continue;
      VarSet avoid = allGoalVars(g);
      for (const auto& clause : def->clauses) {
        InstClause ic = instantiate(*def, clause, *q, avoid);
        // a close whose selector or body contradicts the pre or the
        // obligations accumulated so far can never discharge at Emp
        if (solver_.unsatisfiable(simplify(mkConj(
                {g.pre.pure, g.post.pure, ic.selector, ic.pure}))))
          continue;
        Goal sub = g;
        sub.post.spatial.erase(sub.post.spatial.begin() + static_cast<long>(j));
        for (const auto& h : ic.spatial) sub.post.spatial.push_back(h);
        sub.post.normalizeOrder();
        sub.post.pure = simplify(mkConj({sub.post.pure, ic.selector, ic.pure}));
        out.push_back({"Close",
                       {std::move(sub)},
                       [](std::vector<StmtP> c) { return c[0]; }});
      }
    }
    return out;
  }

  std::vector<Expansion> genUnify(const Goal& g) {
    VarSet ev = goalExistentials(g);
    if (ev.empty()) return {};
    std::vector<Substitution> seen;
    std::vector<Expansion> out;
    auto push = [&](const Substitution& s) {
      if (s.empty()) return;
      for (const auto& prev : seen)
        if (prev == s) return;
      seen.push_back(s);
      Goal sub = g;
      sub.post = applySubst(s, sub.post);
      out.push_back({"UnifyHeaps",
                     {std::move(sub)},
                     [](std::vector<StmtP> c) { return c[0]; }});
    };

    // pure-atom candidates first: post atoms matched against pre atoms bind
    // existentials without committing any heap pairing
    auto postConjs = conjuncts(g.post.pure);
    auto preConjs = conjuncts(g.pre.pure);
    for (const auto& cp : postConjs) {
      bool hasEv = false;
      for (const auto& v : freeVars(cp))
        if (ev.count(v)) { hasEv = true; break; }
      if (!hasEv) continue;
      for (const auto& ch : preConjs) {
        auto s = matchExpr(ch, cp, ev, Substitution{});
        if (s && !s->empty()) push(*s);
      }
    }
    // then oriented post equalities on an existential (the pick of a witness)
    for (const auto& [v, t] : extractEqualities(g.post.pure)) {
      if (!ev.count(v)) continue;
      bool clean = true;
      for (const auto& tv : freeVars(t))
        if (ev.count(tv)) { clean = false; break; }
      if (!clean) continue;
      Substitution s;
      s.bind(v, t);
      push(s);
    }

    // heap candidates, ordered by the configured strategy
    std::vector<CandidatePair> pairs;
    for (size_t pj = 0; pj < g.post.spatial.size(); ++pj) {
      bool hasEv = false;
      for (const auto& v : freeVars(g.post.spatial[pj]))
        if (ev.count(v)) { hasEv = true; break; }
      if (!hasEv) continue;
      for (size_t ti = 0; ti < g.pre.spatial.size(); ++ti)
        pairs.push_back({ti, pj});
    }
    pairs = rankCandidates(g.pre.spatial, g.post.spatial, pairs, order_);
    for (const auto& pr : pairs) {
      auto s = matchHeaplet(g.pre.spatial[pr.targetIdx],
                            g.post.spatial[pr.patternIdx], ev, Substitution{});
      if (s && !s->empty()) push(*s);
      if (out.size() >= 48) break;
    }
    return out;
  }

  std::vector<Expansion> genWrite(const Goal& g) {
    std::vector<Expansion> out;
    for (size_t i = 0; i < g.pre.spatial.size(); ++i) {
      const auto* pc = std::get_if<PointsTo>(&g.pre.spatial[i]);
      if (!pc || !pc->perm.isMut()) continue;
      if (!pc->base->isVar() || !g.inGamma(pc->base->name)) continue;
      for (size_t j = 0; j < g.post.spatial.size(); ++j) {
        const auto* qc = std::get_if<PointsTo>(&g.post.spatial[j]);
        if (!qc || !qc->perm.isMut()) continue;
        if (qc->offset != pc->offset || !exprEq(qc->base, pc->base)) continue;
        if (exprEq(qc->value, pc->value)) continue;  // no-op write forbidden
        bool progExpr = true;
        for (const auto& v : freeVars(qc->value))
          if (!g.inGamma(v)) { progExpr = false; break; }
        if (!progExpr) continue;
        Goal sub = g;
        std::get<PointsTo>(sub.pre.spatial[i]).value = qc->value;
        sub.pre.normalizeOrder();
        std::string base = pc->base->name;
        int off = pc->offset;
        ExprP val = qc->value;
        out.push_back({"WriteRO",
                       {std::move(sub)},
                       [base, off, val](std::vector<StmtP> c) {
                         return Statement::seq(
                             {Statement::store(base, off, val), c[0]});
                       }});
      }
    }
    return out;
  }

  std::vector<Expansion> genAlloc(const Goal& g) {
    VarSet ev = goalExistentials(g);
    std::vector<Expansion> out;
    for (size_t j = 0; j < g.post.spatial.size(); ++j) {
      const auto* b = std::get_if<Block>(&g.post.spatial[j]);
      if (!b || !b->base->isVar() || !ev.count(b->base->name)) continue;
      // the postcondition must also hold the block's cells
      std::set<int> offs;
      for (const auto& h : g.post.spatial)
        if (const auto* p = std::get_if<PointsTo>(&h))
          if (exprEq(p->base, b->base)) offs.insert(p->offset);
      bool allCells = true;
      for (int i = 0; i < b->size; ++i) allCells &= offs.count(i) > 0;
      if (!allCells) continue;

      VarSet avoid = allGoalVars(g);
      std::string y = freshName(b->base->name, avoid);
      avoid.insert(y);
      Goal sub = g;
      sub.gamma.push_back(y);
      ExprP yv = Expr::var(y, Sort::Loc);
      sub.pre.spatial.push_back(Block{yv, b->size, Permission::mut()});
      for (int i = 0; i < b->size; ++i) {
        std::string t = freshName("t", avoid);
        avoid.insert(t);
        sub.ghosts.insert(t);
        sub.pre.spatial.push_back(
            PointsTo{yv, i, Expr::var(t, Sort::Int), Permission::mut()});
      }
      sub.pre.normalizeOrder();
      int n = b->size;
      out.push_back({"Alloc",
                     {std::move(sub)},
                     [y, n](std::vector<StmtP> c) {
                       return Statement::seq(
                           {Statement::mallocStmt(y, n), c[0]});
                     }});
    }
    return out;
  }

  std::vector<Expansion> genFree(const Goal& g) {
    std::vector<Expansion> out;
    for (size_t i = 0; i < g.pre.spatial.size(); ++i) {
      const auto* b = std::get_if<Block>(&g.pre.spatial[i]);
      if (!b || !b->perm.isMut()) continue;
      if (!b->base->isVar() || !g.inGamma(b->base->name)) continue;
      std::vector<size_t> cellIdx;
      bool ok = true;
      for (int off = 0; off < b->size; ++off) {
        bool found = false;
        for (size_t k = 0; k < g.pre.spatial.size(); ++k) {
          const auto* p = std::get_if<PointsTo>(&g.pre.spatial[k]);
          if (!p || p->offset != off || !exprEq(p->base, b->base)) continue;
          if (!p->perm.isMut()) continue;
          bool prog = true;
          for (const auto& v : freeVars(p->value))
            if (!g.inGamma(v)) { prog = false; break; }
          if (!prog) continue;
          cellIdx.push_back(k);
          found = true;
          break;
        }
        if (!found) { ok = false; break; }
      }
      if (!ok) continue;
      Goal sub = g;
      std::vector<size_t> toErase = cellIdx;
      toErase.push_back(i);
      std::sort(toErase.rbegin(), toErase.rend());
      for (size_t k : toErase)
        sub.pre.spatial.erase(sub.pre.spatial.begin() + static_cast<long>(k));
      std::string x = b->base->name;
      out.push_back({"Free",
                     {std::move(sub)},
                     [x](std::vector<StmtP> c) {
                       return Statement::seq({Statement::freeStmt(x), c[0]});
                     }});
    }
    return out;
  }

  // -------------------------------------------------------------------------
  // Call

  struct CallMatch {
    Substitution sub;
    std::set<size_t> consumed;
    // fix-up stores required to realize the callee precondition
    std::vector<std::tuple<std::string, int, ExprP>> writes;
  };

  struct FreshSpec {
    std::vector<std::string> formals;  // renamed formal names
    Assertion pre, post;
  };

  FreshSpec freshenSpec(const FunctionSpec& f, const VarSet& avoid) {
    Substitution sub;
    VarSet used = avoid;
    std::map<std::string, Sort> vars;
    collectVars(f.pre, vars);
    collectVars(f.post, vars);
    for (const auto& [n, s] : f.formals) vars.emplace(n, s);
    for (const auto& [v, s] : vars) {
      std::string fresh = freshName(v, used);
      used.insert(fresh);
      sub.bind(v, Expr::var(fresh, s));
    }
    FreshSpec out;
    for (const auto& [n, s] : f.formals)
      out.formals.push_back(sub.lookup(n)->name);
    out.pre = applySubst(sub, f.pre);
    out.post = applySubst(sub, f.post);
    return out;
  }

  void matchCallRec(const Goal& g, const std::vector<Heaplet>& pattern,
                    size_t patIdx, const VarSet& ev, std::vector<bool>& used,
                    const Substitution& sofar,
                    std::vector<std::tuple<std::string, int, ExprP>>& writes,
                    std::vector<CallMatch>& out) {
    if (out.size() >= 48) return;
    if (patIdx == pattern.size()) {
      CallMatch m;
      m.sub = sofar;
      for (size_t i = 0; i < used.size(); ++i)
        if (used[i]) m.consumed.insert(i);
      m.writes = writes;
      out.push_back(std::move(m));
      return;
    }
    const Heaplet& pat = pattern[patIdx];
    std::vector<CandidatePair> pairs;
    for (size_t t = 0; t < g.pre.spatial.size(); ++t)
      if (!used[t]) pairs.push_back({t, patIdx});
    pairs = rankCandidates(g.pre.spatial, pattern, pairs, order_);
    for (const auto& pr : pairs) {
      const Heaplet& tgt = g.pre.spatial[pr.targetIdx];
      if (auto s = matchHeaplet(tgt, pat, ev, sofar)) {
        used[pr.targetIdx] = true;
        matchCallRec(g, pattern, patIdx + 1, ev, used, *s, writes, out);
        used[pr.targetIdx] = false;
        continue;
      }
      // abduction: a mutable caller cell whose value mismatches can be
      // fixed up with a store emitted before the call
      const auto* pc = std::get_if<PointsTo>(&pat);
      const auto* tc = std::get_if<PointsTo>(&tgt);
      if (!pc || !tc || pc->offset != tc->offset) continue;
      if (!tc->perm.isMut()) continue;  // write permission required
      auto s = matchExpr(tc->base, pc->base, ev, sofar);
      if (!s) continue;
      auto sp = permCompatible(tc->perm, pc->perm, ev, *s);
      if (!sp) continue;
      ExprP want = applySubst(*sp, pc->value);
      bool ground = true;
      for (const auto& v : freeVars(want))
        if (ev.count(v) && !sp->contains(v)) { ground = false; break; }
      if (!ground) continue;
      want = applySubst(*sp, want);
      if (exprEq(want, tc->value)) continue;  // handled by exact match above
      bool prog = true;
      for (const auto& v : freeVars(want))
        if (!g.inGamma(v)) { prog = false; break; }
      if (!prog) continue;
      if (!tc->base->isVar() || !g.inGamma(tc->base->name)) continue;
      writes.emplace_back(tc->base->name, tc->offset, want);
      used[pr.targetIdx] = true;
      matchCallRec(g, pattern, patIdx + 1, ev, used, *sp, writes, out);
      used[pr.targetIdx] = false;
      writes.pop_back();
    }
  }

  std::vector<Expansion> genCall(const Goal& g) {
    if (g.callBudget <= 0) return {};
    std::vector<Expansion> out;
    for (const auto& f : callableSpecs_) {
      FreshSpec spec = freshenSpec(f, allGoalVars(g));
      VarSet ev = freeVars(spec.pre);  // the whole renamed pre is existential

      std::vector<Heaplet> pattern = spec.pre.spatial;
      // anchors first: predicates, then blocks, then cells
      std::stable_sort(pattern.begin(), pattern.end(),
                       [](const Heaplet& a, const Heaplet& b) {
                         auto rank = [](const Heaplet& h) {
                           if (std::holds_alternative<PredApp>(h)) return 0;
                           if (std::holds_alternative<Block>(h)) return 1;
                           return 2;
                         };
                         int ra = rank(a), rb = rank(b);
                         if (ra != rb) return ra < rb;
                         return heapletCmp(a, b) < 0;
                       });
      if (pattern.empty()) continue;  // nothing to consume: skip

      std::vector<CallMatch> matches;
      std::vector<bool> used(g.pre.spatial.size(), false);
      std::vector<std::tuple<std::string, int, ExprP>> writes;
      matchCallRec(g, pattern, 0, ev, used, Substitution{}, writes, matches);

      std::stable_sort(matches.begin(), matches.end(),
                       [](const CallMatch& a, const CallMatch& b) {
                         return a.writes.size() < b.writes.size();
                       });

      bool isSelf = f.name == selfSpec_.name;
      for (const auto& m : matches) {
        // termination gate: a recursive call must consume a predicate
        // instance that stems from an unfolding on this path (structural
        // decrease); auxiliary calls fall back to the per-path budget
        bool hasPred = false, hasUnfolded = false;
        for (size_t idx : m.consumed) {
          if (const auto* q = std::get_if<PredApp>(&g.pre.spatial[idx])) {
            hasPred = true;
            if (q->tag >= 1) hasUnfolded = true;
          }
        }
        if (isSelf && !hasUnfolded) continue;
        if (hasPred && !hasUnfolded) continue;

        // substitution must fully instantiate the callee precondition
        bool total = true;
        for (const auto& v : ev)
          if (!m.sub.contains(v)) { total = false; break; }
        if (!total) continue;

        // actual arguments must be program expressions
        std::vector<ExprP> actuals;
        bool argsOk = true;
        for (const auto& fv : spec.formals) {
          ExprP a = m.sub.lookup(fv);
          if (!a) { argsOk = false; break; }
          for (const auto& v : freeVars(a))
            if (!g.inGamma(v)) { argsOk = false; break; }
          if (!argsOk) break;
          actuals.push_back(a);
        }
        if (!argsOk) continue;

        if (solver_.valid(g.pre.pure, applySubst(m.sub, spec.pre.pure)) !=
            Validity::Valid)
          continue;

        Assertion calleePost = applySubst(m.sub, spec.post);
        traceBorrowReturn(g, m, calleePost);

        Goal sub = g;
        sub.callBudget = g.callBudget - 1;
        std::vector<size_t> toErase(m.consumed.begin(), m.consumed.end());
        std::sort(toErase.rbegin(), toErase.rend());
        for (size_t k : toErase)
          sub.pre.spatial.erase(sub.pre.spatial.begin() + static_cast<long>(k));
        for (const auto& h : calleePost.spatial) {
          Heaplet nh = h;
          // call results are opaque: not unfoldable, not consumable as the
          // structurally-decreasing part of a later recursive call
          if (auto* q = std::get_if<PredApp>(&nh)) q->tag = -1;
          sub.pre.spatial.push_back(std::move(nh));
        }
        sub.pre.normalizeOrder();
        sub.pre.pure = simplify(mkConj({sub.pre.pure, calleePost.pure}));
        // the callee's own existentials surface as fresh universal ghosts
        for (const auto& v : freeVars(calleePost))
          if (!sub.inGamma(v)) sub.ghosts.insert(v);

        std::string callee = f.name;
        auto writesCopy = m.writes;
        out.push_back(
            {"Call", {std::move(sub)},
             [callee, actuals, writesCopy](std::vector<StmtP> c) {
               std::vector<StmtP> stmts;
               for (const auto& [b, off, val] : writesCopy)
                 stmts.push_back(Statement::store(b, off, val));
               stmts.push_back(Statement::call(callee, actuals));
               stmts.push_back(c[0]);
               return Statement::seq(std::move(stmts));
             }});
        if (out.size() >= 24) break;
      }
      if (out.size() >= 24) break;
    }
    return out;
  }

  // Borrows Always Return: every caller heaplet consumed with annotation pi
  // reappears in the callee post at the same location with annotation pi, or
  // carried Mut (and may have been deallocated).
  void traceBorrowReturn(const Goal& g, const CallMatch& m,
                         const Assertion& calleePost) {
    for (size_t idx : m.consumed) {
      const Heaplet& h = g.pre.spatial[idx];
      Permission perm = Permission::mut();
      if (const auto* p = std::get_if<PointsTo>(&h)) perm = p->perm;
      else if (const auto* b = std::get_if<Block>(&h)) perm = b->perm;
      else continue;  // predicate annotations checked via their arguments
      if (perm.isMut()) continue;
      bool returned = false;
      for (const auto& hq : calleePost.spatial) {
        if (const auto* p = std::get_if<PointsTo>(&h)) {
          const auto* q = std::get_if<PointsTo>(&hq);
          if (q && q->offset == p->offset && exprEq(q->base, p->base) &&
              q->perm == perm)
            returned = true;
        } else if (const auto* b = std::get_if<Block>(&h)) {
          const auto* q = std::get_if<Block>(&hq);
          if (q && q->size == b->size && exprEq(q->base, b->base) &&
              q->perm == perm)
            returned = true;
        }
      }
      if (!returned) ++stats_.borrowReturnViolations;
    }
  }

  // -------------------------------------------------------------------------

  std::string freshName(const std::string& hint, const VarSet& avoid) {
    std::string base = hint.substr(0, hint.find_first_of("#@"));
    if (base.empty()) base = "v";
    if (!avoid.count(base) && usedNames_.insert(base).second) return base;
    for (int k = 1;; ++k) {
      std::string cand = base + std::to_string(k);
      if (!avoid.count(cand) && usedNames_.insert(cand).second) return cand;
    }
  }

  SpecFile spec_;
  SearchConfig cfg_;
  UnifOrder order_;
  std::vector<Phase> phases_;
  FunctionSpec selfSpec_;
  std::vector<FunctionSpec> callableSpecs_;
  Solver solver_;
  SearchStats stats_;
  std::set<std::string> failedGoals_;
  std::set<std::string> usedNames_;
  long instCounter_ = 0;
  std::chrono::steady_clock::time_point deadline_;
  unsigned budgetTick_ = 0;
};

}  // namespace

SynthResult synthesize(const SpecFile& spec, const SearchConfig& config) {
  Engine engine(spec, config);
  return engine.run();
}

}  // namespace bossl
