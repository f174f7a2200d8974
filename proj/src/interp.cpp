#include "bossl/interp.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace bossl {

// ---------------------------------------------------------------------------
// Execution

namespace {

long evalProgExpr(const std::map<std::string, long>& stack, const ExprP& e) {
  switch (e->tag) {
    case Expr::Tag::IntConst: return e->num;
    case Expr::Tag::BoolConst: return e->bval ? 1 : 0;
    case Expr::Tag::Var: {
      auto it = stack.find(e->name);
      if (it == stack.end())
        throw std::runtime_error("unbound program variable " + e->name);
      return it->second;
    }
    case Expr::Tag::Not: return evalProgExpr(stack, e->kids[0]) == 0 ? 1 : 0;
    case Expr::Tag::BinOp: {
      long l = evalProgExpr(stack, e->kids[0]);
      long r = evalProgExpr(stack, e->kids[1]);
      switch (e->op) {
        case Op::Add: return l + r;
        case Op::Sub: return l - r;
        case Op::Eq: return l == r ? 1 : 0;
        case Op::Le: return l <= r ? 1 : 0;
        case Op::Lt: return l < r ? 1 : 0;
        case Op::And: return (l != 0 && r != 0) ? 1 : 0;
        case Op::Or: return (l != 0 || r != 0) ? 1 : 0;
        case Op::Union: break;
      }
      throw std::runtime_error("set operation in program expression");
    }
    default:
      throw std::runtime_error("bad program expression");
  }
}

long freshBlockBase(const Heap& h, int n) {
  long maxAddr = 1;
  if (!h.empty()) maxAddr = h.rbegin()->first;
  long base = maxAddr + 2;  // leaves the meta cell bl(base) = base-1 free
  (void)n;
  return base;
}

}  // namespace

StepOutcome step(ConcreteState& st, const ProcDict& procs) {
  while (!st.callStack.empty() && st.callStack.back().conts.empty())
    st.callStack.pop_back();
  if (st.callStack.empty()) return {StepOutcome::Kind::Done, {}};

  auto& frame = st.callStack.back();
  StmtP s = frame.conts.back();
  frame.conts.pop_back();

  auto fault = [&](const std::string& msg) {
    return StepOutcome{StepOutcome::Kind::Fault, msg};
  };

  try {
    switch (s->tag) {
      case Statement::Tag::Skip:
        break;
      case Statement::Tag::Error:
        return fault("error statement reached");
      case Statement::Tag::Seq:
        for (auto it = s->kids.rbegin(); it != s->kids.rend(); ++it)
          frame.conts.push_back(*it);
        break;
      case Statement::Tag::Load: {
        auto it = frame.stack.find(s->base);
        if (it == frame.stack.end()) return fault("unbound base " + s->base);
        long addr = it->second + s->offset;
        auto h = st.heap.find(addr);
        if (h == st.heap.end())
          return fault("read outside heap at " + std::to_string(addr));
        frame.stack[s->dst] = h->second;
        break;
      }
      case Statement::Tag::Store: {
        auto it = frame.stack.find(s->base);
        if (it == frame.stack.end()) return fault("unbound base " + s->base);
        long addr = it->second + s->offset;
        if (!st.heap.count(addr))
          return fault("write outside heap at " + std::to_string(addr));
        st.heap[addr] = evalProgExpr(frame.stack, s->expr);
        st.writeTrace.push_back(addr);
        break;
      }
      case Statement::Tag::Malloc: {
        long base = freshBlockBase(st.heap, s->size);
        st.heap[blockMeta(base)] = s->size;
        for (int i = 0; i < s->size; ++i) st.heap[base + i] = 0;
        frame.stack[s->dst] = base;
        break;
      }
      case Statement::Tag::Free: {
        auto it = frame.stack.find(s->base);
        if (it == frame.stack.end()) return fault("unbound base " + s->base);
        long l = it->second;
        auto meta = st.heap.find(blockMeta(l));
        if (meta == st.heap.end())
          return fault("free of non-block address " + std::to_string(l));
        long n = meta->second;
        for (long i = 0; i < n; ++i)
          if (!st.heap.count(l + i))
            return fault("free with missing cell " + std::to_string(l + i));
        st.heap.erase(blockMeta(l));
        for (long i = 0; i < n; ++i) st.heap.erase(l + i);
        break;
      }
      case Statement::Tag::Call: {
        auto p = procs.find(s->callee);
        if (p == procs.end()) return fault("unknown procedure " + s->callee);
        const Procedure& callee = p->second;
        if (callee.formals.size() != s->args.size())
          return fault("arity mismatch calling " + s->callee);
        ConcreteState::Frame inner;
        for (size_t i = 0; i < s->args.size(); ++i)
          inner.stack[callee.formals[i].first] =
              evalProgExpr(frame.stack, s->args[i]);
        inner.conts.push_back(callee.body);
        st.callStack.push_back(std::move(inner));
        break;
      }
      case Statement::Tag::If: {
        long c = evalProgExpr(frame.stack, s->expr);
        frame.conts.push_back(c != 0 ? s->kids[0] : s->kids[1]);
        break;
      }
    }
  } catch (const std::exception& ex) {
    return fault(ex.what());
  }
  return {StepOutcome::Kind::Progress, {}};
}

RunResult run(const Procedure& proc, const std::map<std::string, long>& args,
              Heap heap, const ProcDict& procs, long fuel) {
  ConcreteState st;
  st.heap = std::move(heap);
  ConcreteState::Frame init;
  init.stack = args;
  init.conts.push_back(proc.body);
  st.callStack.push_back(std::move(init));

  RunResult res;
  while (res.steps < fuel) {
    StepOutcome out = step(st, procs);
    ++res.steps;
    if (out.kind == StepOutcome::Kind::Done) {
      res.ok = true;
      break;
    }
    if (out.kind == StepOutcome::Kind::Fault) {
      res.fault = out.fault;
      break;
    }
  }
  if (!res.ok && res.fault.empty()) res.fault = "fuel exhausted";
  res.heap = std::move(st.heap);
  res.writeTrace = std::move(st.writeTrace);
  return res;
}

// ---------------------------------------------------------------------------
// Satisfaction

namespace {

bool evaluable(const Valuation& env, const ExprP& e) {
  for (const auto& v : freeVars(e))
    if (!env.count(v)) return false;
  return true;
}

std::optional<Permission> groundPerm(const Valuation& env, const Permission& p) {
  if (!p.isVar()) return p;
  auto it = env.find(p.name);
  if (it == env.end() || it->second.sort != Sort::Perm) return std::nullopt;
  return it->second.perm;
}

struct SatItem {
  Heaplet h;
  int depth;
};

class SatEngine {
 public:
  SatEngine(const SpecFile& ctx, const std::optional<std::set<long>>& ro)
      : ctx_(ctx), ro_(ro) {}

  bool solve(Heap heap, Valuation env, std::vector<SatItem> todo,
             std::vector<ExprP> pending) {
    if (++steps_ > 400000) return false;
    // deterministic phase: consume cells/blocks, check resolved pures
    for (;;) {
      bool progress = false;
      // resolved pending constraints
      for (size_t i = 0; i < pending.size();) {
        if (evaluable(env, pending[i])) {
          try {
            if (!evalExpr(env, pending[i]).b) return false;
          } catch (const std::exception&) {
            return false;
          }
          pending.erase(pending.begin() + static_cast<long>(i));
          progress = true;
        } else {
          ++i;
        }
      }
      // consumable cells and blocks
      for (size_t i = 0; i < todo.size();) {
        const Heaplet& h = todo[i].h;
        bool consumed = false;
        if (const auto* p = std::get_if<PointsTo>(&h)) {
          if (evaluable(env, p->base)) {
            long addr = evalExpr(env, p->base).num + p->offset;
            auto cell = heap.find(addr);
            if (cell == heap.end()) return false;
            if (!checkRo(env, addr, p->perm)) return false;
            if (evaluable(env, p->value)) {
              if (evalExpr(env, p->value).num != cell->second) return false;
            } else if (p->value->isVar()) {
              env[p->value->name] =
                  PValue::ofInt(cell->second, p->value->sort);
            } else {
              ++i;
              continue;  // compound unevaluated value: retry later
            }
            heap.erase(cell);
            consumed = true;
          }
        } else if (const auto* b = std::get_if<Block>(&h)) {
          if (evaluable(env, b->base)) {
            long meta = blockMeta(evalExpr(env, b->base).num);
            auto cell = heap.find(meta);
            if (cell == heap.end() || cell->second != b->size) return false;
            if (!checkRo(env, meta, b->perm)) return false;
            heap.erase(cell);
            consumed = true;
          }
        }
        if (consumed) {
          todo.erase(todo.begin() + static_cast<long>(i));
          progress = true;
        } else {
          ++i;
        }
      }
      if (!progress) break;
    }

    // branch on a predicate instance whose arguments are all evaluable
    for (size_t i = 0; i < todo.size(); ++i) {
      const auto* q = std::get_if<PredApp>(&todo[i].h);
      if (!q) continue;
      bool argsReady = true;
      for (const auto& a : q->args) argsReady &= evaluable(env, a);
      if (!argsReady) continue;
      if (todo[i].depth <= 0) return false;
      const PredicateDef* def = ctx_.findPred(q->name);
      if (!def) return false;
      std::vector<SatItem> rest = todo;
      rest.erase(rest.begin() + static_cast<long>(i));
      for (const auto& clause : def->clauses)
        if (tryClause(*def, clause, *q, todo[i].depth, heap, env, rest, pending))
          return true;
      return false;
    }

    // solve a single-unknown pending constraint
    for (size_t i = 0; i < pending.size(); ++i) {
      auto unknowns = unboundVars(env, pending[i]);
      if (unknowns.size() != 1) continue;
      const std::string& u = *unknowns.begin();
      for (const auto& cand : candidates(heap, env, pending[i], u)) {
        Valuation env2 = env;
        env2[u] = cand;
        try {
          if (!evalExpr(env2, pending[i]).b) continue;
        } catch (const std::exception&) {
          continue;
        }
        std::vector<ExprP> pend2 = pending;
        pend2.erase(pend2.begin() + static_cast<long>(i));
        if (solve(heap, env2, todo, pend2)) return true;
      }
      return false;
    }

    if (todo.empty() && pending.empty()) return heap.empty();
    return false;
  }

 private:
  bool checkRo(const Valuation& env, long addr, const Permission& perm) {
    if (!ro_) return true;
    auto g = groundPerm(env, perm);
    if (!g) return false;  // permissions must be ground when R is checked
    return (ro_->count(addr) > 0) == g->isImm();
  }

  std::set<std::string> unboundVars(const Valuation& env, const ExprP& e) {
    std::set<std::string> out;
    for (const auto& v : freeVars(e))
      if (!env.count(v)) out.insert(v);
    return out;
  }

  // Candidate values for the single unknown of a pending constraint.
  std::vector<PValue> candidates(const Heap& heap, const Valuation& env,
                                 const ExprP& c, const std::string& u) {
    std::vector<PValue> out;
    Sort us = Sort::Int;
    {
      std::map<std::string, Sort> vs;
      collectVars(c, vs);
      auto it = vs.find(u);
      if (it != vs.end()) us = it->second;
    }
    if (c->tag == Expr::Tag::BinOp && c->op == Op::Eq) {
      for (int side = 0; side < 2; ++side) {
        const ExprP& lhs = c->kids[side];
        const ExprP& rhs = c->kids[1 - side];
        if (!evaluable(env, rhs)) continue;
        PValue rv = evalExpr(env, rhs);
        if (lhs->isVar() && lhs->name == u) {
          out.push_back(rv);
          return out;
        }
        if (us == Sort::Int || us == Sort::Loc) {
          // linear inversion with a +/-1 coefficient
          long coeff = 0, rest = 0;
          if (linearSplit(env, lhs, u, coeff, rest) &&
              (coeff == 1 || coeff == -1)) {
            out.push_back(PValue::ofInt((rv.num - rest) / coeff, us));
            return out;
          }
        }
        if (us == Sort::Set && lhs->tag == Expr::Tag::BinOp &&
            lhs->op == Op::Union) {
          // A u u == S: candidates between S\A and S
          std::vector<ExprP> parts = unionParts(lhs);
          std::set<long> known;
          bool ok = true;
          for (const auto& part : parts) {
            if (part->isVar() && part->name == u) continue;
            if (!evaluable(env, part)) { ok = false; break; }
            auto pv = evalExpr(env, part);
            if (pv.sort == Sort::Set)
              known.insert(pv.elems.begin(), pv.elems.end());
            else
              known.insert(pv.num);
          }
          if (ok) {
            std::set<long> target = rv.elems;
            bool sub = std::includes(target.begin(), target.end(),
                                     known.begin(), known.end());
            if (sub) {
              std::set<long> base;
              for (long x : target)
                if (!known.count(x)) base.insert(x);
              std::vector<long> extra(known.begin(), known.end());
              size_t cap = extra.size() > 4 ? 4 : extra.size();
              for (size_t mask = 0; mask < (size_t(1) << cap); ++mask) {
                std::set<long> cand = base;
                for (size_t b = 0; b < cap; ++b)
                  if (mask & (size_t(1) << b)) cand.insert(extra[b]);
                out.push_back(PValue::ofSet(cand));
              }
            }
            return out;
          }
        }
      }
    }
    // fallback enumeration for ints
    if (us == Sort::Int || us == Sort::Loc) {
      std::set<long> dom;
      for (long v = 0; v <= 9; ++v) dom.insert(v);
      for (const auto& [a, v] : heap) dom.insert(v);
      for (long v : dom) out.push_back(PValue::ofInt(v, us));
    } else if (us == Sort::Set) {
      out.push_back(PValue::ofSet({}));
    }
    return out;
  }

  static std::vector<ExprP> unionParts(const ExprP& e) {
    if (e->tag == Expr::Tag::BinOp && e->op == Op::Union) {
      auto l = unionParts(e->kids[0]);
      auto r = unionParts(e->kids[1]);
      l.insert(l.end(), r.begin(), r.end());
      return l;
    }
    return {e};
  }

  static bool linearSplit(const Valuation& env, const ExprP& e,
                          const std::string& u, long& coeff, long& rest) {
    if (e->isVar() && e->name == u) {
      coeff += 1;
      return true;
    }
    if (evaluable(env, e)) {
      auto v = evalExpr(env, e);
      if (v.sort == Sort::Set || v.sort == Sort::Perm) return false;
      rest += v.num;
      return true;
    }
    if (e->tag == Expr::Tag::BinOp && (e->op == Op::Add || e->op == Op::Sub)) {
      long c2 = 0, r2 = 0;
      if (!linearSplit(env, e->kids[0], u, coeff, rest)) return false;
      if (!linearSplit(env, e->kids[1], u, c2, r2)) return false;
      long sign = e->op == Op::Add ? 1 : -1;
      coeff += sign * c2;
      rest += sign * r2;
      return true;
    }
    return false;
  }

  bool tryClause(const PredicateDef& def, const Clause& clause,
                 const PredApp& app, int depth, const Heap& heap,
                 const Valuation& env, const std::vector<SatItem>& rest,
                 const std::vector<ExprP>& pending) {
    // rename params and clause locals apart, then bind params to arg values
    Substitution rename;
    Valuation env2 = env;
    std::map<std::string, Sort> clauseVars;
    collectVars(clause.selector, clauseVars);
    collectVars(clause.pure, clauseVars);
    for (const auto& h : clause.spatial) collectVars(h, clauseVars);
    for (const auto& [n, s] : def.params) clauseVars.emplace(n, s);

    for (const auto& [v, s] : clauseVars) {
      std::string fresh = v + "#" + std::to_string(freshCounter_);
      rename.bind(v, Expr::var(fresh, s));
    }
    ++freshCounter_;

    for (size_t i = 0; i < def.params.size(); ++i) {
      auto renamed = rename.lookup(def.params[i].first);
      env2[renamed->name] = evalExpr(env, app.args[i]);
    }
    for (size_t i = 0; i < def.permParams.size() && i < app.permArgs.size(); ++i) {
      auto g = groundPerm(env, app.permArgs[i]);
      std::string pname = def.permParams[i];
      auto renamed = rename.lookup(pname);
      std::string key = renamed ? renamed->name : pname;
      env2[key] = PValue::ofPerm(g ? *g : Permission::mut());
    }

    std::vector<SatItem> todo2 = rest;
    for (const auto& h : clause.spatial)
      todo2.push_back({applySubst(rename, h), depth - 1});
    std::vector<ExprP> pend2 = pending;
    pend2.push_back(applySubst(rename, clause.selector));
    pend2.push_back(applySubst(rename, clause.pure));
    return solve(heap, env2, todo2, pend2);
  }

  const SpecFile& ctx_;
  const std::optional<std::set<long>>& ro_;
  long freshCounter_ = 0;
  long steps_ = 0;
};

}  // namespace

bool satisfies(const Heap& heap, const Valuation& env,
               const std::optional<std::set<long>>& ro, const Assertion& a,
               const SpecFile& ctx, int depth) {
  SatEngine engine(ctx, ro);
  std::vector<SatItem> todo;
  for (const auto& h : a.spatial) todo.push_back({h, depth});
  return engine.solve(heap, env, std::move(todo), {a.pure});
}

// ---------------------------------------------------------------------------
// Random models

namespace {

class ModelBuilder {
 public:
  ModelBuilder(const SpecFile& ctx, const ModelBounds& bounds, std::mt19937& rng)
      : ctx_(ctx), bounds_(bounds), rng_(rng) {}

  std::optional<Model> build(const Assertion& a) {
    for (int attempt = 0; attempt < 40; ++attempt) {
      if (auto m = tryBuild(a)) return m;
    }
    return std::nullopt;
  }

 private:
  std::optional<Model> tryBuild(const Assertion& a) {
    model_ = Model{};
    cursor_ = 2;
    fresh_ = 0;

    std::map<std::string, Sort> vars;
    collectVars(a, vars);
    for (const auto& [v, s] : vars)
      if (s == Sort::Perm)
        model_.env[v] = PValue::ofPerm(
            (bounds_.forceImmBorrows || coin(2)) ? Permission::imm()
                                                 : Permission::mut());

    // lay out predicates first (they bind root ghosts), then blocks, cells
    std::vector<size_t> order;
    for (size_t i = 0; i < a.spatial.size(); ++i)
      if (std::holds_alternative<PredApp>(a.spatial[i])) order.push_back(i);
    for (size_t i = 0; i < a.spatial.size(); ++i)
      if (std::holds_alternative<Block>(a.spatial[i])) order.push_back(i);
    for (size_t i = 0; i < a.spatial.size(); ++i)
      if (std::holds_alternative<PointsTo>(a.spatial[i])) order.push_back(i);

    model_.footprints.assign(a.spatial.size(), {});
    for (size_t idx : order) {
      std::set<long>& fp = model_.footprints[idx];
      if (!layoutHeaplet(a.spatial[idx], bounds_.maxUnfold, fp)) return std::nullopt;
    }

    // bind leftover ghosts from pure equations, then sample the rest
    auto pures = conjuncts(a.pure);
    for (int pass = 0; pass < 8; ++pass) {
      bool changed = false;
      for (const auto& c : pures) {
        auto unknowns = unbound(c);
        if (unknowns.size() != 1) continue;
        if (solveSingle(c, *unknowns.begin())) changed = true;
      }
      if (!changed) break;
    }
    for (const auto& [v, s] : vars) {
      if (model_.env.count(v)) continue;
      switch (s) {
        case Sort::Int: model_.env[v] = PValue::ofInt(sampleValue()); break;
        case Sort::Loc: model_.env[v] = PValue::ofInt(0, Sort::Loc); break;
        case Sort::Set: model_.env[v] = PValue::ofSet({}); break;
        case Sort::Bool: model_.env[v] = PValue::ofBool(coin(2)); break;
        case Sort::Perm: break;
      }
    }
    try {
      if (!evalExpr(model_.env, a.pure).b) return std::nullopt;
    } catch (const std::exception&) {
      return std::nullopt;
    }
    if (!satisfies(model_.heap, model_.env, model_.ro, a, ctx_,
                   bounds_.maxUnfold + 3))
      return std::nullopt;
    return model_;
  }

  bool coin(int sides) { return rng_() % static_cast<unsigned>(sides) == 0; }
  long sampleValue() {
    auto span = static_cast<unsigned long>(bounds_.valueHi - bounds_.valueLo + 1);
    return bounds_.valueLo + static_cast<long>(rng_() % span);
  }

  std::set<std::string> unbound(const ExprP& e) {
    std::set<std::string> out;
    for (const auto& v : freeVars(e))
      if (!model_.env.count(v)) out.insert(v);
    return out;
  }

  bool solveSingle(const ExprP& c, const std::string& u) {
    if (c->tag != Expr::Tag::BinOp || c->op != Op::Eq) return false;
    for (int side = 0; side < 2; ++side) {
      const ExprP& lhs = c->kids[side];
      const ExprP& rhs = c->kids[1 - side];
      if (lhs->isVar() && lhs->name == u) {
        for (const auto& v : freeVars(rhs))
          if (!model_.env.count(v)) return false;
        model_.env[u] = evalExpr(model_.env, rhs);
        return true;
      }
    }
    return false;
  }

  long allocCell() {
    long addr = cursor_;
    cursor_ += 2;
    return addr;
  }

  long allocBlock(int size) {
    long base = cursor_ + 1;  // meta sits at bl(base) = cursor_
    cursor_ += size + 2;
    return base;
  }

  void put(long addr, long val, const Permission& permGround,
           std::set<long>& fp) {
    model_.heap[addr] = val;
    fp.insert(addr);
    if (permGround.isImm()) model_.ro.insert(addr);
  }

  std::optional<Permission> ground(const Permission& p) {
    return groundPerm(model_.env, p);
  }

  bool layoutHeaplet(const Heaplet& h, int budget, std::set<long>& fp) {
    if (const auto* p = std::get_if<PointsTo>(&h)) {
      long base;
      if (!resolveBase(p->base, p->offset == 0, base)) return false;
      long addr = base + p->offset;
      if (model_.heap.count(addr)) return false;
      long val;
      if (evaluable(model_.env, p->value)) {
        val = evalExpr(model_.env, p->value).num;
      } else if (p->value->isVar()) {
        val = p->value->sort == Sort::Loc ? 0 : sampleValue();
        model_.env[p->value->name] = PValue::ofInt(val, p->value->sort);
      } else {
        return false;
      }
      auto g = ground(p->perm);
      if (!g) return false;
      put(addr, val, *g, fp);
      return true;
    }
    if (const auto* b = std::get_if<Block>(&h)) {
      long base;
      if (!resolveBase(b->base, /*mayAlloc=*/false, base)) {
        // unbound block base: allocate the record, cells filled by siblings
        if (!b->base->isVar()) return false;
        base = allocBlock(b->size);
        model_.env[b->base->name] = PValue::ofInt(base, Sort::Loc);
      }
      long meta = blockMeta(base);
      if (model_.heap.count(meta)) return false;
      auto g = ground(b->perm);
      if (!g) return false;
      put(meta, b->size, *g, fp);
      return true;
    }
    const auto& q = std::get<PredApp>(h);
    return layoutPred(q, budget, fp);
  }

  bool resolveBase(const ExprP& base, bool mayAlloc, long& out) {
    if (evaluable(model_.env, base)) {
      out = evalExpr(model_.env, base).num;
      return true;
    }
    if (base->isVar() && mayAlloc) {
      out = allocCell();
      model_.env[base->name] = PValue::ofInt(out, Sort::Loc);
      return true;
    }
    return false;
  }

  bool layoutPred(const PredApp& app, int budget, std::set<long>& fp) {
    const PredicateDef* def = ctx_.findPred(app.name);
    if (!def) return false;

    std::vector<Permission> permVals;
    for (const auto& pa : app.permArgs) {
      auto g = ground(pa);
      if (!g) return false;
      permVals.push_back(*g);
    }

    // classify clauses; a clause mentioning any predicate instance is
    // considered recursive for the budget policy
    std::vector<size_t> baseClauses, recClauses;
    for (size_t k = 0; k < def->clauses.size(); ++k) {
      bool rec = false;
      for (const auto& sh : def->clauses[k].spatial)
        if (std::holds_alternative<PredApp>(sh)) rec = true;
      (rec ? recClauses : baseClauses).push_back(k);
    }
    std::vector<size_t> pick;
    bool preferRec = budget > 0 && !recClauses.empty() && !coin(3);
    if (preferRec) {
      pick = recClauses;
      pick.insert(pick.end(), baseClauses.begin(), baseClauses.end());
    } else {
      pick = baseClauses;
      if (budget > 0)
        pick.insert(pick.end(), recClauses.begin(), recClauses.end());
    }

    for (size_t k : pick) {
      Model saveModel = model_;
      long saveCursor = cursor_;
      if (tryLayoutClause(*def, def->clauses[k], app, permVals, budget, fp))
        return true;
      model_ = std::move(saveModel);
      cursor_ = saveCursor;
    }
    return false;
  }

  bool tryLayoutClause(const PredicateDef& def, const Clause& clause,
                       const PredApp& app, const std::vector<Permission>& perms,
                       int budget, std::set<long>& fp) {
    // rename clause variables apart
    Substitution rename;
    std::map<std::string, Sort> clauseVars;
    collectVars(clause.selector, clauseVars);
    collectVars(clause.pure, clauseVars);
    for (const auto& h : clause.spatial) collectVars(h, clauseVars);
    for (const auto& [n, s] : def.params) clauseVars.emplace(n, s);
    for (const auto& pp : def.permParams) clauseVars.emplace(pp, Sort::Perm);

    for (const auto& [v, s] : clauseVars) {
      std::string freshName = v + "@" + std::to_string(fresh_);
      rename.bind(v, Expr::var(freshName, s));
    }
    ++fresh_;

    // connect parameters with instance arguments: bound args propagate in,
    // unbound argument variables are bound after layout
    std::vector<std::pair<std::string, std::string>> outParams;  // param->argvar
    for (size_t i = 0; i < def.params.size(); ++i) {
      std::string pName = rename.lookup(def.params[i].first)->name;
      const ExprP& arg = app.args[i];
      if (evaluable(model_.env, arg)) {
        model_.env[pName] = evalExpr(model_.env, arg);
      } else if (arg->isVar()) {
        outParams.emplace_back(pName, arg->name);
      } else {
        return false;
      }
    }
    for (size_t i = 0; i < def.permParams.size(); ++i) {
      std::string pName = rename.lookup(def.permParams[i])->name;
      model_.env[pName] = PValue::ofPerm(perms[i]);
    }

    ExprP selector = applySubst(rename, clause.selector);
    ExprP pure = applySubst(rename, clause.pure);
    std::vector<Heaplet> spatial;
    for (const auto& h : clause.spatial) spatial.push_back(applySubst(rename, h));

    // blocks first (they bind bases), then nested predicates, then cells
    auto rank = [](const Heaplet& h) {
      if (std::holds_alternative<Block>(h)) return 0;
      if (std::holds_alternative<PredApp>(h)) return 1;
      return 2;
    };
    std::stable_sort(spatial.begin(), spatial.end(),
                     [&](const Heaplet& x, const Heaplet& y) {
                       return rank(x) < rank(y);
                     });
    for (const auto& h : spatial)
      if (!layoutHeaplet(h, budget - 1, fp)) return false;

    // selector and clause pure: solve single unknowns, then verify
    std::vector<ExprP> constraints = conjuncts(selector);
    for (const auto& c : conjuncts(pure)) constraints.push_back(c);
    for (int pass = 0; pass < 6; ++pass) {
      bool changed = false;
      for (const auto& c : constraints) {
        auto u = unbound(c);
        if (u.size() == 1 && solveSingle(c, *u.begin())) changed = true;
      }
      if (!changed) break;
    }
    for (const auto& c : constraints) {
      for (const auto& v : unbound(c)) {
        // leftover unknowns (e.g. a base-clause root) default per sort
        std::map<std::string, Sort> vs;
        collectVars(c, vs);
        switch (vs[v]) {
          case Sort::Set: model_.env[v] = PValue::ofSet({}); break;
          case Sort::Loc: model_.env[v] = PValue::ofInt(0, Sort::Loc); break;
          default: model_.env[v] = PValue::ofInt(sampleValue()); break;
        }
      }
      try {
        if (!evalExpr(model_.env, c).b) return false;
      } catch (const std::exception&) {
        return false;
      }
    }

    // propagate values out to unbound instance-argument variables
    for (const auto& [pName, argVar] : outParams) {
      auto it = model_.env.find(pName);
      if (it == model_.env.end()) return false;
      model_.env[argVar] = it->second;
    }
    return true;
  }

  const SpecFile& ctx_;
  const ModelBounds& bounds_;
  std::mt19937& rng_;
  Model model_;
  long cursor_ = 2;
  long fresh_ = 0;
};

}  // namespace

std::optional<Model> randomModel(const Assertion& a, const SpecFile& ctx,
                                 const ModelBounds& bounds, std::mt19937& rng) {
  ModelBuilder builder(ctx, bounds, rng);
  return builder.build(a);
}

std::string describeModel(const Model& m) {
  std::ostringstream os;
  for (const auto& [addr, val] : m.heap) os << addr << ": " << val << "\n";
  os << "RO: {";
  bool first = true;
  for (long l : m.ro) {
    if (!first) os << ", ";
    first = false;
    os << l;
  }
  os << "}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Validation

namespace {

// Bounded search over existential valuations: values drawn from the final
// heap plus 0..9.
bool postHolds(const SpecFile& ctx, const SynthGoal& spec, const Valuation& base,
               const Heap& finalHeap, const std::optional<std::set<long>>& ro,
               int depth) {
  VarSet evs = existentials(spec);
  std::vector<std::string> evVars;
  std::map<std::string, Sort> postSorts;
  collectVars(spec.post, postSorts);
  for (const auto& v : evs)
    if (postSorts.count(v) && postSorts[v] != Sort::Perm) evVars.push_back(v);

  std::vector<long> domain;
  {
    std::set<long> d;
    for (long v = 0; v <= 9; ++v) d.insert(v);
    for (const auto& [a, v] : finalHeap) {
      d.insert(v);
      d.insert(a);
    }
    domain.assign(d.begin(), d.end());
  }

  size_t combos = 1;
  for (size_t i = 0; i < evVars.size(); ++i) {
    combos *= domain.size();
    if (combos > 2'000'000) return false;  // out of search budget
  }
  std::vector<size_t> idx(evVars.size(), 0);
  for (;;) {
    Valuation env = base;
    for (size_t i = 0; i < evVars.size(); ++i) {
      Sort s = postSorts[evVars[i]];
      if (s == Sort::Set)
        env[evVars[i]] = PValue::ofSet({});
      else
        env[evVars[i]] = PValue::ofInt(domain[idx[i]], s);
    }
    if (satisfies(finalHeap, env, ro, spec.post, ctx, depth)) return true;
    size_t k = 0;
    while (k < idx.size() && ++idx[k] == domain.size()) idx[k++] = 0;
    if (idx.empty() || k == idx.size()) break;
  }
  return false;
}

ValidationReport runSamples(const SpecFile& ctx, const SynthGoal& spec,
                            const Procedure& proc, int samples, unsigned seed,
                            bool checkRo, bool forceImm) {
  ValidationReport report;
  std::mt19937 rng(seed);
  ProcDict dict{{proc.name, proc}};
  ModelBounds bounds;
  bounds.forceImmBorrows = forceImm;

  for (int i = 0; i < samples; ++i) {
    auto model = randomModel(spec.pre, ctx, bounds, rng);
    if (!model) continue;  // bounds admit no model for this draw
    ++report.samples;

    std::map<std::string, long> args;
    for (const auto& [f, s] : spec.formals) {
      auto it = model->env.find(f);
      args[f] = it == model->env.end() ? 0 : it->second.num;
    }
    RunResult res = run(proc, args, model->heap, dict);
    auto failWith = [&](const std::string& why) {
      ++report.failures;
      report.pass = false;
      if (report.notes.size() < 8)
        report.notes.push_back(why + "\nmodel:\n" + describeModel(*model));
    };
    if (!res.ok) {
      failWith("execution fault: " + res.fault);
      continue;
    }
    if (checkRo) {
      bool roOk = true;
      for (long l : model->ro) {
        auto it = res.heap.find(l);
        if (it == res.heap.end() || it->second != model->heap.at(l)) {
          roOk = false;
          break;
        }
      }
      if (!roOk) {
        std::ostringstream trace;
        trace << "read-only location changed; write trace:";
        for (long w : res.writeTrace) trace << " " << w;
        failWith(trace.str());
        continue;
      }
    }
    if (!postHolds(ctx, spec, model->env, res.heap, std::nullopt,
                   bounds.maxUnfold + 3)) {
      failWith("postcondition not satisfiable under bounded existential search");
    }
  }
  if (report.samples == 0) {
    report.pass = false;
    report.notes.push_back("no models generated for the precondition");
  }
  return report;
}

}  // namespace

ValidationReport validateProcedure(const SpecFile& ctx, const SynthGoal& spec,
                                   const Procedure& proc, int samples,
                                   unsigned seed) {
  return runSamples(ctx, spec, proc, samples, seed, /*checkRo=*/false,
                    /*forceImm=*/false);
}

ValidationReport checkRoPreservation(const SpecFile& ctx, const SynthGoal& spec,
                                     const Procedure& proc, int samples,
                                     unsigned seed, bool forceImmBorrows) {
  return runSamples(ctx, spec, proc, samples, seed, /*checkRo=*/true,
                    forceImmBorrows);
}

}  // namespace bossl
