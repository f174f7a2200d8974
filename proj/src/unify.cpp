#include "bossl/unify.hpp"

#include <algorithm>
#include <stdexcept>

namespace bossl {

UnifOrder unifOrderFromId(int id) {
  if (id < 0 || id >= kNumUnifOrders)
    throw std::invalid_argument("unknown unification order id " +
                                std::to_string(id));
  return static_cast<UnifOrder>(id);
}

std::optional<Substitution> permCompatible(const Permission& target,
                                           const Permission& pattern,
                                           const VarSet& existentials,
                                           const Substitution& sofar) {
  Permission pat = applySubst(sofar, pattern);
  if (pat.isVar() && existentials.count(pat.name)) {
    Substitution out = sofar;
    out.bindPerm(pat.name, target);
    return out;
  }
  // Non-existential pattern annotations must match exactly. A literal Mut
  // pattern never matches a borrow target: the caller lacks write permission.
  if (pat == target) return sofar;
  return std::nullopt;
}

std::optional<Substitution> matchExpr(const ExprP& target, const ExprP& pattern,
                                      const VarSet& existentials,
                                      const Substitution& sofar) {
  ExprP pat = applySubst(sofar, pattern);
  if (pat->isVar() && existentials.count(pat->name) && !sofar.contains(pat->name)) {
    if (pat->sort != target->sort &&
        !((pat->sort == Sort::Loc || pat->sort == Sort::Int) &&
          (target->sort == Sort::Loc || target->sort == Sort::Int)))
      return std::nullopt;
    Substitution out = sofar;
    out.bind(pat->name, target);
    return out;
  }
  if (pat->tag != target->tag) {
    // structural matching only; no theory reasoning here
    if (exprEq(pat, target)) return sofar;
    return std::nullopt;
  }
  switch (pat->tag) {
    case Expr::Tag::IntConst:
    case Expr::Tag::BoolConst:
    case Expr::Tag::Var:
    case Expr::Tag::PermConst:
      return exprEq(pat, target) ? std::optional<Substitution>(sofar)
                                 : std::nullopt;
    case Expr::Tag::Not:
      return matchExpr(target->kids[0], pat->kids[0], existentials, sofar);
    case Expr::Tag::BinOp: {
      if (pat->op != target->op) return std::nullopt;
      auto s1 = matchExpr(target->kids[0], pat->kids[0], existentials, sofar);
      if (!s1) return std::nullopt;
      return matchExpr(target->kids[1], pat->kids[1], existentials, *s1);
    }
    case Expr::Tag::SetLit: {
      if (pat->kids.size() != target->kids.size()) return std::nullopt;
      Substitution cur = sofar;
      for (size_t i = 0; i < pat->kids.size(); ++i) {
        auto s = matchExpr(target->kids[i], pat->kids[i], existentials, cur);
        if (!s) return std::nullopt;
        cur = *s;
      }
      return cur;
    }
  }
  return std::nullopt;
}

std::optional<Substitution> matchHeaplet(const Heaplet& target,
                                         const Heaplet& pattern,
                                         const VarSet& existentials,
                                         const Substitution& sofar) {
  if (target.index() != pattern.index()) return std::nullopt;
  if (const auto* pp = std::get_if<PointsTo>(&pattern)) {
    const auto& tp = std::get<PointsTo>(target);
    if (pp->offset != tp.offset) return std::nullopt;
    auto s = matchExpr(tp.base, pp->base, existentials, sofar);
    if (!s) return std::nullopt;
    s = matchExpr(tp.value, pp->value, existentials, *s);
    if (!s) return std::nullopt;
    return permCompatible(tp.perm, pp->perm, existentials, *s);
  }
  if (const auto* pb = std::get_if<Block>(&pattern)) {
    const auto& tb = std::get<Block>(target);
    if (pb->size != tb.size) return std::nullopt;
    auto s = matchExpr(tb.base, pb->base, existentials, sofar);
    if (!s) return std::nullopt;
    return permCompatible(tb.perm, pb->perm, existentials, *s);
  }
  const auto& pq = std::get<PredApp>(pattern);
  const auto& tq = std::get<PredApp>(target);
  if (pq.name != tq.name || pq.args.size() != tq.args.size() ||
      pq.permArgs.size() != tq.permArgs.size())
    return std::nullopt;
  Substitution cur = sofar;
  for (size_t i = 0; i < pq.args.size(); ++i) {
    auto s = matchExpr(tq.args[i], pq.args[i], existentials, cur);
    if (!s) return std::nullopt;
    cur = *s;
  }
  for (size_t i = 0; i < pq.permArgs.size(); ++i) {
    auto s = permCompatible(tq.permArgs[i], pq.permArgs[i], existentials, cur);
    if (!s) return std::nullopt;
    cur = *s;
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Candidate ordering

namespace {

int kindCost(const Heaplet& h) {
  if (std::holds_alternative<Block>(h)) return 0;
  if (std::holds_alternative<PointsTo>(h)) return 1;
  return 2;
}

int heapletWeight(const Heaplet& h) {
  if (std::holds_alternative<Block>(h)) return 1;
  if (std::holds_alternative<PointsTo>(h)) return 1;
  const auto& q = std::get<PredApp>(h);
  return 2 + static_cast<int>(q.args.size());
}

bool readOnlyAnnotated(const Heaplet& h) {
  if (const auto* p = std::get_if<PointsTo>(&h)) return !p->perm.isMut();
  if (const auto* b = std::get_if<Block>(&h)) return !b->perm.isMut();
  const auto& q = std::get<PredApp>(h);
  for (const auto& pa : q.permArgs)
    if (!pa.isMut()) return true;
  return false;
}

std::string predSortKey(const Heaplet& h) {
  if (const auto* q = std::get_if<PredApp>(&h)) return q->name;
  if (const auto* p = std::get_if<PointsTo>(&h)) return "~pt:" + show(p->base);
  return "~bl:" + show(std::get<Block>(h).base);
}

}  // namespace

std::vector<CandidatePair> rankCandidates(const std::vector<Heaplet>& target,
                                          const std::vector<Heaplet>& pattern,
                                          const std::vector<CandidatePair>& pairs,
                                          UnifOrder strategy) {
  std::vector<CandidatePair> out = pairs;
  auto tieBreak = [&](const CandidatePair& a, const CandidatePair& b) {
    int c = heapletCmp(target[a.targetIdx], target[b.targetIdx]);
    if (c != 0) return c < 0;
    c = heapletCmp(pattern[a.patternIdx], pattern[b.patternIdx]);
    if (c != 0) return c < 0;
    if (a.targetIdx != b.targetIdx) return a.targetIdx < b.targetIdx;
    return a.patternIdx < b.patternIdx;
  };
  auto byKey = [&](auto key) {
    std::stable_sort(out.begin(), out.end(),
                     [&](const CandidatePair& a, const CandidatePair& b) {
                       auto ka = key(a), kb = key(b);
                       if (ka != kb) return ka < kb;
                       return tieBreak(a, b);
                     });
  };
  switch (strategy) {
    case UnifOrder::ReadOnlyFirst:
      byKey([&](const CandidatePair& p) {
        return std::make_pair(readOnlyAnnotated(target[p.targetIdx]) ? 0 : 1,
                              kindCost(target[p.targetIdx]));
      });
      break;
    case UnifOrder::SmallestFirst:
      byKey([&](const CandidatePair& p) {
        return std::make_pair(heapletWeight(target[p.targetIdx]), 0);
      });
      break;
    case UnifOrder::LargestFirst:
      byKey([&](const CandidatePair& p) {
        return std::make_pair(-heapletWeight(target[p.targetIdx]), 0);
      });
      break;
    case UnifOrder::PredNameAsc:
      byKey([&](const CandidatePair& p) {
        return std::make_pair(predSortKey(target[p.targetIdx]), 0);
      });
      break;
    case UnifOrder::PredNameDesc: {
      std::stable_sort(out.begin(), out.end(),
                       [&](const CandidatePair& a, const CandidatePair& b) {
                         auto ka = predSortKey(target[a.targetIdx]);
                         auto kb = predSortKey(target[b.targetIdx]);
                         if (ka != kb) return ka > kb;
                         return tieBreak(a, b);
                       });
      break;
    }
    case UnifOrder::KindCost:
      byKey([&](const CandidatePair& p) {
        return std::make_pair(kindCost(target[p.targetIdx]), 0);
      });
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full-pattern embedding

UnifStream::UnifStream(UnifTask task, UnifOrder order)
    : task_(std::move(task)), order_(order) {
  // order pattern heaplets: structural anchors (predicates, blocks) first,
  // then points-to, largest arity first; keeps the search well-directed
  std::stable_sort(task_.pattern.begin(), task_.pattern.end(),
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
  std::vector<bool> used(task_.target.size(), false);
  search(0, used, Substitution{});
  exhausted_ = true;
}

void UnifStream::search(size_t patIdx, std::vector<bool>& used,
                        const Substitution& sofar) {
  if (results_.size() > 4096) return;  // safety valve
  if (patIdx == task_.pattern.size()) {
    for (const auto& r : results_)
      if (r == sofar) return;
    results_.push_back(sofar);
    return;
  }
  const Heaplet& pat = task_.pattern[patIdx];
  std::vector<CandidatePair> pairs;
  for (size_t t = 0; t < task_.target.size(); ++t) {
    if (used[t]) continue;
    pairs.push_back({t, patIdx});
  }
  pairs = rankCandidates(task_.target, task_.pattern, pairs, order_);
  for (const auto& pr : pairs) {
    auto s = matchHeaplet(task_.target[pr.targetIdx], pat, task_.existentials,
                          sofar);
    if (!s) continue;
    used[pr.targetIdx] = true;
    search(patIdx + 1, used, *s);
    used[pr.targetIdx] = false;
  }
}

std::optional<Substitution> UnifStream::next() {
  if (cursor_ >= results_.size()) return std::nullopt;
  return results_[cursor_++];
}

std::vector<Substitution> UnifStream::drain(size_t limit) {
  std::vector<Substitution> out;
  while (out.size() < limit) {
    auto s = next();
    if (!s) break;
    out.push_back(*s);
  }
  return out;
}

std::vector<Substitution> unify(const UnifTask& task, UnifOrder order) {
  UnifStream stream(task, order);
  return stream.drain();
}

}  // namespace bossl
