#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "bossl/ast.hpp"

using namespace bossl;

namespace {

ExprP lv(const std::string& n) { return Expr::var(n, Sort::Loc); }
ExprP iv(const std::string& n) { return Expr::var(n, Sort::Int); }
ExprP sv(const std::string& n) { return Expr::var(n, Sort::Set); }

Heaplet cell(const std::string& base, int off, ExprP val,
             Permission p = Permission::mut()) {
  return PointsTo{lv(base), off, std::move(val), std::move(p)};
}

}  // namespace

TEST_CASE("freeVars walks pure and spatial parts") {
  // {z <= 100 ; x :-> z}
  Assertion a;
  a.pure = Expr::binOp(Op::Le, iv("z"), Expr::intConst(100));
  a.spatial = {cell("x", 0, iv("z"))};
  CHECK(freeVars(a) == VarSet{"z", "x"});
}

TEST_CASE("freeVars includes borrow parameters of predicate instances") {
  PredApp ls{"ls",
             {lv("x"), sv("S")},
             {Permission::var("a"), Permission::var("b"), Permission::var("c")},
             0};
  CHECK(freeVars(Heaplet{ls}) == VarSet{"x", "S", "a", "b", "c"});
}

TEST_CASE("freeVars of emp is empty") {
  Assertion a;
  a.pure = exprTrue();
  CHECK(freeVars(a).empty());
}

TEST_CASE("applySubst replaces values and simplifiable pures") {
  // [30/z] applied to {z <= 100 ; x :-> z} -> {30 <= 100 ; x :-> 30}
  Assertion a;
  a.pure = Expr::binOp(Op::Le, iv("z"), Expr::intConst(100));
  a.spatial = {cell("x", 0, iv("z"))};
  Substitution s;
  s.bind("z", Expr::intConst(30));
  Assertion b = applySubst(s, a);
  CHECK(show(b.pure) == "(30 <= 100)");
  const auto& pt = std::get<PointsTo>(b.spatial[0]);
  CHECK(exprEq(pt.value, Expr::intConst(30)));
}

TEST_CASE("applySubst instantiates borrow variables with permissions") {
  // [mut/a] applied to y :-> 30 <a>  ->  y :-> 30
  Heaplet h = cell("y", 0, Expr::intConst(30), Permission::var("a"));
  Substitution s;
  s.bindPerm("a", Permission::mut());
  Heaplet out = applySubst(s, h);
  CHECK(std::get<PointsTo>(out).perm.isMut());
}

TEST_CASE("identity substitution leaves assertions unchanged") {
  Assertion a;
  a.pure = Expr::binOp(Op::Eq, sv("S"),
                       Expr::binOp(Op::Union, Expr::setLit({iv("v")}), sv("S1")));
  a.spatial = {cell("x", 1, lv("nxt"), Permission::var("c"))};
  Assertion b = applySubst(Substitution{}, a);
  CHECK(exprEq(a.pure, b.pure));
  CHECK(heapletEq(a.spatial[0], b.spatial[0]));
}

TEST_CASE("existentials are post variables minus gamma and pre") {
  SynthGoal g;
  g.name = "pick";
  g.formals = {{"x", Sort::Loc}, {"y", Sort::Loc}};
  g.pre.pure = exprTrue();
  g.pre.spatial = {cell("x", 0, Expr::intConst(239)),
                   cell("y", 0, Expr::intConst(30), Permission::var("a"))};
  g.post.pure = Expr::binOp(Op::Le, iv("z"), Expr::intConst(100));
  g.post.spatial = {cell("x", 0, iv("z")),
                    cell("y", 0, iv("z"), Permission::var("a"))};
  CHECK(existentials(g) == VarSet{"z"});

  SynthGoal closed = g;
  closed.post = g.pre;
  CHECK(existentials(closed).empty());
}

TEST_CASE("substitution composition agrees with sequential application") {
  std::mt19937 rng(7);
  for (int iter = 0; iter < 200; ++iter) {
    auto rterm = [&](int depth) -> ExprP {
      auto self = [&](int d, auto& rec) -> ExprP {
        switch (rng() % (d > 0 ? 4 : 2)) {
          case 0: return Expr::intConst(static_cast<long>(rng() % 5));
          case 1: {
            std::string names[] = {"a", "b", "c", "d"};
            return iv(names[rng() % 4]);
          }
          case 2:
            return Expr::binOp(Op::Add, rec(d - 1, rec), rec(d - 1, rec));
          default:
            return Expr::binOp(Op::Sub, rec(d - 1, rec), rec(d - 1, rec));
        }
      };
      return self(depth, self);
    };
    // disjoint domains {a} and {b}; ranges avoid both domains
    Substitution s1, s2;
    s1.bind("a", Expr::binOp(Op::Add, iv("c"), Expr::intConst(1)));
    s2.bind("b", iv("d"));
    ExprP t = rterm(3);
    ExprP seq = applySubst(s2, applySubst(s1, t));
    ExprP comp = applySubst(s1.composeWith(s2), t);
    CHECK(exprEq(seq, comp));
  }
}

TEST_CASE("applySubst never invents Imm") {
  Heaplet h = cell("x", 0, iv("v"), Permission::var("a"));
  Substitution s;
  s.bindPerm("a", Permission::var("b"));
  Heaplet out = applySubst(s, h);
  CHECK(std::get<PointsTo>(out).perm == Permission::var("b"));
}

TEST_CASE("freeVars of substituted term is bounded by the classic identity") {
  // fv(sigma t) subset (fv(t) \ dom) u fv(range)
  Assertion a;
  a.pure = Expr::binOp(Op::Eq, iv("u"), iv("w"));
  a.spatial = {cell("x", 0, iv("u"))};
  Substitution s;
  s.bind("u", Expr::binOp(Op::Add, iv("k"), Expr::intConst(2)));
  VarSet before = freeVars(a);
  VarSet after = freeVars(applySubst(s, a));
  for (const auto& v : after) {
    bool allowed = (before.count(v) && v != "u") || v == "k";
    CHECK(allowed);
  }
}

TEST_CASE("predicate well-formedness accepts ls and flags unbound borrows") {
  PredicateDef ls;
  ls.name = "ls";
  ls.params = {{"x", Sort::Loc}, {"S", Sort::Set}};
  ls.permParams = {"a", "b", "c"};
  Clause nil;
  nil.selector = Expr::binOp(Op::Eq, lv("x"), Expr::intConst(0));
  nil.pure = Expr::binOp(Op::Eq, sv("S"), Expr::setLit({}));
  Clause cons;
  cons.selector = Expr::negation(Expr::binOp(Op::Eq, lv("x"), Expr::intConst(0)));
  cons.pure = Expr::binOp(
      Op::Eq, sv("S"), Expr::binOp(Op::Union, Expr::setLit({iv("v")}), sv("S1")));
  cons.spatial = {Block{lv("x"), 2, Permission::var("a")},
                  cell("x", 0, iv("v"), Permission::var("b")),
                  cell("x", 1, lv("nxt"), Permission::var("c")),
                  PredApp{"ls",
                          {lv("nxt"), sv("S1")},
                          {Permission::var("a"), Permission::var("b"),
                           Permission::var("c")},
                          0}};
  ls.clauses = {nil, cons};
  CHECK(checkPredWellFormed(ls).empty());

  PredicateDef bad = ls;
  bad.permParams = {"a", "b"};  // c now unbound
  auto report = checkPredWellFormed(bad);
  REQUIRE(!report.empty());
  CHECK(report[0].message.find("c") != std::string::npos);

  PredicateDef plain = ls;
  plain.permParams.clear();
  for (auto& cl : plain.clauses) {
    for (auto& h : cl.spatial) {
      if (auto* p = std::get_if<PointsTo>(&h)) p->perm = Permission::mut();
      if (auto* b = std::get_if<Block>(&h)) b->perm = Permission::mut();
      if (auto* q = std::get_if<PredApp>(&h)) q->permArgs.clear();
    }
  }
  CHECK(checkPredWellFormed(plain).empty());
}

TEST_CASE("spec well-formedness rejects existential borrows") {
  // readXY-style spec: borrows occur in pre, fine
  FunctionSpec f;
  f.name = "readXY";
  f.formals = {{"x", Sort::Loc}, {"y", Sort::Loc}, {"r", Sort::Loc}};
  f.pre.pure = exprTrue();
  f.pre.spatial = {cell("x", 0, iv("f"), Permission::var("a")),
                   cell("y", 0, iv("g"), Permission::var("b")),
                   cell("r", 0, iv("h"))};
  f.post.pure = exprTrue();
  f.post.spatial = {cell("x", 0, iv("f"), Permission::var("a")),
                    cell("y", 0, iv("g"), Permission::var("b")),
                    cell("r", 0, Expr::binOp(Op::Add, iv("f"), iv("g")))};
  CHECK(checkSpecWellFormed(f).empty());

  FunctionSpec bad = f;
  bad.post.spatial.push_back(cell("x", 1, iv("v"), Permission::var("e")));
  auto report = checkSpecWellFormed(bad);
  REQUIRE(!report.empty());
  CHECK(report[0].message.find("e") != std::string::npos);

  FunctionSpec allMut = f;
  for (auto& h : allMut.pre.spatial) std::get<PointsTo>(h).perm = Permission::mut();
  for (auto& h : allMut.post.spatial) std::get<PointsTo>(h).perm = Permission::mut();
  CHECK(checkSpecWellFormed(allMut).empty());
}
