#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bossl/parser.hpp"
#include "bossl/program.hpp"

using namespace bossl;

namespace {

std::string corpusDir() {
  const char* env = std::getenv("BOSSL_CORPUS");
  return env ? env : "corpus";
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool assertionEq(const Assertion& a, const Assertion& b) {
  if (!exprEq(a.pure, b.pure)) return false;
  if (a.spatial.size() != b.spatial.size()) return false;
  for (size_t i = 0; i < a.spatial.size(); ++i)
    if (!heapletEq(a.spatial[i], b.spatial[i])) return false;
  return true;
}

bool specEq(const SpecFile& a, const SpecFile& b) {
  if (a.predicates.size() != b.predicates.size()) return false;
  for (size_t i = 0; i < a.predicates.size(); ++i) {
    const auto& pa = a.predicates[i];
    const auto& pb = b.predicates[i];
    if (pa.name != pb.name || pa.params != pb.params ||
        pa.permParams != pb.permParams ||
        pa.clauses.size() != pb.clauses.size())
      return false;
    for (size_t k = 0; k < pa.clauses.size(); ++k) {
      if (!exprEq(pa.clauses[k].selector, pb.clauses[k].selector)) return false;
      if (!exprEq(pa.clauses[k].pure, pb.clauses[k].pure)) return false;
      if (pa.clauses[k].spatial.size() != pb.clauses[k].spatial.size())
        return false;
      for (size_t j = 0; j < pa.clauses[k].spatial.size(); ++j)
        if (!heapletEq(pa.clauses[k].spatial[j], pb.clauses[k].spatial[j]))
          return false;
    }
  }
  if (a.functions.size() != b.functions.size()) return false;
  for (size_t i = 0; i < a.functions.size(); ++i) {
    if (a.functions[i].name != b.functions[i].name) return false;
    if (!assertionEq(a.functions[i].pre, b.functions[i].pre)) return false;
    if (!assertionEq(a.functions[i].post, b.functions[i].post)) return false;
  }
  return a.goal.name == b.goal.name && a.goal.formals == b.goal.formals &&
         assertionEq(a.goal.pre, b.goal.pre) &&
         assertionEq(a.goal.post, b.goal.post);
}

}  // namespace

TEST_CASE("pick spec parses with the expected existential") {
  SpecFile f = parseSpec(slurp(corpusDir() + "/pick.bossl"));
  CHECK(f.goal.name == "pick");
  CHECK(existentials(f.goal) == VarSet{"z"});
  REQUIRE(f.goal.pre.spatial.size() == 2);
}

TEST_CASE("ls predicate parses with two clauses and three borrow params") {
  SpecFile f = parseSpec(slurp(corpusDir() + "/listcopy.bossl"));
  const PredicateDef* ls = f.findPred("ls");
  REQUIRE(ls != nullptr);
  CHECK(ls->clauses.size() == 2);
  CHECK(ls->permParams == std::vector<std::string>{"a", "b", "c"});
  // listcopy's record address in the post is existential
  VarSet ev = existentials(f.goal);
  CHECK(ev.count("y"));
}

TEST_CASE("empty file reports no goal") {
  CHECK_THROWS_WITH_AS(parseSpec(""), doctest::Contains("no goal"),
                       ParseError);
}

TEST_CASE("negative corpus is rejected, positive corpus accepted") {
  namespace fs = std::filesystem;
  int negatives = 0;
  for (const auto& e : fs::directory_iterator(corpusDir() + "/negative")) {
    if (e.path().extension() != ".bossl") continue;
    ++negatives;
    CHECK_THROWS_AS(parseSpec(slurp(e.path().string())), ParseError);
  }
  CHECK(negatives >= 5);

  int positives = 0;
  for (const auto& e : fs::directory_iterator(corpusDir())) {
    if (!e.is_regular_file() || e.path().extension() != ".bossl") continue;
    ++positives;
    CHECK_NOTHROW(parseSpec(slurp(e.path().string())));
  }
  CHECK(positives >= 10);
}

TEST_CASE("round trip: parse(printSpec(f)) is structurally f on the corpus") {
  namespace fs = std::filesystem;
  for (const auto& e : fs::directory_iterator(corpusDir())) {
    if (!e.is_regular_file() || e.path().extension() != ".bossl") continue;
    SpecFile f = parseSpec(slurp(e.path().string()));
    SpecFile g = parseSpec(printSpec(f));
    CHECK_MESSAGE(specEq(f, g), "round trip failed for ", e.path().string());
  }
}

TEST_CASE("printProgram concrete syntax") {
  CHECK(printStatement(Statement::store("x", 0, Expr::intConst(30))) ==
        "*x = 30;\n");
  CHECK(printStatement(Statement::skip()).empty());
  CHECK(printStatement(Statement::load("v", "x", 1)) == "let v = *(x + 1);\n");
  CHECK(printStatement(Statement::mallocStmt("y", 2)) == "let y = malloc(2);\n");

  Procedure p;
  p.name = "listcopy";
  p.formals = {{"r", Sort::Loc}};
  p.body = Statement::seq({Statement::load("x", "r", 0)});
  CHECK(printProgram(p) == "void listcopy (loc r) {\n  let x = *r;\n}\n");
}

TEST_CASE("program loader round-trips printProgram output") {
  Procedure p;
  p.name = "demo";
  p.formals = {{"r", Sort::Loc}, {"x", Sort::Loc}};
  auto thenB = Statement::seq({});
  auto elseB = Statement::seq(
      {Statement::load("v", "x", 0), Statement::mallocStmt("y", 2),
       Statement::store("y", 0, Expr::var("v", Sort::Int)),
       Statement::store("y", 1, Expr::var("x", Sort::Int)),
       Statement::call("demo", {Expr::var("r", Sort::Int)}),
       Statement::freeStmt("y")});
  p.body = Statement::ifStmt(
      Expr::binOp(Op::Eq, Expr::var("x", Sort::Int), Expr::intConst(0)), thenB,
      elseB);
  std::string text = printProgram(p);
  Procedure q = parseProgram(text);
  CHECK(q.name == p.name);
  CHECK(q.formals == p.formals);
  CHECK(printProgram(q) == text);
}

TEST_CASE("astSize follows the node-counting rule") {
  CHECK(astSize(Statement::skip()) == 0);
  // *x = 30: statement + base + value
  CHECK(astSize(Statement::store("x", 0, Expr::intConst(30))) == 3);
  // let v = *(x + 1): statement + binder + base + offset
  CHECK(astSize(Statement::load("v", "x", 1)) == 4);

  Procedure p;
  p.name = "w";
  p.formals = {{"x", Sort::Loc}};
  p.body = Statement::store("x", 0, Expr::intConst(30));
  CHECK(astSize(p) == 4);  // one formal + the store

  // monotone under statement insertion
  Procedure q = p;
  q.body = Statement::seq({p.body, Statement::freeStmt("x")});
  CHECK(astSize(q) > astSize(p));

  // structurally identical programs agree
  Procedure r = p;
  CHECK(astSize(r) == astSize(p));
}
