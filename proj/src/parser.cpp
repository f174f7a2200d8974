#include "bossl/parser.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace bossl {
namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok {
  Ident, Number, LBrace, RBrace, LParen, RParen, LBrack, RBrack,
  Lt, Gt, Le, EqEq, Assign, Comma, Semi, Bar, Plus, Minus, Star,
  SepConj, PointsTo, DArrow, PlusPlus, AndAnd, OrOr, Bang, Eof
};

struct Token {
  Tok kind;
  std::string text;
  long num = 0;
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { next(); }

  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    next();
    return t;
  }

 private:
  void next() {
    skipWs();
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_.kind = Tok::Eof;
      tok_.text = "<eof>";
      return;
    }
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
              src_[pos_] == '_'))
        advance();
      tok_.kind = Tok::Ident;
      tok_.text = src_.substr(start, pos_ - start);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_])))
        advance();
      tok_.kind = Tok::Number;
      tok_.text = src_.substr(start, pos_ - start);
      tok_.num = std::stol(tok_.text);
      return;
    }
    auto two = src_.substr(pos_, 2);
    struct Sym { const char* s; Tok k; };
    static const Sym twos[] = {
        {"**", Tok::SepConj}, {"==", Tok::EqEq}, {"<=", Tok::Le},
        {"=>", Tok::DArrow},  {"++", Tok::PlusPlus}, {"&&", Tok::AndAnd},
        {"||", Tok::OrOr},
    };
    if (two == ":-") {
      if (src_.substr(pos_, 3) == ":->") {
        advance(); advance(); advance();
        tok_.kind = Tok::PointsTo;
        tok_.text = ":->";
        return;
      }
    }
    for (const auto& s : twos) {
      if (two == s.s) {
        advance(); advance();
        tok_.kind = s.k;
        tok_.text = s.s;
        return;
      }
    }
    static const Sym ones[] = {
        {"{", Tok::LBrace}, {"}", Tok::RBrace}, {"(", Tok::LParen},
        {")", Tok::RParen}, {"[", Tok::LBrack}, {"]", Tok::RBrack},
        {"<", Tok::Lt},     {">", Tok::Gt},     {",", Tok::Comma},
        {";", Tok::Semi},   {"|", Tok::Bar},    {"+", Tok::Plus},
        {"-", Tok::Minus},  {"*", Tok::Star},   {"=", Tok::Assign},
        {"!", Tok::Bang},
    };
    for (const auto& s : ones) {
      if (c == s.s[0]) {
        advance();
        tok_.kind = s.k;
        tok_.text = s.s;
        return;
      }
    }
    throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
  }

  void skipWs() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  const std::string& src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_;
};

// ---------------------------------------------------------------------------
// Raw syntax (sorts not yet resolved)

struct RawExpr;
using RawP = std::shared_ptr<RawExpr>;

struct RawExpr {
  enum class Tag { Num, Bool, Var, Mut, SetLit, BinOp, Not } tag;
  long num = 0;
  bool bval = false;
  std::string name;
  Op op = Op::Add;
  std::vector<RawP> kids;
  int line = 0, col = 0;
};

struct RawHeaplet {
  enum class Kind { PointsTo, Block, Pred } kind;
  std::string baseVar;           // points-to / block base
  int offset = 0;                // points-to
  RawP value;                    // points-to
  int size = 0;                  // block
  std::string predName;          // pred
  std::vector<RawP> args;        // pred
  std::vector<std::string> perms;  // "mut" or borrow names; empty slot = mut
  std::optional<std::string> perm; // single annotation (points-to/block)
  int line = 0, col = 0;
};

struct RawAssertion {
  RawP pure;
  bool emp = false;
  std::vector<RawHeaplet> heaplets;
};

struct RawClause {
  RawP selector;
  RawAssertion body;
};

struct RawPred {
  std::string name;
  std::vector<std::pair<std::string, Sort>> params;
  std::vector<std::string> permParams;
  std::vector<RawClause> clauses;
  int line = 0, col = 0;
};

struct RawFun {
  std::string name;
  std::vector<std::pair<std::string, Sort>> formals;
  RawAssertion pre, post;
  bool isGoal = false;
  int line = 0, col = 0;
};


// ---------------------------------------------------------------------------
// Parser

class SpecParser {
 public:
  explicit SpecParser(const std::string& text) : lex_(text) {}

  SpecFile run() {
    while (lex_.peek().kind != Tok::Eof) {
      Token t = expect(Tok::Ident, "'predicate', 'func' or 'goal'");
      if (t.text == "predicate")
        preds_.push_back(parsePredicate());
      else if (t.text == "func")
        funs_.push_back(parseFun(false, t));
      else if (t.text == "goal")
        funs_.push_back(parseFun(true, t));
      else
        fail(t, "expected 'predicate', 'func' or 'goal', got '" + t.text + "'");
    }
    return resolve();
  }

 private:
  [[noreturn]] void fail(const Token& t, const std::string& msg) {
    throw ParseError(t.line, t.col, msg);
  }

  Token expect(Tok k, const std::string& what) {
    Token t = lex_.take();
    if (t.kind != k) fail(t, "expected " + what + ", got '" + t.text + "'");
    return t;
  }

  bool accept(Tok k) {
    if (lex_.peek().kind == k) {
      lex_.take();
      return true;
    }
    return false;
  }

  Sort parseSort(const Token& t) {
    if (t.text == "loc") return Sort::Loc;
    if (t.text == "int") return Sort::Int;
    if (t.text == "set") return Sort::Set;
    if (t.text == "bool") return Sort::Bool;
    fail(t, "unknown sort '" + t.text + "'");
  }

  std::vector<std::pair<std::string, Sort>> parseParams() {
    std::vector<std::pair<std::string, Sort>> out;
    expect(Tok::LParen, "'('");
    if (!accept(Tok::RParen)) {
      do {
        Token s = expect(Tok::Ident, "sort");
        Sort sort = parseSort(s);
        Token n = expect(Tok::Ident, "parameter name");
        out.emplace_back(n.text, sort);
      } while (accept(Tok::Comma));
      expect(Tok::RParen, "')'");
    }
    return out;
  }

  std::vector<std::string> parsePermHeader() {
    std::vector<std::string> out;
    if (!accept(Tok::Lt)) return out;
    do {
      Token n = expect(Tok::Ident, "permission parameter");
      if (n.text == "mut" || n.text == "imm")
        fail(n, "permission parameters must be variables");
      out.push_back(n.text);
    } while (accept(Tok::Comma));
    expect(Tok::Gt, "'>'");
    return out;
  }

  std::string parsePermName() {
    Token n = expect(Tok::Ident, "permission");
    if (n.text == "imm")
      fail(n, "'imm' is not accepted in specifications; use a borrow variable");
    return n.text;  // "mut" or a borrow variable
  }

  std::optional<std::string> parsePermAnnotation() {
    if (lex_.peek().kind != Tok::Lt) return std::nullopt;
    lex_.take();
    std::string p = parsePermName();
    expect(Tok::Gt, "'>'");
    return p;
  }

  std::vector<std::string> parsePermArgs(size_t expectAny) {
    std::vector<std::string> out;
    if (lex_.peek().kind != Tok::Lt) return out;
    lex_.take();
    do {
      out.push_back(parsePermName());
    } while (accept(Tok::Comma));
    expect(Tok::Gt, "'>'");
    (void)expectAny;
    return out;
  }

  RawPred parsePredicate() {
    RawPred p;
    Token name = expect(Tok::Ident, "predicate name");
    p.name = name.text;
    p.line = name.line;
    p.col = name.col;
    p.params = parseParams();
    p.permParams = parsePermHeader();
    expect(Tok::LBrace, "'{'");
    accept(Tok::Bar);
    do {
      RawClause c;
      c.selector = parseExpr();
      expect(Tok::DArrow, "'=>'");
      c.body = parseAssertion();
      p.clauses.push_back(std::move(c));
    } while (accept(Tok::Bar));
    expect(Tok::RBrace, "'}'");
    return p;
  }

  RawFun parseFun(bool isGoal, const Token& kw) {
    RawFun f;
    f.isGoal = isGoal;
    f.line = kw.line;
    f.col = kw.col;
    Token v = expect(Tok::Ident, "'void'");
    if (v.text != "void") fail(v, "expected 'void'");
    Token name = expect(Tok::Ident, "function name");
    f.name = name.text;
    f.formals = parseParams();
    Token pre = expect(Tok::Ident, "'pre'");
    if (pre.text != "pre") fail(pre, "expected 'pre'");
    f.pre = parseAssertion();
    Token post = expect(Tok::Ident, "'post'");
    if (post.text != "post") fail(post, "expected 'post'");
    f.post = parseAssertion();
    return f;
  }

  RawAssertion parseAssertion() {
    RawAssertion a;
    expect(Tok::LBrace, "'{'");
    a.pure = parseExpr();
    expect(Tok::Semi, "';'");
    if (lex_.peek().kind == Tok::Ident && lex_.peek().text == "emp") {
      lex_.take();
      a.emp = true;
    } else {
      do {
        a.heaplets.push_back(parseHeaplet());
      } while (accept(Tok::SepConj));
    }
    expect(Tok::RBrace, "'}'");
    return a;
  }

  RawHeaplet parseHeaplet() {
    RawHeaplet h;
    Token t = lex_.peek();
    h.line = t.line;
    h.col = t.col;
    if (t.kind == Tok::LBrack) {
      lex_.take();
      h.kind = RawHeaplet::Kind::Block;
      h.baseVar = expect(Tok::Ident, "block base variable").text;
      expect(Tok::Comma, "','");
      h.size = static_cast<int>(expect(Tok::Number, "block size").num);
      if (h.size <= 0) fail(t, "block size must be positive");
      expect(Tok::RBrack, "']'");
      h.perm = parsePermAnnotation();
      return h;
    }
    if (t.kind == Tok::LParen) {
      // (x + i) :-> v
      lex_.take();
      h.kind = RawHeaplet::Kind::PointsTo;
      h.baseVar = expect(Tok::Ident, "base variable").text;
      expect(Tok::Plus, "'+'");
      h.offset = static_cast<int>(expect(Tok::Number, "offset").num);
      expect(Tok::RParen, "')'");
      expect(Tok::PointsTo, "':->'");
      h.value = parsePrimary();
      h.perm = parsePermAnnotation();
      return h;
    }
    Token name = expect(Tok::Ident, "heaplet");
    if (lex_.peek().kind == Tok::LParen) {
      lex_.take();
      h.kind = RawHeaplet::Kind::Pred;
      h.predName = name.text;
      if (!accept(Tok::RParen)) {
        do {
          h.args.push_back(parseExpr());
        } while (accept(Tok::Comma));
        expect(Tok::RParen, "')'");
      }
      h.perms = parsePermArgs(0);
      return h;
    }
    h.kind = RawHeaplet::Kind::PointsTo;
    h.baseVar = name.text;
    h.offset = 0;
    expect(Tok::PointsTo, "':->'");
    h.value = parsePrimary();
    h.perm = parsePermAnnotation();
    return h;
  }

  // Pure expression grammar: or < and < comparison < additive < primary.
  RawP parseExpr() { return parseOr(); }

  RawP mkBin(Op op, RawP l, RawP r, const Token& at) {
    auto e = std::make_shared<RawExpr>();
    e->tag = RawExpr::Tag::BinOp;
    e->op = op;
    e->kids = {std::move(l), std::move(r)};
    e->line = at.line;
    e->col = at.col;
    return e;
  }

  RawP parseOr() {
    RawP l = parseAnd();
    while (lex_.peek().kind == Tok::Ident && lex_.peek().text == "or") {
      Token t = lex_.take();
      l = mkBin(Op::Or, l, parseAnd(), t);
    }
    return l;
  }

  RawP parseAnd() {
    RawP l = parseCmp();
    while (lex_.peek().kind == Tok::Ident && lex_.peek().text == "and") {
      Token t = lex_.take();
      l = mkBin(Op::And, l, parseCmp(), t);
    }
    return l;
  }

  RawP parseCmp() {
    RawP l = parseAdditive();
    Tok k = lex_.peek().kind;
    if (k == Tok::EqEq || k == Tok::Le || k == Tok::Lt) {
      Token t = lex_.take();
      Op op = k == Tok::EqEq ? Op::Eq : (k == Tok::Le ? Op::Le : Op::Lt);
      return mkBin(op, l, parseAdditive(), t);
    }
    return l;
  }

  RawP parseAdditive() {
    RawP l = parsePrimary();
    for (;;) {
      Tok k = lex_.peek().kind;
      if (k == Tok::Plus || k == Tok::Minus || k == Tok::PlusPlus) {
        Token t = lex_.take();
        Op op = k == Tok::Plus ? Op::Add : (k == Tok::Minus ? Op::Sub : Op::Union);
        l = mkBin(op, l, parsePrimary(), t);
      } else {
        return l;
      }
    }
  }

  RawP parsePrimary() {
    Token t = lex_.take();
    auto e = std::make_shared<RawExpr>();
    e->line = t.line;
    e->col = t.col;
    switch (t.kind) {
      case Tok::Number:
        e->tag = RawExpr::Tag::Num;
        e->num = t.num;
        return e;
      case Tok::LParen: {
        RawP inner = parseExpr();
        expect(Tok::RParen, "')'");
        return inner;
      }
      case Tok::LBrace: {
        e->tag = RawExpr::Tag::SetLit;
        if (!accept(Tok::RBrace)) {
          do {
            e->kids.push_back(parseExpr());
          } while (accept(Tok::Comma));
          expect(Tok::RBrace, "'}'");
        }
        return e;
      }
      case Tok::Ident: {
        if (t.text == "true" || t.text == "false") {
          e->tag = RawExpr::Tag::Bool;
          e->bval = t.text == "true";
          return e;
        }
        if (t.text == "not") {
          e->tag = RawExpr::Tag::Not;
          e->kids.push_back(parsePrimary());
          return e;
        }
        if (t.text == "mut") {
          e->tag = RawExpr::Tag::Mut;
          return e;
        }
        if (t.text == "imm")
          fail(t, "'imm' is not accepted in specifications");
        e->tag = RawExpr::Tag::Var;
        e->name = t.text;
        return e;
      }
      default:
        fail(t, "expected an expression, got '" + t.text + "'");
    }
  }

  // -------------------------------------------------------------------------
  // Sort resolution and lowering

  struct Scope {
    std::map<std::string, Sort> sorts;
    std::set<std::string> declared;  // conflict reporting
  };

  void noteSort(Scope& sc, const std::string& v, Sort s, int line, int col) {
    auto it = sc.sorts.find(v);
    if (it == sc.sorts.end()) {
      sc.sorts[v] = s;
      changed_ = true;
    } else if (it->second != s) {
      throw ParseError(line, col,
                       "sort mismatch for '" + v + "': " + sortName(it->second) +
                           " vs " + sortName(s));
    }
  }

  std::optional<Sort> sortOfRaw(const Scope& sc, const RawP& e) {
    switch (e->tag) {
      case RawExpr::Tag::Num: return std::nullopt;  // int or loc
      case RawExpr::Tag::Bool: return Sort::Bool;
      case RawExpr::Tag::Mut: return Sort::Perm;
      case RawExpr::Tag::SetLit: return Sort::Set;
      case RawExpr::Tag::Not: return Sort::Bool;
      case RawExpr::Tag::Var: {
        auto it = sc.sorts.find(e->name);
        if (it == sc.sorts.end()) return std::nullopt;
        return it->second;
      }
      case RawExpr::Tag::BinOp:
        switch (e->op) {
          case Op::Add:
          case Op::Sub: return sortOfRaw(sc, e->kids[0]);
          case Op::Union: return Sort::Set;
          default: return Sort::Bool;
        }
    }
    return std::nullopt;
  }

  void inferExpr(Scope& sc, const RawP& e, std::optional<Sort> expected) {
    switch (e->tag) {
      case RawExpr::Tag::Var:
        if (expected)
          noteSort(sc, e->name, *expected, e->line, e->col);
        return;
      case RawExpr::Tag::SetLit:
        for (auto& k : e->kids) inferExpr(sc, k, Sort::Int);
        return;
      case RawExpr::Tag::Not:
        inferExpr(sc, e->kids[0], Sort::Bool);
        return;
      case RawExpr::Tag::BinOp: {
        switch (e->op) {
          case Op::And:
          case Op::Or:
            inferExpr(sc, e->kids[0], Sort::Bool);
            inferExpr(sc, e->kids[1], Sort::Bool);
            return;
          case Op::Le:
          case Op::Lt:
            inferExpr(sc, e->kids[0], Sort::Int);
            inferExpr(sc, e->kids[1], Sort::Int);
            return;
          case Op::Union:
            inferExpr(sc, e->kids[0], Sort::Set);
            inferExpr(sc, e->kids[1], Sort::Set);
            return;
          case Op::Add:
          case Op::Sub: {
            auto s = sortOfRaw(sc, e->kids[0]);
            if (!s) s = sortOfRaw(sc, e->kids[1]);
            if (!s && expected && (*expected == Sort::Int || *expected == Sort::Loc))
              s = expected;
            inferExpr(sc, e->kids[0], s);
            inferExpr(sc, e->kids[1], s == Sort::Loc ? Sort::Int : s);
            return;
          }
          case Op::Eq: {
            auto s = sortOfRaw(sc, e->kids[0]);
            if (!s) s = sortOfRaw(sc, e->kids[1]);
            inferExpr(sc, e->kids[0], s);
            inferExpr(sc, e->kids[1], s);
            return;
          }
        }
        return;
      }
      default:
        return;
    }
  }

  void inferAssertion(Scope& sc, const RawAssertion& a) {
    inferExpr(sc, a.pure, Sort::Bool);
    for (const auto& h : a.heaplets) {
      switch (h.kind) {
        case RawHeaplet::Kind::PointsTo:
          noteSort(sc, h.baseVar, Sort::Loc, h.line, h.col);
          inferExpr(sc, h.value, std::nullopt);
          if (h.perm && *h.perm != "mut")
            noteSort(sc, *h.perm, Sort::Perm, h.line, h.col);
          break;
        case RawHeaplet::Kind::Block:
          noteSort(sc, h.baseVar, Sort::Loc, h.line, h.col);
          if (h.perm && *h.perm != "mut")
            noteSort(sc, *h.perm, Sort::Perm, h.line, h.col);
          break;
        case RawHeaplet::Kind::Pred: {
          auto it = predHeaders_.find(h.predName);
          if (it == predHeaders_.end())
            throw ParseError(h.line, h.col, "unknown predicate '" + h.predName + "'");
          const auto& [params, nPerms] = it->second;
          if (h.args.size() != params.size())
            throw ParseError(h.line, h.col,
                             "predicate '" + h.predName + "' expects " +
                                 std::to_string(params.size()) + " arguments");
          // an omitted annotation list means all-mutable
          if (h.perms.size() != nPerms && !h.perms.empty())
            throw ParseError(h.line, h.col,
                             "predicate '" + h.predName + "' expects " +
                                 std::to_string(nPerms) + " permission arguments");
          for (size_t i = 0; i < h.args.size(); ++i)
            inferExpr(sc, h.args[i], params[i]);
          for (const auto& p : h.perms)
            if (p != "mut") noteSort(sc, p, Sort::Perm, h.line, h.col);
          break;
        }
      }
    }
  }

  ExprP lowerExpr(const Scope& sc, const RawP& e) {
    switch (e->tag) {
      case RawExpr::Tag::Num: {
        return Expr::intConst(e->num);
      }
      case RawExpr::Tag::Bool: return Expr::boolConst(e->bval);
      case RawExpr::Tag::Mut: return Expr::permConst(Permission::mut());
      case RawExpr::Tag::Var: {
        auto it = sc.sorts.find(e->name);
        Sort s = it == sc.sorts.end() ? Sort::Int : it->second;
        return Expr::var(e->name, s);
      }
      case RawExpr::Tag::SetLit: {
        std::vector<ExprP> kids;
        for (const auto& k : e->kids) kids.push_back(lowerExpr(sc, k));
        return Expr::setLit(std::move(kids));
      }
      case RawExpr::Tag::Not:
        return Expr::negation(lowerExpr(sc, e->kids[0]));
      case RawExpr::Tag::BinOp:
        return Expr::binOp(e->op, lowerExpr(sc, e->kids[0]),
                           lowerExpr(sc, e->kids[1]));
    }
    throw std::logic_error("unreachable");
  }

  Permission lowerPerm(const std::string& p) {
    if (p == "mut") return Permission::mut();
    return Permission::var(p);
  }

  Heaplet lowerHeaplet(const Scope& sc, const RawHeaplet& h) {
    switch (h.kind) {
      case RawHeaplet::Kind::PointsTo:
        return PointsTo{Expr::var(h.baseVar, Sort::Loc), h.offset,
                        lowerExpr(sc, h.value),
                        h.perm ? lowerPerm(*h.perm) : Permission::mut()};
      case RawHeaplet::Kind::Block:
        return Block{Expr::var(h.baseVar, Sort::Loc), h.size,
                     h.perm ? lowerPerm(*h.perm) : Permission::mut()};
      case RawHeaplet::Kind::Pred: {
        PredApp q;
        q.name = h.predName;
        for (const auto& a : h.args) q.args.push_back(lowerExpr(sc, a));
        for (const auto& p : h.perms) q.permArgs.push_back(lowerPerm(p));
        if (q.permArgs.empty()) {
          auto it = predHeaders_.find(h.predName);
          if (it != predHeaders_.end())
            q.permArgs.assign(it->second.second, Permission::mut());
        }
        return q;
      }
    }
    throw std::logic_error("unreachable");
  }

  Assertion lowerAssertion(const Scope& sc, const RawAssertion& a) {
    Assertion out;
    out.pure = lowerExpr(sc, a.pure);
    for (const auto& h : a.heaplets) out.spatial.push_back(lowerHeaplet(sc, h));
    out.normalizeOrder();
    return out;
  }

  SpecFile resolve() {
    SpecFile file;
    for (const auto& p : preds_) {
      std::vector<Sort> paramSorts;
      for (auto& [n, s] : p.params) paramSorts.push_back(s);
      predHeaders_[p.name] = {paramSorts, p.permParams.size()};
    }
    for (const auto& rp : preds_) {
      PredicateDef d;
      d.name = rp.name;
      d.params = rp.params;
      d.permParams = rp.permParams;
      for (const auto& rc : rp.clauses) {
        Scope sc;
        for (const auto& [n, s] : rp.params) sc.sorts[n] = s;
        for (const auto& pp : rp.permParams) sc.sorts[pp] = Sort::Perm;
        do {
          changed_ = false;
          inferExpr(sc, rc.selector, Sort::Bool);
          inferAssertion(sc, rc.body);
        } while (changed_);
        Clause c;
        c.selector = lowerExpr(sc, rc.selector);
        c.pure = lowerExpr(sc, rc.body.pure);
        for (const auto& h : rc.body.heaplets)
          c.spatial.push_back(lowerHeaplet(sc, h));
        d.clauses.push_back(std::move(c));
      }
      auto report = checkPredWellFormed(d);
      if (!report.empty())
        throw ParseError(rp.line, rp.col,
                         "ill-formed predicate: " + report[0].where + ": " +
                             report[0].message);
      file.predicates.push_back(std::move(d));
    }

    bool haveGoal = false;
    for (const auto& rf : funs_) {
      Scope sc;
      for (const auto& [n, s] : rf.formals) sc.sorts[n] = s;
      do {
        changed_ = false;
        inferAssertion(sc, rf.pre);
        inferAssertion(sc, rf.post);
      } while (changed_);
      Assertion pre = lowerAssertion(sc, rf.pre);
      Assertion post = lowerAssertion(sc, rf.post);
      auto report = checkSpecWellFormed(rf.name, rf.formals, pre, post);
      if (!report.empty())
        throw ParseError(rf.line, rf.col,
                         "ill-formed specification: " + report[0].message);
      if (rf.isGoal) {
        if (haveGoal) throw ParseError(rf.line, rf.col, "multiple goals");
        haveGoal = true;
        file.goal = SynthGoal{rf.name, rf.formals, pre, post};
      } else {
        file.functions.push_back(FunctionSpec{rf.name, rf.formals, pre, post});
      }
    }
    if (!haveGoal) throw ParseError(1, 1, "no goal");
    return file;
  }

  Lexer lex_;
  std::vector<RawPred> preds_;
  std::vector<RawFun> funs_;
  std::map<std::string, std::pair<std::vector<Sort>, size_t>> predHeaders_;
  bool changed_ = false;
};

}  // namespace

SpecFile parseSpec(const std::string& text) { return SpecParser(text).run(); }

// ---------------------------------------------------------------------------
// Spec printing

namespace {

std::string showSpecExpr(const ExprP& e) { return show(e); }

std::string showAssertionSrc(const Assertion& a) {
  std::string s = "{ " + showSpecExpr(a.pure) + " ; ";
  if (a.spatial.empty()) {
    s += "emp";
  } else {
    for (size_t i = 0; i < a.spatial.size(); ++i) {
      if (i) s += " ** ";
      s += show(a.spatial[i]);
    }
  }
  return s + " }";
}

std::string showParams(const std::vector<std::pair<std::string, Sort>>& ps) {
  std::string s = "(";
  for (size_t i = 0; i < ps.size(); ++i) {
    if (i) s += ", ";
    s += sortName(ps[i].second) + " " + ps[i].first;
  }
  return s + ")";
}

}  // namespace

std::string printSpec(const SpecFile& f) {
  std::ostringstream os;
  for (const auto& p : f.predicates) {
    os << "predicate " << p.name << showParams(p.params);
    if (!p.permParams.empty()) {
      os << "<";
      for (size_t i = 0; i < p.permParams.size(); ++i) {
        if (i) os << ", ";
        os << p.permParams[i];
      }
      os << ">";
    }
    os << " {\n";
    for (size_t k = 0; k < p.clauses.size(); ++k) {
      os << (k == 0 ? "  " : "| ") << show(p.clauses[k].selector) << " => { "
         << show(p.clauses[k].pure) << " ; ";
      if (p.clauses[k].spatial.empty()) {
        os << "emp";
      } else {
        for (size_t i = 0; i < p.clauses[k].spatial.size(); ++i) {
          if (i) os << " ** ";
          os << show(p.clauses[k].spatial[i]);
        }
      }
      os << " }\n";
    }
    os << "}\n\n";
  }
  for (const auto& fn : f.functions) {
    os << "func void " << fn.name << showParams(fn.formals) << "\n";
    os << "  pre  " << showAssertionSrc(fn.pre) << "\n";
    os << "  post " << showAssertionSrc(fn.post) << "\n\n";
  }
  os << "goal void " << f.goal.name << showParams(f.goal.formals) << "\n";
  os << "  pre  " << showAssertionSrc(f.goal.pre) << "\n";
  os << "  post " << showAssertionSrc(f.goal.post) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Program loader

namespace {

class ProgramParser {
 public:
  explicit ProgramParser(const std::string& text) : lex_(text) {}

  Procedure run() {
    Procedure p;
    Token v = expect(Tok::Ident, "'void'");
    if (v.text != "void") fail(v, "expected 'void'");
    p.name = expect(Tok::Ident, "procedure name").text;
    expect(Tok::LParen, "'('");
    if (lex_.peek().kind != Tok::RParen) {
      do {
        Token s = expect(Tok::Ident, "sort");
        Sort sort;
        if (s.text == "loc") sort = Sort::Loc;
        else if (s.text == "int") sort = Sort::Int;
        else fail(s, "unknown formal sort '" + s.text + "'");
        Token n = expect(Tok::Ident, "formal name");
        p.formals.emplace_back(n.text, sort);
      } while (accept(Tok::Comma));
    }
    expect(Tok::RParen, "')'");
    expect(Tok::LBrace, "'{'");
    p.body = parseBlock();
    expect(Tok::RBrace, "'}'");
    return p;
  }

 private:
  [[noreturn]] void fail(const Token& t, const std::string& msg) {
    throw ParseError(t.line, t.col, msg);
  }

  Token expect(Tok k, const std::string& what) {
    Token t = lex_.take();
    if (t.kind != k) fail(t, "expected " + what + ", got '" + t.text + "'");
    return t;
  }

  bool accept(Tok k) {
    if (lex_.peek().kind == k) {
      lex_.take();
      return true;
    }
    return false;
  }

  StmtP parseBlock() {
    std::vector<StmtP> stmts;
    while (lex_.peek().kind != Tok::RBrace && lex_.peek().kind != Tok::Eof)
      stmts.push_back(parseStmt());
    return Statement::seq(std::move(stmts));
  }

  std::pair<std::string, int> parseDeref() {
    expect(Tok::Star, "'*'");
    if (accept(Tok::LParen)) {
      std::string base = expect(Tok::Ident, "base").text;
      expect(Tok::Plus, "'+'");
      int off = static_cast<int>(expect(Tok::Number, "offset").num);
      expect(Tok::RParen, "')'");
      return {base, off};
    }
    return {expect(Tok::Ident, "base").text, 0};
  }

  StmtP parseStmt() {
    Token t = lex_.peek();
    if (t.kind == Tok::Star) {
      auto [base, off] = parseDeref();
      expect(Tok::Assign, "'='");
      ExprP e = parseExpr();
      expect(Tok::Semi, "';'");
      return Statement::store(base, off, e);
    }
    Token id = expect(Tok::Ident, "statement");
    if (id.text == "let") {
      std::string dst = expect(Tok::Ident, "binder").text;
      expect(Tok::Assign, "'='");
      if (lex_.peek().kind == Tok::Ident && lex_.peek().text == "malloc") {
        lex_.take();
        expect(Tok::LParen, "'('");
        int n = static_cast<int>(expect(Tok::Number, "size").num);
        expect(Tok::RParen, "')'");
        expect(Tok::Semi, "';'");
        return Statement::mallocStmt(dst, n);
      }
      auto [base, off] = parseDeref();
      expect(Tok::Semi, "';'");
      return Statement::load(dst, base, off);
    }
    if (id.text == "free") {
      expect(Tok::LParen, "'('");
      std::string v = expect(Tok::Ident, "variable").text;
      expect(Tok::RParen, "')'");
      expect(Tok::Semi, "';'");
      return Statement::freeStmt(v);
    }
    if (id.text == "err") {
      expect(Tok::Semi, "';'");
      return Statement::error();
    }
    if (id.text == "if") {
      expect(Tok::LParen, "'('");
      ExprP cond = parseExpr();
      expect(Tok::RParen, "')'");
      expect(Tok::LBrace, "'{'");
      StmtP thenB = parseBlock();
      expect(Tok::RBrace, "'}'");
      Token e = expect(Tok::Ident, "'else'");
      if (e.text != "else") fail(e, "expected 'else'");
      expect(Tok::LBrace, "'{'");
      StmtP elseB = parseBlock();
      expect(Tok::RBrace, "'}'");
      return Statement::ifStmt(cond, thenB, elseB);
    }
    // call
    expect(Tok::LParen, "'('");
    std::vector<ExprP> args;
    if (lex_.peek().kind != Tok::RParen) {
      do {
        args.push_back(parseExpr());
      } while (accept(Tok::Comma));
    }
    expect(Tok::RParen, "')'");
    expect(Tok::Semi, "';'");
    return Statement::call(id.text, std::move(args));
  }

  // C-style expressions: ||  &&  (== <= <)  (+ -)  primary
  ExprP parseExpr() { return parseOrE(); }

  ExprP parseOrE() {
    ExprP l = parseAndE();
    while (lex_.peek().kind == Tok::OrOr) {
      lex_.take();
      l = Expr::binOp(Op::Or, l, parseAndE());
    }
    return l;
  }

  ExprP parseAndE() {
    ExprP l = parseCmpE();
    while (lex_.peek().kind == Tok::AndAnd) {
      lex_.take();
      l = Expr::binOp(Op::And, l, parseCmpE());
    }
    return l;
  }

  ExprP parseCmpE() {
    ExprP l = parseAddE();
    Tok k = lex_.peek().kind;
    if (k == Tok::EqEq || k == Tok::Le || k == Tok::Lt) {
      lex_.take();
      Op op = k == Tok::EqEq ? Op::Eq : (k == Tok::Le ? Op::Le : Op::Lt);
      return Expr::binOp(op, l, parseAddE());
    }
    return l;
  }

  ExprP parseAddE() {
    ExprP l = parsePrimaryE();
    for (;;) {
      Tok k = lex_.peek().kind;
      if (k == Tok::Plus || k == Tok::Minus) {
        lex_.take();
        l = Expr::binOp(k == Tok::Plus ? Op::Add : Op::Sub, l, parsePrimaryE());
      } else {
        return l;
      }
    }
  }

  ExprP parsePrimaryE() {
    Token t = lex_.take();
    switch (t.kind) {
      case Tok::Number: return Expr::intConst(t.num);
      case Tok::Bang: return Expr::negation(parsePrimaryE());
      case Tok::LParen: {
        ExprP e = parseExpr();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::Ident:
        if (t.text == "true") return Expr::boolConst(true);
        if (t.text == "false") return Expr::boolConst(false);
        return Expr::var(t.text, Sort::Int);
      default:
        fail(t, "expected expression, got '" + t.text + "'");
    }
  }

  Lexer lex_;
};

}  // namespace

Procedure parseProgram(const std::string& text) {
  return ProgramParser(text).run();
}

}  // namespace bossl
