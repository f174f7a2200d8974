#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bossl/ast.hpp"
#include "bossl/program.hpp"
#include "bossl/solver.hpp"
#include "bossl/unify.hpp"

// Deductive synthesis: applies the derivation rules to goals under a
// configurable phase order, with depth-first backtracking search, and emits
// a procedure together with search statistics.

namespace bossl {

enum class Mode { Imm, Mut };

inline const char* modeName(Mode m) { return m == Mode::Imm ? "imm" : "mut"; }

struct SearchConfig {
  int unifOrder = 0;           // 0..5, see UnifOrder
  int ruleOrder = 0;           // 0..6 phase permutations, 0 = default
  long timeoutMs = 120000;     // wall-clock limit (2 minutes by default)
  long ruleBudget = 100000;    // deterministic cap on attempted applications
  int maxUnfoldDepth = 1;      // per-path unfold budget per predicate chain
  Mode mode = Mode::Imm;
};

constexpr int kNumRuleOrders = 7;
constexpr int kNumPerturbations = 42;  // 6 unification orders x 7 rule orders

// perturbation id <-> (unifOrder, ruleOrder); id 0 is the default config
SearchConfig configForPerturbation(int id, Mode mode, long timeoutMs = 120000,
                                   long ruleBudget = 100000);

enum class Outcome { Synthesized, Timeout, NoSolution };

inline const char* outcomeName(Outcome o) {
  switch (o) {
    case Outcome::Synthesized: return "Synthesized";
    case Outcome::Timeout: return "Timeout";
    case Outcome::NoSolution: return "NoSolution";
  }
  return "?";
}

struct SearchStats {
  long rulesFired = 0;   // every attempted application, solvable or not
  long backtracks = 0;   // abandoned partial derivations
  long wallTimeMs = 0;
  int resultAstSize = 0;
  Outcome outcome = Outcome::NoSolution;

  // metatheory trace checks, accumulated over the whole search
  long permStrengtheningViolations = 0;
  long borrowReturnViolations = 0;

  // pure-solver surface
  long solverQueries = 0;
  long solverUnknowns = 0;
  long solverMicros = 0;
};

struct SynthResult {
  std::optional<Procedure> procedure;
  SearchStats stats;
};

// Rewrites every borrow annotation to Mut (the mut-mode front end); both
// modes then run the identical engine.
SpecFile rewriteAllMut(const SpecFile& f);

SynthResult synthesize(const SpecFile& spec, const SearchConfig& config);

}  // namespace bossl
