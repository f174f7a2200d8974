#pragma once

#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "bossl/ast.hpp"
#include "bossl/program.hpp"
#include "bossl/solver.hpp"

// Small-step interpreter over the concrete memory model (heap with block
// meta-data at bl(l) = l - 1), assertion satisfaction parameterized by a
// read-only location set R, random model generation, and the validity /
// RO-preservation checkers built on top of them.

namespace bossl {

using Heap = std::map<long, long>;

inline long blockMeta(long l) { return l - 1; }

struct ConcreteState {
  Heap heap;
  struct Frame {
    std::vector<StmtP> conts;  // continuation stack, next statement on top
    std::map<std::string, long> stack;
  };
  std::vector<Frame> callStack;
  std::set<long> roSet;
  std::vector<long> writeTrace;  // store targets, in execution order
};

using ProcDict = std::map<std::string, Procedure>;

struct StepOutcome {
  enum class Kind { Progress, Done, Fault } kind;
  std::string fault;
};

// One small-step transition; faults on out-of-domain access, bad free,
// unknown procedure, or the error statement.
StepOutcome step(ConcreteState& st, const ProcDict& procs);

struct RunResult {
  bool ok = false;
  std::string fault;
  Heap heap;
  std::vector<long> writeTrace;
  long steps = 0;
};

RunResult run(const Procedure& proc, const std::map<std::string, long>& args,
              Heap heap, const ProcDict& procs, long fuel = 1'000'000);

// ---------------------------------------------------------------------------
// Satisfaction

// Checks <h, env> |=_R a with predicates unfolded at most `depth` times.
// When `ro` is nullopt the permission side conditions are skipped (plain SL
// satisfaction, as in the validity definition).
bool satisfies(const Heap& heap, const Valuation& env,
               const std::optional<std::set<long>>& ro, const Assertion& a,
               const SpecFile& ctx, int depth);

// ---------------------------------------------------------------------------
// Random models

struct ModelBounds {
  int maxUnfold = 5;   // list length / tree size budget
  long valueLo = 0, valueHi = 9;
  bool forceImmBorrows = false;  // value every borrow Imm (footprint checks)
};

struct Model {
  Heap heap;
  Valuation env;  // formals, ghosts and borrow variables
  std::set<long> ro;
  // addresses laid out for each top-level spatial heaplet of the assertion
  std::vector<std::set<long>> footprints;
};

// Samples ghost valuations, lays out disjoint heaplets at fresh addresses,
// values each borrow variable Mut or Imm and collects the Imm locations
// into R. The returned model passes satisfies().
std::optional<Model> randomModel(const Assertion& a, const SpecFile& ctx,
                                 const ModelBounds& bounds, std::mt19937& rng);

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
  int samples = 0;
  int failures = 0;
  bool pass = true;
  std::vector<std::string> notes;  // violating model / trace descriptions
};

// Def.-validity sampling: for n random models of spec.pre, runs the procedure
// and searches a bounded existential valuation making spec.post hold.
ValidationReport validateProcedure(const SpecFile& ctx, const SynthGoal& spec,
                                   const Procedure& proc, int samples,
                                   unsigned seed);

// Theorem "RO Heaps Do Not Change" as a check: additionally asserts
// R subset dom(h') and h|R == h'|R for every sampled model.
ValidationReport checkRoPreservation(const SpecFile& ctx, const SynthGoal& spec,
                                     const Procedure& proc, int samples,
                                     unsigned seed,
                                     bool forceImmBorrows = false);

std::string describeModel(const Model& m);

}  // namespace bossl
