#pragma once

#include <random>
#include <string>
#include <vector>

#include "bossl/ast.hpp"
#include "bossl/solver.hpp"
#include "bossl/unify.hpp"

// Brute-force oracles, independent of the implementation paths they check.
// Test-only module: linked into the test binaries and the `oracle` CLI
// subcommand, never into the engine.

namespace bossl::oracle {

// Exhaustive enumeration over the bounded domain: integers/locations in
// -4..4, sets as subsets of {0..3}, permissions in {Mut, Imm}, booleans.
enum class Verdict { Valid, Invalid, Skipped };

Verdict enumerationValidity(const ExprP& hypothesis, const ExprP& conclusion);

// Random entailment queries confined to the bounded fragment (unit
// coefficients, small constants; set-element variables are range-bound in
// the hypothesis so bounded and unbounded validity coincide).
EntailmentQuery randomQuery(std::mt19937& rng);

struct SolverAgreement {
  int total = 0;
  int validAgreed = 0;
  int invalidAgreed = 0;
  int unknowns = 0;
  int disagreements = 0;
  std::vector<std::string> failures;
};

SolverAgreement checkSolverAgreement(int n, unsigned seed);

// All substitutions over the pattern's existentials with images drawn from
// the target's subterms, filtered by sub-multiset containment.
std::vector<Substitution> bruteForceUnify(const UnifTask& task);

UnifTask randomUnifTask(std::mt19937& rng);

struct UnifierAgreement {
  int total = 0;
  int disagreements = 0;
  std::vector<std::string> failures;
};

UnifierAgreement checkUnifierAgreement(int n, unsigned seed);

}  // namespace bossl::oracle
