#pragma once

#include <stdexcept>
#include <string>

#include "bossl/ast.hpp"
#include "bossl/program.hpp"

namespace bossl {

struct ParseError : std::runtime_error {
  int line, col;
  ParseError(int line, int col, const std::string& msg)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) +
                           ": " + msg),
        line(line),
        col(col) {}
};

// Parses the .bossl specification format: predicate definitions, auxiliary
// function specs and exactly one synthesis goal. Sorts are resolved from
// declarations and structural positions; well-formedness checks run before
// returning. Throws ParseError on any failure.
SpecFile parseSpec(const std::string& text);

// Prints a SpecFile back to .bossl concrete syntax; parseSpec(printSpec(f))
// is structurally equal to f.
std::string printSpec(const SpecFile& f);

// Loads a procedure from printProgram's concrete syntax (the interpreter's
// program loader).
Procedure parseProgram(const std::string& text);

}  // namespace bossl
