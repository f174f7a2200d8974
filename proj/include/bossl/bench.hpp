#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bossl/engine.hpp"

// Corpus runner: imm-vs-mut comparison, perturbation sweep, CSV emission.

namespace bossl {

struct BenchRecord {
  std::string name;
  std::string variant;  // shape | len | val | all | sorted
  Mode mode = Mode::Imm;
  int perturbation = 0;
  SearchStats stats;
  std::string programText;  // printProgram output when synthesized
};

// CSV schema is stable: timeouts leave the numeric fields blank.
extern const char* kCsvHeader;
std::string toCsvRow(const BenchRecord& r);

struct CorpusEntry {
  std::string path;
  std::string name;
  std::string variant;
};

// Non-recursive scan for *.bossl files; name/variant derived from the file
// name (suffixes -len/-val/-all; sorted-* files carry the sorted tag).
std::vector<CorpusEntry> scanCorpus(const std::string& dir);

struct SweepOptions {
  bool fullSweep = false;  // all 42 perturbations; otherwise default config
  int jobs = 1;
  long timeoutMs = 120000;
  long ruleBudget = 100000;
  std::vector<std::string> only;  // restrict to these benchmark names
};

std::vector<BenchRecord> runSweep(const std::vector<CorpusEntry>& corpus,
                                  const SweepOptions& opts);

// Per-benchmark min/median/max of rulesFired per mode over non-timeout runs.
std::string sweepSummary(const std::vector<BenchRecord>& records);

}  // namespace bossl
