#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "bossl/bench.hpp"
#include "bossl/engine.hpp"
#include "bossl/interp.hpp"
#include "bossl/parser.hpp"
#include "bossl/program.hpp"

#include "../tests/oracles.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int runSynth(const std::string& file, const std::string& modeStr,
             int perturbation, long timeoutMs, int validateN,
             const std::string& emitC, const std::string& statsOut,
             long ruleBudget) {
  bossl::SpecFile spec;
  try {
    spec = bossl::parseSpec(slurp(file));
  } catch (const std::exception& ex) {
    std::cerr << file << ":" << ex.what() << "\n";
    return 2;
  }
  bossl::Mode mode = modeStr == "mut" ? bossl::Mode::Mut : bossl::Mode::Imm;
  bossl::SearchConfig cfg =
      bossl::configForPerturbation(perturbation, mode, timeoutMs, ruleBudget);
  bossl::SynthResult res = bossl::synthesize(spec, cfg);

  std::ostringstream statsLine;
  statsLine << "outcome=" << bossl::outcomeName(res.stats.outcome)
            << " rules=" << res.stats.rulesFired
            << " backtracks=" << res.stats.backtracks
            << " time_ms=" << res.stats.wallTimeMs
            << " ast=" << res.stats.resultAstSize
            << " solver_queries=" << res.stats.solverQueries
            << " solver_ms=" << res.stats.solverMicros / 1000;

  if (!statsOut.empty()) {
    std::ofstream out(statsOut);
    out << bossl::kCsvHeader << "\n";
    bossl::BenchRecord rec;
    rec.name = file;
    rec.variant = "shape";
    rec.mode = mode;
    rec.perturbation = perturbation;
    rec.stats = res.stats;
    out << bossl::toCsvRow(rec) << "\n";
  }

  if (res.stats.outcome != bossl::Outcome::Synthesized) {
    std::cerr << "synthesis failed: " << bossl::outcomeName(res.stats.outcome)
              << " (" << statsLine.str() << ")\n";
    return res.stats.outcome == bossl::Outcome::Timeout ? 3 : 4;
  }

  std::string text = bossl::printProgram(*res.procedure);
  std::cout << text;
  std::cerr << statsLine.str() << "\n";
  if (!emitC.empty()) {
    std::ofstream out(emitC);
    out << text;
  }

  if (validateN > 0) {
    auto goalSpec =
        mode == bossl::Mode::Mut ? bossl::rewriteAllMut(spec) : spec;
    auto report = bossl::checkRoPreservation(goalSpec, goalSpec.goal,
                                             *res.procedure, validateN, 7);
    std::cerr << "validation: " << report.samples << " models, "
              << report.failures << " failures\n";
    for (const auto& n : report.notes) std::cerr << n << "\n";
    if (!report.pass) return 5;
  }
  return 0;
}

int runBench(const std::string& dir, bool sweep, int jobs, long timeoutMs,
             long ruleBudget, const std::string& outCsv,
             const std::vector<std::string>& only) {
  auto corpus = bossl::scanCorpus(dir);
  if (corpus.empty()) {
    std::cerr << "no .bossl files under " << dir << "\n";
    return 2;
  }
  bossl::SweepOptions opts;
  opts.fullSweep = sweep;
  opts.jobs = jobs;
  opts.timeoutMs = timeoutMs;
  opts.ruleBudget = ruleBudget;
  opts.only = only;
  auto records = bossl::runSweep(corpus, opts);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!outCsv.empty()) {
    file.open(outCsv);
    out = &file;
  }
  *out << bossl::kCsvHeader << "\n";
  for (const auto& r : records) *out << bossl::toCsvRow(r) << "\n";
  std::cerr << bossl::sweepSummary(records);

  long strengthenings = 0, borrowLeaks = 0;
  for (const auto& r : records) {
    strengthenings += r.stats.permStrengtheningViolations;
    borrowLeaks += r.stats.borrowReturnViolations;
  }
  std::cerr << "metatheory: permission-strengthening violations="
            << strengthenings << " borrow-return violations=" << borrowLeaks
            << "\n";
  return 0;
}

int runOracle(int n, unsigned seed) {
  auto solverAgg = bossl::oracle::checkSolverAgreement(n, seed);
  std::cout << "pure-solver: " << solverAgg.total
            << " queries, valid=" << solverAgg.validAgreed
            << " invalid=" << solverAgg.invalidAgreed
            << " unknown=" << solverAgg.unknowns
            << " disagreements=" << solverAgg.disagreements << "\n";
  for (const auto& f : solverAgg.failures) std::cout << f << "\n";

  auto unifAgg = bossl::oracle::checkUnifierAgreement(n, seed + 1);
  std::cout << "unifier: " << unifAgg.total
            << " tasks, disagreements=" << unifAgg.disagreements << "\n";
  for (const auto& f : unifAgg.failures) std::cout << f << "\n";
  return (solverAgg.disagreements || unifAgg.disagreements) ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BoSSL: deductive synthesis with read-only borrows"};
  app.require_subcommand(1);

  // synth
  std::string file, modeStr = "imm", emitC, statsOut;
  int perturbation = 0, validateN = 0;
  long timeoutMs = 120000, ruleBudget = 100000;
  auto* synth = app.add_subcommand("synth", "synthesize one specification");
  synth->add_option("file", file, "input .bossl file")->required();
  synth->add_option("--mode", modeStr, "imm or mut")
      ->check(CLI::IsMember({"imm", "mut"}));
  synth->add_option("--perturbation", perturbation, "proof search perturbation 0-41")
      ->check(CLI::Range(0, 41));
  synth->add_option("--timeout-ms", timeoutMs, "wall-clock timeout");
  synth->add_option("--rule-budget", ruleBudget,
                    "deterministic cap on rule applications");
  synth->add_option("--validate", validateN,
                    "run the RO-preservation validator on N random models");
  synth->add_option("--emit-c", emitC, "write the program to this file");
  synth->add_option("--stats", statsOut, "write a one-row stats CSV");

  // bench
  std::string dir, outCsv;
  bool sweep = false;
  int jobs = 1;
  std::vector<std::string> only;
  auto* bench = app.add_subcommand("bench", "run the benchmark corpus");
  bench->add_option("dir", dir, "corpus directory")->required();
  bench->add_flag("--sweep", sweep, "all 42 perturbations per mode");
  bench->add_option("--jobs", jobs, "parallel synthesis jobs");
  bench->add_option("--timeout-ms", timeoutMs, "per-run wall-clock timeout");
  bench->add_option("--rule-budget", ruleBudget,
                    "deterministic cap on rule applications");
  bench->add_option("--out", outCsv, "CSV output path (default stdout)");
  bench->add_option("--only", only, "restrict to these benchmark names");

  // oracle
  int oracleN = 1000;
  unsigned seed = 20260809;
  auto* oracle = app.add_subcommand("oracle", "brute-force oracle agreement");
  oracle->add_option("--n", oracleN, "number of random cases per oracle");
  oracle->add_option("--seed", seed, "rng seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed())
      return runSynth(file, modeStr, perturbation, timeoutMs, validateN, emitC,
                      statsOut, ruleBudget);
    if (bench->parsed())
      return runBench(dir, sweep, jobs, timeoutMs, ruleBudget, outCsv, only);
    if (oracle->parsed()) return runOracle(oracleN, seed);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}
