#include "bossl/bench.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "bossl/parser.hpp"
#include "bossl/program.hpp"

namespace bossl {

const char* kCsvHeader =
    "name,variant,mode,perturbation,time_ms,ast_size,rules,backtracks,outcome";

std::string toCsvRow(const BenchRecord& r) {
  std::ostringstream os;
  os << r.name << "," << r.variant << "," << modeName(r.mode) << ","
     << r.perturbation << ",";
  if (r.stats.outcome == Outcome::Synthesized) {
    os << r.stats.wallTimeMs << "," << r.stats.resultAstSize << ","
       << r.stats.rulesFired << "," << r.stats.backtracks << ",";
  } else if (r.stats.outcome == Outcome::NoSolution) {
    os << r.stats.wallTimeMs << ",," << r.stats.rulesFired << ","
       << r.stats.backtracks << ",";
  } else {
    os << ",,,,";  // timeout: numeric fields stay blank
  }
  os << outcomeName(r.stats.outcome);
  return os.str();
}

std::vector<CorpusEntry> scanCorpus(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<CorpusEntry> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() != ".bossl") continue;
    CorpusEntry ce;
    ce.path = entry.path().string();
    std::string stem = entry.path().stem().string();
    ce.name = stem;
    ce.variant = "shape";
    for (const char* v : {"len", "val", "all"}) {
      std::string suffix = std::string("-") + v;
      if (stem.size() > suffix.size() &&
          stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0) {
        ce.name = stem.substr(0, stem.size() - suffix.size());
        ce.variant = v;
      }
    }
    if (stem.rfind("sorted", 0) == 0) ce.variant = "sorted";
    out.push_back(std::move(ce));
  }
  std::sort(out.begin(), out.end(),
            [](const CorpusEntry& a, const CorpusEntry& b) {
              return a.path < b.path;
            });
  return out;
}

std::vector<BenchRecord> runSweep(const std::vector<CorpusEntry>& corpus,
                                  const SweepOptions& opts) {
  struct Job {
    const CorpusEntry* entry;
    Mode mode;
    int perturbation;
  };
  std::vector<Job> jobs;
  for (const auto& ce : corpus) {
    if (!opts.only.empty() &&
        std::find(opts.only.begin(), opts.only.end(), ce.name) ==
            opts.only.end())
      continue;
    int perts = opts.fullSweep ? kNumPerturbations : 1;
    for (Mode mode : {Mode::Imm, Mode::Mut})
      for (int p = 0; p < perts; ++p) jobs.push_back({&ce, mode, p});
  }

  // specs parsed once per entry
  std::map<std::string, SpecFile> parsed;
  for (const auto& ce : corpus)
    if (!parsed.count(ce.path)) {
      std::ifstream in(ce.path);
      std::stringstream buf;
      buf << in.rdbuf();
      parsed.emplace(ce.path, parseSpec(buf.str()));
    }

  std::vector<BenchRecord> records(jobs.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      SearchConfig cfg = configForPerturbation(job.perturbation, job.mode,
                                               opts.timeoutMs, opts.ruleBudget);
      SynthResult res = synthesize(parsed.at(job.entry->path), cfg);
      BenchRecord rec;
      rec.name = job.entry->name;
      rec.variant = job.entry->variant;
      rec.mode = job.mode;
      rec.perturbation = job.perturbation;
      rec.stats = res.stats;
      if (res.procedure) rec.programText = printProgram(*res.procedure);
      records[i] = std::move(rec);
    }
  };
  int n = std::max(1, opts.jobs);
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::sort(records.begin(), records.end(),
            [](const BenchRecord& a, const BenchRecord& b) {
              auto key = [](const BenchRecord& r) {
                return std::make_tuple(r.name, r.variant,
                                       std::string(modeName(r.mode)),
                                       r.perturbation);
              };
              return key(a) < key(b);
            });
  return records;
}

std::string sweepSummary(const std::vector<BenchRecord>& records) {
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::vector<long>>>
      rules;
  for (const auto& r : records) {
    if (r.stats.outcome == Outcome::Timeout) continue;
    rules[{r.name, r.variant}][modeName(r.mode)].push_back(r.stats.rulesFired);
  }
  std::ostringstream os;
  os << "benchmark,variant,mode,min_rules,median_rules,max_rules,runs\n";
  for (auto& [key, perMode] : rules) {
    for (auto& [mode, xs] : perMode) {
      std::sort(xs.begin(), xs.end());
      long med = xs[xs.size() / 2];
      if (xs.size() % 2 == 0) med = (xs[xs.size() / 2 - 1] + xs[xs.size() / 2]) / 2;
      os << key.first << "," << key.second << "," << mode << "," << xs.front()
         << "," << med << "," << xs.back() << "," << xs.size() << "\n";
    }
  }
  return os.str();
}

}  // namespace bossl
