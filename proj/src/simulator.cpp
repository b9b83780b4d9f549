#include "ccd/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ccd/error.hpp"
#include "ccd/rng.hpp"

namespace ccd {

namespace {

// Failing traces carry the fault inside two copies of a three-statement
// signature block [before, fault, after]. CC traces carry each block with
// probability signature_strength, but always at least a bare fault hit, so
// every CC trace covers the fault while its evidence dilutes as the
// strength drops. Clean traces draw from the non-faulty universe only.
constexpr int kSignatureBlockLen = 3;
constexpr int kBlocksPerFailingTrace = 2;
constexpr int kMinTraceLen = kSignatureBlockLen * kBlocksPerFailingTrace;

void validate_params(const SimParams& p) {
  auto reject = [](const std::string& why) {
    throw Error(Errc::InfeasibleParams, why);
  };
  if (p.n_failing < 1) reject("need at least one failing test");
  if (p.n_passing < 0) reject("negative passing test count");
  if (!(p.cc_rate >= 0.0 && p.cc_rate < 1.0)) {
    reject("cc_rate must be in [0,1)");
  }
  if (p.fault_count < 1) reject("need at least one faulty statement");
  if (!(p.signature_strength > 0.0 && p.signature_strength <= 1.0)) {
    reject("signature_strength must be in (0,1]");
  }
  if (p.trace_len_min < kMinTraceLen) {
    reject("trace_len_min must be >= " + std::to_string(kMinTraceLen) +
           " to fit the fault signature");
  }
  if (p.trace_len_max < p.trace_len_min) {
    reject("trace_len_max below trace_len_min");
  }
  // Universe must leave room for companions and clean filler.
  if (p.statement_count < static_cast<StatementId>(p.fault_count) + 3) {
    reject("statement universe too small for " +
           std::to_string(p.fault_count) + " faults plus signature context");
  }
  if (p.program_id.empty()) reject("empty program id");
}

std::string padded_id(char prefix, int index, int total) {
  const std::string digits = std::to_string(index + 1);
  const std::size_t width = std::to_string(total).size();
  std::string out(1, prefix);
  if (digits.size() < width) out.append(width - digits.size(), '0');
  out += digits;
  return out;
}

} // namespace

SimResult simulate(const SimParams& params) {
  validate_params(params);
  SplitMix64 rng(params.seed);

  SimResult result;
  CoverageRun& run = result.run;
  run.program_id = params.program_id;
  run.statement_count = params.statement_count;

  for (StatementId s = 1; s <= params.statement_count; ++s) {
    run.instrumentation[s] =
        SourceLocation{params.program_id + ".c", s};
  }

  // Faulty statements, then per-fault companion statements for the
  // signature blocks.
  std::vector<StatementId> universe(params.statement_count);
  for (StatementId s = 1; s <= params.statement_count; ++s) {
    universe[s - 1] = s;
  }
  std::vector<std::size_t> fault_slots = rng.sample_without_replacement(
      params.statement_count, static_cast<std::size_t>(params.fault_count));
  std::vector<StatementId> faults;
  for (std::size_t slot : fault_slots) {
    faults.push_back(universe[slot]);
    run.faulty_statements.insert(universe[slot]);
  }

  std::vector<StatementId> clean_pool;
  for (StatementId s : universe) {
    if (!run.faulty_statements.count(s)) clean_pool.push_back(s);
  }
  auto draw_clean = [&]() {
    return clean_pool[static_cast<std::size_t>(rng.below(clean_pool.size()))];
  };

  struct Signature {
    StatementId before, fault, after;
  };
  std::vector<Signature> signatures;
  for (StatementId f : faults) {
    Signature sig;
    sig.fault = f;
    sig.before = draw_clean();
    do {
      sig.after = draw_clean();
    } while (sig.after == sig.before);
    signatures.push_back(sig);
  }

  const int n_cc = static_cast<int>(
      std::floor(params.cc_rate * static_cast<double>(params.n_passing)));
  std::vector<std::size_t> cc_slots = rng.sample_without_replacement(
      static_cast<std::size_t>(params.n_passing),
      static_cast<std::size_t>(n_cc));
  std::vector<bool> is_cc(static_cast<std::size_t>(params.n_passing), false);
  for (std::size_t slot : cc_slots) is_cc[slot] = true;

  auto random_length = [&]() {
    return static_cast<int>(
        rng.range(params.trace_len_min, params.trace_len_max));
  };

  // Builds a trace of exactly `length` statements: clean filler with the
  // given signature blocks spliced in at random positions.
  auto make_trace = [&](int length, const std::vector<Signature>& blocks,
                        bool bare_fault, StatementId fault) {
    std::vector<StatementId> body;
    const int reserved = static_cast<int>(blocks.size()) * kSignatureBlockLen +
                         (bare_fault ? 1 : 0);
    const int filler = std::max(0, length - reserved);
    for (int i = 0; i < filler; ++i) body.push_back(draw_clean());
    for (const Signature& sig : blocks) {
      const std::size_t at =
          static_cast<std::size_t>(rng.below(body.size() + 1));
      body.insert(body.begin() + static_cast<std::ptrdiff_t>(at),
                  {sig.before, sig.fault, sig.after});
    }
    if (bare_fault) {
      const std::size_t at =
          static_cast<std::size_t>(rng.below(body.size() + 1));
      body.insert(body.begin() + static_cast<std::ptrdiff_t>(at), fault);
    }
    return body;
  };

  for (int i = 0; i < params.n_passing; ++i) {
    const std::string id = padded_id('p', i, params.n_passing);
    std::vector<StatementId> trace;
    if (is_cc[static_cast<std::size_t>(i)]) {
      const Signature& sig =
          signatures[static_cast<std::size_t>(rng.below(signatures.size()))];
      std::vector<Signature> blocks;
      for (int b = 0; b < kBlocksPerFailingTrace; ++b) {
        if (rng.bernoulli(params.signature_strength)) blocks.push_back(sig);
      }
      const bool bare = blocks.empty();
      trace = make_trace(random_length(), blocks, bare, sig.fault);
      result.ground_truth_cc.insert(id);
    } else {
      trace = make_trace(random_length(), {}, false, 0);
    }
    run.tests.push_back(
        TestRecord{ExecutionTrace{id, std::move(trace)}, Verdict::Passing});
  }

  for (int i = 0; i < params.n_failing; ++i) {
    const std::string id = padded_id('f', i, params.n_failing);
    const Signature& sig =
        signatures[static_cast<std::size_t>(rng.below(signatures.size()))];
    std::vector<Signature> blocks(kBlocksPerFailingTrace, sig);
    run.tests.push_back(TestRecord{
        ExecutionTrace{id, make_trace(random_length(), blocks, false, 0)},
        Verdict::Failing});
  }

  validate_run(run);
  return result;
}

void write_sim_files(const SimResult& result, const std::string& directory) {
  std::filesystem::create_directories(directory);
  const std::filesystem::path dir(directory);
  // The coverage file carries the program id as its stem so a reload
  // reconstructs the same run.
  save_run(result.run, (dir / (result.run.program_id + ".csv")).string(),
           (dir / "instrumentation.csv").string(),
           (dir / "faults.txt").string());
  std::ofstream truth(dir / "truth.txt", std::ios::binary | std::ios::trunc);
  if (!truth) {
    throw Error(Errc::IoError, "cannot write " + (dir / "truth.txt").string());
  }
  for (const std::string& id : result.ground_truth_cc) truth << id << '\n';
}

ScoreSummary score(const DetectionReport& report,
                   const std::set<std::string>& ground_truth_cc) {
  for (const std::string& id : ground_truth_cc) {
    if (!report.per_test.count(id)) {
      throw Error(Errc::RunMismatch,
                  "ground truth test '" + id +
                      "' does not appear in the detection report");
    }
  }
  ScoreSummary s;
  for (const std::string& id : report.ct) {
    if (ground_truth_cc.count(id)) {
      ++s.true_positives;
    } else {
      ++s.false_positives;
    }
  }
  s.false_negatives =
      static_cast<int>(ground_truth_cc.size()) - s.true_positives;

  s.precision = report.ct.empty()
                    ? 1.0
                    : static_cast<double>(s.true_positives) /
                          static_cast<double>(report.ct.size());
  s.recall = ground_truth_cc.empty()
                 ? 1.0
                 : static_cast<double>(s.true_positives) /
                       static_cast<double>(ground_truth_cc.size());
  s.f1 = (s.precision + s.recall) > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

} // namespace ccd
