#pragma once

#include <cstdint>
#include <set>
#include <string>

#include "ccd/detector.hpp"
#include "ccd/spectra.hpp"

namespace ccd {

struct SimParams {
  std::string program_id = "sim";
  StatementId statement_count = 50;
  int n_passing = 100;
  int n_failing = 10;
  double cc_rate = 0.1;        // floor(cc_rate * n_passing) CC tests injected
  int fault_count = 1;
  int trace_len_min = 10;
  int trace_len_max = 30;
  // How strongly CC traces carry the failing-style signature around the
  // fault. At 1.0 a CC trace is signature-identical to a failing one; lower
  // values dilute it toward a bare fault hit.
  double signature_strength = 0.8;
  std::uint64_t seed = 0;
};

struct SimResult {
  CoverageRun run;
  std::set<std::string> ground_truth_cc;
};

// Synthetic coverage run with known CC tests. Failing tests always traverse
// a faulty statement inside a fixed signature block; CC tests traverse the
// fault too but are labeled passing; clean passing tests never touch a
// faulty statement. Byte-deterministic under seed.
SimResult simulate(const SimParams& params);

// Writes <program_id>.csv (coverage), instrumentation.csv, faults.txt and
// truth.txt (one CC test id per line) into `directory`.
void write_sim_files(const SimResult& result, const std::string& directory);

struct ScoreSummary {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int true_positives = 0;
  int false_positives = 0;
  int false_negatives = 0;
};

// Precision/recall/F1 of the detected set against ground truth. Empty
// denominators score 1 (nothing claimed / nothing to find). Every truth id
// must appear in the report, else RunMismatch.
ScoreSummary score(const DetectionReport& report,
                   const std::set<std::string>& ground_truth_cc);

} // namespace ccd
