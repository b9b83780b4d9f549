#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ccd {

// 1-based index into the instrumented statement universe of a run.
using StatementId = std::uint32_t;

// Serialized encoding is -1 for passing, +1 for failing, everywhere.
enum class Verdict : int { Passing = -1, Failing = +1 };

constexpr int verdict_encoding(Verdict v) { return static_cast<int>(v); }

Verdict verdict_from_encoding(int value);

struct ExecutionTrace {
  std::string test_id;
  std::vector<StatementId> sequence; // ordered, with repetitions, non-empty

  bool operator==(const ExecutionTrace&) const = default;
};

struct SourceLocation {
  std::string file;
  std::uint32_t line = 0;

  bool operator==(const SourceLocation&) const = default;
};

struct TestRecord {
  ExecutionTrace trace;
  Verdict verdict = Verdict::Passing;

  bool operator==(const TestRecord&) const = default;
};

// Full spectra of one test suite run against one faulty program. Immutable
// after construction; safe to share read-only across workers.
struct CoverageRun {
  std::string program_id;
  StatementId statement_count = 0;
  std::vector<TestRecord> tests;
  std::map<StatementId, SourceLocation> instrumentation;
  // Ground truth, consumed only by cost evaluation. Empty when the run was
  // loaded without a faults file (detection does not need it).
  std::set<StatementId> faulty_statements;

  std::vector<std::size_t> passing_indices() const;
  std::vector<std::size_t> failing_indices() const;
  const TestRecord* find_test(std::string_view test_id) const;

  bool operator==(const CoverageRun&) const = default;
};

struct RunSummary {
  std::size_t passing = 0;
  std::size_t failing = 0;
  StatementId statements = 0;
  std::size_t faults = 0;
  std::size_t min_trace_length = 0;
  std::size_t max_trace_length = 0;
  double mean_trace_length = 0.0;
};

// Loads and cross-validates the three input files. `faults_path` may be
// empty; the resulting run then carries no ground truth and is usable for
// detection but not for cost evaluation.
//
// Formats (UTF-8, line-oriented, '#' starts a comment line):
//   coverage:        test_id,verdict,trace   verdict in {-1,+1},
//                    trace = ';'-separated statement ids, e.g. 1;2;5;6;5;2
//   instrumentation: header "statements,<count>", then one "id,file,line"
//                    record per statement, each id 1..count exactly once
//   faults:          one statement id per line, at least one
//
// Errors carry 1-based line numbers; trailing garbage is rejected.
CoverageRun load_run(const std::string& coverage_path,
                     const std::string& instrumentation_path,
                     const std::optional<std::string>& faults_path);

// In-memory renditions of the three file bodies, byte-stable.
std::string coverage_to_string(const CoverageRun& run);
std::string instrumentation_to_string(const CoverageRun& run);
std::string faults_to_string(const CoverageRun& run);

void save_run(const CoverageRun& run, const std::string& coverage_path,
              const std::string& instrumentation_path,
              const std::string& faults_path);

RunSummary summarize(const CoverageRun& run);

// Digest over the canonical serialization of the run, for report provenance.
std::uint64_t run_digest(const CoverageRun& run);

// Validates every CoverageRun invariant; throws on violation. load_run and
// the simulator both funnel through this.
void validate_run(const CoverageRun& run);

} // namespace ccd
