#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ccd {

// Every failure mode the library reports. The CLI maps these onto process
// exit codes, so new values must be added to exit_code_for() as well.
enum class Errc {
  IoError,            // file missing / unreadable
  MalformedRecord,    // input file violates its grammar
  UnknownStatement,   // statement id outside the declared universe
  DuplicateTestId,
  NoFailingTests,
  DegenerateInput,    // e.g. PCA on fewer than 2 rows
  DimensionMismatch,
  SingleClassTraining,
  EmptyMatrix,
  InsufficientPassing,
  ChunksNotPartition,
  UnknownTestId,
  RunMismatch,
  MissingFaults,      // cost evaluation without fault ground truth
  InfeasibleParams,
};

constexpr std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::IoError: return "IoError";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::UnknownStatement: return "UnknownStatement";
    case Errc::DuplicateTestId: return "DuplicateTestId";
    case Errc::NoFailingTests: return "NoFailingTests";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::SingleClassTraining: return "SingleClassTraining";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::InsufficientPassing: return "InsufficientPassing";
    case Errc::ChunksNotPartition: return "ChunksNotPartition";
    case Errc::UnknownTestId: return "UnknownTestId";
    case Errc::RunMismatch: return "RunMismatch";
    case Errc::MissingFaults: return "MissingFaults";
    case Errc::InfeasibleParams: return "InfeasibleParams";
  }
  return "Unknown";
}

// Process exit codes: 0 success, 2 input format error, 3 precondition
// violation, 4 infeasible parameters.
constexpr int exit_code_for(Errc c) {
  switch (c) {
    case Errc::IoError:
    case Errc::MalformedRecord:
    case Errc::UnknownStatement:
    case Errc::DuplicateTestId:
      return 2;
    case Errc::InfeasibleParams:
      return 4;
    default:
      return 3;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  Errc code() const { return code_; }
  std::string_view code_name() const { return errc_name(code_); }
  int exit_code() const { return exit_code_for(code_); }

  // Parse error pointing at a 1-based line of an input file.
  static Error malformed(const std::string& file, std::size_t line,
                         const std::string& reason) {
    return Error(Errc::MalformedRecord,
                 file + ":" + std::to_string(line) + ": " + reason);
  }

 private:
  Errc code_;
};

} // namespace ccd
