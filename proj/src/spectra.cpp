#include "ccd/spectra.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "ccd/digest.hpp"
#include "ccd/error.hpp"

namespace ccd {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Splits into lines; keeps track of 1-based numbering. A trailing newline
// does not produce an extra line.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

bool skippable(std::string_view line) {
  return line.empty() || line.front() == '#';
}

// Strict unsigned parse: the whole field must be digits, no signs, spaces or
// leading-plus allowed.
bool parse_u64(std::string_view field, std::uint64_t& out) {
  if (field.empty()) return false;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t end = line.find(sep, start);
    if (end == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, end - start));
    start = end + 1;
  }
  return fields;
}

StatementId parse_statement_id(std::string_view field, const std::string& path,
                               std::size_t line_no, StatementId universe) {
  std::uint64_t value = 0;
  if (!parse_u64(field, value) || value == 0) {
    throw Error::malformed(path, line_no,
                           "statement id must be a positive integer, got '" +
                               std::string(field) + "'");
  }
  if (value > universe) {
    throw Error(Errc::UnknownStatement,
                path + ":" + std::to_string(line_no) + ": statement " +
                    std::to_string(value) + " outside universe 1.." +
                    std::to_string(universe));
  }
  return static_cast<StatementId>(value);
}

struct Instrumentation {
  StatementId statement_count = 0;
  std::map<StatementId, SourceLocation> locations;
};

Instrumentation parse_instrumentation(const std::string& path) {
  Instrumentation result;
  const std::string text = read_file(path);
  const auto lines = split_lines(text);

  std::size_t header_line = 0;
  std::size_t i = 0;
  for (; i < lines.size(); ++i) {
    if (skippable(lines[i])) continue;
    header_line = i + 1;
    auto fields = split_fields(lines[i], ',');
    std::uint64_t count = 0;
    if (fields.size() != 2 || fields[0] != "statements" ||
        !parse_u64(fields[1], count) || count == 0) {
      throw Error::malformed(path, header_line,
                             "expected header 'statements,<count>'");
    }
    result.statement_count = static_cast<StatementId>(count);
    ++i;
    break;
  }
  if (result.statement_count == 0) {
    throw Error::malformed(path, lines.size(),
                           "missing 'statements,<count>' header");
  }

  for (; i < lines.size(); ++i) {
    if (skippable(lines[i])) continue;
    const std::size_t line_no = i + 1;
    auto fields = split_fields(lines[i], ',');
    if (fields.size() != 3) {
      throw Error::malformed(path, line_no, "expected 'id,file,line'");
    }
    StatementId id = parse_statement_id(fields[0], path, line_no,
                                        result.statement_count);
    if (result.locations.count(id)) {
      throw Error::malformed(path, line_no,
                             "statement " + std::to_string(id) +
                                 " declared twice");
    }
    if (fields[1].empty()) {
      throw Error::malformed(path, line_no, "empty file name");
    }
    std::uint64_t source_line = 0;
    if (!parse_u64(fields[2], source_line) || source_line == 0) {
      throw Error::malformed(path, line_no,
                             "line must be a positive integer");
    }
    result.locations[id] = SourceLocation{
        std::string(fields[1]), static_cast<std::uint32_t>(source_line)};
  }

  if (result.locations.size() != result.statement_count) {
    throw Error::malformed(
        path, header_line,
        "instrumentation lists " + std::to_string(result.locations.size()) +
            " statements, header declares " +
            std::to_string(result.statement_count));
  }
  return result;
}

std::vector<TestRecord> parse_coverage(const std::string& path,
                                       StatementId universe) {
  std::vector<TestRecord> tests;
  std::unordered_set<std::string> seen_ids;
  const std::string text = read_file(path);
  const auto lines = split_lines(text);

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (skippable(lines[i])) continue;
    const std::size_t line_no = i + 1;
    auto fields = split_fields(lines[i], ',');
    if (fields.size() != 3) {
      throw Error::malformed(path, line_no,
                             "expected 'test_id,verdict,trace'");
    }
    if (fields[0].empty()) {
      throw Error::malformed(path, line_no, "empty test id");
    }
    std::string test_id(fields[0]);
    if (!seen_ids.insert(test_id).second) {
      throw Error(Errc::DuplicateTestId,
                  path + ":" + std::to_string(line_no) +
                      ": duplicate test id '" + test_id + "'");
    }

    Verdict verdict;
    if (fields[1] == "-1") {
      verdict = Verdict::Passing;
    } else if (fields[1] == "+1") {
      verdict = Verdict::Failing;
    } else {
      throw Error::malformed(path, line_no,
                             "verdict must be -1 or +1, got '" +
                                 std::string(fields[1]) + "'");
    }

    if (fields[2].empty()) {
      throw Error::malformed(path, line_no, "empty trace");
    }
    std::vector<StatementId> sequence;
    for (std::string_view part : split_fields(fields[2], ';')) {
      sequence.push_back(parse_statement_id(part, path, line_no, universe));
    }
    tests.push_back(
        TestRecord{ExecutionTrace{std::move(test_id), std::move(sequence)},
                   verdict});
  }
  return tests;
}

std::set<StatementId> parse_faults(const std::string& path,
                                   StatementId universe) {
  std::set<StatementId> faults;
  const std::string text = read_file(path);
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (skippable(lines[i])) continue;
    faults.insert(parse_statement_id(lines[i], path, i + 1, universe));
  }
  if (faults.empty()) {
    throw Error::malformed(path, 1, "faults file declares no statements");
  }
  return faults;
}

} // namespace

Verdict verdict_from_encoding(int value) {
  if (value == -1) return Verdict::Passing;
  if (value == +1) return Verdict::Failing;
  throw Error(Errc::MalformedRecord,
              "verdict encoding must be -1 or +1, got " +
                  std::to_string(value));
}

std::vector<std::size_t> CoverageRun::passing_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tests.size(); ++i) {
    if (tests[i].verdict == Verdict::Passing) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> CoverageRun::failing_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tests.size(); ++i) {
    if (tests[i].verdict == Verdict::Failing) out.push_back(i);
  }
  return out;
}

const TestRecord* CoverageRun::find_test(std::string_view test_id) const {
  for (const TestRecord& t : tests) {
    if (t.trace.test_id == test_id) return &t;
  }
  return nullptr;
}

void validate_run(const CoverageRun& run) {
  if (run.statement_count == 0) {
    throw Error(Errc::MalformedRecord, "statement universe is empty");
  }
  std::unordered_set<std::string> ids;
  std::size_t failing = 0;
  for (const TestRecord& t : run.tests) {
    if (t.trace.test_id.empty()) {
      throw Error(Errc::MalformedRecord, "empty test id");
    }
    if (!ids.insert(t.trace.test_id).second) {
      throw Error(Errc::DuplicateTestId,
                  "duplicate test id '" + t.trace.test_id + "'");
    }
    if (t.trace.sequence.empty()) {
      throw Error(Errc::MalformedRecord,
                  "test '" + t.trace.test_id + "' has an empty trace");
    }
    for (StatementId s : t.trace.sequence) {
      if (s == 0 || s > run.statement_count) {
        throw Error(Errc::UnknownStatement,
                    "test '" + t.trace.test_id + "' references statement " +
                        std::to_string(s) + " outside universe 1.." +
                        std::to_string(run.statement_count));
      }
    }
    if (t.verdict == Verdict::Failing) ++failing;
  }
  if (failing == 0) {
    throw Error(Errc::NoFailingTests, "run has no failing tests");
  }
  for (StatementId s : run.faulty_statements) {
    if (s == 0 || s > run.statement_count) {
      throw Error(Errc::UnknownStatement,
                  "faulty statement " + std::to_string(s) +
                      " outside universe 1.." +
                      std::to_string(run.statement_count));
    }
  }
  for (const auto& [id, loc] : run.instrumentation) {
    if (id == 0 || id > run.statement_count) {
      throw Error(Errc::UnknownStatement,
                  "instrumented statement " + std::to_string(id) +
                      " outside universe");
    }
    (void)loc;
  }
}

CoverageRun load_run(const std::string& coverage_path,
                     const std::string& instrumentation_path,
                     const std::optional<std::string>& faults_path) {
  CoverageRun run;
  run.program_id = std::filesystem::path(coverage_path).stem().string();

  Instrumentation instr = parse_instrumentation(instrumentation_path);
  run.statement_count = instr.statement_count;
  run.instrumentation = std::move(instr.locations);
  run.tests = parse_coverage(coverage_path, run.statement_count);
  if (faults_path) {
    run.faulty_statements = parse_faults(*faults_path, run.statement_count);
  }
  validate_run(run);
  return run;
}

std::string coverage_to_string(const CoverageRun& run) {
  std::ostringstream out;
  for (const TestRecord& t : run.tests) {
    out << t.trace.test_id << ','
        << (t.verdict == Verdict::Passing ? "-1" : "+1") << ',';
    for (std::size_t i = 0; i < t.trace.sequence.size(); ++i) {
      if (i) out << ';';
      out << t.trace.sequence[i];
    }
    out << '\n';
  }
  return out.str();
}

std::string instrumentation_to_string(const CoverageRun& run) {
  std::ostringstream out;
  out << "statements," << run.statement_count << '\n';
  for (StatementId s = 1; s <= run.statement_count; ++s) {
    auto it = run.instrumentation.find(s);
    if (it != run.instrumentation.end()) {
      out << s << ',' << it->second.file << ',' << it->second.line << '\n';
    } else {
      // Synthesize a location so the emitted file always satisfies the
      // one-record-per-statement grammar.
      out << s << ',' << run.program_id << ',' << s << '\n';
    }
  }
  return out.str();
}

std::string faults_to_string(const CoverageRun& run) {
  std::ostringstream out;
  for (StatementId s : run.faulty_statements) out << s << '\n';
  return out.str();
}

void save_run(const CoverageRun& run, const std::string& coverage_path,
              const std::string& instrumentation_path,
              const std::string& faults_path) {
  auto write = [](const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write " + path);
    out << body;
  };
  write(coverage_path, coverage_to_string(run));
  write(instrumentation_path, instrumentation_to_string(run));
  write(faults_path, faults_to_string(run));
}

RunSummary summarize(const CoverageRun& run) {
  RunSummary s;
  s.statements = run.statement_count;
  s.faults = run.faulty_statements.size();
  std::size_t total_length = 0;
  for (const TestRecord& t : run.tests) {
    const std::size_t len = t.trace.sequence.size();
    if (t.verdict == Verdict::Passing) {
      ++s.passing;
    } else {
      ++s.failing;
    }
    if (s.min_trace_length == 0 || len < s.min_trace_length) {
      s.min_trace_length = len;
    }
    s.max_trace_length = std::max(s.max_trace_length, len);
    total_length += len;
  }
  if (!run.tests.empty()) {
    s.mean_trace_length =
        static_cast<double>(total_length) / static_cast<double>(run.tests.size());
  }
  return s;
}

std::uint64_t run_digest(const CoverageRun& run) {
  std::uint64_t h = fnv1a64(run.program_id);
  h = fnv1a64(coverage_to_string(run), h);
  h = fnv1a64(instrumentation_to_string(run), h);
  h = fnv1a64(faults_to_string(run), h);
  return h;
}

} // namespace ccd
