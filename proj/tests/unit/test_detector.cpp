#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ccd/detector.hpp"
#include "ccd/error.hpp"
#include "ccd/rng.hpp"
#include "ccd/simulator.hpp"
#include "ccd/spectra.hpp"

using namespace ccd;

namespace {

const std::string kFixture = std::string(CCD_FIXTURE_DIR) + "/factorial";

CoverageRun fixture_run() {
  return load_run(kFixture + "/factorial.csv",
                  kFixture + "/instrumentation.csv", kFixture + "/faults.txt");
}

DetectionParams fixture_params() {
  DetectionParams params;
  params.seed = 42;
  params.forest.n_trees = 50;
  return params;
}

// Independent nearest-signature oracle: a passing test whose combo-1 vector
// is closer to the failing centroid than to the clean-passing centroid is
// called CC. Usable only on fixtures built with separable signatures.
std::set<std::string> nearest_signature_oracle(const CoverageRun& run) {
  const StatementId n = run.statement_count;
  auto vec = [&](const TestRecord& t) {
    std::vector<double> v(n, 0.0);
    for (StatementId s : t.trace.sequence) v[s - 1] += 1.0;
    return v;
  };
  std::vector<double> fail_centroid(n, 0.0);
  int fail_count = 0;
  for (const TestRecord& t : run.tests) {
    if (t.verdict != Verdict::Failing) continue;
    const auto v = vec(t);
    for (StatementId i = 0; i < n; ++i) fail_centroid[i] += v[i];
    ++fail_count;
  }
  for (StatementId i = 0; i < n; ++i) fail_centroid[i] /= fail_count;

  // Clean centroid from passing tests that never touch a faulty statement.
  std::vector<double> clean_centroid(n, 0.0);
  int clean_count = 0;
  for (const TestRecord& t : run.tests) {
    if (t.verdict != Verdict::Passing) continue;
    bool touches_fault = false;
    for (StatementId s : t.trace.sequence) {
      if (run.faulty_statements.count(s)) touches_fault = true;
    }
    if (touches_fault) continue;
    const auto v = vec(t);
    for (StatementId i = 0; i < n; ++i) clean_centroid[i] += v[i];
    ++clean_count;
  }
  for (StatementId i = 0; i < n; ++i) clean_centroid[i] /= clean_count;

  std::set<std::string> cc;
  for (const TestRecord& t : run.tests) {
    if (t.verdict != Verdict::Passing) continue;
    const auto v = vec(t);
    double to_fail = 0.0, to_clean = 0.0;
    for (StatementId i = 0; i < n; ++i) {
      to_fail += (v[i] - fail_centroid[i]) * (v[i] - fail_centroid[i]);
      to_clean += (v[i] - clean_centroid[i]) * (v[i] - clean_centroid[i]);
    }
    if (to_fail < to_clean) cc.insert(t.trace.test_id);
  }
  return cc;
}

} // namespace

TEST_CASE("vote tally implements cc_num >= ncc_num") {
  const TestVotes strict = tally_votes(
      {Verdict::Failing, Verdict::Failing, Verdict::Passing});
  CHECK(strict.cc_num == 2);
  CHECK(strict.ncc_num == 1);
  CHECK(strict.in_ct());

  const TestVotes tie = tally_votes({Verdict::Failing, Verdict::Passing});
  CHECK(tie.cc_num == 1);
  CHECK(tie.ncc_num == 1);
  CHECK(tie.in_ct()); // ties admit the test into CT

  const TestVotes clean = tally_votes(
      {Verdict::Passing, Verdict::Passing, Verdict::Failing});
  CHECK_FALSE(clean.in_ct());
}

TEST_CASE("vote rule property over random label multisets") {
  SplitMix64 rng(404);
  for (int iter = 0; iter < 10000; ++iter) {
    const int p = static_cast<int>(rng.range(1, 9));
    std::vector<Verdict> labels;
    int fails = 0;
    for (int i = 0; i < p; ++i) {
      const bool fail = rng.bernoulli(0.5);
      labels.push_back(fail ? Verdict::Failing : Verdict::Passing);
      fails += fail ? 1 : 0;
    }
    const TestVotes votes = tally_votes(labels);
    CHECK(votes.cc_num == fails);
    CHECK(votes.cc_num + votes.ncc_num == p);
    CHECK(votes.in_ct() == (votes.cc_num >= votes.ncc_num));
    CHECK(votes.labels == labels);
  }
}

TEST_CASE("fixture detection finds exactly the injected CC tests") {
  const CoverageRun run = fixture_run();
  const DetectionReport report = detect(run, fixture_params());

  CHECK(report.ct == std::set<std::string>{"TC4", "TC7"});
  CHECK(report.ct == nearest_signature_oracle(run));

  // 8 passing tests, default K = 10: one round over the whole pool.
  CHECK(report.effective_chunk_size == 8);
  REQUIRE(report.chunks.size() == 1);
  CHECK(report.chunks[0].pool_is_chunk);
  CHECK(report.chunks[0].effective_partitions == 3);
}

TEST_CASE("report structure invariants hold on the fixture") {
  const CoverageRun run = fixture_run();
  const DetectionReport report = detect(run, fixture_params());

  std::set<std::string> passing_ids, failing_ids;
  for (const TestRecord& t : run.tests) {
    (t.verdict == Verdict::Passing ? passing_ids : failing_ids)
        .insert(t.trace.test_id);
  }

  // CT is a subset of PT; every passing test is voted on exactly once.
  for (const std::string& id : report.ct) CHECK(passing_ids.count(id));
  CHECK(report.per_test.size() == passing_ids.size());
  std::map<std::string, int> seen;
  for (const ChunkRecord& chunk : report.chunks) {
    for (const std::string& id : chunk.tests) seen[id]++;
  }
  for (const auto& [id, count] : seen) CHECK(count == 1);
  CHECK(seen.size() == passing_ids.size());

  for (const auto& [id, votes] : report.per_test) {
    CHECK(static_cast<int>(votes.labels.size()) ==
          report.chunks[0].effective_partitions);
    CHECK(votes.cc_num + votes.ncc_num ==
          static_cast<int>(votes.labels.size()));
    CHECK((votes.cc_num >= votes.ncc_num) == (report.ct.count(id) > 0));
  }

  // Every failing test appears in every training manifest.
  for (const ChunkRecord& chunk : report.chunks) {
    for (const auto& manifest : chunk.training_sets) {
      for (const std::string& id : failing_ids) {
        CHECK(std::count(manifest.begin(), manifest.end(), id) == 1);
      }
    }
  }
}

TEST_CASE("detection is deterministic under a fixed seed") {
  const CoverageRun run = fixture_run();
  const DetectionReport a = detect(run, fixture_params());
  const DetectionReport b = detect(run, fixture_params());
  CHECK(detection_report_json(a).dump() == detection_report_json(b).dump());
}

TEST_CASE("fixed chunks: single chunk equals one round over all PT") {
  const CoverageRun run = fixture_run();
  std::vector<std::string> all_passing;
  for (const TestRecord& t : run.tests) {
    if (t.verdict == Verdict::Passing) all_passing.push_back(t.trace.test_id);
  }
  const DetectionReport fixed =
      detect_fixed_chunks(run, {all_passing}, fixture_params());
  REQUIRE(fixed.chunks.size() == 1);
  CHECK(fixed.chunks[0].pool_is_chunk);
  CHECK(fixed.ct == std::set<std::string>{"TC4", "TC7"});
}

TEST_CASE("fixed chunks: order permutation never changes the outcome") {
  SimParams sim;
  sim.n_passing = 24;
  sim.n_failing = 4;
  sim.cc_rate = 0.25;
  sim.statement_count = 25;
  sim.seed = 9;
  sim.signature_strength = 1.0;
  const SimResult result = simulate(sim);

  std::vector<std::string> passing;
  for (const TestRecord& t : result.run.tests) {
    if (t.verdict == Verdict::Passing) passing.push_back(t.trace.test_id);
  }
  std::vector<std::vector<std::string>> chunks;
  for (std::size_t start = 0; start < passing.size(); start += 8) {
    chunks.emplace_back(passing.begin() + static_cast<std::ptrdiff_t>(start),
                        passing.begin() +
                            static_cast<std::ptrdiff_t>(start + 8));
  }
  REQUIRE(chunks.size() == 3);

  DetectionParams params;
  params.seed = 5;
  params.forest.n_trees = 25;

  const DetectionReport forward =
      detect_fixed_chunks(result.run, chunks, params);
  std::vector<std::vector<std::string>> permuted{chunks[2], chunks[0],
                                                 chunks[1]};
  const DetectionReport shuffled =
      detect_fixed_chunks(result.run, permuted, params);

  CHECK(forward.ct == shuffled.ct);
  for (const auto& [id, votes] : forward.per_test) {
    CHECK(shuffled.per_test.at(id).labels == votes.labels);
  }
}

TEST_CASE("fixed chunks must partition the passing tests") {
  const CoverageRun run = fixture_run();
  const DetectionParams params = fixture_params();

  // A failing test id inside a chunk.
  CHECK_THROWS_AS(
      detect_fixed_chunks(
          run, {{"TC1", "TC2", "TC3", "TC4", "TC5", "TC6", "TC7", "TC9"}},
          params),
      Error);
  // Missing one passing test.
  CHECK_THROWS_AS(
      detect_fixed_chunks(run,
                          {{"TC1", "TC2", "TC3", "TC4", "TC5", "TC6", "TC7"}},
                          params),
      Error);
  // Duplicated across chunks.
  CHECK_THROWS_AS(
      detect_fixed_chunks(run, {{"TC1", "TC2", "TC3", "TC4"},
                                {"TC4", "TC5", "TC6", "TC7", "TC8"}},
                          params),
      Error);
  try {
    detect_fixed_chunks(run, {{"TC1"}}, params);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ChunksNotPartition);
  }
}

TEST_CASE("precondition errors") {
  const CoverageRun run = fixture_run();

  DetectionParams bad = fixture_params();
  bad.partitions = 1;
  CHECK_THROWS_AS(detect(run, bad), Error);

  bad = fixture_params();
  bad.combo_k = 4;
  CHECK_THROWS_AS(detect(run, bad), Error);

  bad = fixture_params();
  bad.pca.fraction = 0.0;
  CHECK_THROWS_AS(detect(run, bad), Error);

  // No passing tests at all.
  CoverageRun failing_only;
  failing_only.program_id = "x";
  failing_only.statement_count = 2;
  failing_only.tests.push_back(
      TestRecord{ExecutionTrace{"f1", {1, 2}}, Verdict::Failing});
  try {
    detect(failing_only, fixture_params());
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InsufficientPassing);
  }

  // No failing tests.
  CoverageRun passing_only;
  passing_only.program_id = "x";
  passing_only.statement_count = 2;
  passing_only.tests.push_back(
      TestRecord{ExecutionTrace{"p1", {1, 2}}, Verdict::Passing});
  try {
    detect(passing_only, fixture_params());
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoFailingTests);
  }
}

TEST_CASE("chunking covers every passing test once across rounds") {
  SimParams sim;
  sim.n_passing = 23; // not divisible by K
  sim.n_failing = 3;
  sim.cc_rate = 0.1;
  sim.statement_count = 20;
  sim.seed = 12;
  const SimResult result = simulate(sim);

  DetectionParams params;
  params.chunk_size = 5;
  params.partitions = 3;
  params.forest.n_trees = 10;
  params.seed = 1;
  const DetectionReport report = detect(result.run, params);

  REQUIRE(report.chunks.size() == 5); // 5+5+5+5+3
  CHECK(report.chunks.back().tests.size() == 3);
  std::set<std::string> seen;
  std::size_t total = 0;
  for (const ChunkRecord& chunk : report.chunks) {
    // Partition sizes differ by at most one.
    std::size_t min_size = SIZE_MAX, max_size = 0;
    for (const auto& manifest : chunk.training_sets) {
      const std::size_t passing_part = manifest.size() - 3; // minus FT
      min_size = std::min(min_size, passing_part);
      max_size = std::max(max_size, passing_part);
    }
    CHECK(max_size - min_size <= 1);
    for (const std::string& id : chunk.tests) {
      seen.insert(id);
      ++total;
    }
  }
  CHECK(total == 23);
  CHECK(seen.size() == 23);
  CHECK(report.per_test.size() == 23);
}

TEST_CASE("small pools lower the partition count and record it") {
  // 6 passing tests, K = 5: the first chunk of 5 leaves a single-test pool.
  SimParams sim;
  sim.n_passing = 6;
  sim.n_failing = 2;
  sim.cc_rate = 0.0;
  sim.statement_count = 15;
  sim.seed = 3;
  const SimResult result = simulate(sim);

  DetectionParams params;
  params.chunk_size = 5;
  params.partitions = 3;
  params.forest.n_trees = 5;
  const DetectionReport report = detect(result.run, params);

  REQUIRE(report.chunks.size() == 2);
  bool lowered = false;
  for (const ChunkRecord& chunk : report.chunks) {
    if (chunk.tests.size() == 5) {
      CHECK(chunk.effective_partitions == 1); // pool of one
      lowered = true;
      // Votes for these tests have a single label.
      for (const std::string& id : chunk.tests) {
        CHECK(report.per_test.at(id).labels.size() == 1);
      }
    }
  }
  CHECK(lowered);
}
