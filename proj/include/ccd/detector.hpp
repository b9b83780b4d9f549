#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccd/features.hpp"
#include "ccd/forest.hpp"
#include "ccd/spectra.hpp"

namespace ccd {

struct PcaSettings {
  PcaMode mode = PcaMode::VarianceFraction;
  double fraction = 0.6;
};

struct DetectionParams {
  int chunk_size = 10;  // K: passing tests labeled per round
  int partitions = 3;   // p: forests voting on each round
  int combo_k = 1;
  PcaSettings pca;
  ForestParams forest;  // forest.seed is ignored; streams derive from seed
  std::uint64_t seed = 0;
};

// Votes cast on one passing test by the p partition forests of its round.
struct TestVotes {
  std::vector<Verdict> labels; // Failing = voted coincidentally correct
  int cc_num = 0;
  int ncc_num = 0;

  bool in_ct() const { return cc_num >= ncc_num; }
};

// What one round did, for report provenance and auditing.
struct ChunkRecord {
  std::vector<std::string> tests;       // labeled this round
  int effective_partitions = 0;         // p, possibly lowered
  bool pool_is_chunk = false;           // training pool fell back to chunk
  // Full training manifests, one per partition forest: the partition's
  // passing tests followed by every failing test.
  std::vector<std::vector<std::string>> training_sets;
};

struct DetectionReport {
  std::set<std::string> ct;                    // detected CC tests
  std::map<std::string, TestVotes> per_test;   // every passing test
  DetectionParams params;
  int effective_chunk_size = 0;                // K clamped to |PT|
  std::vector<ChunkRecord> chunks;
  std::uint64_t source_digest = 0;             // run_digest of the input
};

// Counts Failing/Passing labels and applies the cc_num >= ncc_num rule.
TestVotes tally_votes(const std::vector<Verdict>& labels);

// One detection pass: shuffle the passing tests (seeded), walk them in
// chunks of K, and for each chunk train `partitions` forests on disjoint
// near-equal splits of the other passing tests, each merged with every
// failing test. Each forest labels every chunk test; a test whose Failing
// labels reach at least half joins CT.
//
// Every chunk's computation is seeded from its membership, not its position,
// so chunk order never changes the outcome.
//
// When a chunk spans all passing tests (K >= |PT|), the training pool falls
// back to the chunk itself: the forests are trained on slices of the very
// pool they label. Reports mark such rounds with pool_is_chunk.
DetectionReport detect(const CoverageRun& run, const DetectionParams& params);

// Same semantics with an externally pinned chunking. `chunks` must partition
// the passing test ids exactly.
DetectionReport detect_fixed_chunks(
    const CoverageRun& run, const std::vector<std::vector<std::string>>& chunks,
    const DetectionParams& params);

// Stable-key-ordered JSON rendition of the report body.
nlohmann::ordered_json detection_report_json(const DetectionReport& report);

} // namespace ccd
