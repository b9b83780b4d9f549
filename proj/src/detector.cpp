#include "ccd/detector.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ccd/digest.hpp"
#include "ccd/error.hpp"
#include "ccd/rng.hpp"

namespace ccd {

namespace {

void validate_params(const DetectionParams& params) {
  if (params.chunk_size < 1) {
    throw Error(Errc::InfeasibleParams, "chunk size must be >= 1");
  }
  if (params.partitions < 2) {
    throw Error(Errc::InfeasibleParams,
                "majority voting needs at least 2 partitions");
  }
  if (params.combo_k < 1 || params.combo_k > 3) {
    throw Error(Errc::InfeasibleParams, "combo must be 1, 2 or 3");
  }
  if (!(params.pca.fraction > 0.0 && params.pca.fraction <= 1.0)) {
    throw Error(Errc::InfeasibleParams, "pca fraction must be in (0,1]");
  }
}

// Chunk streams are seeded from membership, not loop position, so a
// permuted chunk order reproduces identical per-chunk results.
std::uint64_t chunk_seed(std::uint64_t base_seed,
                         const std::vector<std::size_t>& chunk,
                         const CoverageRun& run) {
  std::vector<std::string> ids;
  ids.reserve(chunk.size());
  for (std::size_t i : chunk) ids.push_back(run.tests[i].trace.test_id);
  std::sort(ids.begin(), ids.end());
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const std::string& id : ids) {
    h = fnv1a64(id, h);
    h = fnv1a64("\n", h);
  }
  return mix_seed(base_seed, h);
}

std::vector<double> to_row(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

struct RoundOutcome {
  ChunkRecord record;
  // Labels per chunk test, one per partition forest.
  std::vector<std::vector<Verdict>> labels; // [test in chunk][partition]
};

// One round: partition the pool, train one forest per partition on
// partition + all failing tests, and have every forest label every chunk
// test.
RoundOutcome run_round(const CoverageRun& run,
                       const std::vector<std::size_t>& chunk,
                       const std::vector<std::size_t>& all_passing,
                       const std::vector<std::size_t>& failing,
                       const DetectionParams& params) {
  RoundOutcome outcome;
  for (std::size_t i : chunk) {
    outcome.record.tests.push_back(run.tests[i].trace.test_id);
  }

  std::unordered_set<std::size_t> in_chunk(chunk.begin(), chunk.end());
  std::vector<std::size_t> pool;
  for (std::size_t i : all_passing) {
    if (!in_chunk.count(i)) pool.push_back(i);
  }
  if (pool.empty()) {
    // The chunk spans every passing test: train on slices of the pool being
    // labeled, the single-round shape of the method.
    pool = chunk;
    outcome.record.pool_is_chunk = true;
  }

  const std::uint64_t seed = chunk_seed(params.seed, chunk, run);
  SplitMix64 rng(seed);
  rng.shuffle(pool);

  const int p_eff =
      static_cast<int>(std::min<std::size_t>(
          static_cast<std::size_t>(params.partitions), pool.size()));
  outcome.record.effective_partitions = p_eff;

  // Near-equal partition sizes: the first (n mod p) partitions get one extra.
  const std::size_t base = pool.size() / static_cast<std::size_t>(p_eff);
  const std::size_t extra = pool.size() % static_cast<std::size_t>(p_eff);

  outcome.labels.assign(chunk.size(), {});

  std::size_t cursor = 0;
  for (int m = 0; m < p_eff; ++m) {
    const std::size_t size =
        base + (static_cast<std::size_t>(m) < extra ? 1 : 0);
    std::vector<std::size_t> train_indices(
        pool.begin() + static_cast<std::ptrdiff_t>(cursor),
        pool.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    cursor += size;
    train_indices.insert(train_indices.end(), failing.begin(), failing.end());

    std::vector<std::string> manifest;
    std::vector<const ExecutionTrace*> train_traces;
    std::vector<Verdict> train_labels;
    for (std::size_t i : train_indices) {
      manifest.push_back(run.tests[i].trace.test_id);
      train_traces.push_back(&run.tests[i].trace);
      train_labels.push_back(run.tests[i].verdict);
    }
    outcome.record.training_sets.push_back(std::move(manifest));

    // Feature space comes from the training traces alone; combos the
    // training never saw are invisible to this forest.
    const std::vector<ComboKey> columns =
        collect_combo_columns(train_traces, params.combo_k);
    if (columns.empty()) {
      throw Error(Errc::EmptyMatrix,
                  "no combo-" + std::to_string(params.combo_k) +
                      " features exist in a training partition");
    }
    std::map<ComboKey, std::size_t> index;
    for (std::size_t c = 0; c < columns.size(); ++c) index[columns[c]] = c;

    Eigen::MatrixXd train(static_cast<Eigen::Index>(train_traces.size()),
                          static_cast<Eigen::Index>(columns.size()));
    for (std::size_t r = 0; r < train_traces.size(); ++r) {
      train.row(static_cast<Eigen::Index>(r)) =
          count_row(*train_traces[r], index, params.combo_k);
    }

    const PcaModel pca =
        fit_pca(train, params.pca.mode, params.pca.fraction);
    const Eigen::MatrixXd projected = pca_transform_rows(pca, train);

    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(projected.rows()));
    for (Eigen::Index r = 0; r < projected.rows(); ++r) {
      rows.push_back(to_row(projected.row(r).transpose()));
    }

    ForestParams forest_params = params.forest;
    forest_params.seed = mix_seed(seed, static_cast<std::uint64_t>(m) + 1);
    const ForestModel forest = train_forest(rows, train_labels, forest_params);

    for (std::size_t t = 0; t < chunk.size(); ++t) {
      const Eigen::RowVectorXd counts =
          count_row(run.tests[chunk[t]].trace, index, params.combo_k);
      const Eigen::VectorXd z = pca_transform(pca, counts.transpose());
      outcome.labels[t].push_back(predict(forest, to_row(z)));
    }
  }
  return outcome;
}

DetectionReport run_chunks(const CoverageRun& run,
                           const std::vector<std::vector<std::size_t>>& chunks,
                           const DetectionParams& params,
                           int effective_chunk_size) {
  const std::vector<std::size_t> passing = run.passing_indices();
  const std::vector<std::size_t> failing = run.failing_indices();

  DetectionReport report;
  report.params = params;
  report.effective_chunk_size = effective_chunk_size;
  report.source_digest = run_digest(run);

  for (const auto& chunk : chunks) {
    RoundOutcome outcome = run_round(run, chunk, passing, failing, params);
    for (std::size_t t = 0; t < chunk.size(); ++t) {
      const std::string& id = run.tests[chunk[t]].trace.test_id;
      TestVotes votes = tally_votes(outcome.labels[t]);
      if (votes.in_ct()) report.ct.insert(id);
      report.per_test[id] = std::move(votes);
    }
    report.chunks.push_back(std::move(outcome.record));
  }
  return report;
}

} // namespace

TestVotes tally_votes(const std::vector<Verdict>& labels) {
  TestVotes votes;
  votes.labels = labels;
  for (Verdict v : labels) {
    if (v == Verdict::Failing) {
      ++votes.cc_num;
    } else {
      ++votes.ncc_num;
    }
  }
  return votes;
}

DetectionReport detect(const CoverageRun& run, const DetectionParams& params) {
  validate_params(params);
  if (run.failing_indices().empty()) {
    throw Error(Errc::NoFailingTests, "detection needs failing tests");
  }
  std::vector<std::size_t> passing = run.passing_indices();
  if (passing.empty()) {
    throw Error(Errc::InsufficientPassing,
                "run has no passing tests to examine");
  }

  const std::size_t k = std::min<std::size_t>(
      static_cast<std::size_t>(params.chunk_size), passing.size());

  SplitMix64 rng(params.seed);
  rng.shuffle(passing);

  std::vector<std::vector<std::size_t>> chunks;
  for (std::size_t start = 0; start < passing.size(); start += k) {
    const std::size_t end = std::min(passing.size(), start + k);
    chunks.emplace_back(passing.begin() + static_cast<std::ptrdiff_t>(start),
                        passing.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return run_chunks(run, chunks, params, static_cast<int>(k));
}

DetectionReport detect_fixed_chunks(
    const CoverageRun& run, const std::vector<std::vector<std::string>>& chunks,
    const DetectionParams& params) {
  validate_params(params);
  if (run.failing_indices().empty()) {
    throw Error(Errc::NoFailingTests, "detection needs failing tests");
  }

  std::unordered_map<std::string, std::size_t> passing_index;
  for (std::size_t i = 0; i < run.tests.size(); ++i) {
    if (run.tests[i].verdict == Verdict::Passing) {
      passing_index[run.tests[i].trace.test_id] = i;
    }
  }
  if (passing_index.empty()) {
    throw Error(Errc::InsufficientPassing,
                "run has no passing tests to examine");
  }

  std::unordered_set<std::string> seen;
  std::vector<std::vector<std::size_t>> resolved;
  std::size_t total = 0;
  int max_chunk = 0;
  for (const auto& chunk : chunks) {
    std::vector<std::size_t> indices;
    for (const std::string& id : chunk) {
      auto it = passing_index.find(id);
      if (it == passing_index.end()) {
        throw Error(Errc::ChunksNotPartition,
                    "'" + id + "' is not a passing test of this run");
      }
      if (!seen.insert(id).second) {
        throw Error(Errc::ChunksNotPartition,
                    "'" + id + "' appears in more than one chunk");
      }
      indices.push_back(it->second);
    }
    total += chunk.size();
    max_chunk = std::max(max_chunk, static_cast<int>(chunk.size()));
    resolved.push_back(std::move(indices));
  }
  if (total != passing_index.size()) {
    throw Error(Errc::ChunksNotPartition,
                "chunks cover " + std::to_string(total) + " of " +
                    std::to_string(passing_index.size()) + " passing tests");
  }
  return run_chunks(run, resolved, params, max_chunk);
}

nlohmann::ordered_json detection_report_json(const DetectionReport& report) {
  nlohmann::ordered_json j;
  j["params"] = {
      {"chunk_size", report.params.chunk_size},
      {"effective_chunk_size", report.effective_chunk_size},
      {"partitions", report.params.partitions},
      {"combo", report.params.combo_k},
      {"pca",
       {{"mode", report.params.pca.mode == PcaMode::VarianceFraction
                     ? "variance"
                     : "dims"},
        {"fraction", report.params.pca.fraction}}},
      {"forest",
       {{"n_trees", report.params.forest.n_trees},
        {"max_features", report.params.forest.max_features},
        {"max_depth", report.params.forest.max_depth},
        {"min_samples_split", report.params.forest.min_samples_split},
        {"bootstrap", report.params.forest.bootstrap},
        {"class_weighting", report.params.forest.class_weighting}}},
      {"seed", report.params.seed},
  };
  j["source_digest"] = digest_hex(report.source_digest);

  j["chunks"] = nlohmann::ordered_json::array();
  for (const ChunkRecord& chunk : report.chunks) {
    j["chunks"].push_back({{"tests", chunk.tests},
                           {"effective_partitions", chunk.effective_partitions},
                           {"pool_is_chunk", chunk.pool_is_chunk},
                           {"training_sets", chunk.training_sets}});
  }

  // std::map iteration keeps per_test keys sorted, so dumps are diffable.
  j["per_test"] = nlohmann::ordered_json::object();
  for (const auto& [id, votes] : report.per_test) {
    std::vector<int> labels;
    for (Verdict v : votes.labels) labels.push_back(verdict_encoding(v));
    j["per_test"][id] = {{"labels", labels},
                         {"cc_num", votes.cc_num},
                         {"ncc_num", votes.ncc_num}};
  }

  j["ct"] = std::vector<std::string>(report.ct.begin(), report.ct.end());
  return j;
}

} // namespace ccd
