#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ccd/spectra.hpp"

namespace ccd {

struct ForestParams {
  int n_trees = 100;
  int max_features = 0;      // per-split feature subsample; 0 = ceil(sqrt(d))
  int max_depth = -1;        // -1 = unlimited
  int min_samples_split = 2;
  bool bootstrap = true;     // false trains each tree on the full sample
  bool class_weighting = false; // weight classes inversely to frequency
  std::uint64_t seed = 0;
};

// Flat-arena tree node. feature < 0 marks a leaf.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  Verdict label = Verdict::Passing;
  std::array<std::int64_t, 2> class_counts{0, 0}; // {passing, failing}

  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes; // root at index 0

  Verdict predict(const std::vector<double>& row) const;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  int n_trees = 0;
  int max_features = 0;
  std::uint64_t seed = 0;
  int dimension = 0;
  // Training metadata: the row indices each tree was fitted on.
  std::vector<std::vector<std::size_t>> tree_samples;
};

struct VoteTally {
  int votes_fail = 0;
  int votes_pass = 0;
};

// CART with Gini splits, bagged. Tree t draws from SplitMix64(seed + t), so
// per-tree results are independent of training order. Thresholds are
// midpoints between consecutive distinct feature values; split ties break
// toward the lowest feature index, then the lowest threshold.
ForestModel train_forest(const std::vector<std::vector<double>>& X,
                         const std::vector<Verdict>& y,
                         const ForestParams& params);

// Majority vote over per-tree leaf labels; an exact tie returns Failing.
Verdict predict(const ForestModel& model, const std::vector<double>& row);

VoteTally predict_votes(const ForestModel& model,
                        const std::vector<double>& row);

// Debugging dump (node type, feature, threshold, children, leaf counts).
// Not a stability-guaranteed format.
std::string forest_to_json(const ForestModel& model);

} // namespace ccd
