#include "ccd/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ccd/error.hpp"
#include "ccd/rng.hpp"

namespace ccd {

namespace {

struct ClassCounts {
  std::int64_t passing = 0;
  std::int64_t failing = 0;

  std::int64_t total() const { return passing + failing; }
  bool pure() const { return passing == 0 || failing == 0; }
};

// Candidate split quality is compared exactly. Minimizing the weighted Gini
// impurity over a fixed node is equivalent to maximizing
//   score = (aL^2 + bL^2)/nL + (aR^2 + bR^2)/nR,
// a rational number; candidates are ordered by cross-multiplication so that
// float rounding can never reorder true ties.
struct SplitScore {
  std::int64_t numerator = -1; // (aL^2+bL^2)*nR + (aR^2+bR^2)*nL
  std::int64_t denominator = 1; // nL * nR

  bool better_than(const SplitScore& other) const {
    return static_cast<__int128>(numerator) * other.denominator >
           static_cast<__int128>(other.numerator) * denominator;
  }
};

SplitScore score_split(const ClassCounts& left, const ClassCounts& right) {
  const std::int64_t nl = left.total();
  const std::int64_t nr = right.total();
  SplitScore s;
  s.numerator = (left.passing * left.passing + left.failing * left.failing) * nr +
                (right.passing * right.passing + right.failing * right.failing) * nl;
  s.denominator = nl * nr;
  return s;
}

// Weighted variant used only when class_weighting is on; plain doubles.
double weighted_split_score(const ClassCounts& left, const ClassCounts& right,
                            double w_pass, double w_fail) {
  auto side = [&](const ClassCounts& c) {
    const double wp = w_pass * static_cast<double>(c.passing);
    const double wf = w_fail * static_cast<double>(c.failing);
    const double total = wp + wf;
    if (total <= 0.0) return 0.0;
    return (wp * wp + wf * wf) / total;
  };
  return side(left) + side(right);
}

struct Candidate {
  int feature = -1;
  double threshold = 0.0;
  SplitScore score;
  double weighted_score = -1.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& X,
              const std::vector<Verdict>& y, const ForestParams& params,
              int dimension, int max_features, SplitMix64& rng)
      : x_(X), y_(y), params_(params), dimension_(dimension),
        max_features_(max_features), rng_(rng) {}

  void set_class_weights(double w_pass, double w_fail) {
    weight_pass_ = w_pass;
    weight_fail_ = w_fail;
  }

  DecisionTree build(const std::vector<std::size_t>& samples) {
    tree_.nodes.clear();
    grow(samples, 0);
    return std::move(tree_);
  }

 private:
  ClassCounts tally(const std::vector<std::size_t>& samples) const {
    ClassCounts c;
    for (std::size_t i : samples) {
      if (y_[i] == Verdict::Passing) {
        ++c.passing;
      } else {
        ++c.failing;
      }
    }
    return c;
  }

  // Leaf label is the majority class; an exact tie goes to Failing, the
  // same direction the forest-level vote tie takes.
  Verdict majority(const ClassCounts& c) const {
    if (params_.class_weighting) {
      const double wp = weight_pass_ * static_cast<double>(c.passing);
      const double wf = weight_fail_ * static_cast<double>(c.failing);
      return wf >= wp ? Verdict::Failing : Verdict::Passing;
    }
    return c.failing >= c.passing ? Verdict::Failing : Verdict::Passing;
  }

  int make_leaf(const ClassCounts& c) {
    TreeNode node;
    node.label = majority(c);
    node.class_counts = {c.passing, c.failing};
    tree_.nodes.push_back(node);
    return static_cast<int>(tree_.nodes.size() - 1);
  }

  // Distinct features, uniformly sampled, then ascended so that the
  // first-found-best rule realizes the (feature, threshold) tie-break.
  std::vector<int> sample_features() {
    std::vector<std::size_t> picked = rng_.sample_without_replacement(
        static_cast<std::size_t>(dimension_),
        static_cast<std::size_t>(max_features_));
    return {picked.begin(), picked.end()};
  }

  bool find_best_split(const std::vector<std::size_t>& samples,
                       Candidate& best) {
    const std::vector<int> features = sample_features();
    bool found = false;

    std::vector<std::size_t> order(samples);
    for (int f : features) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x_[a][static_cast<std::size_t>(f)] <
               x_[b][static_cast<std::size_t>(f)];
      });
      ClassCounts left;
      ClassCounts right = tally(samples);
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const std::size_t row = order[i];
        if (y_[row] == Verdict::Passing) {
          ++left.passing;
          --right.passing;
        } else {
          ++left.failing;
          --right.failing;
        }
        const double v = x_[row][static_cast<std::size_t>(f)];
        const double next = x_[order[i + 1]][static_cast<std::size_t>(f)];
        if (v == next) continue; // threshold only between distinct values
        Candidate c;
        c.feature = f;
        c.threshold = (v + next) / 2.0;
        if (params_.class_weighting) {
          c.weighted_score =
              weighted_split_score(left, right, weight_pass_, weight_fail_);
          if (!found || c.weighted_score > best.weighted_score) {
            best = c;
            found = true;
          }
        } else {
          c.score = score_split(left, right);
          if (!found || c.score.better_than(best.score)) {
            best = c;
            found = true;
          }
        }
      }
    }
    return found;
  }

  int grow(const std::vector<std::size_t>& samples, int depth) {
    const ClassCounts counts = tally(samples);
    const bool depth_capped =
        params_.max_depth >= 0 && depth >= params_.max_depth;
    if (counts.pure() || depth_capped ||
        counts.total() < params_.min_samples_split) {
      return make_leaf(counts);
    }

    Candidate best;
    if (!find_best_split(samples, best)) {
      return make_leaf(counts); // all sampled features constant
    }

    std::vector<std::size_t> left_samples, right_samples;
    for (std::size_t i : samples) {
      if (x_[i][static_cast<std::size_t>(best.feature)] <= best.threshold) {
        left_samples.push_back(i);
      } else {
        right_samples.push_back(i);
      }
    }

    TreeNode node;
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.class_counts = {counts.passing, counts.failing};
    tree_.nodes.push_back(node);
    const int index = static_cast<int>(tree_.nodes.size() - 1);
    const int left = grow(left_samples, depth + 1);
    const int right = grow(right_samples, depth + 1);
    tree_.nodes[static_cast<std::size_t>(index)].left = left;
    tree_.nodes[static_cast<std::size_t>(index)].right = right;
    return index;
  }

  const std::vector<std::vector<double>>& x_;
  const std::vector<Verdict>& y_;
  const ForestParams& params_;
  int dimension_;
  int max_features_;
  SplitMix64& rng_;
  DecisionTree tree_;
  double weight_pass_ = 1.0;
  double weight_fail_ = 1.0;
};

} // namespace

Verdict DecisionTree::predict(const std::vector<double>& row) const {
  int at = 0;
  while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
    const TreeNode& n = nodes[static_cast<std::size_t>(at)];
    at = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                 : n.right;
  }
  return nodes[static_cast<std::size_t>(at)].label;
}

ForestModel train_forest(const std::vector<std::vector<double>>& X,
                         const std::vector<Verdict>& y,
                         const ForestParams& params) {
  if (X.empty() || X.front().empty()) {
    throw Error(Errc::EmptyMatrix, "training matrix is empty");
  }
  if (X.size() != y.size()) {
    throw Error(Errc::DimensionMismatch,
                "row count " + std::to_string(X.size()) +
                    " does not match label count " + std::to_string(y.size()));
  }
  if (X.size() < 2) {
    throw Error(Errc::EmptyMatrix, "training needs at least 2 rows");
  }
  const std::size_t dimension = X.front().size();
  for (const auto& row : X) {
    if (row.size() != dimension) {
      throw Error(Errc::DimensionMismatch, "ragged training matrix");
    }
  }
  std::int64_t n_pass = 0, n_fail = 0;
  for (Verdict v : y) (v == Verdict::Passing ? n_pass : n_fail)++;
  if (n_pass == 0 || n_fail == 0) {
    throw Error(Errc::SingleClassTraining,
                "training labels contain a single class");
  }
  if (params.n_trees < 1) {
    throw Error(Errc::InfeasibleParams, "n_trees must be positive");
  }
  if (params.min_samples_split < 2) {
    throw Error(Errc::InfeasibleParams, "min_samples_split must be >= 2");
  }

  ForestModel model;
  model.n_trees = params.n_trees;
  model.seed = params.seed;
  model.dimension = static_cast<int>(dimension);
  model.max_features =
      params.max_features > 0
          ? std::min(params.max_features, model.dimension)
          : static_cast<int>(
                std::ceil(std::sqrt(static_cast<double>(dimension))));

  const double w_pass =
      static_cast<double>(n_pass + n_fail) / (2.0 * static_cast<double>(n_pass));
  const double w_fail =
      static_cast<double>(n_pass + n_fail) / (2.0 * static_cast<double>(n_fail));

  model.trees.reserve(static_cast<std::size_t>(params.n_trees));
  model.tree_samples.reserve(static_cast<std::size_t>(params.n_trees));
  const std::size_t n = X.size();
  for (int t = 0; t < params.n_trees; ++t) {
    // Fixed stream per tree: results do not depend on training order.
    SplitMix64 rng(params.seed + static_cast<std::uint64_t>(t));
    std::vector<std::size_t> samples(n);
    if (params.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) {
        samples[i] = static_cast<std::size_t>(rng.below(n));
      }
    } else {
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    TreeBuilder builder(X, y, params, model.dimension, model.max_features,
                        rng);
    if (params.class_weighting) builder.set_class_weights(w_pass, w_fail);
    model.trees.push_back(builder.build(samples));
    model.tree_samples.push_back(std::move(samples));
  }
  return model;
}

VoteTally predict_votes(const ForestModel& model,
                        const std::vector<double>& row) {
  if (static_cast<int>(row.size()) != model.dimension) {
    throw Error(Errc::DimensionMismatch,
                "predict expects dimension " + std::to_string(model.dimension) +
                    ", got " + std::to_string(row.size()));
  }
  VoteTally tally;
  for (const DecisionTree& tree : model.trees) {
    if (tree.predict(row) == Verdict::Failing) {
      ++tally.votes_fail;
    } else {
      ++tally.votes_pass;
    }
  }
  return tally;
}

Verdict predict(const ForestModel& model, const std::vector<double>& row) {
  const VoteTally tally = predict_votes(model, row);
  return tally.votes_fail >= tally.votes_pass ? Verdict::Failing
                                              : Verdict::Passing;
}

namespace {

void node_to_json(const DecisionTree& tree, int index, std::ostringstream& out) {
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(index)];
  if (n.is_leaf()) {
    out << "{\"type\":\"leaf\",\"label\":" << verdict_encoding(n.label)
        << ",\"counts\":[" << n.class_counts[0] << ',' << n.class_counts[1]
        << "]}";
    return;
  }
  out << "{\"type\":\"split\",\"feature\":" << n.feature << ",\"threshold\":"
      << n.threshold << ",\"left\":";
  node_to_json(tree, n.left, out);
  out << ",\"right\":";
  node_to_json(tree, n.right, out);
  out << '}';
}

} // namespace

std::string forest_to_json(const ForestModel& model) {
  std::ostringstream out;
  out.precision(17);
  out << "{\"n_trees\":" << model.n_trees
      << ",\"max_features\":" << model.max_features
      << ",\"dimension\":" << model.dimension << ",\"seed\":" << model.seed
      << ",\"trees\":[";
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    if (t) out << ',';
    node_to_json(model.trees[t], 0, out);
  }
  out << "]}";
  return out.str();
}

} // namespace ccd
