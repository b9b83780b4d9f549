#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ccd/spectra.hpp"

namespace ccd {

// A length-k consecutive statement subsequence, k in {1,2,3}.
struct ComboKey {
  std::vector<StatementId> statements;

  int k() const { return static_cast<int>(statements.size()); }
  // Column label for CSV dumps: "5", "5|6", "5|6|7".
  std::string label() const;

  auto operator<=>(const ComboKey&) const = default;
};

enum class PcaMode { VarianceFraction, DimensionFraction };

// Fitted principal-component projection. components is r x d with
// orthonormal rows; transform maps a length-d row to length r.
struct PcaModel {
  Eigen::VectorXd mean;               // length d
  Eigen::MatrixXd components;         // r x d, orthonormal rows
  Eigen::VectorXd explained_variance; // length r, non-increasing
  double total_variance = 0.0;        // sum over all d directions
  PcaMode mode = PcaMode::VarianceFraction;
  double fraction = 0.6;

  Eigen::Index input_dimension() const { return components.cols(); }
  Eigen::Index retained_components() const { return components.rows(); }
};

struct FeatureMatrix {
  int combo_k = 1;
  std::vector<ComboKey> columns;               // lexicographically sorted
  std::map<ComboKey, std::size_t> column_index;
  std::vector<std::string> row_ids;            // test order of the source run
  Eigen::MatrixXd values;                      // counts, or scores post-PCA
  std::optional<PcaModel> pca;                 // set once projected
};

// Columns observed across `traces` for combo size k, lexicographically
// sorted so identical runs serialize byte-identically.
std::vector<ComboKey> collect_combo_columns(
    const std::vector<const ExecutionTrace*>& traces, int k);

// Sliding-window occurrence counts of each column key in one trace. Combos
// absent from `index` are ignored.
Eigen::RowVectorXd count_row(const ExecutionTrace& trace,
                             const std::map<ComboKey, std::size_t>& index,
                             int k);

// Count matrix over the whole run: one row per test (run order), one column
// per combo present in any trace.
FeatureMatrix build_features(const CoverageRun& run, int k);

// CSV dump: header of column labels, one row per test id.
std::string features_csv(const FeatureMatrix& m);

// Principal components of the sample covariance of X (rows = observations).
// Retains ceil(fraction*d) components in DimensionFraction mode, or the
// smallest prefix reaching `fraction` of total variance in VarianceFraction
// mode. Zero-variance input retains a single component.
PcaModel fit_pca(const Eigen::MatrixXd& X, PcaMode mode, double fraction);

// components * (row - mean); throws DimensionMismatch on length mismatch.
Eigen::VectorXd pca_transform(const PcaModel& model, const Eigen::VectorXd& row);

Eigen::MatrixXd pca_transform_rows(const PcaModel& model,
                                   const Eigen::MatrixXd& rows);

} // namespace ccd
