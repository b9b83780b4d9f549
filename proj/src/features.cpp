#include "ccd/features.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "ccd/error.hpp"

namespace ccd {

namespace {

void check_combo_k(int k) {
  if (k < 1 || k > 3) {
    throw Error(Errc::InfeasibleParams,
                "combo size must be 1, 2 or 3, got " + std::to_string(k));
  }
}

} // namespace

std::string ComboKey::label() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < statements.size(); ++i) {
    if (i) out << '|';
    out << statements[i];
  }
  return out.str();
}

std::vector<ComboKey> collect_combo_columns(
    const std::vector<const ExecutionTrace*>& traces, int k) {
  check_combo_k(k);
  std::set<ComboKey> keys;
  const std::size_t window = static_cast<std::size_t>(k);
  for (const ExecutionTrace* trace : traces) {
    const auto& seq = trace->sequence;
    if (seq.size() < window) continue;
    for (std::size_t i = 0; i + window <= seq.size(); ++i) {
      keys.insert(ComboKey{{seq.begin() + static_cast<std::ptrdiff_t>(i),
                            seq.begin() + static_cast<std::ptrdiff_t>(i + window)}});
    }
  }
  return {keys.begin(), keys.end()};
}

Eigen::RowVectorXd count_row(const ExecutionTrace& trace,
                             const std::map<ComboKey, std::size_t>& index,
                             int k) {
  check_combo_k(k);
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(
      static_cast<Eigen::Index>(index.size()));
  const std::size_t window = static_cast<std::size_t>(k);
  const auto& seq = trace.sequence;
  if (seq.size() < window) return row;
  ComboKey key;
  key.statements.resize(window);
  for (std::size_t i = 0; i + window <= seq.size(); ++i) {
    std::copy(seq.begin() + static_cast<std::ptrdiff_t>(i),
              seq.begin() + static_cast<std::ptrdiff_t>(i + window),
              key.statements.begin());
    auto it = index.find(key);
    if (it != index.end()) {
      row[static_cast<Eigen::Index>(it->second)] += 1.0;
    }
  }
  return row;
}

FeatureMatrix build_features(const CoverageRun& run, int k) {
  check_combo_k(k);
  FeatureMatrix m;
  m.combo_k = k;

  std::vector<const ExecutionTrace*> traces;
  traces.reserve(run.tests.size());
  for (const TestRecord& t : run.tests) traces.push_back(&t.trace);

  m.columns = collect_combo_columns(traces, k);
  for (std::size_t i = 0; i < m.columns.size(); ++i) {
    m.column_index[m.columns[i]] = i;
  }

  m.values.resize(static_cast<Eigen::Index>(run.tests.size()),
                  static_cast<Eigen::Index>(m.columns.size()));
  for (std::size_t r = 0; r < run.tests.size(); ++r) {
    m.row_ids.push_back(run.tests[r].trace.test_id);
    m.values.row(static_cast<Eigen::Index>(r)) =
        count_row(run.tests[r].trace, m.column_index, k);
  }
  return m;
}

std::string features_csv(const FeatureMatrix& m) {
  std::ostringstream out;
  out << "test_id";
  for (const ComboKey& key : m.columns) out << ',' << key.label();
  out << '\n';
  for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
    out << m.row_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) {
      const double v = m.values(r, c);
      out << ',';
      if (v == std::floor(v) && std::abs(v) < 1e15) {
        out << static_cast<long long>(v);
      } else {
        out << v;
      }
    }
    out << '\n';
  }
  return out.str();
}

PcaModel fit_pca(const Eigen::MatrixXd& X, PcaMode mode, double fraction) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (n < 2) {
    throw Error(Errc::DegenerateInput,
                "PCA requires at least 2 rows, got " + std::to_string(n));
  }
  if (d < 1) {
    throw Error(Errc::EmptyMatrix, "PCA on a zero-column matrix");
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(Errc::InfeasibleParams,
                "PCA fraction must be in (0,1], got " +
                    std::to_string(fraction));
  }

  PcaModel model;
  model.mode = mode;
  model.fraction = fraction;
  model.mean = X.colwise().mean();

  Eigen::MatrixXd centered = X.rowwise() - model.mean.transpose();
  Eigen::MatrixXd covariance =
      (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
  if (solver.info() != Eigen::Success) {
    throw Error(Errc::DegenerateInput, "eigendecomposition failed");
  }

  // Eigen returns ascending eigenvalues; flip to descending and clamp the
  // tiny negatives that come out of symmetric solvers.
  Eigen::VectorXd eigenvalues(d);
  Eigen::MatrixXd directions(d, d); // row i = i-th principal direction
  for (Eigen::Index i = 0; i < d; ++i) {
    eigenvalues[i] = std::max(0.0, solver.eigenvalues()[d - 1 - i]);
    directions.row(i) = solver.eigenvectors().col(d - 1 - i).transpose();
    // Canonical sign: largest-magnitude coordinate positive.
    Eigen::Index max_at = 0;
    directions.row(i).cwiseAbs().maxCoeff(&max_at);
    if (directions(i, max_at) < 0.0) directions.row(i) = -directions.row(i);
  }

  model.total_variance = eigenvalues.sum();

  Eigen::Index retained = 0;
  if (mode == PcaMode::DimensionFraction) {
    retained = static_cast<Eigen::Index>(
        std::ceil(fraction * static_cast<double>(d)));
  } else if (model.total_variance <= 0.0) {
    retained = 1; // zero variance: keep a single (arbitrary) direction
  } else {
    double cumulative = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      cumulative += eigenvalues[i];
      if (cumulative >= fraction * model.total_variance) {
        retained = i + 1;
        break;
      }
    }
    if (retained == 0) retained = d; // numeric slack at fraction ~ 1
  }
  retained = std::clamp<Eigen::Index>(retained, 1, d);

  model.components = directions.topRows(retained);
  model.explained_variance = eigenvalues.head(retained);
  return model;
}

Eigen::VectorXd pca_transform(const PcaModel& model,
                              const Eigen::VectorXd& row) {
  if (row.size() != model.input_dimension()) {
    throw Error(Errc::DimensionMismatch,
                "PCA transform expects dimension " +
                    std::to_string(model.input_dimension()) + ", got " +
                    std::to_string(row.size()));
  }
  return model.components * (row - model.mean);
}

Eigen::MatrixXd pca_transform_rows(const PcaModel& model,
                                   const Eigen::MatrixXd& rows) {
  if (rows.cols() != model.input_dimension()) {
    throw Error(Errc::DimensionMismatch,
                "PCA transform expects dimension " +
                    std::to_string(model.input_dimension()) + ", got " +
                    std::to_string(rows.cols()));
  }
  return (rows.rowwise() - model.mean.transpose()) *
         model.components.transpose();
}

} // namespace ccd
