#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace taskfactor {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// A real matrix with row/column labels and an explicit missing-cell mask.
///
/// Missing cells hold NaN in `values` so that accidental use poisons the
/// result instead of silently acting as zero.
struct LabeledMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Matrix values;
  Mask missing;

  LabeledMatrix() = default;
  LabeledMatrix(std::vector<std::string> rows, std::vector<std::string> cols);
  LabeledMatrix(std::vector<std::string> rows, std::vector<std::string> cols, Matrix v);

  [[nodiscard]] Eigen::Index rows() const { return values.rows(); }
  [[nodiscard]] Eigen::Index cols() const { return values.cols(); }

  [[nodiscard]] bool is_missing(Eigen::Index r, Eigen::Index c) const { return missing(r, c); }
  void set_missing(Eigen::Index r, Eigen::Index c);
  void set(Eigen::Index r, Eigen::Index c, double v);

  [[nodiscard]] bool has_missing() const;
  [[nodiscard]] std::size_t missing_count() const;

  /// Throws InputError if labels and matrix shapes disagree or labels repeat.
  void check_shape() const;

  /// Throws InputError naming `what` if any cell is missing or non-finite.
  void require_complete(const std::string& what) const;

  [[nodiscard]] Eigen::Index row_index(const std::string& label) const;
  [[nodiscard]] Eigen::Index col_index(const std::string& label) const;

  /// Rows selected by index, labels carried along.
  [[nodiscard]] LabeledMatrix select_rows(const std::vector<Eigen::Index>& idx) const;
};

} // namespace taskfactor
