#include "taskfactor/labeled_matrix.hpp"

#include "taskfactor/error.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace taskfactor {

LabeledMatrix::LabeledMatrix(std::vector<std::string> rows, std::vector<std::string> cols)
    : row_labels(std::move(rows)), col_labels(std::move(cols)) {
  const auto r = static_cast<Eigen::Index>(row_labels.size());
  const auto c = static_cast<Eigen::Index>(col_labels.size());
  values = Matrix::Zero(r, c);
  missing = Mask::Constant(r, c, false);
}

LabeledMatrix::LabeledMatrix(std::vector<std::string> rows, std::vector<std::string> cols, Matrix v)
    : row_labels(std::move(rows)), col_labels(std::move(cols)), values(std::move(v)) {
  missing = Mask::Constant(values.rows(), values.cols(), false);
  check_shape();
}

void LabeledMatrix::set_missing(Eigen::Index r, Eigen::Index c) {
  values(r, c) = std::numeric_limits<double>::quiet_NaN();
  missing(r, c) = true;
}

void LabeledMatrix::set(Eigen::Index r, Eigen::Index c, double v) {
  values(r, c) = v;
  missing(r, c) = false;
}

bool LabeledMatrix::has_missing() const { return missing.size() > 0 && missing.any(); }

std::size_t LabeledMatrix::missing_count() const {
  return missing.size() == 0 ? 0 : static_cast<std::size_t>(missing.count());
}

void LabeledMatrix::check_shape() const {
  if (static_cast<Eigen::Index>(row_labels.size()) != values.rows() ||
      static_cast<Eigen::Index>(col_labels.size()) != values.cols()) {
    throw InputError("label counts do not match matrix dimensions");
  }
  if (missing.rows() != values.rows() || missing.cols() != values.cols()) {
    throw InputError("missing mask does not match matrix dimensions");
  }
  std::set<std::string> seen;
  for (const auto& l : row_labels) {
    if (!seen.insert(l).second) throw InputError("duplicate row label '" + l + "'");
  }
  seen.clear();
  for (const auto& l : col_labels) {
    if (!seen.insert(l).second) throw InputError("duplicate column label '" + l + "'");
  }
}

void LabeledMatrix::require_complete(const std::string& what) const {
  for (Eigen::Index r = 0; r < rows(); ++r) {
    for (Eigen::Index c = 0; c < cols(); ++c) {
      if (missing(r, c)) {
        throw InputError(what + ": missing cell at (" + row_labels[static_cast<std::size_t>(r)] + ", " +
                         col_labels[static_cast<std::size_t>(c)] + ")");
      }
      if (!std::isfinite(values(r, c))) {
        throw InputError(what + ": non-finite cell at (" + row_labels[static_cast<std::size_t>(r)] + ", " +
                         col_labels[static_cast<std::size_t>(c)] + ")");
      }
    }
  }
}

Eigen::Index LabeledMatrix::row_index(const std::string& label) const {
  for (std::size_t i = 0; i < row_labels.size(); ++i) {
    if (row_labels[i] == label) return static_cast<Eigen::Index>(i);
  }
  throw InputError("unknown row label '" + label + "'");
}

Eigen::Index LabeledMatrix::col_index(const std::string& label) const {
  for (std::size_t i = 0; i < col_labels.size(); ++i) {
    if (col_labels[i] == label) return static_cast<Eigen::Index>(i);
  }
  throw InputError("unknown column label '" + label + "'");
}

LabeledMatrix LabeledMatrix::select_rows(const std::vector<Eigen::Index>& idx) const {
  LabeledMatrix out;
  out.col_labels = col_labels;
  out.values.resize(static_cast<Eigen::Index>(idx.size()), cols());
  out.missing.resize(static_cast<Eigen::Index>(idx.size()), cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.row_labels.push_back(row_labels[static_cast<std::size_t>(idx[i])]);
    out.values.row(r) = values.row(idx[i]);
    out.missing.row(r) = missing.row(idx[i]);
  }
  return out;
}

} // namespace taskfactor
