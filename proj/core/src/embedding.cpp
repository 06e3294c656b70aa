#include "taskfactor/embedding.hpp"

#include "taskfactor/numkernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace taskfactor {

LabeledMatrix TaskFeatures::as_labeled() const {
  std::vector<std::string> cols;
  for (Eigen::Index d = 0; d < features.cols(); ++d) cols.push_back("dim_" + std::to_string(d + 1));
  return LabeledMatrix(task_ids, cols, features);
}

TaskFeatures svd_task_features(const LabeledMatrix& a, Eigen::Index rank, bool center) {
  a.require_complete("svd features");
  const Eigen::Index limit = std::min(a.rows(), a.cols());
  if (rank < 1 || rank > limit) {
    throw InputError("svd features: rank " + std::to_string(rank) + " outside [1, " + std::to_string(limit) + "]");
  }
  Matrix m = a.values;
  if (center) m = m.rowwise() - m.colwise().mean();

  const auto svd = num::truncated_svd(m, rank);
  TaskFeatures f;
  f.task_ids = a.col_labels;
  f.singular_values = svd.sigma;
  f.centered = center;
  f.features = svd.v * svd.sigma.cwiseSqrt().asDiagonal();
  return f;
}

TaskFeatures features_from_labeled(const LabeledMatrix& m) {
  m.require_complete("features");
  TaskFeatures f;
  f.task_ids = m.row_labels;
  f.features = m.values;
  return f;
}

SimilarityResult cosine_similarity(const TaskFeatures& features) {
  const Eigen::Index k = features.features.rows();
  SimilarityResult out{LabeledMatrix(features.task_ids, features.task_ids), {}};
  Vector norms = features.features.rowwise().norm();
  const double tiny = 1e-300;
  std::vector<bool> zero(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    zero[static_cast<std::size_t>(i)] = !(norms(i) > tiny);
    if (zero[static_cast<std::size_t>(i)]) {
      out.warnings.push_back("cosine similarity: task '" + features.task_ids[static_cast<std::size_t>(i)] +
                             "' has a zero feature vector; its similarities are undefined");
    }
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i; j < k; ++j) {
      if (zero[static_cast<std::size_t>(i)] || zero[static_cast<std::size_t>(j)]) {
        out.similarity.set_missing(i, j);
        out.similarity.set_missing(j, i);
        continue;
      }
      double s = 1.0;
      if (i != j) {
        s = features.features.row(i).dot(features.features.row(j)) / (norms(i) * norms(j));
        s = std::clamp(s, -1.0, 1.0);
      }
      out.similarity.set(i, j, s);
      out.similarity.set(j, i, s);
    }
  }
  return out;
}

std::vector<MeanSimilarity> mean_similarity_ranking(const LabeledMatrix& s) {
  if (s.rows() != s.cols()) throw InputError("mean similarity: matrix is not square");
  if (s.rows() < 2) throw InputError("mean similarity: at least 2 tasks required");
  std::vector<MeanSimilarity> out;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      if (i == j || s.missing(i, j)) continue;
      sum += s.values(i, j);
      ++count;
    }
    out.push_back({s.row_labels[static_cast<std::size_t>(i)],
                   count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN()});
  }
  std::stable_sort(out.begin(), out.end(), [](const MeanSimilarity& a, const MeanSimilarity& b) {
    const bool an = std::isnan(a.mean);
    const bool bn = std::isnan(b.mean);
    if (an != bn) return bn;
    if (!an && a.mean != b.mean) return a.mean > b.mean;
    return a.task_id < b.task_id;
  });
  return out;
}

} // namespace taskfactor
