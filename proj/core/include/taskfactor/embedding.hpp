#pragma once

#include "taskfactor/error.hpp"
#include "taskfactor/labeled_matrix.hpp"

#include <string>
#include <utility>
#include <vector>

namespace taskfactor {

/// Target-task features: row j is V_j diag(sqrt(sigma)) of the truncated SVD.
struct TaskFeatures {
  std::vector<std::string> task_ids;
  Matrix features; ///< K x D
  Vector singular_values;
  bool centered = false;

  [[nodiscard]] Eigen::Index rank() const { return features.cols(); }
  [[nodiscard]] LabeledMatrix as_labeled() const;
};

inline constexpr Eigen::Index kDefaultEmbeddingRank = 8;

/// `a` is observations (model/source rows) x targets; it must be complete.
/// With `center`, column means are removed before the decomposition.
TaskFeatures svd_task_features(const LabeledMatrix& a, Eigen::Index rank = kDefaultEmbeddingRank,
                               bool center = false);

TaskFeatures features_from_labeled(const LabeledMatrix& m);

struct SimilarityResult {
  LabeledMatrix similarity;
  Warnings warnings;
};

/// Pairwise cosine similarity of feature rows. Rows with zero norm get
/// missing similarities (including their diagonal).
SimilarityResult cosine_similarity(const TaskFeatures& features);

struct MeanSimilarity {
  std::string task_id;
  double mean;
};

/// Mean off-diagonal similarity per task, descending (ties by id). Missing
/// entries are skipped.
std::vector<MeanSimilarity> mean_similarity_ranking(const LabeledMatrix& similarity);

} // namespace taskfactor
